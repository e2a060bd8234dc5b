//! Pairwise registration: features -> correlation surface -> candidates.

use std::sync::OnceLock;

use log::{debug, info};
use rayon::prelude::*;

use crate::error::{Result, StitchError};
use crate::geometry::{Rect, Vec2};
use crate::graph::{AlignmentMultigraph, CandidateTransform, EdgeBundle, TileNode};
use crate::image::GrayImage;

use super::candidates::{extract_candidates, CandidateParams};
use super::correlation::correlation_surface;
use super::features::{harris_response, select_features, FeatureParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegistrationParams {
    pub features: FeatureParams,
    pub search_radius: usize,
    pub candidates: CandidateParams,
    /// Minimum overlap along the short side of the nominal intersection.
    pub min_overlap_px: f64,
    /// Also pair tiles that only touch at a corner.
    pub include_diagonal: bool,
}

impl Default for RegistrationParams {
    fn default() -> Self {
        Self {
            features: FeatureParams::default(),
            search_radius: 32,
            candidates: CandidateParams::default(),
            min_overlap_px: 16.0,
            include_diagonal: false,
        }
    }
}

/// Candidate translations of tile B relative to tile A, searched around the
/// nominal relative position `delta0 = nominal_b - nominal_a`.
pub fn pair_candidates(
    img_a: &GrayImage,
    img_b: &GrayImage,
    delta0: Vec2,
    params: &RegistrationParams,
) -> Result<Vec<CandidateTransform>> {
    let response = harris_response(
        img_a,
        params.features.block_radius,
        params.features.harris_k,
    );
    pair_candidates_with_response(img_a, &response, img_b, delta0, params)
}

fn pair_candidates_with_response(
    img_a: &GrayImage,
    response_a: &[f64],
    img_b: &GrayImage,
    delta0: Vec2,
    params: &RegistrationParams,
) -> Result<Vec<CandidateTransform>> {
    let origin = delta0.round();
    let r = params.features.window_radius as f64;
    // Features must sit where the B window fits at the search center.
    let x0 = origin.x.max(0.0) + r;
    let y0 = origin.y.max(0.0) + r;
    let x1 = (origin.x + img_b.width() as f64).min(img_a.width() as f64) - r;
    let y1 = (origin.y + img_b.height() as f64).min(img_a.height() as f64) - r;
    if x1 <= x0 || y1 <= y0 {
        return Err(StitchError::NoOverlap);
    }
    let roi = (x0 as usize, y0 as usize, x1 as usize, y1 as usize);
    let features = select_features(
        response_a,
        img_a.width(),
        img_a.height(),
        Some(roi),
        &params.features,
    );
    let surface = correlation_surface(img_a, img_b, &features, delta0, params.search_radius)?;
    Ok(extract_candidates(&surface, &params.candidates))
}

/// Registers two tiles and returns a bundle oriented from the lower id, or
/// `None` when registration produced no candidate.
pub fn register_pair(
    tile_a: &TileNode,
    img_a: &GrayImage,
    tile_b: &TileNode,
    img_b: &GrayImage,
    params: &RegistrationParams,
) -> Option<EdgeBundle> {
    let (lo, img_lo, hi, img_hi) = if tile_a.id < tile_b.id {
        (tile_a, img_a, tile_b, img_b)
    } else {
        (tile_b, img_b, tile_a, img_a)
    };
    let delta0 = hi.nominal_offset - lo.nominal_offset;
    bundle_from(
        lo.id,
        hi.id,
        pair_candidates(img_lo, img_hi, delta0, params),
    )
}

fn bundle_from(i: usize, j: usize, result: Result<Vec<CandidateTransform>>) -> Option<EdgeBundle> {
    match result {
        Ok(cands) if cands.is_empty() => {
            debug!("pair ({i}, {j}): no candidate above threshold");
            None
        }
        Ok(cands) => {
            let mut b = EdgeBundle::new(i, j, cands);
            b.set_uniform_weights();
            Some(b)
        }
        Err(e) => {
            debug!("pair ({i}, {j}): no bundle ({e})");
            None
        }
    }
}

/// Pairs `(i, j)`, `i < j`, whose nominal rectangles overlap by at least
/// `min_overlap` along the short side of the intersection. Unless
/// `include_diagonal` is set, the long side must also cover at least half of
/// the smaller tile's extent along that axis, which excludes corner-only contact.
pub fn overlapping_pairs(
    nodes: &[TileNode],
    sizes: &[(usize, usize)],
    min_overlap: f64,
    include_diagonal: bool,
) -> Vec<(usize, usize)> {
    let rects: Vec<Rect> = nodes
        .iter()
        .zip(sizes)
        .map(|(n, &(w, h))| Rect::from_origin_size(n.nominal_offset, w as f64, h as f64))
        .collect();
    let mut pairs = Vec::new();
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            let inter = rects[i].intersect(&rects[j]);
            if inter.is_empty() {
                continue;
            }
            let (iw, ih) = (inter.width(), inter.height());
            if iw.min(ih) < min_overlap {
                continue;
            }
            if !include_diagonal {
                let min_w = rects[i].width().min(rects[j].width());
                let min_h = rects[i].height().min(rects[j].height());
                if iw < 0.5 * min_w && ih < 0.5 * min_h {
                    continue;
                }
            }
            pairs.push((i, j));
        }
    }
    pairs
}

/// Registers every overlapping pair and assembles the multigraph.
///
/// `threads = 0` uses the global rayon pool; `1` runs sequentially.
pub fn register_tiles(
    nodes: &[TileNode],
    images: &[GrayImage],
    params: &RegistrationParams,
    tau: f64,
    threads: usize,
) -> Result<AlignmentMultigraph> {
    if nodes.len() != images.len() {
        return Err(StitchError::TileMismatch(format!(
            "{} nodes but {} images",
            nodes.len(),
            images.len()
        )));
    }
    let sizes: Vec<(usize, usize)> = images.iter().map(|im| (im.width(), im.height())).collect();
    let pairs = overlapping_pairs(
        nodes,
        &sizes,
        params.min_overlap_px,
        params.include_diagonal,
    );
    if pairs.is_empty() {
        return Err(StitchError::NoOverlappingPairs);
    }

    let responses: Vec<OnceLock<Vec<f64>>> = (0..images.len()).map(|_| OnceLock::new()).collect();
    let register = |&(i, j): &(usize, usize)| -> Option<EdgeBundle> {
        let response = responses[i].get_or_init(|| {
            harris_response(
                &images[i],
                params.features.block_radius,
                params.features.harris_k,
            )
        });
        let delta0 = nodes[j].nominal_offset - nodes[i].nominal_offset;
        let result =
            pair_candidates_with_response(&images[i], response, &images[j], delta0, params);
        let bundle = bundle_from(i, j, result);
        info!(
            "pair ({i}, {j}): {} candidate(s)",
            bundle.as_ref().map_or(0, |b| b.candidates.len())
        );
        bundle
    };

    let bundles: Vec<Option<EdgeBundle>> = match threads {
        1 => pairs.iter().map(register).collect(),
        0 => pairs.par_iter().map(register).collect(),
        n => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| StitchError::Config(format!("thread pool: {e}")))?
            .install(|| pairs.par_iter().map(register).collect()),
    };

    let mut graph = AlignmentMultigraph::new(nodes.to_vec(), tau)?;
    for b in bundles.into_iter().flatten() {
        graph.add_bundle(b)?;
    }
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::ImageRef;

    fn node(id: usize, x: f64, y: f64) -> TileNode {
        TileNode::new(id, ImageRef::Memory(id), Vec2::new(x, y))
    }

    #[test]
    fn grid_pairs_are_four_neighbour() {
        let mut nodes = Vec::new();
        for r in 0..3 {
            for c in 0..3 {
                nodes.push(node(nodes.len(), c as f64 * 208.0, r as f64 * 208.0));
            }
        }
        let sizes = vec![(256, 256); 9];
        assert_eq!(overlapping_pairs(&nodes, &sizes, 16.0, false).len(), 12);
        assert_eq!(overlapping_pairs(&nodes, &sizes, 16.0, true).len(), 20);
        assert_eq!(overlapping_pairs(&nodes, &sizes, 64.0, false).len(), 0);
    }

    #[test]
    fn disjoint_tiles_have_no_pairs() {
        let nodes = vec![node(0, 0.0, 0.0), node(1, 1000.0, 0.0)];
        assert!(overlapping_pairs(&nodes, &[(100, 100); 2], 1.0, false).is_empty());
        let imgs = vec![GrayImage::new(100, 100), GrayImage::new(100, 100)];
        assert!(matches!(
            register_tiles(&nodes, &imgs, &RegistrationParams::default(), 5.0, 1),
            Err(StitchError::NoOverlappingPairs)
        ));
    }
}
