//! Composite rendering of tiles placed at (possibly fractional) offsets.

use serde::{Deserialize, Serialize};

use crate::error::{Result, StitchError};
use crate::geometry::Vec2;
use crate::image::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Blend {
    /// Higher tile ids paint over lower ones.
    Overwrite,
    /// Weighted average with weights ramping up over `margin` px from each tile border.
    Feather { margin: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeLayout {
    pub width: usize,
    pub height: usize,
    /// World position of canvas pixel (0, 0).
    pub origin: Vec2,
    /// Tile offsets relative to the canvas origin.
    pub placements: Vec<Vec2>,
    pub blend: Blend,
}

impl CompositeLayout {
    /// Canvas = integer bounding box of all placed tiles.
    pub fn new(sizes: &[(usize, usize)], offsets: &[Vec2], blend: Blend) -> Result<Self> {
        if offsets.len() < sizes.len() {
            return Err(StitchError::MissingOffset(offsets.len()));
        }
        if let Some(bad) = offsets[..sizes.len()].iter().position(|o| !o.is_finite()) {
            return Err(StitchError::MissingOffset(bad));
        }
        if let Blend::Feather { margin } = blend {
            if margin.is_nan() || margin < 0.0 {
                return Err(StitchError::Config("feather margin must be >= 0".into()));
            }
        }
        if sizes.is_empty() {
            return Ok(Self {
                width: 0,
                height: 0,
                origin: Vec2::ZERO,
                placements: Vec::new(),
                blend,
            });
        }
        let (mut x0, mut y0) = (f64::INFINITY, f64::INFINITY);
        let (mut x1, mut y1) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (&(w, h), o) in sizes.iter().zip(offsets) {
            x0 = x0.min(o.x);
            y0 = y0.min(o.y);
            x1 = x1.max(o.x + w as f64);
            y1 = y1.max(o.y + h as f64);
        }
        let origin = Vec2::new(x0.floor(), y0.floor());
        Ok(Self {
            width: (x1.ceil() - origin.x) as usize,
            height: (y1.ceil() - origin.y) as usize,
            placements: offsets[..sizes.len()].iter().map(|o| *o - origin).collect(),
            origin,
            blend,
        })
    }
}

fn feather_weight(lx: f64, ly: f64, w: usize, h: usize, margin: f64) -> f64 {
    let d = lx
        .min(ly)
        .min(w as f64 - 1.0 - lx)
        .min(h as f64 - 1.0 - ly)
        .max(0.0);
    if margin <= 0.0 {
        1.0
    } else {
        ((d + 1.0) / (margin + 1.0)).min(1.0)
    }
}

/// Renders `tiles` at `offsets`. Uncovered canvas pixels are 0.
pub fn render(
    tiles: &[GrayImage],
    offsets: &[Vec2],
    blend: Blend,
) -> Result<(GrayImage, CompositeLayout)> {
    let sizes: Vec<(usize, usize)> = tiles.iter().map(|t| (t.width(), t.height())).collect();
    let layout = CompositeLayout::new(&sizes, offsets, blend)?;
    let mut acc = vec![0.0; layout.width * layout.height];
    let mut wsum = vec![0.0; layout.width * layout.height];
    for (tile, p) in tiles.iter().zip(&layout.placements) {
        let cx0 = p.x.floor().max(0.0) as usize;
        let cy0 = p.y.floor().max(0.0) as usize;
        let cx1 = ((p.x + tile.width() as f64).ceil() as usize).min(layout.width);
        let cy1 = ((p.y + tile.height() as f64).ceil() as usize).min(layout.height);
        for y in cy0..cy1 {
            for x in cx0..cx1 {
                let (lx, ly) = (x as f64 - p.x, y as f64 - p.y);
                let Some(v) = tile.sample_bilinear(lx, ly) else {
                    continue;
                };
                let idx = y * layout.width + x;
                match blend {
                    Blend::Overwrite => {
                        acc[idx] = v;
                        wsum[idx] = 1.0;
                    }
                    Blend::Feather { margin } => {
                        let wt = feather_weight(lx, ly, tile.width(), tile.height(), margin);
                        acc[idx] += wt * v;
                        wsum[idx] += wt;
                    }
                }
            }
        }
    }
    let data = acc
        .iter()
        .zip(&wsum)
        .map(|(a, w)| if *w > 0.0 { a / w } else { 0.0 })
        .collect();
    let img = GrayImage::from_vec(layout.width, layout.height, data)?;
    Ok((img, layout))
}
