use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, StitchError};
use crate::geometry::{Rect, Vec2};
use crate::graph::{ImageRef, TileNode};
use crate::image::GrayImage;
use crate::registration::manifest::{ManifestTile, TileManifest};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RegionKind {
    /// Reset to the background level.
    Blank,
    /// Grid lines of width `period / 5` (at least 1 px) repeating every `period` px.
    Periodic { period: usize, contrast: f64 },
    /// Smooth noise on a `scale` px lattice thresholded so that `density` of the
    /// region is covered by blobs raised by `contrast`.
    BlobNoise {
        density: f64,
        contrast: f64,
        scale: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub kind: RegionKind,
    /// Pixel bounds; regions are painted in order.
    pub bounds: Rect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub background: f64,
    pub regions: Vec<Region>,
    pub seed: u64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let canvas = Rect::new(0.0, 0.0, self.width as f64, self.height as f64);
        for (idx, r) in self.regions.iter().enumerate() {
            if !canvas.contains_rect(&r.bounds) || r.bounds.is_empty() {
                return Err(StitchError::Config(format!(
                    "region {idx} is empty or outside the canvas"
                )));
            }
            match r.kind {
                RegionKind::Periodic { period, .. } if period < 4 => {
                    return Err(StitchError::Config(format!(
                        "region {idx}: period must be >= 4 px"
                    )));
                }
                RegionKind::BlobNoise { density, scale, .. }
                    if !(density > 0.0 && density < 1.0 && scale >= 1.0) =>
                {
                    return Err(StitchError::Config(format!(
                        "region {idx}: blob density must be in (0, 1) and scale >= 1"
                    )));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

fn pixel_range(r: &Rect) -> (usize, usize, usize, usize) {
    (
        r.x0.round() as usize,
        r.y0.round() as usize,
        r.x1.round() as usize,
        r.y1.round() as usize,
    )
}

fn paint_blobs(
    img: &mut GrayImage,
    r: &Rect,
    density: f64,
    contrast: f64,
    scale: f64,
    rng: &mut ChaCha8Rng,
) {
    let (x0, y0, x1, y1) = pixel_range(r);
    let (w, h) = (x1 - x0, y1 - y0);
    let gw = (w as f64 / scale).ceil() as usize + 2;
    let gh = (h as f64 / scale).ceil() as usize + 2;
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let coarse = GrayImage::from_vec(gw, gh, (0..gw * gh).map(|_| normal.sample(rng)).collect())
        .expect("lattice size");
    let field: Vec<f64> = (0..w * h)
        .map(|idx| {
            let (x, y) = ((idx % w) as f64 / scale, (idx / w) as f64 / scale);
            coarse.sample_bilinear(x, y).expect("lattice covers region")
        })
        .collect();
    let mut sorted = field.clone();
    sorted.sort_by(f64::total_cmp);
    let cut = sorted[((1.0 - density) * (sorted.len() - 1) as f64).round() as usize];
    for y in 0..h {
        for x in 0..w {
            let v = if field[y * w + x] > cut {
                contrast
            } else {
                0.0
            };
            img.set(x0 + x, y0 + y, v);
        }
    }
}

/// Renders the scene; deterministic for a fixed seed.
pub fn generate_scene(spec: &SceneSpec) -> Result<GrayImage> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut img = GrayImage::filled(spec.width, spec.height, 0.0);
    for region in &spec.regions {
        let (x0, y0, x1, y1) = pixel_range(&region.bounds);
        match region.kind {
            RegionKind::Blank => {
                for y in y0..y1 {
                    for x in x0..x1 {
                        img.set(x, y, 0.0);
                    }
                }
            }
            RegionKind::Periodic { period, contrast } => {
                let line = (period / 5).max(1);
                for y in y0..y1 {
                    for x in x0..x1 {
                        let on = (x - x0) % period < line || (y - y0) % period < line;
                        img.set(x, y, if on { contrast } else { 0.0 });
                    }
                }
            }
            RegionKind::BlobNoise {
                density,
                contrast,
                scale,
            } => {
                paint_blobs(&mut img, &region.bounds, density, contrast, scale, &mut rng);
            }
        }
    }
    for v in img.data_mut() {
        *v += spec.background;
    }
    Ok(img)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TileGrid {
    pub rows: usize,
    pub cols: usize,
    pub tile_size: usize,
    pub overlap: usize,
    /// Stage origin of tile (0, 0) in scene pixels.
    pub margin: f64,
    pub jitter_sigma: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl TileGrid {
    pub fn step(&self) -> usize {
        self.tile_size - self.overlap
    }

    /// Scene extent needed for the nominal grid plus `margin` on every side.
    pub fn scene_size(&self) -> (usize, usize) {
        let m = 2.0 * self.margin;
        (
            (m + ((self.cols - 1) * self.step() + self.tile_size) as f64).ceil() as usize,
            (m + ((self.rows - 1) * self.step() + self.tile_size) as f64).ceil() as usize,
        )
    }

    /// Row-major nominal offsets.
    pub fn nominal_offsets(&self) -> Vec<Vec2> {
        let step = self.step() as f64;
        (0..self.rows * self.cols)
            .map(|id| {
                let (r, c) = (id / self.cols, id % self.cols);
                Vec2::new(self.margin + c as f64 * step, self.margin + r as f64 * step)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub true_offsets: Vec<Vec2>,
    pub rows: usize,
    pub cols: usize,
    pub tile_size: usize,
    pub overlap: usize,
    pub jitter_sigma: f64,
    pub noise_sigma: f64,
}

/// Tiles cut from a scene: in-memory images with their manifest.
#[derive(Debug, Clone)]
pub struct TileSet {
    pub images: Vec<GrayImage>,
    pub manifest: TileManifest,
}

impl TileSet {
    pub fn nodes(&self) -> Vec<TileNode> {
        self.manifest
            .tiles
            .iter()
            .map(|t| TileNode::new(t.id, ImageRef::Memory(t.id), t.nominal_offset))
            .collect()
    }
}

/// Cuts a jittered tile grid out of `scene`. Nominal offsets are the regular
/// grid; true offsets add Gaussian jitter and are withheld from the manifest.
pub fn cut_tiles(
    scene: &GrayImage,
    grid: &TileGrid,
    min_overlap_px: i64,
) -> Result<(TileSet, GroundTruth)> {
    if grid.rows == 0 || grid.cols == 0 || grid.overlap >= grid.tile_size {
        return Err(StitchError::Config(
            "tile grid needs rows, cols >= 1 and overlap < tile size".into(),
        ));
    }
    if grid.overlap < 32 {
        warn!(
            "overlap {} px is below twice the default window radius",
            grid.overlap
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(grid.seed);
    let jitter = Normal::new(0.0, grid.jitter_sigma.max(0.0))
        .map_err(|e| StitchError::Config(e.to_string()))?;
    let noise = Normal::new(0.0, grid.noise_sigma.max(0.0))
        .map_err(|e| StitchError::Config(e.to_string()))?;
    let nominal = grid.nominal_offsets();
    let truth: Vec<Vec2> = nominal
        .iter()
        .map(|n| {
            if grid.jitter_sigma > 0.0 {
                *n + Vec2::new(jitter.sample(&mut rng), jitter.sample(&mut rng))
            } else {
                *n
            }
        })
        .collect();
    let size = grid.tile_size as f64;
    let scene_rect = Rect::new(
        0.0,
        0.0,
        (scene.width() - 1) as f64 + 1e-9,
        (scene.height() - 1) as f64 + 1e-9,
    );
    let mut images = Vec::with_capacity(truth.len());
    for (id, t) in truth.iter().enumerate() {
        let needed = Rect::new(t.x, t.y, t.x + size - 1.0, t.y + size - 1.0);
        if !scene_rect.contains_rect(&needed) {
            return Err(StitchError::Config(format!("tile {id} exceeds the scene")));
        }
        let mut img = GrayImage::from_fn(grid.tile_size, grid.tile_size, |x, y| {
            scene
                .sample_bilinear(t.x + x as f64, t.y + y as f64)
                .expect("tile inside scene")
        });
        if grid.noise_sigma > 0.0 {
            for v in img.data_mut() {
                *v += noise.sample(&mut rng);
            }
        }
        images.push(img);
    }
    let manifest = TileManifest {
        tiles: nominal
            .iter()
            .enumerate()
            .map(|(id, n)| ManifestTile {
                id,
                path: format!("tile_{id:03}.png"),
                nominal_offset: *n,
            })
            .collect(),
        min_overlap_px,
    };
    let gt = GroundTruth {
        true_offsets: truth,
        rows: grid.rows,
        cols: grid.cols,
        tile_size: grid.tile_size,
        overlap: grid.overlap,
        jitter_sigma: grid.jitter_sigma,
        noise_sigma: grid.noise_sigma,
    };
    Ok((TileSet { images, manifest }, gt))
}
