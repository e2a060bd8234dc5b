use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, StitchError};
use crate::geometry::Vec2;
use crate::graph::{ImageRef, TileNode};
use crate::image::GrayImage;

/// Tile manifest: image paths with their nominal stage positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileManifest {
    pub tiles: Vec<ManifestTile>,
    #[serde(default = "default_min_overlap")]
    pub min_overlap_px: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestTile {
    pub id: usize,
    pub path: String,
    pub nominal_offset: Vec2,
}

fn default_min_overlap() -> i64 {
    16
}

impl TileManifest {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| StitchError::io(path, e))?;
        let mut manifest: TileManifest = serde_json::from_str(&text)?;
        manifest.tiles.sort_by_key(|t| t.id);
        for (idx, t) in manifest.tiles.iter().enumerate() {
            if t.id != idx {
                return Err(StitchError::Schema(format!(
                    "tile ids must be contiguous from 0; found id {} at position {idx}",
                    t.id
                )));
            }
            if !t.nominal_offset.is_finite() {
                return Err(StitchError::Schema(format!(
                    "tile {} has a non-finite nominal offset",
                    t.id
                )));
            }
        }
        Ok(manifest)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text).map_err(|e| StitchError::io(path, e))
    }

    pub fn nodes(&self) -> Vec<TileNode> {
        self.tiles
            .iter()
            .map(|t| TileNode::new(t.id, ImageRef::Path(t.path.clone()), t.nominal_offset))
            .collect()
    }

    /// Tile image paths, relative entries resolved against `base_dir`.
    pub fn resolved_paths(&self, base_dir: &Path) -> Vec<PathBuf> {
        self.tiles
            .iter()
            .map(|t| {
                let p = Path::new(&t.path);
                if p.is_absolute() {
                    p.to_path_buf()
                } else {
                    base_dir.join(p)
                }
            })
            .collect()
    }

    pub fn load_images(&self, base_dir: &Path) -> Result<Vec<GrayImage>> {
        self.resolved_paths(base_dir)
            .iter()
            .map(GrayImage::load)
            .collect()
    }
}
