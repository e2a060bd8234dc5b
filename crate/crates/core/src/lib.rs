//! Tile stitching with multiple registration candidates per tile pair.
//!
//! Each overlapping pair of tiles is registered by feature-windowed normalized
//! cross-correlation, keeping every strong correlation peak as a candidate
//! translation. Candidates and a per-pair "none of these" dummy hypothesis form
//! a weighted multigraph; offsets and weights are then solved jointly so that
//! only candidates consistent around cycles keep their weight. The winning
//! candidates are pruned to a simple graph and aligned by weighted least squares.

pub mod align;
pub mod bench;
pub mod error;
pub mod geometry;
pub mod graph;
pub mod image;
pub mod registration;
pub mod render;
pub mod solver;
pub mod sparse;

pub use error::{ErrorKind, Result, StitchError};
pub use geometry::{Rect, Vec2};
pub use graph::{AlignmentMultigraph, CandidateTransform, EdgeBundle, ImageRef, TileNode};
pub use image::GrayImage;
