//! Pairwise registration producing multiple translation candidates per tile pair.

pub mod candidates;
pub mod correlation;
pub mod features;
pub mod manifest;
pub mod pair;
pub mod ransac;

pub use candidates::{extract_candidates, CandidateParams};
pub use correlation::{correlation_surface, CorrelationSurface};
pub use features::{detect_features, detect_features_in, FeatureParams, FeatureSet, Pixel};
pub use manifest::{ManifestTile, TileManifest};
pub use pair::{
    overlapping_pairs, pair_candidates, register_pair, register_tiles, RegistrationParams,
};
pub use ransac::{sequential_ransac, Correspondence};
