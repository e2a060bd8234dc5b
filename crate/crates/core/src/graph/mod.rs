//! The alignment multigraph: tiles as nodes, and per tile pair a bundle of
//! candidate translations plus one dummy hypothesis.
//!
//! Offsets are tile positions in the composite frame. A candidate `delta` on
//! bundle `(i, j)` predicts `offset_j = offset_i + delta`; the residual of a
//! candidate is therefore `delta + offset_i - offset_j`.

mod constraint;
mod json;

use std::collections::HashSet;

pub use constraint::{ConstraintMatrix, NullSpaceBasis};
pub use json::{read_graph, write_graph, GraphDocument};

use crate::error::{Result, StitchError};
use crate::geometry::Vec2;

/// Tolerance on the per-bundle weight sum for in-memory graphs.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;
/// Looser tolerance applied to weights parsed from text.
pub const WEIGHT_SUM_TOL_TEXT: f64 = 1e-6;

/// Where a tile's pixels come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ImageRef {
    Path(String),
    /// Index into a caller-owned image list (synthetic scenes, tests).
    Memory(usize),
}

impl ImageRef {
    pub fn label(&self) -> String {
        match self {
            ImageRef::Path(p) => p.clone(),
            ImageRef::Memory(idx) => format!("mem:{idx}"),
        }
    }

    pub fn parse(label: &str) -> Self {
        match label.strip_prefix("mem:").and_then(|s| s.parse().ok()) {
            Some(idx) => ImageRef::Memory(idx),
            None => ImageRef::Path(label.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TileNode {
    pub id: usize,
    pub image: ImageRef,
    pub nominal_offset: Vec2,
    pub solved_offset: Option<Vec2>,
}

impl TileNode {
    pub fn new(id: usize, image: ImageRef, nominal_offset: Vec2) -> Self {
        Self {
            id,
            image,
            nominal_offset,
            solved_offset: None,
        }
    }
}

/// One translation hypothesis between a tile pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateTransform {
    pub delta: Vec2,
    /// Peak correlation (or inlier fraction for consensus candidates).
    pub score: f64,
    /// Number of feature points backing the candidate.
    pub support: usize,
}

impl CandidateTransform {
    pub fn new(delta: Vec2, score: f64, support: usize) -> Self {
        Self {
            delta,
            score,
            support,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.delta.is_finite() {
            return Err(StitchError::InvalidCandidate("non-finite delta".into()));
        }
        if !(-1.0..=1.0).contains(&self.score) {
            return Err(StitchError::InvalidCandidate(format!(
                "score {} outside [-1, 1]",
                self.score
            )));
        }
        if self.support == 0 {
            return Err(StitchError::InvalidCandidate("support must be >= 1".into()));
        }
        Ok(())
    }
}

/// All hypotheses for one unordered tile pair. `weights[0]` is the dummy.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeBundle {
    pub i: usize,
    pub j: usize,
    pub candidates: Vec<CandidateTransform>,
    /// Empty until the bundle is inserted into a graph (then uniform) or set explicitly.
    pub weights: Vec<f64>,
}

impl EdgeBundle {
    pub fn new(i: usize, j: usize, candidates: Vec<CandidateTransform>) -> Self {
        Self {
            i,
            j,
            candidates,
            weights: Vec::new(),
        }
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Self {
        self.weights = weights;
        self
    }

    /// Number of weights, candidates plus the dummy.
    pub fn len(&self) -> usize {
        self.candidates.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn set_uniform_weights(&mut self) {
        let n = self.len();
        self.weights = vec![1.0 / n as f64; n];
    }

    /// Index of the winning weight: ties go to the dummy, then the lowest candidate.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (k, &w) in self.weights.iter().enumerate().skip(1) {
            if w > self.weights[best] {
                best = k;
            }
        }
        best
    }

    fn validate_weights(&self, tol: f64) -> Result<()> {
        let bad = |reason: String| StitchError::InvalidWeights {
            i: self.i,
            j: self.j,
            reason,
        };
        if self.weights.len() != self.len() {
            return Err(bad(format!(
                "expected {} weights, found {}",
                self.len(),
                self.weights.len()
            )));
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(bad("non-finite weight".into()));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > tol {
            return Err(bad(format!("weights sum to {sum}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentMultigraph {
    pub nodes: Vec<TileNode>,
    pub bundles: Vec<EdgeBundle>,
    pub tau: f64,
    /// Set once the weights have been produced by the solver.
    pub solved: bool,
}

impl AlignmentMultigraph {
    pub fn new(nodes: Vec<TileNode>, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(StitchError::Config(format!(
                "tau must be positive, got {tau}"
            )));
        }
        for (idx, node) in nodes.iter().enumerate() {
            if node.id != idx {
                return Err(StitchError::Schema(format!(
                    "node ids must be contiguous from 0; position {idx} has id {}",
                    node.id
                )));
            }
            if !node.nominal_offset.is_finite() {
                return Err(StitchError::Schema(format!(
                    "node {idx} has a non-finite nominal offset"
                )));
            }
        }
        Ok(Self {
            nodes,
            bundles: Vec::new(),
            tau,
            solved: false,
        })
    }

    /// Inserts a bundle, giving it uniform weights when none are set.
    pub fn add_bundle(&mut self, bundle: EdgeBundle) -> Result<()> {
        self.add_bundle_with_tol(bundle, WEIGHT_SUM_TOL)
    }

    /// Consuming variant of [`add_bundle`](Self::add_bundle).
    pub fn with_bundle(mut self, bundle: EdgeBundle) -> Result<Self> {
        self.add_bundle(bundle)?;
        Ok(self)
    }

    pub(crate) fn add_bundle_with_tol(&mut self, mut bundle: EdgeBundle, tol: f64) -> Result<()> {
        let (i, j) = (bundle.i, bundle.j);
        if i >= j {
            return Err(StitchError::UnorderedPair { i, j });
        }
        if j >= self.nodes.len() {
            return Err(StitchError::MissingNode(j));
        }
        if bundle.candidates.is_empty() {
            return Err(StitchError::EmptyBundle { i, j });
        }
        if self.bundles.iter().any(|b| b.i == i && b.j == j) {
            return Err(StitchError::DuplicatePair { i, j });
        }
        for c in &bundle.candidates {
            c.validate()?;
        }
        if bundle.weights.is_empty() {
            bundle.set_uniform_weights();
        } else {
            bundle.validate_weights(tol)?;
        }
        self.bundles.push(bundle);
        Ok(())
    }

    pub fn num_weights(&self) -> usize {
        self.bundles.iter().map(EdgeBundle::len).sum()
    }

    /// Start index of each bundle's weights in the flat weight vector.
    pub fn weight_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.bundles.len());
        let mut acc = 0;
        for b in &self.bundles {
            offsets.push(acc);
            acc += b.len();
        }
        offsets
    }

    /// Bundle-major flat weight vector, dummy first within each bundle.
    pub fn flat_weights(&self) -> Vec<f64> {
        self.bundles
            .iter()
            .flat_map(|b| b.weights.iter().copied())
            .collect()
    }

    pub fn set_flat_weights(&mut self, w: &[f64]) {
        assert_eq!(w.len(), self.num_weights(), "flat weight length mismatch");
        let mut at = 0;
        for b in &mut self.bundles {
            let n = b.len();
            b.weights.clear();
            b.weights.extend_from_slice(&w[at..at + n]);
            at += n;
        }
    }

    pub fn nominal_offsets(&self) -> Vec<Vec2> {
        self.nodes.iter().map(|n| n.nominal_offset).collect()
    }

    pub fn constraint_matrix(&self) -> ConstraintMatrix {
        ConstraintMatrix::from_graph(self)
    }

    pub fn nullspace_basis(&self) -> NullSpaceBasis {
        NullSpaceBasis::new(&self.constraint_matrix())
    }

    /// Checks every structural invariant, with the given weight-sum tolerance.
    pub fn validate(&self, tol: f64) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(StitchError::Config(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        for (idx, node) in self.nodes.iter().enumerate() {
            if node.id != idx {
                return Err(StitchError::Schema(format!(
                    "node ids must be contiguous from 0; position {idx} has id {}",
                    node.id
                )));
            }
            if !node.nominal_offset.is_finite() {
                return Err(StitchError::Schema(format!(
                    "node {idx} has a non-finite nominal offset"
                )));
            }
        }
        let mut seen = HashSet::new();
        for b in &self.bundles {
            if b.i >= b.j {
                return Err(StitchError::UnorderedPair { i: b.i, j: b.j });
            }
            if b.j >= self.nodes.len() {
                return Err(StitchError::MissingNode(b.j));
            }
            if b.candidates.is_empty() {
                return Err(StitchError::EmptyBundle { i: b.i, j: b.j });
            }
            if !seen.insert((b.i, b.j)) {
                return Err(StitchError::DuplicatePair { i: b.i, j: b.j });
            }
            for c in &b.candidates {
                c.validate()?;
            }
            b.validate_weights(tol)?;
        }
        Ok(())
    }
}
