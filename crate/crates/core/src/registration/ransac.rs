//! Sequential consensus over externally matched point pairs.
//!
//! Under a translation model one correspondence fixes the hypothesis, so every
//! correspondence is tried as a hypothesis and the largest consensus set wins.
//! Its inliers are removed and the search is repeated to expose further,
//! competing translations.

use crate::geometry::Vec2;
use crate::graph::CandidateTransform;

/// A matched point: `a` in image A, `b` in image B.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub a: Vec2,
    pub b: Vec2,
}

impl Correspondence {
    pub fn new(a: Vec2, b: Vec2) -> Self {
        Self { a, b }
    }

    /// Relative tile position implied by the match (B's origin in A's frame).
    pub fn delta(&self) -> Vec2 {
        self.a - self.b
    }
}

pub fn sequential_ransac(
    correspondences: &[Correspondence],
    inlier_tol: f64,
    min_support: usize,
    max_sets: usize,
) -> Vec<CandidateTransform> {
    let total = correspondences.len();
    let mut remaining: Vec<Vec2> = correspondences.iter().map(Correspondence::delta).collect();
    let mut out = Vec::new();
    let tol2 = inlier_tol * inlier_tol;

    while out.len() < max_sets && !remaining.is_empty() {
        let mut best: Option<(usize, usize)> = None;
        for (h, hyp) in remaining.iter().enumerate() {
            let support = remaining
                .iter()
                .filter(|d| (**d - *hyp).norm_squared() <= tol2)
                .count();
            if best.is_none_or(|(_, s)| support > s) {
                best = Some((h, support));
            }
        }
        let Some((h, support)) = best else { break };
        if support < min_support.max(1) {
            break;
        }
        let hyp = remaining[h];
        let (inliers, rest): (Vec<Vec2>, Vec<Vec2>) = remaining
            .into_iter()
            .partition(|d| (*d - hyp).norm_squared() <= tol2);
        let mean =
            inliers.iter().fold(Vec2::ZERO, |acc, d| acc + *d) * (1.0 / inliers.len() as f64);
        out.push(CandidateTransform::new(
            mean,
            inliers.len() as f64 / total as f64,
            inliers.len(),
        ));
        remaining = rest;
    }
    out
}
