use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::align::{align, align_simple, connected_components, SimpleEdge, SimpleGraph};
use crate::error::{Result, StitchError};
use crate::geometry::Vec2;
use crate::graph::{AlignmentMultigraph, EdgeBundle};
use crate::solver::{solve_in_place, SolverConfig};

use super::scene::GroundTruth;

/// Offsets and pruned graph produced by one method.
#[derive(Debug, Clone)]
pub struct MethodResult {
    pub method: String,
    pub simple: SimpleGraph,
    pub offsets: Vec<Vec2>,
    pub rms_internal: Option<f64>,
    pub edges_dropped: usize,
    /// Retained edges whose candidate is not the highest-scoring one of its bundle.
    pub differs_from_top: usize,
    pub runtime_ms: f64,
}

/// Index (>= 1, weight indexing) of the highest-scoring candidate; ties keep the first.
pub fn top_candidate(bundle: &EdgeBundle) -> usize {
    let mut best = 0;
    for (k, c) in bundle.candidates.iter().enumerate() {
        if c.score > bundle.candidates[best].score {
            best = k;
        }
    }
    best + 1
}

/// Multigraph solve, prune and global alignment.
pub fn run_ours(graph: &AlignmentMultigraph, config: &SolverConfig) -> Result<MethodResult> {
    let start = Instant::now();
    let mut solved = graph.clone();
    solve_in_place(&mut solved, config)?;
    let (simple, report) = align(&solved)?;
    let differs_from_top = simple
        .edges
        .iter()
        .filter(|e| e.choice != top_candidate(&solved.bundles[e.bundle]))
        .count();
    Ok(MethodResult {
        method: "ours".into(),
        offsets: report.offsets,
        rms_internal: report.rms,
        edges_dropped: report.edges_dropped,
        differs_from_top,
        simple,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Top-1 candidate per pair, kept when its score reaches `min_score`, then
/// global alignment with unit weights.
pub fn run_baseline(graph: &AlignmentMultigraph, method: &str, min_score: f64) -> MethodResult {
    let start = Instant::now();
    let edges: Vec<SimpleEdge> = graph
        .bundles
        .iter()
        .enumerate()
        .filter_map(|(idx, b)| {
            let choice = top_candidate(b);
            let cand = &b.candidates[choice - 1];
            (cand.score >= min_score).then_some(SimpleEdge {
                i: b.i,
                j: b.j,
                delta: cand.delta,
                weight: 1.0,
                bundle: idx,
                choice,
            })
        })
        .collect();
    let simple = SimpleGraph {
        nodes: graph.nodes.clone(),
        edges,
    };
    let report = align_simple(&simple, graph.bundles.len() - simple.edges.len());
    MethodResult {
        method: method.into(),
        offsets: report.offsets,
        rms_internal: report.rms,
        edges_dropped: report.edges_dropped,
        differs_from_top: 0,
        simple,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub method: String,
    pub rms_internal: Option<f64>,
    pub rms_truth: f64,
    pub edges: usize,
    pub dropped: usize,
    pub components: usize,
    pub differs_from_top: usize,
    pub runtime_ms: f64,
}

/// RMS over tiles of the offset error relative to each component's lowest-id tile.
pub fn truth_rms(offsets: &[Vec2], truth: &[Vec2], components: &[Vec<usize>]) -> Result<f64> {
    if offsets.len() != truth.len() {
        return Err(StitchError::TileMismatch(format!(
            "{} offsets but {} true offsets",
            offsets.len(),
            truth.len()
        )));
    }
    if offsets.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for comp in components {
        let r = comp[0];
        for &i in comp {
            sum += ((offsets[i] - offsets[r]) - (truth[i] - truth[r])).norm_squared();
        }
    }
    Ok((sum / offsets.len() as f64).sqrt())
}

pub fn evaluate(result: &MethodResult, truth: &GroundTruth) -> Result<Metrics> {
    let components = connected_components(&result.simple);
    Ok(Metrics {
        method: result.method.clone(),
        rms_internal: result.rms_internal,
        rms_truth: truth_rms(&result.offsets, &truth.true_offsets, &components)?,
        edges: result.simple.edges.len(),
        dropped: result.edges_dropped,
        components: components.len(),
        differs_from_top: result.differs_from_top,
        runtime_ms: result.runtime_ms,
    })
}
