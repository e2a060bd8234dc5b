//! Pruning of the solved multigraph and weighted global alignment.

mod dot;
mod global;
mod prune;

pub use dot::{multigraph_dot, simple_graph_dot};
pub use global::{connected_components, global_align, rms_error};
pub use prune::{prune, SimpleEdge, SimpleGraph};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::Vec2;
use crate::graph::AlignmentMultigraph;

/// Output of the align stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub offsets: Vec<Vec2>,
    /// `None` when no edge survived pruning.
    pub rms: Option<f64>,
    pub edges_retained: usize,
    pub edges_dropped: usize,
    pub components: Vec<Vec<usize>>,
}

impl AlignmentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("alignment serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Aligns an already-pruned graph.
pub fn align_simple(simple: &SimpleGraph, edges_dropped: usize) -> AlignmentReport {
    let offsets = global_align(simple);
    let rms = rms_error(simple, &offsets).ok();
    AlignmentReport {
        rms,
        edges_retained: simple.edges.len(),
        edges_dropped,
        components: connected_components(simple),
        offsets,
    }
}

/// Prune + global alignment of a solved multigraph.
pub fn align(graph: &AlignmentMultigraph) -> Result<(SimpleGraph, AlignmentReport)> {
    let simple = prune(graph)?;
    let dropped = graph.bundles.len() - simple.edges.len();
    let report = align_simple(&simple, dropped);
    Ok((simple, report))
}
