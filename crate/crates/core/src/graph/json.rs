use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    AlignmentMultigraph, CandidateTransform, EdgeBundle, ImageRef, TileNode, WEIGHT_SUM_TOL_TEXT,
};
use crate::error::{Result, StitchError};
use crate::geometry::Vec2;

/// On-disk form of [`AlignmentMultigraph`]. Unknown fields are ignored.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphDocument {
    pub tau: f64,
    pub nodes: Vec<NodeDoc>,
    pub bundles: Vec<BundleDoc>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub solved: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeDoc {
    pub id: usize,
    pub image: String,
    pub nominal_offset: Vec2,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solved_offset: Option<Vec2>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BundleDoc {
    pub i: usize,
    pub j: usize,
    pub candidates: Vec<CandidateDoc>,
    #[serde(default)]
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateDoc {
    pub dx: f64,
    pub dy: f64,
    pub score: f64,
    pub support: usize,
}

impl From<&AlignmentMultigraph> for GraphDocument {
    fn from(g: &AlignmentMultigraph) -> Self {
        GraphDocument {
            tau: g.tau,
            nodes: g
                .nodes
                .iter()
                .map(|n| NodeDoc {
                    id: n.id,
                    image: n.image.label(),
                    nominal_offset: n.nominal_offset,
                    solved_offset: n.solved_offset,
                })
                .collect(),
            bundles: g
                .bundles
                .iter()
                .map(|b| BundleDoc {
                    i: b.i,
                    j: b.j,
                    candidates: b
                        .candidates
                        .iter()
                        .map(|c| CandidateDoc {
                            dx: c.delta.x,
                            dy: c.delta.y,
                            score: c.score,
                            support: c.support,
                        })
                        .collect(),
                    weights: b.weights.clone(),
                })
                .collect(),
            solved: g.solved,
        }
    }
}

impl TryFrom<GraphDocument> for AlignmentMultigraph {
    type Error = StitchError;

    fn try_from(doc: GraphDocument) -> Result<Self> {
        let mut nodes: Vec<TileNode> = doc
            .nodes
            .into_iter()
            .map(|n| TileNode {
                id: n.id,
                image: ImageRef::parse(&n.image),
                nominal_offset: n.nominal_offset,
                solved_offset: n.solved_offset,
            })
            .collect();
        nodes.sort_by_key(|n| n.id);
        let mut graph = AlignmentMultigraph::new(nodes, doc.tau)?;
        for b in doc.bundles {
            let candidates = b
                .candidates
                .into_iter()
                .map(|c| CandidateTransform::new(Vec2::new(c.dx, c.dy), c.score, c.support))
                .collect();
            let bundle = EdgeBundle {
                i: b.i,
                j: b.j,
                candidates,
                weights: b.weights,
            };
            graph.add_bundle_with_tol(bundle, WEIGHT_SUM_TOL_TEXT)?;
        }
        graph.solved = doc.solved;
        Ok(graph)
    }
}

impl AlignmentMultigraph {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&GraphDocument::from(self)).expect("graph serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: GraphDocument = serde_json::from_str(text)?;
        doc.try_into()
    }
}

pub fn read_graph(path: impl AsRef<Path>) -> Result<AlignmentMultigraph> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| StitchError::io(path, e))?;
    AlignmentMultigraph::from_json(&text)
}

pub fn write_graph(graph: &AlignmentMultigraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, graph.to_json()).map_err(|e| StitchError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::four_tile_graph;

    #[test]
    fn round_trip_is_identity() {
        let mut g = four_tile_graph();
        g.nodes[2].solved_offset = Some(Vec2::new(1.25, -3.5));
        let mut w = g.flat_weights();
        w[0] = 0.1;
        w[1] = 0.7;
        w[2] = 0.2;
        g.set_flat_weights(&w);
        g.solved = true;
        let back = AlignmentMultigraph::from_json(&g.to_json()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn weight_sum_violation_is_schema_error() {
        let text = r#"{"tau": 5.0,
            "nodes": [{"id": 0, "image": "a.png", "nominal_offset": [0, 0]},
                      {"id": 1, "image": "b.png", "nominal_offset": [200, 0]}],
            "bundles": [{"i": 0, "j": 1,
                "candidates": [{"dx": 200, "dy": 0, "score": 0.9, "support": 5}],
                "weights": [0.4, 0.4]}]}"#;
        let err = AlignmentMultigraph::from_json(text).unwrap_err();
        assert!(matches!(err, StitchError::InvalidWeights { .. }));
    }

    #[test]
    fn unknown_fields_are_ignored() {
        let text = r#"{"tau": 5.0, "producer": "scanner-7",
            "nodes": [{"id": 0, "image": "a.png", "nominal_offset": [0, 0], "exposure": 3},
                      {"id": 1, "image": "b.png", "nominal_offset": [200, 0]}],
            "bundles": [{"i": 0, "j": 1, "note": "x",
                "candidates": [{"dx": 200, "dy": 0, "score": 0.9, "support": 5, "extra": 1}],
                "weights": [0.5, 0.5]}]}"#;
        let g = AlignmentMultigraph::from_json(text).unwrap();
        assert_eq!(g.bundles.len(), 1);
        assert_eq!(g.bundles[0].weights, vec![0.5, 0.5]);
    }

    #[test]
    fn text_tolerance_is_looser_than_memory() {
        let text = r#"{"tau": 5.0,
            "nodes": [{"id": 0, "image": "a.png", "nominal_offset": [0, 0]},
                      {"id": 1, "image": "b.png", "nominal_offset": [200, 0]}],
            "bundles": [{"i": 0, "j": 1,
                "candidates": [{"dx": 200, "dy": 0, "score": 0.9, "support": 5}],
                "weights": [0.3333334, 0.6666667]}]}"#;
        assert!(AlignmentMultigraph::from_json(text).is_ok());
    }

    #[test]
    fn malformed_json_is_error() {
        assert!(matches!(
            AlignmentMultigraph::from_json("{\"tau\": 5.0, \"nodes\": ["),
            Err(StitchError::Json(_))
        ));
        assert!(matches!(
            AlignmentMultigraph::from_json("{\"tau\": 5.0}"),
            Err(StitchError::Json(_))
        ));
    }
}
