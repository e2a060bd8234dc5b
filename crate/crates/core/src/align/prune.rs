use crate::error::{Result, StitchError};
use crate::geometry::Vec2;
use crate::graph::{AlignmentMultigraph, CandidateTransform, EdgeBundle, TileNode};

#[derive(Debug, Clone, PartialEq)]
pub struct SimpleEdge {
    pub i: usize,
    pub j: usize,
    pub delta: Vec2,
    /// Winning weight of the source bundle.
    pub weight: f64,
    /// Source bundle index and winning weight index (>= 1).
    pub bundle: usize,
    pub choice: usize,
}

/// At most one edge per tile pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SimpleGraph {
    pub nodes: Vec<TileNode>,
    pub edges: Vec<SimpleEdge>,
}

impl SimpleGraph {
    /// Views each edge as a one-candidate bundle with zero dummy weight.
    pub fn to_multigraph(&self, tau: f64) -> Result<AlignmentMultigraph> {
        let mut g = AlignmentMultigraph::new(self.nodes.clone(), tau)?;
        for e in &self.edges {
            let cand = CandidateTransform::new(e.delta, 1.0, 1);
            g.add_bundle(EdgeBundle::new(e.i, e.j, vec![cand]).with_weights(vec![0.0, 1.0]))?;
        }
        g.solved = true;
        Ok(g)
    }
}

fn is_uniform(weights: &[f64]) -> bool {
    weights.windows(2).all(|w| w[0] == w[1])
}

/// Keeps the highest-weight candidate of each bundle and drops bundles whose
/// dummy wins (ties go to the dummy, then to the lowest candidate).
pub fn prune(graph: &AlignmentMultigraph) -> Result<SimpleGraph> {
    if !graph.solved
        && !graph.bundles.is_empty()
        && graph.bundles.iter().all(|b| is_uniform(&b.weights))
    {
        return Err(StitchError::UnsolvedWeights);
    }
    let edges = graph
        .bundles
        .iter()
        .enumerate()
        .filter_map(|(idx, b)| {
            let choice = b.argmax();
            (choice > 0).then(|| SimpleEdge {
                i: b.i,
                j: b.j,
                delta: b.candidates[choice - 1].delta,
                weight: b.weights[choice],
                bundle: idx,
                choice,
            })
        })
        .collect();
    Ok(SimpleGraph {
        nodes: graph.nodes.clone(),
        edges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::{cand, four_tile_graph, nodes};

    fn weighted(weights: Vec<f64>) -> AlignmentMultigraph {
        let mut g = AlignmentMultigraph::new(nodes(2), 5.0).unwrap();
        g.add_bundle(
            EdgeBundle::new(0, 1, vec![cand(1.0, 0.0), cand(2.0, 0.0)]).with_weights(weights),
        )
        .unwrap();
        g
    }

    #[test]
    fn argmax_candidate_kept() {
        let s = prune(&weighted(vec![0.1, 0.7, 0.2])).unwrap();
        assert_eq!(s.edges.len(), 1);
        assert_eq!(s.edges[0].choice, 1);
        assert_eq!(s.edges[0].delta, Vec2::new(1.0, 0.0));
        assert_eq!(s.edges[0].weight, 0.7);
    }

    #[test]
    fn dummy_win_drops_edge() {
        assert!(prune(&weighted(vec![0.6, 0.2, 0.2]))
            .unwrap()
            .edges
            .is_empty());
    }

    #[test]
    fn unsolved_uniform_graph_rejected() {
        let g = weighted(vec![1.0 / 3.0; 3]);
        assert!(matches!(prune(&g), Err(StitchError::UnsolvedWeights)));
        let mut g = g;
        g.solved = true;
        // a solved uniform bundle ties toward the dummy
        assert!(prune(&g).unwrap().edges.is_empty());
    }

    #[test]
    fn four_tile_pruning() {
        let mut g = four_tile_graph();
        // bundle order: 01 (two candidates), 02, 12, 13, 23
        g.set_flat_weights(&[0.1, 0.8, 0.1, 0.2, 0.8, 0.9, 0.1, 0.3, 0.7, 0.25, 0.75]);
        g.solved = true;
        let s = prune(&g).unwrap();
        let pairs: Vec<(usize, usize, usize)> =
            s.edges.iter().map(|e| (e.i, e.j, e.choice)).collect();
        assert_eq!(pairs, vec![(0, 1, 1), (0, 2, 1), (1, 3, 1), (2, 3, 1)]);
    }
}
