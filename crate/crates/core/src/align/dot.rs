//! Graphviz export. Nodes carry `pos` at their nominal offsets (y flipped so the
//! layout matches image orientation under `neato -n`).

use std::fmt::Write;

use crate::graph::{AlignmentMultigraph, TileNode};

use super::SimpleGraph;

fn write_nodes(out: &mut String, nodes: &[TileNode]) {
    for t in nodes {
        let p = t.nominal_offset;
        writeln!(out, "  {} [pos=\"{},{}!\"];", t.id, p.x, -p.y).unwrap();
    }
}

/// Candidate edges solid and labeled with their weights; one dashed dummy edge per bundle.
pub fn multigraph_dot(graph: &AlignmentMultigraph) -> String {
    let mut out = String::from("digraph multigraph {\n  node [shape=circle];\n");
    write_nodes(&mut out, &graph.nodes);
    for b in &graph.bundles {
        for (k, c) in b.candidates.iter().enumerate() {
            writeln!(
                out,
                "  {} -> {} [label=\"w{}={:.3} ({:.1},{:.1})\"];",
                b.i,
                b.j,
                k + 1,
                b.weights[k + 1],
                c.delta.x,
                c.delta.y
            )
            .unwrap();
        }
        writeln!(
            out,
            "  {} -> {} [style=dashed, label=\"w0={:.3}\"];",
            b.i, b.j, b.weights[0]
        )
        .unwrap();
    }
    out.push_str("}\n");
    out
}

/// Retained edges only.
pub fn simple_graph_dot(simple: &SimpleGraph) -> String {
    let mut out = String::from("digraph pruned {\n  node [shape=circle];\n");
    write_nodes(&mut out, &simple.nodes);
    for e in &simple.edges {
        writeln!(
            out,
            "  {} -> {} [label=\"w={:.3} ({:.1},{:.1})\"];",
            e.i, e.j, e.weight, e.delta.x, e.delta.y
        )
        .unwrap();
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::prune;
    use crate::graph::tests::{four_tile_graph, nodes};

    fn count(dot: &str, needle: &str) -> usize {
        dot.lines()
            .filter(|l| l.contains("->") && l.contains(needle))
            .count()
    }

    #[test]
    fn four_tile_layout() {
        let dot = multigraph_dot(&four_tile_graph());
        let edges = dot.lines().filter(|l| l.contains("->")).count();
        assert_eq!(edges, 11);
        assert_eq!(count(&dot, "dashed"), 5);
        assert_eq!(count(&dot, "0 -> 1 [label"), 2);
        assert_eq!(dot.lines().filter(|l| l.contains("pos=")).count(), 4);
    }

    #[test]
    fn empty_graph_is_valid() {
        let g = AlignmentMultigraph::new(vec![], 1.0).unwrap();
        assert_eq!(
            multigraph_dot(&g),
            "digraph multigraph {\n  node [shape=circle];\n}\n"
        );
        let g = AlignmentMultigraph::new(nodes(2), 1.0).unwrap();
        assert!(!multigraph_dot(&g).contains("->"));
    }

    #[test]
    fn pruned_four_tile_dot() {
        let mut g = four_tile_graph();
        g.set_flat_weights(&[0.1, 0.8, 0.1, 0.2, 0.8, 0.9, 0.1, 0.3, 0.7, 0.25, 0.75]);
        g.solved = true;
        let dot = simple_graph_dot(&prune(&g).unwrap());
        assert_eq!(dot.lines().filter(|l| l.contains("->")).count(), 4);
        assert!(!dot.contains("1 -> 2"));
        assert!(!dot.contains("dashed"));
    }
}
