use petgraph::unionfind::UnionFind;

use crate::error::{Result, StitchError};
use crate::geometry::Vec2;
use crate::sparse::{pcg_jacobi, CsrMatrix};

use super::SimpleGraph;

const CG_REL_TOL: f64 = 1e-14;

/// Connected components over retained edges, each sorted, ordered by lowest id.
pub fn connected_components(simple: &SimpleGraph) -> Vec<Vec<usize>> {
    let n = simple.nodes.len();
    let mut uf = UnionFind::<usize>::new(n);
    for e in &simple.edges {
        uf.union(e.i, e.j);
    }
    let mut slot_of_root = vec![usize::MAX; n];
    let mut comps: Vec<Vec<usize>> = Vec::new();
    for node in 0..n {
        let root = uf.find(node);
        if slot_of_root[root] == usize::MAX {
            slot_of_root[root] = comps.len();
            comps.push(Vec::new());
        }
        comps[slot_of_root[root]].push(node);
    }
    comps
}

/// Minimizes `sum_e w_e^2 |delta_e + h_i - h_j|^2` over offsets.
///
/// The lowest-id node of every component keeps its nominal offset; the rest of
/// the component is placed relative to it. Isolated tiles stay at nominal.
pub fn global_align(simple: &SimpleGraph) -> Vec<Vec2> {
    let n = simple.nodes.len();
    let mut h: Vec<Vec2> = simple.nodes.iter().map(|t| t.nominal_offset).collect();
    let mut free_index = vec![None; n];
    let mut n_free = 0;
    for comp in connected_components(simple) {
        for &node in &comp[1..] {
            free_index[node] = Some(n_free);
            n_free += 1;
        }
    }
    if n_free == 0 {
        return h;
    }

    // Normal equations: graph Laplacian with squared weights, pinned nodes on the right.
    let mut t = Vec::new();
    let mut rhs = vec![Vec2::ZERO; n_free];
    for e in &simple.edges {
        let w2 = e.weight * e.weight;
        let (fi, fj) = (free_index[e.i], free_index[e.j]);
        if let Some(i) = fi {
            t.push((i, i, w2));
            rhs[i] -= e.delta * w2;
        }
        if let Some(j) = fj {
            t.push((j, j, w2));
            rhs[j] += e.delta * w2;
        }
        match (fi, fj) {
            (Some(i), Some(j)) => {
                t.push((i, j, -w2));
                t.push((j, i, -w2));
            }
            (Some(i), None) => rhs[i] += h[e.j] * w2,
            (None, Some(j)) => rhs[j] += h[e.i] * w2,
            (None, None) => {}
        }
    }
    let lap = CsrMatrix::from_triplets(n_free, t);
    let max_iters = 20 * n_free + 100;
    let bx: Vec<f64> = rhs.iter().map(|v| v.x).collect();
    let by: Vec<f64> = rhs.iter().map(|v| v.y).collect();
    let sx = pcg_jacobi(&lap, &bx, max_iters, CG_REL_TOL).x;
    let sy = pcg_jacobi(&lap, &by, max_iters, CG_REL_TOL).x;
    for (node, slot) in free_index.iter().enumerate() {
        if let Some(f) = slot {
            h[node] = Vec2::new(sx[*f], sy[*f]);
        }
    }
    h
}

/// Unweighted root mean square of `|delta + h_i - h_j|` over retained edges.
pub fn rms_error(simple: &SimpleGraph, offsets: &[Vec2]) -> Result<f64> {
    if simple.edges.is_empty() {
        return Err(StitchError::EmptyEdgeSet);
    }
    let sum: f64 = simple
        .edges
        .iter()
        .map(|e| (e.delta + offsets[e.i] - offsets[e.j]).norm_squared())
        .sum();
    Ok((sum / simple.edges.len() as f64).sqrt())
}
