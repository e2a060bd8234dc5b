//! The multigraph loss
//!
//! `f(h, w) = sum_b [ w_b0^2 tau^2 + sum_k w_bk^2 |delta_bk + h_i - h_j|^2 ]`
//!
//! and its analytic first derivatives.

use crate::geometry::Vec2;
use crate::graph::AlignmentMultigraph;

/// Residual of candidate `cand` (0-based, weight index `cand + 1`) of bundle `bundle`.
pub fn residual(graph: &AlignmentMultigraph, h: &[Vec2], bundle: usize, cand: usize) -> Vec2 {
    let b = &graph.bundles[bundle];
    b.candidates[cand].delta + h[b.i] - h[b.j]
}

/// Loss of one bundle given its weight slice (dummy first).
pub fn bundle_loss(graph: &AlignmentMultigraph, h: &[Vec2], bundle: usize, w: &[f64]) -> f64 {
    let tau2 = graph.tau * graph.tau;
    let b = &graph.bundles[bundle];
    let mut f = w[0] * w[0] * tau2;
    for (k, c) in b.candidates.iter().enumerate() {
        let r = c.delta + h[b.i] - h[b.j];
        f += w[k + 1] * w[k + 1] * r.norm_squared();
    }
    f
}

/// Total loss for offsets `h` and the flat weight vector `w`.
pub fn loss(graph: &AlignmentMultigraph, h: &[Vec2], w: &[f64]) -> f64 {
    let mut at = 0;
    let mut total = 0.0;
    for (idx, b) in graph.bundles.iter().enumerate() {
        total += bundle_loss(graph, h, idx, &w[at..at + b.len()]);
        at += b.len();
    }
    total
}

/// Gradients `(df/dh, df/dw)`. Entries of `pinned` nodes are zero.
pub fn gradient(
    graph: &AlignmentMultigraph,
    h: &[Vec2],
    w: &[f64],
    pinned: &[bool],
) -> (Vec<Vec2>, Vec<f64>) {
    let tau2 = graph.tau * graph.tau;
    let mut gh = vec![Vec2::ZERO; h.len()];
    let mut gw = vec![0.0; w.len()];
    let mut at = 0;
    for b in &graph.bundles {
        gw[at] = 2.0 * w[at] * tau2;
        for (k, c) in b.candidates.iter().enumerate() {
            let wk = w[at + k + 1];
            let r = c.delta + h[b.i] - h[b.j];
            gw[at + k + 1] = 2.0 * wk * r.norm_squared();
            let g = r * (2.0 * wk * wk);
            gh[b.i] += g;
            gh[b.j] -= g;
        }
        at += b.len();
    }
    for (g, &p) in gh.iter_mut().zip(pinned) {
        if p {
            *g = Vec2::ZERO;
        }
    }
    (gh, gw)
}

/// Minimizer of the bundle loss over weights summing to one, for fixed offsets:
/// `w_k` proportional to `1 / c_k` with `c_0 = tau^2`, `c_k = |r_k|^2`.
/// Zero-cost hypotheses share the whole weight.
pub fn optimal_bundle_weights(graph: &AlignmentMultigraph, h: &[Vec2], bundle: usize) -> Vec<f64> {
    let b = &graph.bundles[bundle];
    let mut costs = Vec::with_capacity(b.len());
    costs.push(graph.tau * graph.tau);
    for k in 0..b.candidates.len() {
        costs.push(residual(graph, h, bundle, k).norm_squared());
    }
    let zeros = costs.iter().filter(|&&c| c == 0.0).count();
    if zeros > 0 {
        return costs
            .iter()
            .map(|&c| if c == 0.0 { 1.0 / zeros as f64 } else { 0.0 })
            .collect();
    }
    let inv: Vec<f64> = costs.iter().map(|c| 1.0 / c).collect();
    let total: f64 = inv.iter().sum();
    inv.into_iter().map(|v| v / total).collect()
}
