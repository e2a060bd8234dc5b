//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::VecDeque;

use multistitch::align::SimpleGraph;
use multistitch::registration::correlation::FLAT_VARIANCE;
use multistitch::registration::features::FeatureSet;
use multistitch::{
    AlignmentMultigraph, CandidateTransform, EdgeBundle, GrayImage, ImageRef, TileNode, Vec2,
};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Direct evaluation of the windowed Pearson average at every integer deviation.
pub fn pearson_scalar(
    a: &GrayImage,
    b: &GrayImage,
    features: &FeatureSet,
    delta0: Vec2,
    radius: isize,
) -> Vec<Option<f64>> {
    let r = features.window_radius as isize;
    let n = ((2 * r + 1) * (2 * r + 1)) as f64;
    let (ox, oy) = (delta0.x.round() as isize, delta0.y.round() as isize);
    let (wa, ha) = (a.width() as isize, a.height() as isize);
    let (wb, hb) = (b.width() as isize, b.height() as isize);
    let mut out = Vec::new();
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            let mut sum = 0.0;
            let mut count = 0usize;
            for p in &features.points {
                let (px, py) = (p.x as isize, p.y as isize);
                let (qx, qy) = (px - ox - dx, py - oy - dy);
                let inside = |x: isize, y: isize, w: isize, h: isize| {
                    x - r >= 0 && y - r >= 0 && x + r < w && y + r < h
                };
                if !inside(px, py, wa, ha) || !inside(qx, qy, wb, hb) {
                    continue;
                }
                let mut ma = 0.0;
                let mut mb = 0.0;
                for v in -r..=r {
                    for u in -r..=r {
                        ma += a.get((px + u) as usize, (py + v) as usize);
                        mb += b.get((qx + u) as usize, (qy + v) as usize);
                    }
                }
                ma /= n;
                mb /= n;
                let (mut num, mut da, mut db) = (0.0, 0.0, 0.0);
                for v in -r..=r {
                    for u in -r..=r {
                        let av = a.get((px + u) as usize, (py + v) as usize) - ma;
                        let bv = b.get((qx + u) as usize, (qy + v) as usize) - mb;
                        num += av * bv;
                        da += av * av;
                        db += bv * bv;
                    }
                }
                if da <= FLAT_VARIANCE * n || db <= FLAT_VARIANCE * n {
                    continue;
                }
                sum += num / (da * db).sqrt();
                count += 1;
            }
            out.push((count > 0).then(|| sum / count as f64));
        }
    }
    out
}

pub fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> GrayImage {
    GrayImage::from_fn(w, h, |_, _| rng.gen::<f64>())
}

pub fn nodes_at(offsets: &[Vec2]) -> Vec<TileNode> {
    offsets
        .iter()
        .enumerate()
        .map(|(i, o)| TileNode::new(i, ImageRef::Memory(i), *o))
        .collect()
}

/// Random multigraph with random (constraint-satisfying, non-uniform) weights.
pub fn random_graph(
    rng: &mut ChaCha8Rng,
    max_nodes: usize,
    max_cands: usize,
) -> (AlignmentMultigraph, Vec<Vec2>) {
    let n = rng.gen_range(2..=max_nodes);
    let offsets: Vec<Vec2> = (0..n)
        .map(|_| Vec2::new(rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0)))
        .collect();
    let mut g = AlignmentMultigraph::new(nodes_at(&offsets), rng.gen_range(0.5..8.0)).unwrap();
    let mut pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    pairs.shuffle(rng);
    let m = rng.gen_range(1..=pairs.len());
    for &(i, j) in &pairs[..m] {
        let k = rng.gen_range(1..=max_cands);
        let cands: Vec<CandidateTransform> = (0..k)
            .map(|_| {
                let d = Vec2::new(rng.gen_range(-60.0..60.0), rng.gen_range(-60.0..60.0));
                CandidateTransform::new(d, rng.gen_range(0.5..1.0), rng.gen_range(1..50))
            })
            .collect();
        let mut w: Vec<f64> = (0..=k).map(|_| rng.gen_range(-0.5..1.5)).collect();
        let s: f64 = w.iter().sum();
        let fix = (1.0 - s) / w.len() as f64;
        w.iter_mut().for_each(|x| *x += fix);
        g.add_bundle(EdgeBundle::new(i, j, cands).with_weights(w))
            .unwrap();
    }
    (g, offsets)
}

/// Scalar-loop evaluation of the multigraph loss.
pub fn loss_scalar(g: &AlignmentMultigraph, h: &[Vec2], w: &[f64]) -> f64 {
    let mut total = 0.0;
    let mut at = 0;
    for b in &g.bundles {
        total += w[at] * w[at] * g.tau * g.tau;
        for (k, c) in b.candidates.iter().enumerate() {
            let rx = c.delta.x + h[b.i].x - h[b.j].x;
            let ry = c.delta.y + h[b.i].y - h[b.j].y;
            total += w[at + k + 1] * w[at + k + 1] * (rx * rx + ry * ry);
        }
        at += b.candidates.len() + 1;
    }
    total
}

/// Flattened `[h_x0, h_y0, ..., w...]` parameter vector.
pub fn pack(h: &[Vec2], w: &[f64]) -> Vec<f64> {
    let mut x: Vec<f64> = h.iter().flat_map(|v| [v.x, v.y]).collect();
    x.extend_from_slice(w);
    x
}

pub fn unpack(x: &[f64], n: usize) -> (Vec<Vec2>, Vec<f64>) {
    let h = (0..n).map(|i| Vec2::new(x[2 * i], x[2 * i + 1])).collect();
    (h, x[2 * n..].to_vec())
}

/// Central-difference gradient of `f` at `x`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            y[i] = x[i] + step;
            let up = f(&y);
            y[i] = x[i] - step;
            let down = f(&y);
            y[i] = x[i];
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Least-squares optimum of `sum |delta_e + h_i - h_j|^2` over all offsets
/// (minimum-norm solution), returning the residual sum of squares.
pub fn ls_residual(n: usize, edges: &[(usize, usize, Vec2)]) -> f64 {
    if edges.is_empty() {
        return 0.0;
    }
    let mut a = DMatrix::<f64>::zeros(edges.len(), n);
    let mut bx = DVector::<f64>::zeros(edges.len());
    let mut by = DVector::<f64>::zeros(edges.len());
    for (row, (i, j, d)) in edges.iter().enumerate() {
        a[(row, *i)] = 1.0;
        a[(row, *j)] = -1.0;
        bx[row] = -d.x;
        by[row] = -d.y;
    }
    let svd = a.clone().svd(true, true);
    let hx = svd.solve(&bx, 1e-10).unwrap();
    let hy = svd.solve(&by, 1e-10).unwrap();
    (&a * hx - bx).norm_squared() + (&a * hy - by).norm_squared()
}

/// Weighted least squares with the `pinned` nodes held at `fixed`, solved densely
/// over the remaining nodes.
pub fn weighted_ls_dense(
    n: usize,
    edges: &[(usize, usize, Vec2, f64)],
    pinned: &[usize],
    fixed: &[Vec2],
) -> Vec<Vec2> {
    let mut col = vec![None; n];
    let mut m = 0;
    for (node, slot) in col.iter_mut().enumerate() {
        if !pinned.contains(&node) {
            *slot = Some(m);
            m += 1;
        }
    }
    let mut a = DMatrix::<f64>::zeros(edges.len(), m);
    let mut bx = DVector::<f64>::zeros(edges.len());
    let mut by = DVector::<f64>::zeros(edges.len());
    for (row, (i, j, d, w)) in edges.iter().enumerate() {
        // w * (d + h_i - h_j) = 0
        let mut rhs = -*d * *w;
        match col[*i] {
            Some(c) => a[(row, c)] += *w,
            None => rhs -= fixed[*i] * *w,
        }
        match col[*j] {
            Some(c) => a[(row, c)] -= *w,
            None => rhs += fixed[*j] * *w,
        }
        bx[row] = rhs.x;
        by[row] = rhs.y;
    }
    let normal = a.transpose() * &a;
    let chol = normal.cholesky().expect("free nodes determined");
    let hx = chol.solve(&(a.transpose() * bx));
    let hy = chol.solve(&(a.transpose() * by));
    (0..n)
        .map(|node| match col[node] {
            Some(c) => Vec2::new(hx[c], hy[c]),
            None => fixed[node],
        })
        .collect()
}

/// Instance for selection checks: true candidates with small noise, false ones
/// 10 to 30 px away, nominal offsets near the truth.
pub fn selection_instance(rng: &mut ChaCha8Rng) -> AlignmentMultigraph {
    let n = rng.gen_range(3..=4);
    let truth: Vec<Vec2> = (0..n)
        .map(|_| Vec2::new(rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0)))
        .collect();
    let jitter = Normal::new(0.0, 1.0).unwrap();
    let small = Normal::new(0.0, 0.3).unwrap();
    let nominal: Vec<Vec2> = truth
        .iter()
        .map(|t| *t + Vec2::new(jitter.sample(rng), jitter.sample(rng)))
        .collect();
    let mut g = AlignmentMultigraph::new(nodes_at(&nominal), 3.0).unwrap();
    let mut pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    pairs.shuffle(rng);
    let m = rng.gen_range(n..=pairs.len().min(5));
    for &(i, j) in &pairs[..m] {
        let k = rng.gen_range(1..=3);
        let true_delta = truth[j] - truth[i];
        let has_true = rng.gen_bool(0.8);
        let mut cands: Vec<CandidateTransform> = (0..k)
            .map(|_| {
                let angle = rng.gen_range(0.0..std::f64::consts::TAU);
                let dist = rng.gen_range(10.0..30.0);
                let d = true_delta + Vec2::new(angle.cos() * dist, angle.sin() * dist);
                CandidateTransform::new(d, rng.gen_range(0.5..1.0), 10)
            })
            .collect();
        if has_true {
            let d = true_delta + Vec2::new(small.sample(rng), small.sample(rng));
            let slot = rng.gen_range(0..k);
            cands[slot] = CandidateTransform::new(d, rng.gen_range(0.5..1.0), 10);
        }
        g.add_bundle(EdgeBundle::new(i, j, cands)).unwrap();
    }
    g
}

/// Exhaustive selection: every bundle picks the dummy (cost tau^2) or one
/// candidate; selected candidates are fitted jointly by least squares.
/// Returns all selections sorted by cost.
pub fn brute_force_selections(g: &AlignmentMultigraph) -> Vec<(f64, Vec<usize>)> {
    let sizes: Vec<usize> = g.bundles.iter().map(|b| b.candidates.len() + 1).collect();
    let total: usize = sizes.iter().product();
    let mut out = Vec::with_capacity(total);
    for mut code in 0..total {
        let mut choice = Vec::with_capacity(sizes.len());
        for s in &sizes {
            choice.push(code % s);
            code /= s;
        }
        let mut cost = 0.0;
        let mut edges = Vec::new();
        for (b, &c) in g.bundles.iter().zip(&choice) {
            if c == 0 {
                cost += g.tau * g.tau;
            } else {
                edges.push((b.i, b.j, b.candidates[c - 1].delta));
            }
        }
        cost += ls_residual(g.nodes.len(), &edges);
        out.push((cost, choice));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Sum of oriented deltas around every fundamental cycle with its length.
pub fn fundamental_cycles(simple: &SimpleGraph) -> Vec<(Vec2, usize)> {
    let n = simple.nodes.len();
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (idx, e) in simple.edges.iter().enumerate() {
        adj[e.i].push((e.j, idx));
        adj[e.j].push((e.i, idx));
    }
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut depth = vec![usize::MAX; n];
    let mut potential = vec![Vec2::ZERO; n];
    let mut tree_edge = vec![false; simple.edges.len()];
    for root in 0..n {
        if depth[root] != usize::MAX {
            continue;
        }
        depth[root] = 0;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &(v, idx) in &adj[u] {
                if depth[v] != usize::MAX {
                    continue;
                }
                let e = &simple.edges[idx];
                // potential_j = potential_i + delta_ij along tree edges
                potential[v] = if e.i == u {
                    potential[u] + e.delta
                } else {
                    potential[u] - e.delta
                };
                depth[v] = depth[u] + 1;
                parent[v] = Some((u, idx));
                tree_edge[idx] = true;
                queue.push_back(v);
            }
        }
    }
    let mut cycles = Vec::new();
    for (idx, e) in simple.edges.iter().enumerate() {
        if tree_edge[idx] {
            continue;
        }
        let (mut a, mut b) = (e.i, e.j);
        let mut len = 1;
        while a != b {
            if depth[a] >= depth[b] {
                a = parent[a].unwrap().0;
            } else {
                b = parent[b].unwrap().0;
            }
            len += 1;
        }
        cycles.push((potential[e.i] + e.delta - potential[e.j], len));
    }
    cycles
}
