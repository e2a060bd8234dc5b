use petgraph::unionfind::UnionFind;

use crate::error::{Result, StitchError};
use crate::geometry::Vec2;
use crate::graph::{AlignmentMultigraph, ConstraintMatrix, NullSpaceBasis};
use crate::sparse::{pcg_jacobi, CsrMatrix};

use super::objective;
use super::{SolverConfig, SolverState};

/// Smallest step size tried by backtracking before giving up.
pub const MIN_STEP: f64 = 1e-12;
const MAX_HALVINGS: usize = 40;
const LAMBDA_MIN: f64 = 1e-12;
const LAMBDA_MAX: f64 = 1e12;

/// Per-component reference: the lowest node id of every connected component
/// (over bundles) stays fixed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gauge {
    pub pinned: Vec<bool>,
    /// Position of each free node in the reduced offset vector.
    pub free_index: Vec<Option<usize>>,
    pub n_free: usize,
}

impl Gauge {
    pub fn new(graph: &AlignmentMultigraph) -> Self {
        let n = graph.nodes.len();
        let mut uf = UnionFind::<usize>::new(n);
        for b in &graph.bundles {
            uf.union(b.i, b.j);
        }
        let mut seen_root = vec![false; n];
        let mut pinned = vec![false; n];
        for (node, pin) in pinned.iter_mut().enumerate() {
            let root = uf.find(node);
            if !seen_root[root] {
                seen_root[root] = true;
                *pin = true;
            }
        }
        let mut free_index = vec![None; n];
        let mut n_free = 0;
        for (node, slot) in free_index.iter_mut().enumerate() {
            if !pinned[node] {
                *slot = Some(n_free);
                n_free += 1;
            }
        }
        Self {
            pinned,
            free_index,
            n_free,
        }
    }
}

/// The reduced Newton system `(M + lambda I) [dh; a] = [-grad_h f; -Z^T grad_w f]`
/// over free offsets and null-space coordinates of the weights.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Number of offset unknowns (2 per free node) preceding the weight coordinates.
    pub n_offsets: usize,
}

/// A multigraph prepared for minimization.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    pub graph: &'a AlignmentMultigraph,
    pub gauge: Gauge,
    pub constraint: ConstraintMatrix,
    pub basis: NullSpaceBasis,
    weight_offsets: Vec<usize>,
}

impl<'a> Problem<'a> {
    pub fn new(graph: &'a AlignmentMultigraph) -> Self {
        let constraint = graph.constraint_matrix();
        let basis = NullSpaceBasis::new(&constraint);
        Self {
            graph,
            gauge: Gauge::new(graph),
            constraint,
            basis,
            weight_offsets: graph.weight_offsets(),
        }
    }

    /// Offsets from the nominal positions, weights from the graph.
    pub fn initial_state(&self, config: &SolverConfig) -> SolverState {
        let h = self.graph.nominal_offsets();
        let w = self.graph.flat_weights();
        let loss = objective::loss(self.graph, &h, &w);
        SolverState {
            h,
            w,
            lambda: config.lambda0,
            iteration: 0,
            loss,
        }
    }

    pub fn loss(&self, h: &[Vec2], w: &[f64]) -> f64 {
        objective::loss(self.graph, h, w)
    }

    pub fn gradient(&self, state: &SolverState) -> (Vec<Vec2>, Vec<f64>) {
        objective::gradient(self.graph, &state.h, &state.w, &self.gauge.pinned)
    }

    /// One projected gradient step: a weight update, then an offset update
    /// from the gradient at the new weights. Each block halves its own step
    /// size until the loss decreases; a block that cannot decrease is skipped.
    ///
    /// Returns the new state and the step sizes that succeeded.
    pub fn projected_gd_step(
        &self,
        state: &SolverState,
        gamma_h: f64,
        gamma_w: f64,
    ) -> Result<(SolverState, f64, f64)> {
        let (_, gw) = self.gradient(state);
        let pgw = self.basis.project(&gw);
        let (w, loss_w, gamma_w) = match self.backtrack(state.loss, gamma_w, |g| {
            let w: Vec<f64> = state.w.iter().zip(&pgw).map(|(w, d)| w - g * d).collect();
            let loss = self.loss(&state.h, &w);
            (w, loss)
        }) {
            Some(found) => found,
            None => (state.w.clone(), state.loss, gamma_w),
        };
        let moved = SolverState {
            h: state.h.clone(),
            w,
            lambda: state.lambda,
            iteration: state.iteration,
            loss: loss_w,
        };
        let (gh, _) = self.gradient(&moved);
        let (h, loss_h, gamma_h) = match self.backtrack(loss_w, gamma_h, |g| {
            let h: Vec<Vec2> = moved.h.iter().zip(&gh).map(|(h, d)| *h - *d * g).collect();
            let loss = self.loss(&h, &moved.w);
            (h, loss)
        }) {
            Some(found) => found,
            None => (moved.h.clone(), loss_w, gamma_h),
        };
        if loss_h.is_nan() || loss_h >= state.loss {
            let stationary = gh.iter().all(|g| *g == Vec2::ZERO) && pgw.iter().all(|&g| g == 0.0);
            if stationary {
                return Ok((state.clone(), gamma_h, gamma_w));
            }
            return Err(StitchError::StepFailure);
        }
        let next = SolverState {
            h,
            w: moved.w,
            lambda: state.lambda,
            iteration: state.iteration + 1,
            loss: loss_h,
        };
        Ok((next, gamma_h, gamma_w))
    }

    /// Halves `gamma` from its start value until `trial` returns a loss below `current`.
    fn backtrack<T>(
        &self,
        current: f64,
        gamma: f64,
        trial: impl Fn(f64) -> (T, f64),
    ) -> Option<(T, f64, f64)> {
        let mut gamma = gamma;
        for _ in 0..=MAX_HALVINGS {
            if gamma < MIN_STEP {
                return None;
            }
            let (x, loss) = trial(gamma);
            if loss < current {
                return Some((x, loss, gamma));
            }
            gamma *= 0.5;
        }
        None
    }

    /// Assembles the damped reduced Hessian system at `state`.
    pub fn hessian_system(&self, state: &SolverState, lambda: f64) -> ReducedSystem {
        let graph = self.graph;
        let tau2 = graph.tau * graph.tau;
        let n_h = 2 * self.gauge.n_free;
        let n = n_h + self.basis.ncols();
        let free = |node: usize| self.gauge.free_index[node];
        let mut t: Vec<(usize, usize, f64)> = Vec::new();

        for (bi, b) in graph.bundles.iter().enumerate() {
            let wo = self.weight_offsets[bi];
            let w = &state.w[wo..wo + b.len()];
            let (_, m, col0) = self.basis.block(bi);
            let (fi, fj) = (free(b.i), free(b.j));

            // Offset-offset block: each candidate couples i and j with 2 w_k^2.
            let coupling: f64 = w[1..].iter().map(|wk| 2.0 * wk * wk).sum();
            for d in 0..2 {
                if let Some(i) = fi {
                    t.push((2 * i + d, 2 * i + d, coupling));
                }
                if let Some(j) = fj {
                    t.push((2 * j + d, 2 * j + d, coupling));
                }
                if let (Some(i), Some(j)) = (fi, fj) {
                    t.push((2 * i + d, 2 * j + d, -coupling));
                    t.push((2 * j + d, 2 * i + d, -coupling));
                }
            }

            // Diagonal weight Hessian: 2 tau^2 for the dummy, 2 |r_k|^2 for candidates.
            let mut diag = vec![2.0 * tau2; m];
            let mut mixed = vec![Vec2::ZERO; m];
            for (k, c) in b.candidates.iter().enumerate() {
                let r = c.delta + state.h[b.i] - state.h[b.j];
                diag[k + 1] = 2.0 * r.norm_squared();
                mixed[k + 1] = r * (4.0 * w[k + 1]);
            }

            for col in 0..m - 1 {
                // Offset-weight block times Z: sum_k d2f/dh_i dw_k Z[k, col].
                let mut hz = Vec2::ZERO;
                for (k, mk) in mixed.iter().enumerate().skip(1) {
                    hz += *mk * NullSpaceBasis::helmert(k, col);
                }
                let a_idx = n_h + col0 + col;
                for (d, v) in [(0, hz.x), (1, hz.y)] {
                    if v == 0.0 {
                        continue;
                    }
                    if let Some(i) = fi {
                        t.push((2 * i + d, a_idx, v));
                        t.push((a_idx, 2 * i + d, v));
                    }
                    if let Some(j) = fj {
                        t.push((2 * j + d, a_idx, -v));
                        t.push((a_idx, 2 * j + d, -v));
                    }
                }
                // Z^T diag Z block.
                for col2 in 0..m - 1 {
                    let v: f64 = (0..m)
                        .map(|k| {
                            NullSpaceBasis::helmert(k, col)
                                * diag[k]
                                * NullSpaceBasis::helmert(k, col2)
                        })
                        .sum();
                    if v != 0.0 {
                        t.push((a_idx, n_h + col0 + col2, v));
                    }
                }
            }
        }
        for d in 0..n {
            t.push((d, d, lambda));
        }

        let (gh, gw) = self.gradient(state);
        let mut rhs = vec![0.0; n];
        for (node, g) in gh.iter().enumerate() {
            if let Some(f) = free(node) {
                rhs[2 * f] = -g.x;
                rhs[2 * f + 1] = -g.y;
            }
        }
        for (slot, v) in rhs[n_h..].iter_mut().zip(self.basis.apply_transpose(&gw)) {
            *slot = -v;
        }
        ReducedSystem {
            matrix: CsrMatrix::from_triplets(n, t),
            rhs,
            n_offsets: n_h,
        }
    }

    /// Maps a reduced-system solution back to full offset and weight updates.
    pub fn expand_step(&self, x: &[f64], n_offsets: usize) -> (Vec<Vec2>, Vec<f64>) {
        let mut dh = vec![Vec2::ZERO; self.graph.nodes.len()];
        for (node, slot) in self.gauge.free_index.iter().enumerate() {
            if let Some(f) = slot {
                dh[node] = Vec2::new(x[2 * f], x[2 * f + 1]);
            }
        }
        let dw = self.basis.apply(&x[n_offsets..]);
        (dh, dw)
    }

    /// Levenberg-Marquardt step solved approximately by Jacobi-preconditioned CG.
    ///
    /// Falls back to a projected gradient step (initial step `1 / lambda`) when
    /// `retry_budget` damping increases fail to give a downhill step.
    pub fn lm_step(&self, state: &SolverState, config: &SolverConfig) -> Result<LmOutcome> {
        let mut lambda = state.lambda.clamp(LAMBDA_MIN, LAMBDA_MAX);
        let mut retries = 0;
        for _ in 0..config.retry_budget {
            let sys = self.hessian_system(state, lambda);
            if sys.rhs.iter().all(|&v| v == 0.0) {
                return Ok(LmOutcome {
                    state: state.clone(),
                    retries,
                    fell_back: false,
                });
            }
            let cg = pcg_jacobi(
                &sys.matrix,
                &sys.rhs,
                config.cg_max_iters,
                config.cg_rel_residual,
            );
            if cg.non_positive_curvature {
                lambda = (lambda * config.lambda_up).min(LAMBDA_MAX);
                retries += 1;
                continue;
            }
            let (dh, dw) = self.expand_step(&cg.x, sys.n_offsets);
            let h: Vec<Vec2> = state.h.iter().zip(&dh).map(|(h, d)| *h + *d).collect();
            let w: Vec<f64> = state.w.iter().zip(&dw).map(|(w, d)| w + d).collect();
            let loss = self.loss(&h, &w);
            if loss < state.loss {
                return Ok(LmOutcome {
                    state: SolverState {
                        h,
                        w,
                        lambda: (lambda * config.lambda_down).max(LAMBDA_MIN),
                        iteration: state.iteration + 1,
                        loss,
                    },
                    retries,
                    fell_back: false,
                });
            }
            lambda = (lambda * config.lambda_up).min(LAMBDA_MAX);
            retries += 1;
        }
        let gamma = 1.0 / lambda;
        let (mut next, _, _) = self.projected_gd_step(state, gamma, gamma)?;
        next.lambda = lambda;
        Ok(LmOutcome {
            state: next,
            retries,
            fell_back: true,
        })
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub state: SolverState,
    /// Damping increases before a step was accepted.
    pub retries: usize,
    pub fell_back: bool,
}
