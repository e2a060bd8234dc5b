//! Joint minimization over tile offsets and bundle weights, with the weights
//! kept on the affine set `J w = 1` by moving only inside the null space of `J`.

pub mod objective;
mod problem;

use log::debug;
use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use crate::error::{Result, StitchError};
use crate::geometry::Vec2;
use crate::graph::AlignmentMultigraph;

pub use objective::{bundle_loss, gradient, loss, optimal_bundle_weights, residual};
pub use problem::{Gauge, LmOutcome, Problem, ReducedSystem, MIN_STEP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMode {
    GradientDescent,
    LevenbergMarquardt,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Stop once the relative loss decrease of an accepted step falls below this.
    pub rel_tol: f64,
    pub lambda0: f64,
    pub lambda_down: f64,
    pub lambda_up: f64,
    /// Damping increases per LM step before falling back to gradient descent.
    pub retry_budget: usize,
    pub cg_max_iters: usize,
    pub cg_rel_residual: f64,
    /// Initial step size for gradient descent.
    pub gd_step: f64,
    pub mode: SolverMode,
    /// Finish with the exact weight minimizer for the final offsets.
    pub polish_weights: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            rel_tol: 1e-9,
            lambda0: 1e-2,
            lambda_down: 0.5,
            lambda_up: 4.0,
            retry_budget: 10,
            cg_max_iters: 10,
            cg_rel_residual: 0.1,
            gd_step: 1.0,
            mode: SolverMode::LevenbergMarquardt,
            polish_weights: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_down < 1.0 && 1.0 < self.lambda_up && self.lambda_down > 0.0) {
            return Err(StitchError::Config(
                "lambda schedule needs 0 < lambda_down < 1 < lambda_up".into(),
            ));
        }
        if self.cg_max_iters == 0 {
            return Err(StitchError::Config("cg_max_iters must be >= 1".into()));
        }
        if self.lambda0.is_nan() || self.lambda0 <= 0.0 {
            return Err(StitchError::Config("lambda0 must be positive".into()));
        }
        if self.gd_step.is_nan() || self.gd_step <= 0.0 {
            return Err(StitchError::Config("gd_step must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    /// Offset per node; component reference nodes stay at their initial value.
    pub h: Vec<Vec2>,
    /// Flat weights, bundle-major, dummy first.
    pub w: Vec<f64>,
    pub lambda: f64,
    pub iteration: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub i: usize,
    pub j: usize,
    /// Winning weight index; 0 is the dummy.
    pub choice: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub loss: f64,
    pub iterations: usize,
    pub offsets: Vec<Vec2>,
    pub selected: Vec<Selection>,
    pub loss_curve: Vec<f64>,
    /// Bundles on no cycle: their candidates cannot be cross-checked.
    pub acyclic_bundles: Vec<usize>,
    pub weights: Vec<f64>,
    pub lambda_history: Vec<f64>,
    /// Largest `|J w - 1|` seen over accepted iterates.
    pub max_constraint_violation: f64,
    pub converged: bool,
    pub mode: SolverMode,
}

impl SolveReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Copies the solved weights and offsets into `graph` and marks it solved.
    pub fn apply_to(&self, graph: &mut AlignmentMultigraph) {
        graph.set_flat_weights(&self.weights);
        for (node, off) in graph.nodes.iter_mut().zip(&self.offsets) {
            node.solved_offset = Some(*off);
        }
        graph.solved = true;
    }
}

/// Bundles whose pair is a bridge of the tile connectivity graph.
pub fn acyclic_bundles(graph: &AlignmentMultigraph) -> Vec<usize> {
    let n = graph.nodes.len();
    (0..graph.bundles.len())
        .filter(|&skip| {
            let mut uf = UnionFind::<usize>::new(n);
            for (idx, b) in graph.bundles.iter().enumerate() {
                if idx != skip {
                    uf.union(b.i, b.j);
                }
            }
            let b = &graph.bundles[skip];
            !uf.equiv(b.i, b.j)
        })
        .collect()
}

/// Minimizes the multigraph loss from nominal offsets and the graph's weights.
/// Always returns the best iterate found.
pub fn solve(graph: &AlignmentMultigraph, config: &SolverConfig) -> Result<SolveReport> {
    config.validate()?;
    let problem = Problem::new(graph);
    let mut state = problem.initial_state(config);
    let mut loss_curve = vec![state.loss];
    let mut lambda_history = vec![state.lambda];
    let mut max_violation = problem.constraint.max_violation(&state.w);
    let mut converged = false;
    let (mut gamma_h, mut gamma_w) = (config.gd_step, config.gd_step);
    let gamma_max = config.gd_step.max(1.0) * 1e6;

    while state.iteration < config.max_iterations {
        if state.loss == 0.0 {
            converged = true;
            break;
        }
        let next =
            match config.mode {
                SolverMode::LevenbergMarquardt => problem.lm_step(&state, config).map(|o| o.state),
                SolverMode::GradientDescent => problem
                    .projected_gd_step(&state, gamma_h, gamma_w)
                    .map(|(s, gh, gw)| {
                        gamma_h = (2.0 * gh).min(gamma_max);
                        gamma_w = (2.0 * gw).min(gamma_max);
                        s
                    }),
            };
        let next = match next {
            Ok(s) => s,
            Err(StitchError::StepFailure) => {
                debug!("no downhill step at iteration {}", state.iteration);
                converged = true;
                break;
            }
            Err(e) => return Err(e),
        };
        if next.loss >= state.loss {
            converged = true;
            break;
        }
        let decrease = (state.loss - next.loss) / state.loss.max(f64::MIN_POSITIVE);
        max_violation = max_violation.max(problem.constraint.max_violation(&next.w));
        loss_curve.push(next.loss);
        lambda_history.push(next.lambda);
        state = next;
        if decrease < config.rel_tol {
            converged = true;
            break;
        }
    }

    if config.polish_weights {
        // exact minimizer at fixed h; a loss comparison cannot resolve weight errors below sqrt(eps)
        let w: Vec<f64> = (0..graph.bundles.len())
            .flat_map(|b| optimal_bundle_weights(graph, &state.h, b))
            .collect();
        let polished = problem.loss(&state.h, &w);
        max_violation = max_violation.max(problem.constraint.max_violation(&w));
        if polished < state.loss {
            loss_curve.push(polished);
            lambda_history.push(state.lambda);
        }
        state.w = w;
        state.loss = polished;
    }

    let mut selected = Vec::with_capacity(graph.bundles.len());
    let mut at = 0;
    for b in &graph.bundles {
        let mut bundle = b.clone();
        bundle.weights = state.w[at..at + b.len()].to_vec();
        selected.push(Selection {
            i: b.i,
            j: b.j,
            choice: bundle.argmax(),
        });
        at += b.len();
    }

    Ok(SolveReport {
        loss: state.loss,
        iterations: state.iteration,
        offsets: state.h,
        selected,
        loss_curve,
        acyclic_bundles: acyclic_bundles(graph),
        weights: state.w,
        lambda_history,
        max_constraint_violation: max_violation,
        converged,
        mode: config.mode,
    })
}

/// Solves and writes the result back into the graph.
pub fn solve_in_place(
    graph: &mut AlignmentMultigraph,
    config: &SolverConfig,
) -> Result<SolveReport> {
    let report = solve(graph, config)?;
    report.apply_to(graph);
    Ok(report)
}
