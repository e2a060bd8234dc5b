mod common;

use multistitch::align::align;
use multistitch::graph::{ConstraintMatrix, NullSpaceBasis};
use multistitch::solver::{
    acyclic_bundles, gradient, residual, solve, Problem, SolverConfig, SolverMode, SolverState,
};
use multistitch::{AlignmentMultigraph, CandidateTransform, EdgeBundle, Vec2};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{loss_scalar, nodes_at, random_graph};

fn cand(x: f64, y: f64) -> CandidateTransform {
    CandidateTransform::new(Vec2::new(x, y), 0.9, 10)
}

fn dense(n: usize, f: impl Fn(usize, usize) -> f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, f)
}

/// 3x3 tile grid whose bundles each hold the exact delta plus false alternatives.
fn consistent_grid(rng: &mut ChaCha8Rng) -> (AlignmentMultigraph, Vec<Vec2>, Vec<usize>) {
    let truth: Vec<Vec2> = (0..9)
        .map(|id| {
            Vec2::new(
                (id % 3) as f64 * 100.0 + rng.gen_range(-2.0..2.0),
                (id / 3) as f64 * 100.0 + rng.gen_range(-2.0..2.0),
            )
        })
        .collect();
    let nominal: Vec<Vec2> = truth
        .iter()
        .enumerate()
        .map(|(id, _)| Vec2::new((id % 3) as f64 * 100.0, (id / 3) as f64 * 100.0))
        .collect();
    let mut g = AlignmentMultigraph::new(nodes_at(&nominal), 5.0).unwrap();
    let mut true_choice = Vec::new();
    for id in 0..9 {
        let mut nbrs = Vec::new();
        if id % 3 < 2 {
            nbrs.push(id + 1);
        }
        if id / 3 < 2 {
            nbrs.push(id + 3);
        }
        for j in nbrs {
            let d = truth[j] - truth[id];
            let mut cands = vec![cand(d.x + 20.0, d.y), cand(d.x, d.y - 20.0)];
            let slot = rng.gen_range(0..=cands.len());
            cands.insert(slot, CandidateTransform::new(d, 0.8, 10));
            true_choice.push(slot + 1);
            g.add_bundle(EdgeBundle::new(id, j, cands)).unwrap();
        }
    }
    (g, truth, true_choice)
}

fn choices(g: &AlignmentMultigraph, config: &SolverConfig) -> Vec<usize> {
    solve(g, config)
        .unwrap()
        .selected
        .iter()
        .map(|s| s.choice)
        .collect()
}

#[test]
fn residual_examples() {
    let g = AlignmentMultigraph::new(nodes_at(&[Vec2::ZERO, Vec2::ZERO]), 5.0)
        .unwrap()
        .with_bundle(EdgeBundle::new(0, 1, vec![cand(5.0, 0.0)]))
        .unwrap();
    assert_eq!(
        residual(&g, &[Vec2::ZERO, Vec2::new(5.0, 0.0)], 0, 0),
        Vec2::ZERO
    );
    assert_eq!(
        residual(&g, &[Vec2::ZERO, Vec2::ZERO], 0, 0),
        Vec2::new(5.0, 0.0)
    );
}

#[test]
fn reduced_hessian_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..10 {
        let (g, nominal) = random_graph(&mut rng, 5, 2);
        let problem = Problem::new(&g);
        let h: Vec<Vec2> = nominal
            .iter()
            .map(|o| *o + Vec2::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)))
            .collect();
        let w = g.flat_weights();
        let state = SolverState {
            loss: loss_scalar(&g, &h, &w),
            h: h.clone(),
            w: w.clone(),
            lambda: 0.0,
            iteration: 0,
        };
        let sys = problem.hessian_system(&state, 0.0);
        let n = sys.matrix.dim();
        if n == 0 {
            continue;
        }
        let f = |x: &[f64]| {
            let (dh, dw) = problem.expand_step(x, sys.n_offsets);
            let h: Vec<Vec2> = h.iter().zip(&dh).map(|(a, b)| *a + *b).collect();
            let w: Vec<f64> = w.iter().zip(&dw).map(|(a, b)| a + b).collect();
            loss_scalar(&g, &h, &w)
        };
        let e = 1e-3;
        let at = |i: usize, si: f64, j: usize, sj: f64| {
            let mut x = vec![0.0; n];
            x[i] += si * e;
            x[j] += sj * e;
            f(&x)
        };
        let fd = dense(n, |i, j| {
            (at(i, 1.0, j, 1.0) - at(i, 1.0, j, -1.0) - at(i, -1.0, j, 1.0) + at(i, -1.0, j, -1.0))
                / (4.0 * e * e)
        });
        let m = dense(n, |i, j| sys.matrix.get(i, j));
        let scale = m.amax().max(1.0);
        assert!(
            (&m - &fd).amax() / scale < 1e-5,
            "hessian mismatch {}",
            (&m - &fd).amax()
        );
        assert!(sys.matrix.max_asymmetry() < 1e-12);
        for i in 0..n {
            let mut xp = vec![0.0; n];
            let mut xm = vec![0.0; n];
            xp[i] = 1e-5;
            xm[i] = -1e-5;
            let g_fd = (f(&xp) - f(&xm)) / 2e-5;
            assert!((sys.rhs[i] + g_fd).abs() < 1e-5 * scale, "rhs {i}");
        }
    }
}

#[test]
fn heavy_damping_gives_gradient_direction() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let (g, nominal) = random_graph(&mut rng, 5, 2);
    let problem = Problem::new(&g);
    let w = g.flat_weights();
    let state = SolverState {
        loss: loss_scalar(&g, &nominal, &w),
        h: nominal,
        w,
        lambda: 1e12,
        iteration: 0,
    };
    let sys = problem.hessian_system(&state, 1e12);
    let n = sys.matrix.dim();
    let m = dense(n, |i, j| sys.matrix.get(i, j));
    let rhs = DVector::from_column_slice(&sys.rhs);
    let x = m.lu().solve(&rhs).unwrap();
    let cos = x.dot(&rhs) / (x.norm() * rhs.norm());
    assert!(cos > 1.0 - 1e-9, "cos {cos}");
}

#[test]
fn gd_step_descends_and_keeps_constraint() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for _ in 0..20 {
        let (g, nominal) = random_graph(&mut rng, 8, 3);
        let problem = Problem::new(&g);
        let w = g.flat_weights();
        let state = SolverState {
            loss: loss_scalar(&g, &nominal, &w),
            h: nominal,
            w,
            lambda: 1.0,
            iteration: 0,
        };
        let (next, _, _) = problem.projected_gd_step(&state, 1e-6, 1e-6).unwrap();
        assert!(next.loss < state.loss);
        assert!(problem.constraint.max_violation(&next.w) < 1e-10);
        for (node, pinned) in problem.gauge.pinned.iter().enumerate() {
            if *pinned {
                assert_eq!(next.h[node], state.h[node]);
            }
        }
    }
}

#[test]
fn gd_step_at_stationary_point_is_identity() {
    let g = AlignmentMultigraph::new(nodes_at(&[Vec2::ZERO, Vec2::new(5.0, 0.0)]), 5.0)
        .unwrap()
        .with_bundle(EdgeBundle::new(0, 1, vec![cand(5.0, 0.0)]).with_weights(vec![0.0, 1.0]))
        .unwrap();
    let problem = Problem::new(&g);
    let state = problem.initial_state(&SolverConfig::default());
    assert_eq!(state.loss, 0.0);
    let (next, _, _) = problem.projected_gd_step(&state, 1.0, 1.0).unwrap();
    assert_eq!(next.h, state.h);
    assert_eq!(next.w, state.w);
}

#[test]
fn lm_beats_gd_near_the_minimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    for _ in 0..5 {
        let (g, truth, _) = consistent_grid(&mut rng);
        let solved = solve(&g, &SolverConfig::default()).unwrap();
        let problem = Problem::new(&g);
        let h: Vec<Vec2> = solved
            .offsets
            .iter()
            .zip(&problem.gauge.pinned)
            .map(|(o, p)| {
                if *p {
                    *o
                } else {
                    *o + Vec2::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3))
                }
            })
            .collect();
        assert_eq!(h.len(), truth.len());
        let state = SolverState {
            loss: problem.loss(&h, &solved.weights),
            h,
            w: solved.weights.clone(),
            lambda: 1e-6,
            iteration: 0,
        };
        let lm = problem.lm_step(&state, &SolverConfig::default()).unwrap();
        let (gd, _, _) = problem.projected_gd_step(&state, 1.0, 1.0).unwrap();
        assert!(
            lm.state.loss <= gd.loss,
            "lm {} gd {}",
            lm.state.loss,
            gd.loss
        );
    }
}

#[test]
fn indefinite_curvature_step_still_descends() {
    // mixed offset-weight curvature 4 w r dominates: the Hessian is indefinite
    let g = AlignmentMultigraph::new(nodes_at(&[Vec2::ZERO, Vec2::ZERO]), 1e-6)
        .unwrap()
        .with_bundle(EdgeBundle::new(0, 1, vec![cand(20.0, 0.0)]).with_weights(vec![0.5, 0.5]))
        .unwrap();
    let problem = Problem::new(&g);
    let config = SolverConfig::default();
    let state = problem.initial_state(&config);
    let sys = problem.hessian_system(&state, 0.0);
    let m = dense(sys.matrix.dim(), |i, j| sys.matrix.get(i, j));
    assert!(m.symmetric_eigenvalues().min() < 0.0);
    let out = problem.lm_step(&state, &config).unwrap();
    assert!(out.state.loss < state.loss);
    assert!(problem.constraint.max_violation(&out.state.w) < 1e-12);
}

#[test]
fn consistent_grid_reaches_zero_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(35);
    for mode in [SolverMode::LevenbergMarquardt, SolverMode::GradientDescent] {
        let (g, _, true_choice) = consistent_grid(&mut rng);
        let config = SolverConfig {
            mode,
            max_iterations: 5000,
            ..SolverConfig::default()
        };
        let report = solve(&g, &config).unwrap();
        assert!(
            report.loss < 1e-6 * g.bundles.len() as f64,
            "{mode:?} loss {}",
            report.loss
        );
        let chosen: Vec<usize> = report.selected.iter().map(|s| s.choice).collect();
        assert_eq!(chosen, true_choice, "{mode:?}");
    }
}

#[test]
fn conflicting_bundle_in_four_cycle_is_cut() {
    let tau = 1.0;
    let nominal = [
        Vec2::ZERO,
        Vec2::new(100.0, 0.0),
        Vec2::new(100.0, 100.0),
        Vec2::new(0.0, 100.0),
    ];
    let g = AlignmentMultigraph::new(nodes_at(&nominal), tau)
        .unwrap()
        .with_bundle(EdgeBundle::new(0, 1, vec![cand(100.0, 0.0)]))
        .unwrap()
        .with_bundle(EdgeBundle::new(1, 2, vec![cand(0.0, 100.0)]))
        .unwrap()
        .with_bundle(EdgeBundle::new(2, 3, vec![cand(-100.0 + 10.0 * tau, 0.0)]))
        .unwrap()
        .with_bundle(EdgeBundle::new(0, 3, vec![cand(0.0, 100.0)]))
        .unwrap();
    let chosen = choices(&g, &SolverConfig::default());
    assert_eq!(chosen, vec![1, 1, 0, 1]);
}

#[test]
fn single_edge_is_flagged_acyclic() {
    let g = AlignmentMultigraph::new(nodes_at(&[Vec2::ZERO, Vec2::new(90.0, 0.0)]), 5.0)
        .unwrap()
        .with_bundle(EdgeBundle::new(0, 1, vec![cand(93.0, 1.0)]))
        .unwrap();
    assert_eq!(acyclic_bundles(&g), vec![0]);
    let report = solve(&g, &SolverConfig::default()).unwrap();
    assert_eq!(report.acyclic_bundles, vec![0]);
    assert!(report.loss < 1e-6);
    // the free tile absorbs the candidate exactly, so it wins whether or not it is true
    assert_eq!(report.selected[0].choice, 1);
}

#[test]
fn polished_weights_balance_costs() {
    let mut rng = ChaCha8Rng::seed_from_u64(36);
    for _ in 0..20 {
        let (g, _) = random_graph(&mut rng, 6, 3);
        let report = solve(&g, &SolverConfig::default()).unwrap();
        let mut at = 0;
        for (b, bundle) in g.bundles.iter().enumerate() {
            let w = &report.weights[at..at + bundle.len()];
            let mut terms = vec![2.0 * w[0] * g.tau * g.tau];
            for k in 0..bundle.candidates.len() {
                let r = residual(&g, &report.offsets, b, k);
                terms.push(2.0 * w[k + 1] * r.norm_squared());
            }
            let max = terms.iter().cloned().fold(f64::MIN, f64::max);
            let min = terms.iter().cloned().fold(f64::MAX, f64::min);
            assert!(
                (max - min) <= 1e-4 * max.abs().max(1e-12),
                "bundle {b}: {terms:?}"
            );
            at += bundle.len();
        }
        let (_, gw) = gradient(
            &g,
            &report.offsets,
            &report.weights,
            &vec![false; g.nodes.len()],
        );
        let pg = g.nullspace_basis().project(&gw);
        let scale = gw.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let worst = pg.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst <= 1e-8 * scale, "{worst:e} vs scale {scale:e}");
    }
}

#[test]
fn translating_the_stage_translates_the_solution() {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    let (g, _, _) = consistent_grid(&mut rng);
    let shift = Vec2::new(37.5, -12.25);
    let mut moved = g.clone();
    for n in &mut moved.nodes {
        n.nominal_offset += shift;
    }
    let a = solve(&g, &SolverConfig::default()).unwrap();
    let b = solve(&moved, &SolverConfig::default()).unwrap();
    assert_eq!(a.selected, b.selected);
    for (x, y) in a.offsets.iter().zip(&b.offsets) {
        assert!((*x + shift - *y).norm() < 1e-8);
    }
    assert!((a.loss - b.loss).abs() <= 1e-9 * a.loss.max(1.0));
}

#[test]
fn solve_is_deterministic_and_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(38);
    let (g, _) = random_graph(&mut rng, 8, 3);
    let a = solve(&g, &SolverConfig::default()).unwrap();
    let b = solve(&g, &SolverConfig::default()).unwrap();
    assert_eq!(a, b);
    assert!(a.loss_curve.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn tiny_tau_drops_noisy_edges() {
    let mut rng = ChaCha8Rng::seed_from_u64(39);
    let (mut g, _, _) = consistent_grid(&mut rng);
    for b in &mut g.bundles {
        for c in &mut b.candidates {
            c.delta += Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
    }
    let mut loose = g.clone();
    loose.tau = 5.0;
    g.tau = 0.01;
    let count = |g: &AlignmentMultigraph| {
        let mut g = g.clone();
        multistitch::solver::solve_in_place(&mut g, &SolverConfig::default()).unwrap();
        align(&g).unwrap().1.edges_retained
    };
    assert!(
        count(&g) <= g.bundles.len() / 2,
        "tight tau kept {}",
        count(&g)
    );
    assert!(count(&loose) > count(&g));
}

proptest! {
    #[test]
    fn nullspace_basis_properties(sizes in prop::collection::vec(1usize..6, 1..6)) {
        let j = ConstraintMatrix::from_bundle_sizes(sizes.iter().map(|s| s + 1));
        let z = NullSpaceBasis::new(&j);
        let jd = j.to_dense();
        let zd = z.to_dense();
        let (rows, cols) = (zd.len(), zd[0].len());
        let zm = DMatrix::from_fn(rows, cols, |r, c| zd[r][c]);
        let jm = DMatrix::from_fn(jd.len(), rows, |r, c| jd[r][c]);
        let p = &zm * zm.transpose();
        prop_assert!((zm.transpose() * &zm - DMatrix::identity(cols, cols)).amax() < 1e-10);
        prop_assert!((&jm * &zm).amax() < 1e-10);
        prop_assert!((&p * &p - &p).amax() < 1e-10);
        prop_assert!((&p - p.transpose()).amax() < 1e-10);
        prop_assert!((&jm * &p).amax() < 1e-10);
    }

    #[test]
    fn projection_matches_dense(sizes in prop::collection::vec(1usize..6, 1..6), seed in any::<u64>()) {
        let j = ConstraintMatrix::from_bundle_sizes(sizes.iter().map(|s| s + 1));
        let z = NullSpaceBasis::new(&j);
        let zd = z.to_dense();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f64> = (0..zd.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let fast = z.project(&v);
        for r in 0..zd.len() {
            let slow: f64 = (0..zd.len())
                .map(|c| (0..zd[0].len()).map(|t| zd[r][t] * zd[c][t]).sum::<f64>() * v[c])
                .sum();
            prop_assert!((fast[r] - slow).abs() < 1e-12);
        }
    }
}
