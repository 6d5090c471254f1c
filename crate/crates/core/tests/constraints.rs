mod common;

use common::*;
use gpc_cddp::constraints::{
    al_penalty, al_update, lambda_max_with_grad, obstacle_constraint, solve_constrained, AlOptions, AlState,
    ChanceSampler, ConstrainedProblem,
};
use gpc_cddp::ddp::{self, GpcStepper, Problem};
use gpc_cddp::runtime::Setup;
use gpc_cddp::{BasisSet, ChanceSpec, CircleObstacle, GpcVector, PolyFamily, ScenarioConfig};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

/// Position `mean + L ξ` expanded in a first-order Hermite basis.
fn linear_gaussian(l: &DMatrix<f64>, mean: &[f64]) -> (BasisSet, GpcVector) {
    let k = mean.len();
    let basis = BasisSet::new(&vec![PolyFamily::Hermite; k], 1).unwrap();
    let mut x = GpcVector::zeros(k, basis.len());
    for i in 0..k {
        x.set(i, 0, mean[i]);
    }
    for (j, idx) in basis.indices().iter().enumerate().skip(1) {
        let d = idx.entries().iter().position(|&v| v == 1).unwrap();
        for i in 0..k {
            x.set(i, j, l[(i, d)]);
        }
    }
    (basis, x)
}

#[test]
fn three_dimensional_scaling_matches_chi_square() {
    let l = DMatrix::from_row_slice(3, 3, &[0.2, 0.0, 0.0, 0.05, 0.1, 0.0, -0.03, 0.02, 0.15]);
    let (basis, x) = linear_gaussian(&l, &[1.0, 2.0, 3.0]);
    let spec = ChanceSpec { p: 0.95, n_samples: 10_000, seed: 3, position_dims: vec![0, 1, 2] };
    let s = ChanceSampler::new(&basis, spec).unwrap().scaling_factor(&x, &basis).unwrap().value;
    // chi-square(3) 0.95 quantile
    assert!((s - 7.814727903251178).abs() / 7.814727903251178 < 0.05);
}

#[test]
fn gaussian_coverage_at_other_levels() {
    let l = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, -0.2, 0.1]);
    let (basis, x) = linear_gaussian(&l, &[0.0, 0.0]);
    let sigma = &l * l.transpose();
    let inv = sigma.try_inverse().unwrap();
    for p in [0.5, 0.9, 0.99] {
        let spec = ChanceSpec { p, n_samples: 20_000, seed: 5, position_dims: vec![0, 1] };
        let s = ChanceSampler::new(&basis, spec).unwrap().scaling_factor(&x, &basis).unwrap().value;
        let mut r = rng(8);
        let n = 50_000;
        let inside = (0..n)
            .filter(|_| {
                let d = &l * DVector::from_fn(2, |_, _| r.sample::<f64, _>(StandardNormal));
                d.dot(&(&inv * &d)) <= s
            })
            .count();
        assert!((inside as f64 / n as f64 - p).abs() < 0.015, "p = {p}");
    }
}

#[test]
fn circle_contains_the_ellipse() {
    let mut r = rng(4);
    for _ in 0..200 {
        let m = DMatrix::from_fn(2, 2, |_, _| r.random_range(-1.0..1.0));
        let sigma = &m * m.transpose();
        let s: f64 = r.random_range(1.0..10.0);
        let lm = lambda_max_with_grad(&sigma).value;
        let chol = sigma.clone().cholesky().unwrap();
        for t in 0..64 {
            let a = t as f64 / 64.0 * std::f64::consts::TAU;
            let boundary = chol.l() * DVector::from_row_slice(&[a.cos(), a.sin()]) * s.sqrt();
            assert!(boundary.norm() <= (s * lm).sqrt() + 1e-9);
        }
    }
}

#[test]
fn penalty_examples() {
    assert_eq!(al_penalty(0.0, 10.0, -0.3).0, 0.0);
    let (v, d, _) = al_penalty(0.0, 10.0, 0.5);
    assert!((v - 1.25).abs() < 1e-15);
    assert!((v - 10.0 * 0.25 / 2.0).abs() < 1e-15);
    assert!((d - 5.0).abs() < 1e-15);
    // Kink at λ + μG = 0: both one-sided derivatives vanish.
    let left = al_penalty(1.0, 10.0, -0.1 - 1e-9).1;
    let right = al_penalty(1.0, 10.0, -0.1 + 1e-9).1;
    assert!(left.abs() < 1e-7 && right.abs() < 1e-7);
}

#[test]
fn deterministic_constraint_examples() {
    let basis = BasisSet::new(&[PolyFamily::Hermite], 1).unwrap();
    let mut x = GpcVector::zeros(3, basis.len());
    x.set(0, 0, 2.0);
    let obs = CircleObstacle::new(vec![0.0, 0.0], 0.5).unwrap();
    let g = obstacle_constraint(&x, &basis, &obs, 5.99, &[0, 1]).unwrap();
    assert!((g.value + 3.75).abs() < 1e-14);
    x.set(0, 0, 0.5);
    assert!(obstacle_constraint(&x, &basis, &obs, 5.99, &[0, 1]).unwrap().value.abs() < 1e-15);
}

fn small_robot() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::desk_robot();
    cfg.horizon = 20;
    cfg.target = vec![1.0, 0.0, 0.0];
    cfg.limits = gpc_cddp::BoxLimits::symmetric(20.0, 2);
    cfg
}

#[test]
fn no_obstacles_reduces_to_plain_ddp() {
    let mut cfg = small_robot();
    cfg.obstacles.clear();
    let setup = Setup::gpc(&cfg).unwrap();
    let x0 = setup.model.lift(&cfg.initial_state);
    let init = vec![DVector::from_vec(vec![1.0, 1.0]); cfg.horizon];
    let cp = ConstrainedProblem {
        model: &setup.model,
        dynamics: setup.dynamics.as_ref(),
        dt: cfg.dt,
        cost: &setup.cost,
        x0: x0.clone(),
        limits: Some(&setup.limits),
        obstacles: &[],
        sampler: &setup.sampler,
    };
    let constrained = solve_constrained(&cp, &init, None, &cfg.solver, &cfg.al).unwrap();
    let stepper = GpcStepper::new(&setup.model, setup.dynamics.as_ref(), cfg.dt);
    let plain = ddp::solve(
        &Problem { dynamics: &stepper, cost: &setup.cost, x0: x0.into_data(), limits: Some(&setup.limits) },
        &init,
        &cfg.solver,
    )
    .unwrap();
    assert!((constrained.cost - plain.cost).abs() <= 1e-10);
}

#[test]
fn blocking_obstacle_is_avoided() {
    let mut cfg = small_robot();
    cfg.obstacles = vec![CircleObstacle::new(vec![0.5, 0.02], 0.15).unwrap()];
    for setup in [Setup::deterministic(&cfg).unwrap(), Setup::gpc(&cfg).unwrap()] {
        let cp = ConstrainedProblem {
            model: &setup.model,
            dynamics: setup.dynamics.as_ref(),
            dt: cfg.dt,
            cost: &setup.cost,
            x0: setup.model.lift(&cfg.initial_state),
            limits: Some(&setup.limits),
            obstacles: &setup.obstacles,
            sampler: &setup.sampler,
        };
        let init = vec![DVector::from_vec(vec![2.0, 2.0]); cfg.horizon];
        let sol = solve_constrained(&cp, &init, None, &cfg.solver, &cfg.al).unwrap();
        let worst = sol.constraint_values.iter().flatten().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        assert!(worst <= 1e-3, "max G {worst}");
        if sol.report.converged {
            assert!(worst < cfg.al.tol);
        }
        assert!(sol.controls.iter().all(|u| setup.limits.contains(u.as_slice())));
        assert!(sol.scaling.iter().all(|s| s.is_finite() && *s >= 0.0));
    }
}

proptest! {
    #[test]
    fn multipliers_and_penalties_are_monotone(
        g in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 5), 3),
        rounds in 1usize..6,
    ) {
        let opts = AlOptions::default();
        let mut state = AlState::new(3, 5, opts.mu_init);
        for round in 0..rounds {
            let scaled: Vec<Vec<f64>> = g.iter().map(|row| row.iter().map(|v| v / (round + 1) as f64).collect()).collect();
            let next = al_update(&state, &scaled, &opts);
            for i in 0..3 {
                for k in 0..5 {
                    prop_assert!(next.lambdas[i][k] >= 0.0);
                    prop_assert!(next.penalties[i][k] >= state.penalties[i][k]);
                    prop_assert!(next.penalties[i][k] <= opts.mu_max);
                }
            }
            state = next;
        }
    }

    #[test]
    fn constraint_gradient_matches_finite_differences(seed in 0u64..100_000) {
        let mut r = rng(seed);
        let cfg = ScenarioConfig::desk_robot();
        let setup = Setup::gpc(&cfg).unwrap();
        let model = &setup.model;
        let data = DVector::from_fn(model.coeff_dim(), |i, _| {
            if i % model.terms() == 0 { r.random_range(-2.0..2.0) } else { r.random_range(-0.2..0.2) }
        });
        let x = GpcVector::from_data(3, model.terms(), data).unwrap();
        let obs = CircleObstacle::new(vec![r.random_range(-2.0..2.0), r.random_range(-2.0..2.0)], 0.35).unwrap();
        let s = r.random_range(1.0..9.0);
        let eval = obstacle_constraint(&x, model.basis(), &obs, s, &[0, 1]).unwrap();
        for c in 0..model.coeff_dim() {
            let fd = central_diff(
                |d| {
                    let v = GpcVector::from_data(3, model.terms(), DVector::from_column_slice(d)).unwrap();
                    obstacle_constraint(&v, model.basis(), &obs, s, &[0, 1]).unwrap().value
                },
                x.data().as_slice(),
                c,
                1e-6,
            );
            prop_assert!((fd - eval.grad[c]).abs() <= 1e-5);
        }
    }
}
