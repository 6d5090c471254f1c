//! Self-checks behind the `validate` command: quadrature exactness and
//! orthogonality, gPC moments against sampling, DDP against a Riccati
//! recursion, and analytic derivatives against finite differences.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constraints::{lambda_max_with_grad, obstacle_constraint, CircleObstacle};
use crate::ddp::{self, CostModel, LinearSystem, Problem, SolverOptions};
use crate::error::Result;
use crate::gpc::{sample_xi, GpcModel, GpcVector, UncertainParam};
use crate::models::{euler_step, Unicycle};
use crate::orthopoly::{BasisSet, PolyFamily, QuadratureRule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Worst observed error.
    pub error: f64,
    pub tolerance: f64,
}

impl Check {
    fn new(name: &str, error: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            passed: error <= tolerance,
            error,
            tolerance,
        }
    }
}

/// Runs every suite with random instances drawn from `seed`.
pub fn run_all(seed: u64) -> Result<Vec<Check>> {
    Ok(vec![
        quadrature_moments()?,
        gram_orthogonality()?,
        unicycle_moments(seed, 20_000)?,
        riccati(seed, 5)?,
        galerkin_jacobian(seed, 20)?,
        constraint_gradient(seed, 20)?,
    ])
}

fn exact_moment(family: PolyFamily, k: usize) -> f64 {
    if k % 2 == 1 {
        return 0.0;
    }
    match family {
        PolyFamily::Hermite => (1..k).step_by(2).map(|v| v as f64).product(),
        PolyFamily::Legendre => 1.0 / (k as f64 + 1.0),
    }
}

/// `q`-node rules integrate `z^k` exactly for `k ≤ 2q - 1`.
pub fn quadrature_moments() -> Result<Check> {
    let mut worst = 0.0f64;
    for family in [PolyFamily::Hermite, PolyFamily::Legendre] {
        for q in 1..=8 {
            let (nodes, weights) = family.gauss_rule(q)?;
            for k in 0..2 * q {
                let approx: f64 = nodes.iter().zip(&weights).map(|(z, w)| w * z.powi(k as i32)).sum();
                let exact = exact_moment(family, k);
                worst = worst.max((approx - exact).abs() / exact.abs().max(1.0));
            }
        }
    }
    Ok(Check::new("quadrature moment exactness", worst, 1e-11))
}

/// The Gram matrix of the basis under its quadrature is `diag(γ)`.
pub fn gram_orthogonality() -> Result<Check> {
    let mut worst = 0.0f64;
    let mixes: [&[PolyFamily]; 4] = [
        &[PolyFamily::Hermite],
        &[PolyFamily::Legendre, PolyFamily::Hermite],
        &[PolyFamily::Hermite; 3],
        &[PolyFamily::Legendre, PolyFamily::Legendre, PolyFamily::Hermite],
    ];
    for families in mixes {
        for r in 0..=3 {
            let basis = BasisSet::new(families, r)?;
            let quad = QuadratureRule::gauss(families, r + 1)?;
            let t = basis.len();
            let mut gram = DMatrix::zeros(t, t);
            for (xi, w) in quad.nodes().zip(quad.weights()) {
                let phi = basis.eval_all(xi)?;
                gram += DMatrix::from_fn(t, t, |a, b| w * phi[a] * phi[b]);
            }
            for a in 0..t {
                for b in 0..t {
                    let expect = if a == b { basis.norms()[a] } else { 0.0 };
                    worst = worst.max((gram[(a, b)] - expect).abs());
                }
            }
        }
    }
    Ok(Check::new("basis orthogonality", worst, 1e-10))
}

/// Largest relative mismatch between gPC and sampled moments of the robot
/// after 60 Euler steps under a fixed control.
pub fn unicycle_moments(seed: u64, samples: usize) -> Result<Check> {
    let families = [PolyFamily::Hermite; 3];
    let basis = BasisSet::new(&families, 2)?;
    let spread = 1.5e-3f64.sqrt();
    let params = (0..3)
        .map(|k| UncertainParam::new(format!("p{k}"), PolyFamily::Hermite, 0.2, spread, k))
        .collect::<Result<Vec<_>>>()?;
    let model = GpcModel::with_gauss(basis, 4, params.clone(), 3, 2)?;
    let u = [3.0, 2.5];
    let dt = 0.02;
    let mut x = model.lift(&[0.0, 0.0, 0.0]);
    for _ in 0..60 {
        x = model.euler_step(&Unicycle, &x, &u, dt)?;
    }
    let mean = x.mean();
    let cov = x.covariance(model.basis())?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = DVector::zeros(3);
    let mut outer = DMatrix::zeros(3, 3);
    for _ in 0..samples {
        let xi = sample_xi(model.basis(), &mut rng);
        let p: Vec<f64> = params.iter().map(|p| p.realize(&xi)).collect();
        let mut s = vec![0.0; 3];
        for _ in 0..60 {
            s = euler_step(&Unicycle, &s, &u, &p, dt)?.as_slice().to_vec();
        }
        let v = DVector::from_vec(s);
        outer += &v * v.transpose();
        sum += v;
    }
    let n = samples as f64;
    let mc_mean = &sum / n;
    let mc_cov = (outer - &mc_mean * mc_mean.transpose() * n) / (n - 1.0);
    let mut worst = 0.0f64;
    for i in 0..3 {
        let scale = mean[i].abs().max(0.05);
        worst = worst.max((mean[i] - mc_mean[i]).abs() / scale);
    }
    worst = worst.max((&cov - &mc_cov).norm() / mc_cov.norm());
    Ok(Check::new("gPC moments vs sampling", worst, 0.05))
}

fn random_spd(n: usize, rng: &mut ChaCha8Rng, shift: f64) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &m * m.transpose() / n as f64 + DMatrix::identity(n, n) * shift
}

/// DDP on random linear-quadratic problems against the textbook Riccati recursion.
pub fn riccati(seed: u64, instances: usize) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let n = rng.random_range(2..12);
        let m = rng.random_range(1..4);
        let steps = rng.random_range(5..25);
        let a = DMatrix::identity(n, n) + DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.1..0.1));
        let b = DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0));
        let q = random_spd(n, &mut rng, 0.1);
        let r = random_spd(m, &mut rng, 0.5);
        let qf = random_spd(n, &mut rng, 1.0);
        let x0 = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));

        let mut p = qf.clone();
        let mut gains = vec![DMatrix::zeros(m, n); steps];
        for k in (0..steps).rev() {
            let s = &r + b.transpose() * &p * &b;
            let gain = -s.clone().cholesky().expect("positive definite").solve(&(b.transpose() * &p * &a));
            p = &q + a.transpose() * &p * (&a + &b * &gain);
            p = (&p + p.transpose()) * 0.5;
            gains[k] = gain;
        }
        let optimal = 0.5 * x0.dot(&(&p * &x0));

        let system = LinearSystem { a, b };
        let cost = CostModel {
            state_weight: q,
            control_weight: r,
            terminal_weight: qf,
            targets: vec![DVector::zeros(n)],
        };
        let problem = Problem {
            dynamics: &system,
            cost: &cost,
            x0,
            limits: None,
        };
        let sol = ddp::solve(&problem, &vec![DVector::zeros(m); steps], &SolverOptions::default())?;
        worst = worst.max((sol.cost - optimal).abs() / optimal.abs().max(1.0));
        for (k, g) in gains.iter().enumerate() {
            worst = worst.max((&sol.policy.feedback[k] - g).amax());
        }
    }
    Ok(Check::new("DDP vs Riccati recursion", worst, 1e-7))
}

fn robot_model() -> Result<GpcModel> {
    let families = [PolyFamily::Hermite; 3];
    let params = (0..3)
        .map(|k| UncertainParam::new(format!("p{k}"), PolyFamily::Hermite, 0.2, 0.04, k))
        .collect::<Result<Vec<_>>>()?;
    GpcModel::with_gauss(BasisSet::new(&families, 2)?, 4, params, 3, 2)
}

fn random_state(model: &GpcModel, rng: &mut ChaCha8Rng) -> Result<GpcVector> {
    let data = DVector::from_fn(model.coeff_dim(), |r, _| {
        if r % model.terms() == 0 {
            rng.random_range(-2.0..2.0)
        } else {
            rng.random_range(-0.1..0.1)
        }
    });
    GpcVector::from_data(model.state_dim(), model.terms(), data)
}

/// Galerkin Jacobians against central differences of the projected dynamics.
pub fn galerkin_jacobian(seed: u64, instances: usize) -> Result<Check> {
    let model = robot_model()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let x = random_state(&model, &mut rng)?;
        let u = [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)];
        let (a, b) = model.jacobian(&Unicycle, &x, &u)?;
        for c in 0..model.coeff_dim() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp.data_mut()[c] += h;
            xm.data_mut()[c] -= h;
            let fd = (model.rhs(&Unicycle, &xp, &u)?.into_data() - model.rhs(&Unicycle, &xm, &u)?.into_data()) / (2.0 * h);
            worst = worst.max((fd - a.column(c)).amax());
        }
        for k in 0..2 {
            let mut up = u;
            let mut um = u;
            up[k] += h;
            um[k] -= h;
            let fd = (model.rhs(&Unicycle, &x, &up)?.into_data() - model.rhs(&Unicycle, &x, &um)?.into_data()) / (2.0 * h);
            worst = worst.max((fd - b.column(k)).amax());
        }
    }
    Ok(Check::new("Galerkin Jacobian vs finite differences", worst, 1e-5))
}

/// Obstacle-constraint and `λmax` gradients against central differences.
pub fn constraint_gradient(seed: u64, instances: usize) -> Result<Check> {
    let model = robot_model()?;
    let basis = model.basis();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let x = random_state(&model, &mut rng)?;
        let obs = CircleObstacle::new(vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)], 0.3)?;
        let s = rng.random_range(1.0..8.0);
        let eval = obstacle_constraint(&x, basis, &obs, s, &[0, 1])?;
        for c in 0..model.coeff_dim() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp.data_mut()[c] += h;
            xm.data_mut()[c] -= h;
            let gp = obstacle_constraint(&xp, basis, &obs, s, &[0, 1])?.value;
            let gm = obstacle_constraint(&xm, basis, &obs, s, &[0, 1])?.value;
            worst = worst.max(((gp - gm) / (2.0 * h) - eval.grad[c]).abs());
        }

        let sigma = x.covariance_of(basis, &[0, 1])?;
        let lm = lambda_max_with_grad(&sigma);
        for a in 0..2 {
            for b in a..2 {
                let mut dp = sigma.clone();
                let mut dm = sigma.clone();
                dp[(a, b)] += h;
                dm[(a, b)] -= h;
                if a != b {
                    dp[(b, a)] += h;
                    dm[(b, a)] -= h;
                }
                let fd = (lambda_max_with_grad(&dp).value - lambda_max_with_grad(&dm).value) / (2.0 * h);
                let analytic = if a == b { lm.grad[(a, a)] } else { lm.grad[(a, b)] + lm.grad[(b, a)] };
                worst = worst.max((fd - analytic).abs());
            }
        }
    }
    Ok(Check::new("constraint and λmax gradients vs finite differences", worst, 1e-5))
}
