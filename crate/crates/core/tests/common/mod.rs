//! Reference implementations used as test oracles. Nothing here calls into
//! the library's numerics; inputs and outputs are plain vectors.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `E[z^k]` for a standard normal.
pub fn gaussian_moment(k: usize) -> f64 {
    if k % 2 == 1 {
        0.0
    } else {
        (1..k).step_by(2).map(|v| v as f64).product()
    }
}

/// `E[z^k]` for `z` uniform on `[-1, 1]`.
pub fn uniform_moment(k: usize) -> f64 {
    if k % 2 == 1 {
        0.0
    } else {
        1.0 / (k as f64 + 1.0)
    }
}

/// Probabilists' Hermite polynomial from its explicit sum
/// `He_n(z) = n! Σ_m (-1)^m z^{n-2m} / (m! (n-2m)! 2^m)`.
pub fn hermite_explicit(n: usize, z: f64) -> f64 {
    let fact = |k: usize| (1..=k).map(|v| v as f64).product::<f64>();
    (0..=n / 2)
        .map(|m| {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            sign * fact(n) / (fact(m) * fact(n - 2 * m) * 2f64.powi(m as i32)) * z.powi((n - 2 * m) as i32)
        })
        .sum()
}

/// Legendre polynomial from Rodrigues' expansion
/// `P_n(z) = 2^-n Σ_k (-1)^k C(n,k) C(2n-2k, n) z^{n-2k}`.
pub fn legendre_explicit(n: usize, z: f64) -> f64 {
    let binom = |a: usize, b: usize| (0..b).fold(1.0, |acc, i| acc * (a - i) as f64 / (i + 1) as f64);
    let s: f64 = (0..=n / 2)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * binom(n, k) * binom(2 * n - 2 * k, n) * z.powi((n - 2 * k) as i32)
        })
        .sum();
    s / 2f64.powi(n as i32)
}

/// Unicycle `(x, y, θ)` Euler step with parameters `(d, r_R, r_L)`.
pub fn unicycle_step(s: [f64; 3], u: [f64; 2], p: [f64; 3], dt: f64) -> [f64; 3] {
    let v = 0.5 * (p[1] * u[0] + p[2] * u[1]);
    let w = (p[1] * u[0] - p[2] * u[1]) / (2.0 * p[0]);
    [s[0] + dt * v * s[2].cos(), s[1] + dt * v * s[2].sin(), s[2] + dt * w]
}

/// Sample mean and unbiased covariance of the unicycle state after `steps`
/// Euler steps under constant `u`, with Gaussian parameters `N(mean, var)`.
pub fn unicycle_monte_carlo(
    samples: usize,
    steps: usize,
    u: [f64; 2],
    mean: f64,
    var: f64,
    dt: f64,
    seed: u64,
) -> (DVector<f64>, DMatrix<f64>) {
    let mut r = rng(seed);
    let sd = var.sqrt();
    let mut sum = DVector::zeros(3);
    let mut outer = DMatrix::zeros(3, 3);
    for _ in 0..samples {
        let mut p = [0.0; 3];
        for v in &mut p {
            let z: f64 = r.sample(StandardNormal);
            *v = mean + sd * z;
        }
        let mut s = [0.0; 3];
        for _ in 0..steps {
            s = unicycle_step(s, u, p, dt);
        }
        let v = DVector::from_row_slice(&s);
        outer += &v * v.transpose();
        sum += v;
    }
    let n = samples as f64;
    let m = &sum / n;
    let cov = (outer - &m * m.transpose() * n) / (n - 1.0);
    (m, cov)
}

pub struct LqrSolution {
    pub gains: Vec<DMatrix<f64>>,
    pub cost: f64,
}

/// Finite-horizon discrete Riccati recursion for
/// `½ Σ (xᵀQx + uᵀRu) + ½ x_Nᵀ Q_f x_N`, `x⁺ = Ax + Bu`.
pub fn riccati(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>, qf: &DMatrix<f64>, steps: usize, x0: &DVector<f64>) -> LqrSolution {
    let mut p = qf.clone();
    let mut gains = vec![DMatrix::zeros(b.ncols(), a.nrows()); steps];
    for k in (0..steps).rev() {
        let s = r + b.transpose() * &p * b;
        let rhs = b.transpose() * &p * a;
        let gain = -s.lu().solve(&rhs).expect("invertible");
        let closed = a + b * &gain;
        p = q + gain.transpose() * r * &gain + closed.transpose() * &p * &closed;
        p = (&p + p.transpose()) * 0.5;
        gains[k] = gain;
    }
    LqrSolution {
        cost: 0.5 * x0.dot(&(&p * x0)),
        gains,
    }
}

pub fn random_spd(n: usize, r: &mut ChaCha8Rng, shift: f64) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| r.random_range(-1.0..1.0));
    &m * m.transpose() / n as f64 + DMatrix::identity(n, n) * shift
}

/// Minimum of `½ xᵀHx + qᵀx` over a `points × points` grid of the box.
pub fn grid_qp_2d(h: &DMatrix<f64>, q: &DVector<f64>, lo: [f64; 2], hi: [f64; 2], points: usize) -> ([f64; 2], f64) {
    let mut best = ([0.0; 2], f64::INFINITY);
    for i in 0..points {
        for j in 0..points {
            let x0 = lo[0] + (hi[0] - lo[0]) * i as f64 / (points - 1) as f64;
            let x1 = lo[1] + (hi[1] - lo[1]) * j as f64 / (points - 1) as f64;
            let v = 0.5 * (h[(0, 0)] * x0 * x0 + 2.0 * h[(0, 1)] * x0 * x1 + h[(1, 1)] * x1 * x1) + q[0] * x0 + q[1] * x1;
            if v < best.1 {
                best = ([x0, x1], v);
            }
        }
    }
    best
}

/// Central difference of a scalar function along coordinate `i`.
pub fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], i: usize, h: f64) -> f64 {
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    xp[i] += h;
    xm[i] -= h;
    (f(&xp) - f(&xm)) / (2.0 * h)
}

/// Largest eigenvalue of a symmetric 2×2 or 3×3 matrix by power iteration
/// with a Rayleigh-quotient finish.
pub fn lambda_max_power(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let shift = m.iter().map(|v| v.abs()).sum::<f64>();
    let shifted = m + DMatrix::identity(n, n) * shift;
    let mut v = DVector::from_element(n, 1.0) + DVector::from_fn(n, |i, _| 0.1 * i as f64);
    for _ in 0..5000 {
        let w = &shifted * &v;
        v = &w / w.norm();
    }
    v.dot(&(m * &v))
}
