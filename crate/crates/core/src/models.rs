//! Continuous-time dynamics with analytic partial derivatives.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `ẋ = f(x, u; ζ)` with analytic Jacobians.
pub trait Dynamics: Send + Sync {
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;
    /// Names of the parameters `ζ`, in the order `eval` expects them.
    fn param_names(&self) -> &[&'static str];

    fn eval(&self, x: &[f64], u: &[f64], params: &[f64]) -> Result<DVector<f64>>;

    /// `(∂f/∂x, ∂f/∂u)`.
    fn partials(&self, x: &[f64], u: &[f64], params: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>)>;
}

/// One explicit Euler step `x + dt f(x, u; ζ)`.
pub fn euler_step<D: Dynamics + ?Sized>(
    model: &D,
    x: &[f64],
    u: &[f64],
    params: &[f64],
    dt: f64,
) -> Result<DVector<f64>> {
    if dt <= 0.0 {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    let xdot = model.eval(x, u, params)?;
    Ok(DVector::from_column_slice(x) + xdot * dt)
}

/// Differential-drive robot with state `(x, y, θ)` and wheel rates as controls.
/// Parameters are `(d, r_R, r_L)`: half the wheel separation and the two wheel radii.
#[derive(Debug, Clone, Copy, Default)]
pub struct Unicycle;

impl Unicycle {
    pub const PARAMS: [&'static str; 3] = ["tread", "radius_right", "radius_left"];

    fn velocities(u: &[f64], params: &[f64]) -> Result<(f64, f64)> {
        let (d, rr, rl) = (params[0], params[1], params[2]);
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::NonPositiveTread(d));
        }
        let (vr, vl) = (rr * u[0], rl * u[1]);
        Ok((0.5 * (vr + vl), (vr - vl) / (2.0 * d)))
    }
}

impl Dynamics for Unicycle {
    fn state_dim(&self) -> usize {
        3
    }

    fn control_dim(&self) -> usize {
        2
    }

    fn param_names(&self) -> &[&'static str] {
        &Self::PARAMS
    }

    fn eval(&self, x: &[f64], u: &[f64], params: &[f64]) -> Result<DVector<f64>> {
        let (v, w) = Self::velocities(u, params)?;
        let (s, c) = x[2].sin_cos();
        Ok(DVector::from_vec(vec![v * c, v * s, w]))
    }

    fn partials(&self, x: &[f64], u: &[f64], params: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let (v, _) = Self::velocities(u, params)?;
        let (d, rr, rl) = (params[0], params[1], params[2]);
        let (s, c) = x[2].sin_cos();
        let mut fx = DMatrix::zeros(3, 3);
        fx[(0, 2)] = -v * s;
        fx[(1, 2)] = v * c;
        let fu = DMatrix::from_row_slice(
            3,
            2,
            &[
                0.5 * rr * c,
                0.5 * rl * c,
                0.5 * rr * s,
                0.5 * rl * s,
                rr / (2.0 * d),
                -rl / (2.0 * d),
            ],
        );
        Ok((fx, fu))
    }
}

/// Fixed physical constants of the quadrotor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadrotorConstants {
    pub mass: f64,
    pub arm_length: f64,
    pub inertia: [f64; 3],
    pub gravity: f64,
}

impl Default for QuadrotorConstants {
    fn default() -> Self {
        Self {
            mass: 0.468,
            arm_length: 0.225,
            inertia: [4.856e-3, 4.856e-3, 8.801e-3],
            gravity: 9.81,
        }
    }
}

/// Twelve-state rigid-body quadrotor in Z-Y-X Euler angles.
///
/// State: position `(x, y, z)`, attitude `(φ, θ, ψ)`, world-frame velocity,
/// body angular rates `(p, q, r)`. Controls are the four rotor forces in
/// newtons. Parameters are `(k_d, k_l)`; the yaw torque of each rotor is its
/// force scaled by `k_d / k_l`, and `k_d` also acts as linear translational drag.
#[derive(Debug, Clone, Copy, Default)]
pub struct Quadrotor {
    pub constants: QuadrotorConstants,
}

impl Quadrotor {
    pub const PARAMS: [&'static str; 2] = ["drag", "lift"];

    pub fn new(constants: QuadrotorConstants) -> Self {
        Self { constants }
    }

    /// Per-rotor force that balances gravity.
    pub fn hover_force(&self) -> f64 {
        self.constants.mass * self.constants.gravity / 4.0
    }

    fn check(x: &[f64], params: &[f64]) -> Result<()> {
        if x[4].cos().abs() < 1e-9 {
            return Err(Error::EulerSingularity(x[4]));
        }
        if params[1] <= 0.0 || !params[1].is_finite() {
            return Err(Error::InvalidArgument(format!("lift coefficient must be positive, got {}", params[1])));
        }
        Ok(())
    }
}

struct Trig {
    sphi: f64,
    cphi: f64,
    sth: f64,
    cth: f64,
    spsi: f64,
    cpsi: f64,
}

impl Trig {
    fn new(x: &[f64]) -> Self {
        let (sphi, cphi) = x[3].sin_cos();
        let (sth, cth) = x[4].sin_cos();
        let (spsi, cpsi) = x[5].sin_cos();
        Self { sphi, cphi, sth, cth, spsi, cpsi }
    }

    /// Body z axis expressed in the world frame.
    fn thrust_axis(&self) -> [f64; 3] {
        [
            self.cpsi * self.sth * self.cphi + self.spsi * self.sphi,
            self.spsi * self.sth * self.cphi - self.cpsi * self.sphi,
            self.cth * self.cphi,
        ]
    }
}

impl Dynamics for Quadrotor {
    fn state_dim(&self) -> usize {
        12
    }

    fn control_dim(&self) -> usize {
        4
    }

    fn param_names(&self) -> &[&'static str] {
        &Self::PARAMS
    }

    fn eval(&self, x: &[f64], u: &[f64], params: &[f64]) -> Result<DVector<f64>> {
        Self::check(x, params)?;
        let QuadrotorConstants { mass, arm_length: l, inertia: [ix, iy, iz], gravity } = self.constants;
        let (kd, kl) = (params[0], params[1]);
        let t = Trig::new(x);
        let (p, q, r) = (x[9], x[10], x[11]);
        let thrust: f64 = u.iter().sum();
        let axis = t.thrust_axis();
        let a = q * t.sphi + r * t.cphi;

        let mut out = DVector::zeros(12);
        out[0] = x[6];
        out[1] = x[7];
        out[2] = x[8];
        out[3] = p + a * t.sth / t.cth;
        out[4] = q * t.cphi - r * t.sphi;
        out[5] = a / t.cth;
        for k in 0..3 {
            out[6 + k] = thrust / mass * axis[k] - kd / mass * x[6 + k];
        }
        out[8] -= gravity;
        out[9] = (l * (u[3] - u[1]) + (iy - iz) * q * r) / ix;
        out[10] = (l * (u[2] - u[0]) + (iz - ix) * p * r) / iy;
        out[11] = (kd / kl * (u[0] - u[1] + u[2] - u[3]) + (ix - iy) * p * q) / iz;
        Ok(out)
    }

    fn partials(&self, x: &[f64], u: &[f64], params: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        Self::check(x, params)?;
        let QuadrotorConstants { mass, arm_length: l, inertia: [ix, iy, iz], .. } = self.constants;
        let (kd, kl) = (params[0], params[1]);
        let t = Trig::new(x);
        let (p, q, r) = (x[9], x[10], x[11]);
        let thrust: f64 = u.iter().sum();
        let axis = t.thrust_axis();
        let a = q * t.sphi + r * t.cphi;
        let a_phi = q * t.cphi - r * t.sphi;
        let tth = t.sth / t.cth;
        let sec2 = 1.0 / (t.cth * t.cth);

        let mut fx = DMatrix::zeros(12, 12);
        for k in 0..3 {
            fx[(k, 6 + k)] = 1.0;
        }
        // Euler-angle kinematics.
        fx[(3, 3)] = a_phi * tth;
        fx[(3, 4)] = a * sec2;
        fx[(3, 9)] = 1.0;
        fx[(3, 10)] = t.sphi * tth;
        fx[(3, 11)] = t.cphi * tth;
        fx[(4, 3)] = -a;
        fx[(4, 10)] = t.cphi;
        fx[(4, 11)] = -t.sphi;
        fx[(5, 3)] = a_phi / t.cth;
        fx[(5, 4)] = a * t.sth * sec2;
        fx[(5, 10)] = t.sphi / t.cth;
        fx[(5, 11)] = t.cphi / t.cth;

        // Thrust direction derivatives with respect to (φ, θ, ψ).
        let daxis = [
            [
                -t.cpsi * t.sth * t.sphi + t.spsi * t.cphi,
                t.cpsi * t.cth * t.cphi,
                -t.spsi * t.sth * t.cphi + t.cpsi * t.sphi,
            ],
            [
                -t.spsi * t.sth * t.sphi - t.cpsi * t.cphi,
                t.spsi * t.cth * t.cphi,
                t.cpsi * t.sth * t.cphi + t.spsi * t.sphi,
            ],
            [-t.cth * t.sphi, -t.sth * t.cphi, 0.0],
        ];
        for k in 0..3 {
            for e in 0..3 {
                fx[(6 + k, 3 + e)] = thrust / mass * daxis[k][e];
            }
            fx[(6 + k, 6 + k)] = -kd / mass;
        }

        fx[(9, 10)] = (iy - iz) * r / ix;
        fx[(9, 11)] = (iy - iz) * q / ix;
        fx[(10, 9)] = (iz - ix) * r / iy;
        fx[(10, 11)] = (iz - ix) * p / iy;
        fx[(11, 9)] = (ix - iy) * q / iz;
        fx[(11, 10)] = (ix - iy) * p / iz;

        let mut fu = DMatrix::zeros(12, 4);
        for i in 0..4 {
            for k in 0..3 {
                fu[(6 + k, i)] = axis[k] / mass;
            }
        }
        fu[(9, 1)] = -l / ix;
        fu[(9, 3)] = l / ix;
        fu[(10, 0)] = -l / iy;
        fu[(10, 2)] = l / iy;
        let yaw = kd / kl / iz;
        fu[(11, 0)] = yaw;
        fu[(11, 1)] = -yaw;
        fu[(11, 2)] = yaw;
        fu[(11, 3)] = -yaw;
        Ok((fx, fu))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unicycle_examples() {
        let f = Unicycle.eval(&[0.0, 0.0, 0.0], &[1.0, 1.0], &[0.2, 0.2, 0.2]).unwrap();
        assert!((f[0] - 0.2).abs() < 1e-15 && f[1] == 0.0 && f[2] == 0.0);

        let r = 0.25;
        let f = Unicycle.eval(&[0.0, 0.0, 0.0], &[1.0, -1.0], &[0.2, r, r]).unwrap();
        assert_eq!(f[0], 0.0);
        assert!((f[2] - r / 0.2).abs() < 1e-15);

        assert!(matches!(
            Unicycle.eval(&[0.0; 3], &[1.0, 1.0], &[0.0, 0.2, 0.2]),
            Err(Error::NonPositiveTread(_))
        ));
    }

    #[test]
    fn unicycle_speed_invariance() {
        let x = [0.3, -1.0, 0.7];
        let a = Unicycle.eval(&x, &[4.0, -2.0], &[0.2, 0.21, 0.19]).unwrap();
        let b = Unicycle.eval(&x, &[4.0 / 2.5, -2.0 / 2.5], &[0.2, 0.21 * 2.5, 0.19 * 2.5]).unwrap();
        assert!((a - b).amax() < 1e-15);
    }

    #[test]
    fn euler_steps() {
        // v = 1 with r = 0.2 needs wheel rates of 5.
        let x = euler_step(&Unicycle, &[0.0; 3], &[5.0, 5.0], &[0.2, 0.2, 0.2], 0.02).unwrap();
        assert!((x[0] - 0.02).abs() < 1e-15 && x[1] == 0.0 && x[2] == 0.0);
        let x = euler_step(&Unicycle, &[1.0, 2.0, 3.0], &[0.0, 0.0], &[0.2, 0.2, 0.2], 0.02).unwrap();
        assert_eq!(x.as_slice(), &[1.0, 2.0, 3.0]);
        assert!(euler_step(&Unicycle, &[0.0; 3], &[0.0, 0.0], &[0.2, 0.2, 0.2], 0.0).is_err());
    }

    #[test]
    fn quadrotor_hover_and_free_fall() {
        let quad = Quadrotor::default();
        let params = [1.14e-7, 2.98e-6];
        let h = quad.hover_force();
        let f = quad.eval(&[0.0; 12], &[h; 4], &params).unwrap();
        assert!(f.amax() <= 1e-12, "hover residual {}", f.amax());

        let f = quad.eval(&[0.0; 12], &[0.0; 4], &params).unwrap();
        assert!((f[8] + 9.81).abs() < 1e-15);

        let mut x = [0.0; 12];
        x[4] = std::f64::consts::FRAC_PI_2;
        assert!(matches!(quad.eval(&x, &[h; 4], &params), Err(Error::EulerSingularity(_))));
    }

    #[test]
    fn quadrotor_hover_linearization_structure() {
        let quad = Quadrotor::default();
        let h = quad.hover_force();
        let (fx, _) = quad.partials(&[0.0; 12], &[h; 4], &[1.14e-7, 2.98e-6]).unwrap();
        for i in 0..3 {
            for j in 0..12 {
                let expected = if j == 6 + i { 1.0 } else { 0.0 };
                assert_eq!(fx[(i, j)], expected);
            }
        }
    }
}
