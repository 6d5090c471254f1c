//! Polynomial chaos expansion of uncertain states and parameters.
//!
//! A [`GpcVector`] stores the expansion coefficients of every physical state
//! in state-major order, `(x_10, …, x_1K, x_20, …, x_nK)`. The dynamics of the
//! coefficients are obtained by projecting `f` onto each basis polynomial with
//! tensor Gauss quadrature ([`GpcModel::rhs`]).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Dynamics;
use crate::orthopoly::{BasisSet, PolyFamily, QuadratureRule};

/// First-order expansion `center + spread · ξ_dim` of a model parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertainParam {
    pub name: String,
    pub family: PolyFamily,
    pub center: f64,
    pub spread: f64,
    pub dim: usize,
}

impl UncertainParam {
    pub fn new(name: impl Into<String>, family: PolyFamily, center: f64, spread: f64, dim: usize) -> Result<Self> {
        if spread < 0.0 || !spread.is_finite() {
            return Err(Error::NegativeSpread(spread));
        }
        Ok(Self {
            name: name.into(),
            family,
            center,
            spread,
            dim,
        })
    }

    pub fn realize(&self, xi: &[f64]) -> f64 {
        self.center + self.spread * xi[self.dim]
    }

    /// Range of the parameter when its family has bounded support.
    pub fn support(&self) -> Option<(f64, f64)> {
        match self.family {
            PolyFamily::Legendre => Some((self.center - self.spread, self.center + self.spread)),
            PolyFamily::Hermite => None,
        }
    }
}

/// Draws one standard random variable of the given family.
pub fn sample_standard<R: Rng + ?Sized>(family: PolyFamily, rng: &mut R) -> f64 {
    match family {
        PolyFamily::Hermite => StandardNormal.sample(rng),
        PolyFamily::Legendre => Uniform::new_inclusive(-1.0, 1.0).expect("valid range").sample(rng),
    }
}

/// Draws a full random vector `ξ` for a basis.
pub fn sample_xi<R: Rng + ?Sized>(basis: &BasisSet, rng: &mut R) -> Vec<f64> {
    basis.families().iter().map(|f| sample_standard(*f, rng)).collect()
}

/// Flattened gPC coefficients of an `n`-dimensional state.
#[derive(Debug, Clone, PartialEq)]
pub struct GpcVector {
    n: usize,
    terms: usize,
    data: DVector<f64>,
}

impl GpcVector {
    pub fn zeros(n: usize, terms: usize) -> Self {
        Self {
            n,
            terms,
            data: DVector::zeros(n * terms),
        }
    }

    pub fn from_data(n: usize, terms: usize, data: DVector<f64>) -> Result<Self> {
        if data.len() != n * terms {
            return Err(Error::DimensionMismatch {
                what: "gPC coefficient vector",
                expected: n * terms,
                found: data.len(),
            });
        }
        Ok(Self { n, terms, data })
    }

    /// Deterministic state: means set, every higher coefficient zero.
    pub fn lift(x: &[f64], terms: usize) -> Self {
        let mut out = Self::zeros(x.len(), terms);
        for (i, &v) in x.iter().enumerate() {
            out.data[i * terms] = v;
        }
        out
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    /// `K + 1`.
    pub fn terms(&self) -> usize {
        self.terms
    }

    pub fn data(&self) -> &DVector<f64> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut DVector<f64> {
        &mut self.data
    }

    pub fn into_data(self) -> DVector<f64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.terms + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.terms + j] = v;
    }

    /// Coefficients `x_i0, …, x_iK` of one physical state.
    pub fn coeffs(&self, i: usize) -> &[f64] {
        &self.data.as_slice()[i * self.terms..(i + 1) * self.terms]
    }

    pub fn mean(&self) -> DVector<f64> {
        DVector::from_iterator(self.n, (0..self.n).map(|i| self.get(i, 0)))
    }

    /// Physical state for precomputed basis values `Φ_j(ξ)`.
    pub fn realize_with(&self, phi: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.realize_into(phi, &mut out);
        out
    }

    pub(crate) fn realize_into(&self, phi: &[f64], out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(self.data.as_slice().chunks_exact(self.terms)) {
            *o = c.iter().zip(phi).map(|(c, p)| c * p).sum();
        }
    }

    /// Physical state at the random outcome `ξ`.
    pub fn realize(&self, basis: &BasisSet, xi: &[f64]) -> Result<Vec<f64>> {
        self.check_basis(basis)?;
        Ok(self.realize_with(&basis.eval_all(xi)?))
    }

    /// `COV[x_i, x_g] = Σ_{j ≥ 1} x_ij x_gj γ_j`.
    pub fn covariance(&self, basis: &BasisSet) -> Result<DMatrix<f64>> {
        let all: Vec<usize> = (0..self.n).collect();
        self.covariance_of(basis, &all)
    }

    /// Covariance restricted to the listed states.
    pub fn covariance_of(&self, basis: &BasisSet, dims: &[usize]) -> Result<DMatrix<f64>> {
        self.check_basis(basis)?;
        if let Some(&bad) = dims.iter().find(|&&d| d >= self.n) {
            return Err(Error::IndexOutOfRange { index: bad, len: self.n });
        }
        let gamma = basis.norms();
        let k = dims.len();
        let mut cov = DMatrix::zeros(k, k);
        for a in 0..k {
            let ca = self.coeffs(dims[a]);
            for b in a..k {
                let cb = self.coeffs(dims[b]);
                let s: f64 = (1..self.terms).map(|j| ca[j] * cb[j] * gamma[j]).sum();
                cov[(a, b)] = s;
                cov[(b, a)] = s;
            }
        }
        Ok(cov)
    }

    fn check_basis(&self, basis: &BasisSet) -> Result<()> {
        if basis.len() != self.terms {
            return Err(Error::DimensionMismatch {
                what: "basis terms",
                expected: self.terms,
                found: basis.len(),
            });
        }
        Ok(())
    }
}

/// Basis, quadrature and parameter expansions with every node-dependent
/// quantity tabulated once.
#[derive(Debug, Clone)]
pub struct GpcModel {
    basis: BasisSet,
    quad: QuadratureRule,
    params: Vec<UncertainParam>,
    n: usize,
    m: usize,
    /// `Φ_j(ξ_q)`, row-major `Q × (K+1)`.
    phi: Vec<f64>,
    /// `w_q Φ_j(ξ_q)`, row-major `Q × (K+1)`.
    weighted_phi: Vec<f64>,
    /// `ζ(ξ_q)`, row-major `Q × n_params`.
    param_values: Vec<f64>,
}

impl GpcModel {
    pub fn new(basis: BasisSet, quad: QuadratureRule, params: Vec<UncertainParam>, n: usize, m: usize) -> Result<Self> {
        if quad.dim() != basis.dim() {
            return Err(Error::DimensionMismatch {
                what: "quadrature dimension",
                expected: basis.dim(),
                found: quad.dim(),
            });
        }
        for p in &params {
            if p.dim >= basis.dim() {
                return Err(Error::IndexOutOfRange {
                    index: p.dim,
                    len: basis.dim(),
                });
            }
            if basis.families()[p.dim] != p.family {
                return Err(Error::InvalidArgument(format!(
                    "parameter `{}` is {} but basis dimension {} is {}",
                    p.name,
                    p.family,
                    p.dim,
                    basis.families()[p.dim]
                )));
            }
        }
        let terms = basis.len();
        let mut phi = Vec::with_capacity(quad.len() * terms);
        let mut weighted_phi = Vec::with_capacity(quad.len() * terms);
        let mut param_values = Vec::with_capacity(quad.len() * params.len());
        let mut row = Vec::with_capacity(terms);
        for (node, &w) in quad.nodes().zip(quad.weights()) {
            basis.eval_all_into(node, &mut row);
            phi.extend_from_slice(&row);
            weighted_phi.extend(row.iter().map(|v| w * v));
            param_values.extend(params.iter().map(|p| p.realize(node)));
        }
        Ok(Self {
            basis,
            quad,
            params,
            n,
            m,
            phi,
            weighted_phi,
            param_values,
        })
    }

    /// Tensor Gauss rule with `quad_level` nodes per dimension.
    pub fn with_gauss(basis: BasisSet, quad_level: usize, params: Vec<UncertainParam>, n: usize, m: usize) -> Result<Self> {
        let quad = QuadratureRule::gauss(basis.families(), quad_level)?;
        Self::new(basis, quad, params, n, m)
    }

    pub fn basis(&self) -> &BasisSet {
        &self.basis
    }

    pub fn quadrature(&self) -> &QuadratureRule {
        &self.quad
    }

    pub fn params(&self) -> &[UncertainParam] {
        &self.params
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn control_dim(&self) -> usize {
        self.m
    }

    pub fn terms(&self) -> usize {
        self.basis.len()
    }

    /// Length of the flattened coefficient vector, `n (K + 1)`.
    pub fn coeff_dim(&self) -> usize {
        self.n * self.terms()
    }

    pub fn node_phi(&self, q: usize) -> &[f64] {
        let t = self.terms();
        &self.phi[q * t..(q + 1) * t]
    }

    pub fn node_params(&self, q: usize) -> &[f64] {
        let p = self.params.len();
        &self.param_values[q * p..(q + 1) * p]
    }

    fn node_weighted_phi(&self, q: usize) -> &[f64] {
        let t = self.terms();
        &self.weighted_phi[q * t..(q + 1) * t]
    }

    pub fn lift(&self, x: &[f64]) -> GpcVector {
        GpcVector::lift(x, self.terms())
    }

    /// Index of the first-order basis term in dimension `dim`.
    pub fn first_order_term(&self, dim: usize) -> Option<usize> {
        self.basis
            .indices()
            .iter()
            .position(|idx| idx.total() == 1 && idx.0[dim] == 1)
    }

    /// Lifts `x` with additional first-order uncertainty `spread · ξ_dim` on
    /// selected states, for uncertain initial conditions.
    pub fn lift_uncertain(&self, x: &[f64], uncertain: &[(usize, usize, f64)]) -> Result<GpcVector> {
        let mut out = self.lift(x);
        for &(state, dim, spread) in uncertain {
            let j = self
                .first_order_term(dim)
                .ok_or(Error::IndexOutOfRange { index: dim, len: self.basis.dim() })?;
            if state >= self.n {
                return Err(Error::IndexOutOfRange { index: state, len: self.n });
            }
            out.set(state, j, spread);
        }
        Ok(out)
    }

    fn check<D: Dynamics + ?Sized>(&self, f: &D, x: &GpcVector, u: &[f64]) -> Result<()> {
        if f.state_dim() != self.n || x.state_dim() != self.n || x.terms() != self.terms() {
            return Err(Error::DimensionMismatch {
                what: "state",
                expected: self.coeff_dim(),
                found: x.data().len(),
            });
        }
        if f.control_dim() != self.m || u.len() != self.m {
            return Err(Error::DimensionMismatch {
                what: "control",
                expected: self.m,
                found: u.len(),
            });
        }
        if f.param_names().len() != self.params.len() {
            return Err(Error::DimensionMismatch {
                what: "parameters",
                expected: f.param_names().len(),
                found: self.params.len(),
            });
        }
        Ok(())
    }

    /// Galerkin-projected coefficient dynamics
    /// `ẋ_ij = Σ_q w_q f_i(x(ξ_q), u; ζ(ξ_q)) Φ_j(ξ_q) / γ_j`.
    pub fn rhs<D: Dynamics + ?Sized>(&self, f: &D, x: &GpcVector, u: &[f64]) -> Result<GpcVector> {
        self.check(f, x, u)?;
        let t = self.terms();
        let mut acc = vec![0.0; self.n * t];
        let mut state = vec![0.0; self.n];
        for q in 0..self.quad.len() {
            x.realize_into(self.node_phi(q), &mut state);
            let xdot = f.eval(&state, u, self.node_params(q))?;
            let wphi = self.node_weighted_phi(q);
            for (row, &fi) in acc.chunks_exact_mut(t).zip(xdot.iter()) {
                for (a, wp) in row.iter_mut().zip(wphi) {
                    *a += fi * wp;
                }
            }
        }
        let gamma = self.basis.norms();
        for row in acc.chunks_exact_mut(t) {
            for (a, g) in row.iter_mut().zip(gamma) {
                *a /= g;
            }
        }
        GpcVector::from_data(self.n, t, DVector::from_vec(acc))
    }

    /// Jacobians of [`Self::rhs`] with respect to the coefficients and the control:
    /// `∂ẋ_ij/∂x_gh = Σ_q w_q ∂f_i/∂x_g Φ_h Φ_j / γ_j`, `∂ẋ_ij/∂u_k = Σ_q w_q ∂f_i/∂u_k Φ_j / γ_j`.
    pub fn jacobian<D: Dynamics + ?Sized>(
        &self,
        f: &D,
        x: &GpcVector,
        u: &[f64],
    ) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        self.check(f, x, u)?;
        let (n, m, t) = (self.n, self.m, self.terms());
        let dim = n * t;
        let gamma = self.basis.norms();
        let mut a = DMatrix::zeros(dim, dim);
        let mut b = DMatrix::zeros(dim, m);
        let mut outer = vec![0.0; t * t];
        let mut scaled = vec![0.0; t];
        let mut state = vec![0.0; n];
        for q in 0..self.quad.len() {
            let phi = self.node_phi(q);
            let wphi = self.node_weighted_phi(q);
            x.realize_into(phi, &mut state);
            let (fx, fu) = f.partials(&state, u, self.node_params(q))?;
            for ((s, wp), g) in scaled.iter_mut().zip(wphi).zip(gamma) {
                *s = wp / g;
            }
            // outer[h * t + j] = w_q Φ_h Φ_j / γ_j
            for (row, &ph) in outer.chunks_exact_mut(t).zip(phi) {
                for (o, s) in row.iter_mut().zip(&scaled) {
                    *o = ph * s;
                }
            }
            let a_data = a.as_mut_slice();
            for g in 0..n {
                for i in 0..n {
                    let d = fx[(i, g)];
                    if d == 0.0 {
                        continue;
                    }
                    for (h, o) in outer.chunks_exact(t).enumerate() {
                        let start = (g * t + h) * dim + i * t;
                        for (dst, v) in a_data[start..start + t].iter_mut().zip(o) {
                            *dst += d * v;
                        }
                    }
                }
            }
            let b_data = b.as_mut_slice();
            for k in 0..m {
                for i in 0..n {
                    let d = fu[(i, k)];
                    if d == 0.0 {
                        continue;
                    }
                    let start = k * dim + i * t;
                    for (dst, s) in b_data[start..start + t].iter_mut().zip(&scaled) {
                        *dst += d * s;
                    }
                }
            }
        }
        Ok((a, b))
    }

    /// `X + dt · rhs(X, u)`.
    pub fn euler_step<D: Dynamics + ?Sized>(&self, f: &D, x: &GpcVector, u: &[f64], dt: f64) -> Result<GpcVector> {
        if dt <= 0.0 {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        let rhs = self.rhs(f, x, u)?;
        GpcVector::from_data(self.n, self.terms(), x.data() + rhs.data() * dt)
    }

    /// Parameter values at their means, in model order.
    pub fn mean_params(&self) -> Vec<f64> {
        self.params.iter().map(|p| p.center).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Unicycle;

    fn robot_model(order: usize) -> GpcModel {
        let sigma = 1.5e-3f64.sqrt();
        let params = Unicycle::PARAMS
            .iter()
            .enumerate()
            .map(|(k, name)| UncertainParam::new(*name, PolyFamily::Hermite, 0.2, sigma, k).unwrap())
            .collect();
        let basis = BasisSet::new(&[PolyFamily::Hermite; 3], order).unwrap();
        GpcModel::with_gauss(basis, order + 2, params, 3, 2).unwrap()
    }

    #[test]
    fn parameter_expansion() {
        let d = UncertainParam::new("tread", PolyFamily::Hermite, 0.2, 1.5e-3f64.sqrt(), 0).unwrap();
        assert_eq!(d.realize(&[0.0]), 0.2);
        let mu = 2.980e-6;
        let kl = UncertainParam::new("lift", PolyFamily::Legendre, mu, mu / 3.0, 1).unwrap();
        let (lo, hi) = kl.support().unwrap();
        assert!((lo - 2.0 * mu / 3.0).abs() < 1e-20 && (hi - 4.0 * mu / 3.0).abs() < 1e-20);
        let c = UncertainParam::new("c", PolyFamily::Hermite, 1.5, 0.0, 0).unwrap();
        assert_eq!(c.realize(&[7.0]), 1.5);
        assert!(matches!(
            UncertainParam::new("bad", PolyFamily::Hermite, 1.0, -0.1, 0),
            Err(Error::NegativeSpread(_))
        ));
    }

    #[test]
    fn lift_layout_and_mean() {
        let x = GpcVector::lift(&[3.0, 3.0, 0.0], 10);
        assert_eq!(x.data().len(), 30);
        assert_eq!(x.get(0, 0), 3.0);
        assert_eq!(x.data()[10], 3.0);
        assert_eq!(x.data().iter().filter(|v| **v != 0.0).count(), 2);
        assert_eq!(x.mean().as_slice(), &[3.0, 3.0, 0.0]);
        assert_eq!(GpcVector::lift(&[0.0; 4], 6).data().amax(), 0.0);

        let mut y = x.clone();
        y.set(1, 4, 9.0);
        assert_eq!(y.mean(), x.mean());
    }

    #[test]
    fn realization_and_covariance_basics() {
        let basis = BasisSet::new(&[PolyFamily::Hermite; 2], 2).unwrap();
        let x = GpcVector::lift(&[1.0, -2.0], basis.len());
        assert_eq!(x.realize(&basis, &[0.4, 1.3]).unwrap(), vec![1.0, -2.0]);
        assert_eq!(x.covariance(&basis).unwrap().amax(), 0.0);

        let mut y = x.clone();
        y.set(0, 1, 0.5);
        y.set(1, 2, 0.25);
        assert_eq!(y.realize(&basis, &[0.0, 0.0]).unwrap(), vec![1.0, -2.0]);

        let b1 = BasisSet::new(&[PolyFamily::Hermite], 1).unwrap();
        let mut s = GpcVector::zeros(1, 2);
        s.set(0, 1, 0.3);
        assert!((s.covariance(&b1).unwrap()[(0, 0)] - 0.09).abs() < 1e-16);
    }

    #[test]
    fn deterministic_lift_propagates_deterministically() {
        let basis = BasisSet::new(&[PolyFamily::Hermite; 3], 2).unwrap();
        let params = Unicycle::PARAMS
            .iter()
            .enumerate()
            .map(|(k, name)| UncertainParam::new(*name, PolyFamily::Hermite, 0.2, 0.0, k).unwrap())
            .collect();
        let model = GpcModel::with_gauss(basis, 4, params, 3, 2).unwrap();
        let x0 = [0.1, 0.2, 0.3];
        let u = [3.0, 2.0];
        let rhs = model.rhs(&Unicycle, &model.lift(&x0), &u).unwrap();
        let f = Unicycle.eval(&x0, &u, &[0.2; 3]).unwrap();
        for i in 0..3 {
            assert!((rhs.get(i, 0) - f[i]).abs() < 1e-14);
            for j in 1..model.terms() {
                assert!(rhs.get(i, j).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn model_rejects_mismatches() {
        let model = robot_model(2);
        let x = GpcVector::zeros(3, 4);
        assert!(model.rhs(&Unicycle, &x, &[0.0, 0.0]).is_err());
        let x = model.lift(&[0.0; 3]);
        assert!(model.rhs(&Unicycle, &x, &[0.0]).is_err());

        let basis = BasisSet::new(&[PolyFamily::Hermite], 1).unwrap();
        let p = UncertainParam::new("k", PolyFamily::Legendre, 1.0, 0.1, 0).unwrap();
        assert!(GpcModel::with_gauss(basis, 3, vec![p], 1, 1).is_err());
    }

    #[test]
    fn first_order_terms() {
        let model = robot_model(2);
        assert_eq!(model.first_order_term(0), Some(1));
        assert_eq!(model.first_order_term(2), Some(3));
        let x = model.lift_uncertain(&[1.0, 2.0, 0.0], &[(1, 2, 0.1)]).unwrap();
        assert_eq!(x.get(1, 3), 0.1);
        let cov = x.covariance(model.basis()).unwrap();
        assert!((cov[(1, 1)] - 0.01).abs() < 1e-16);
    }
}
