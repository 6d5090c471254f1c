//! Orthogonal polynomial families, truncated multivariate bases and
//! Gaussian quadrature.
//!
//! Every family is normalized against a probability density, so the
//! constant polynomial has unit norm and quadrature weights sum to one.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Univariate polynomial family paired with the density of its standard
/// random variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolyFamily {
    /// Probabilists' Hermite polynomials, ξ ~ N(0, 1).
    Hermite,
    /// Legendre polynomials, ξ ~ U(-1, 1) with density 1/2.
    Legendre,
}

impl PolyFamily {
    /// Coefficients `(a, b, c)` of `φ_{n+1}(z) = (a z + b) φ_n(z) - c φ_{n-1}(z)`.
    pub fn recurrence(self, n: usize) -> (f64, f64, f64) {
        let nf = n as f64;
        match self {
            PolyFamily::Hermite => (1.0, 0.0, nf),
            PolyFamily::Legendre => ((2.0 * nf + 1.0) / (nf + 1.0), 0.0, nf / (nf + 1.0)),
        }
    }

    /// Recurrence of the monic polynomials, `p_{n+1} = (z - alpha_n) p_n - beta_n p_{n-1}`.
    fn monic_recurrence(self, n: usize) -> (f64, f64) {
        let nf = n as f64;
        match self {
            PolyFamily::Hermite => (0.0, nf),
            PolyFamily::Legendre => (0.0, nf * nf / (4.0 * nf * nf - 1.0)),
        }
    }

    pub fn eval(self, degree: usize, z: f64) -> f64 {
        let mut prev = 1.0;
        if degree == 0 {
            return prev;
        }
        let mut cur = z;
        for n in 1..degree {
            let (a, b, c) = self.recurrence(n);
            let next = (a * z + b) * cur - c * prev;
            prev = cur;
            cur = next;
        }
        cur
    }

    /// Values `φ_0(z), …, φ_max(z)`.
    pub fn eval_upto(self, max_degree: usize, z: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(max_degree + 1);
        out.push(1.0);
        if max_degree >= 1 {
            out.push(z);
        }
        for n in 1..max_degree {
            let (a, b, c) = self.recurrence(n);
            out.push((a * z + b) * out[n] - c * out[n - 1]);
        }
        out
    }

    /// `⟨φ_n, φ_n⟩` under the family's probability density.
    pub fn norm(self, degree: usize) -> f64 {
        let (num, den) = self.norm_ratio(degree);
        num as f64 / den as f64
    }

    /// Exact rational form of the norm as `(numerator, denominator)`.
    fn norm_ratio(self, degree: usize) -> (u128, u128) {
        match self {
            PolyFamily::Hermite => ((1..=degree as u128).product(), 1),
            PolyFamily::Legendre => (1, 2 * degree as u128 + 1),
        }
    }

    pub fn gauss_rule(self, q: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        gauss_rule(self, q)
    }
}

impl fmt::Display for PolyFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolyFamily::Hermite => f.write_str("hermite"),
            PolyFamily::Legendre => f.write_str("legendre"),
        }
    }
}

impl FromStr for PolyFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hermite" | "gaussian" | "normal" => Ok(PolyFamily::Hermite),
            "legendre" | "uniform" => Ok(PolyFamily::Legendre),
            "jacobi" | "beta" | "laguerre" | "gamma" => Err(Error::UnsupportedFamily(s.to_string())),
            _ => Err(Error::UnknownFamily(s.to_string())),
        }
    }
}

/// Per-dimension polynomial degrees of one multivariate basis function.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn entries(&self) -> &[usize] {
        &self.0
    }
}

/// Number of multi-indices of dimension `dim` with total degree at most
/// `order`, i.e. `(order + dim)! / (order! dim!)`.
pub fn basis_count(dim: usize, order: usize) -> Option<usize> {
    // C(order + dim, dim) built incrementally; every partial product is an integer.
    let mut count: u128 = 1;
    for i in 1..=dim as u128 {
        count = count.checked_mul(order as u128 + i)? / i;
    }
    usize::try_from(count).ok()
}

/// Truncated multivariate basis in graded lexicographic order.
#[derive(Debug, Clone)]
pub struct BasisSet {
    families: Vec<PolyFamily>,
    order: usize,
    indices: Vec<MultiIndex>,
    norms: Vec<f64>,
}

// Terms beyond this are never useful and only risk exhausting memory.
const MAX_BASIS_TERMS: usize = 1 << 20;

impl BasisSet {
    pub fn new(families: &[PolyFamily], order: usize) -> Result<Self> {
        let dim = families.len();
        if dim == 0 {
            return Err(Error::InvalidArgument("basis needs at least one dimension".into()));
        }
        let count = basis_count(dim, order)
            .filter(|&c| c <= MAX_BASIS_TERMS)
            .ok_or(Error::BasisOverflow { dim, order })?;

        let mut indices = Vec::with_capacity(count);
        let mut scratch = vec![0; dim];
        for degree in 0..=order {
            push_compositions(degree, 0, &mut scratch, &mut indices);
        }
        debug_assert_eq!(indices.len(), count);

        let norms = indices
            .iter()
            .map(|idx| {
                let (mut num, mut den) = (1u128, 1u128);
                for (fam, &deg) in families.iter().zip(&idx.0) {
                    let (n, d) = fam.norm_ratio(deg);
                    num = num.saturating_mul(n);
                    den = den.saturating_mul(d);
                }
                num as f64 / den as f64
            })
            .collect();

        Ok(Self {
            families: families.to_vec(),
            order,
            indices,
            norms,
        })
    }

    pub fn dim(&self) -> usize {
        self.families.len()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of basis terms, `K + 1`.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn families(&self) -> &[PolyFamily] {
        &self.families
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    /// `γ_j = ⟨Φ_j, Φ_j⟩`.
    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn eval(&self, j: usize, xi: &[f64]) -> Result<f64> {
        let idx = self.indices.get(j).ok_or(Error::IndexOutOfRange {
            index: j,
            len: self.len(),
        })?;
        self.check_point(xi)?;
        Ok(idx
            .0
            .iter()
            .zip(&self.families)
            .zip(xi)
            .map(|((&deg, fam), &z)| fam.eval(deg, z))
            .product())
    }

    /// All basis values `Φ_0(ξ), …, Φ_K(ξ)`.
    pub fn eval_all(&self, xi: &[f64]) -> Result<Vec<f64>> {
        self.check_point(xi)?;
        let mut out = Vec::with_capacity(self.len());
        self.eval_all_into(xi, &mut out);
        Ok(out)
    }

    pub(crate) fn eval_all_into(&self, xi: &[f64], out: &mut Vec<f64>) {
        let tables: Vec<Vec<f64>> = self
            .families
            .iter()
            .zip(xi)
            .map(|(fam, &z)| fam.eval_upto(self.order, z))
            .collect();
        out.clear();
        out.extend(self.indices.iter().map(|idx| {
            idx.0
                .iter()
                .zip(&tables)
                .map(|(&deg, t)| t[deg])
                .product::<f64>()
        }));
    }

    fn check_point(&self, xi: &[f64]) -> Result<()> {
        if xi.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "random vector",
                expected: self.dim(),
                found: xi.len(),
            });
        }
        Ok(())
    }
}

/// Appends every composition of `remaining` into `scratch[pos..]`, with the
/// leading entry taking the largest value first.
fn push_compositions(remaining: usize, pos: usize, scratch: &mut [usize], out: &mut Vec<MultiIndex>) {
    if pos + 1 == scratch.len() {
        scratch[pos] = remaining;
        out.push(MultiIndex(scratch.to_vec()));
        return;
    }
    for first in (0..=remaining).rev() {
        scratch[pos] = first;
        push_compositions(remaining - first, pos + 1, scratch, out);
    }
    scratch[pos] = 0;
}

/// Golub–Welsch rule with `q` nodes, sorted ascending.
pub fn gauss_rule(family: PolyFamily, q: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if q == 0 {
        return Err(Error::InvalidArgument("quadrature needs at least one node".into()));
    }
    let mut jacobi = DMatrix::<f64>::zeros(q, q);
    for n in 0..q {
        jacobi[(n, n)] = family.monic_recurrence(n).0;
        if n + 1 < q {
            let off = family.monic_recurrence(n + 1).1.sqrt();
            jacobi[(n, n + 1)] = off;
            jacobi[(n + 1, n)] = off;
        }
    }
    let eig = SymmetricEigen::try_new(jacobi, 1e-15, 10_000)
        .ok_or_else(|| Error::EigenFailure(format!("{family} rule with {q} nodes did not converge")))?;

    let mut pairs: Vec<(f64, f64)> = eig
        .eigenvalues
        .iter()
        .zip(eig.eigenvectors.row(0).iter())
        .map(|(&x, &v)| (x, v * v))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let total: f64 = pairs.iter().map(|p| p.1).sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::EigenFailure(format!("degenerate weights for {family} q={q}")));
    }
    // Polish the eigenvalues with Newton on p_q, recompute the weights from the
    // Christoffel function and enforce the symmetry of both measures.
    let mut nodes: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let mut weights: Vec<f64> = Vec::with_capacity(q);
    for z in nodes.iter_mut() {
        for _ in 0..3 {
            let (p, dp, _) = monic_eval(family, q, *z);
            if dp == 0.0 {
                break;
            }
            *z -= p / dp;
        }
        weights.push(1.0 / monic_eval(family, q, *z).2);
    }
    for i in 0..q / 2 {
        let j = q - 1 - i;
        let z = 0.5 * (nodes[j] - nodes[i]);
        let w = 0.5 * (weights[i] + weights[j]);
        nodes[i] = -z;
        nodes[j] = z;
        weights[i] = w;
        weights[j] = w;
    }
    if q % 2 == 1 {
        nodes[q / 2] = 0.0;
    }
    let total: f64 = weights.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::EigenFailure(format!("degenerate weights for {family} q={q}")));
    }
    weights.iter_mut().for_each(|w| *w /= total);
    Ok((nodes, weights))
}

/// Monic `p_q(z)`, its derivative, and `Σ_{n<q} p_n(z)² / ‖p_n‖²`.
fn monic_eval(family: PolyFamily, q: usize, z: f64) -> (f64, f64, f64) {
    let (mut p0, mut p1) = (0.0, 1.0);
    let (mut d0, mut d1) = (0.0, 0.0);
    let mut norm = 1.0;
    let mut christoffel = 0.0;
    for n in 0..q {
        christoffel += p1 * p1 / norm;
        let (a, b) = family.monic_recurrence(n);
        let p2 = (z - a) * p1 - b * p0;
        let d2 = p1 + (z - a) * d1 - b * d0;
        (p0, p1, d0, d1) = (p1, p2, d1, d2);
        norm *= family.monic_recurrence(n + 1).1;
    }
    (p1, d1, christoffel)
}

/// Tensor-product quadrature over the unit probability measure.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    dim: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Cartesian product of univariate rules; the last dimension varies fastest.
    pub fn tensor(rules: &[(Vec<f64>, Vec<f64>)]) -> Result<Self> {
        if rules.is_empty() {
            return Err(Error::InvalidArgument("tensor rule needs at least one dimension".into()));
        }
        for (nodes, weights) in rules {
            if nodes.len() != weights.len() || nodes.is_empty() {
                return Err(Error::InvalidArgument("univariate rule has mismatched nodes/weights".into()));
            }
        }
        let dim = rules.len();
        let total: usize = rules.iter().map(|r| r.0.len()).product();
        let mut nodes = Vec::with_capacity(total * dim);
        let mut weights = Vec::with_capacity(total);
        let mut counter = vec![0usize; dim];
        for _ in 0..total {
            let mut w = 1.0;
            for (k, &c) in counter.iter().enumerate() {
                nodes.push(rules[k].0[c]);
                w *= rules[k].1[c];
            }
            weights.push(w);
            for k in (0..dim).rev() {
                counter[k] += 1;
                if counter[k] < rules[k].0.len() {
                    break;
                }
                counter[k] = 0;
            }
        }
        Ok(Self { dim, nodes, weights })
    }

    /// Tensor Gauss rule with `q` nodes in every dimension of `families`.
    pub fn gauss(families: &[PolyFamily], q: usize) -> Result<Self> {
        let rules = families
            .iter()
            .map(|f| gauss_rule(*f, q))
            .collect::<Result<Vec<_>>>()?;
        Self::tensor(&rules)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[f64]> {
        self.nodes.chunks_exact(self.dim)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `Σ_q w_q g(ξ_q)`.
    pub fn integrate(&self, mut g: impl FnMut(&[f64]) -> f64) -> f64 {
        self.nodes().zip(&self.weights).map(|(x, w)| w * g(x)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_degree_polynomials() {
        assert_eq!(PolyFamily::Hermite.eval(2, 1.0), 0.0);
        assert_eq!(PolyFamily::Legendre.eval(2, 1.0), 1.0);
        for z in [-2.0, 0.3, 5.0] {
            assert_eq!(PolyFamily::Hermite.eval(0, z), 1.0);
            assert_eq!(PolyFamily::Legendre.eval(0, z), 1.0);
            assert!((PolyFamily::Hermite.eval(2, z) - (z * z - 1.0)).abs() < 1e-14);
            assert!((PolyFamily::Legendre.eval(2, z) - (1.5 * z * z - 0.5)).abs() < 1e-13);
        }
    }

    #[test]
    fn eval_upto_agrees_with_eval() {
        for fam in [PolyFamily::Hermite, PolyFamily::Legendre] {
            let table = fam.eval_upto(6, 0.7);
            for (n, v) in table.iter().enumerate() {
                assert_eq!(*v, fam.eval(n, 0.7));
            }
        }
    }

    #[test]
    fn univariate_norms() {
        assert_eq!(PolyFamily::Hermite.norm(3), 6.0);
        assert!((PolyFamily::Legendre.norm(1) - 1.0 / 3.0).abs() < 1e-16);
        assert_eq!(PolyFamily::Hermite.norm(0), 1.0);
        assert_eq!(PolyFamily::Legendre.norm(0), 1.0);
    }

    #[test]
    fn reserved_families_are_rejected() {
        assert!(matches!("jacobi".parse::<PolyFamily>(), Err(Error::UnsupportedFamily(_))));
        assert!(matches!("laguerre".parse::<PolyFamily>(), Err(Error::UnsupportedFamily(_))));
        assert!(matches!("chebyshev".parse::<PolyFamily>(), Err(Error::UnknownFamily(_))));
        assert_eq!("Hermite".parse::<PolyFamily>().unwrap(), PolyFamily::Hermite);
    }

    #[test]
    fn basis_sizes_and_order() {
        let b = BasisSet::new(&[PolyFamily::Hermite; 3], 2).unwrap();
        assert_eq!(b.len(), 10);
        let b = BasisSet::new(&[PolyFamily::Legendre], 0).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b.norms(), &[1.0]);
        let b = BasisSet::new(&[PolyFamily::Hermite; 2], 2).unwrap();
        let got: Vec<Vec<usize>> = b.indices().iter().map(|m| m.0.clone()).collect();
        assert_eq!(
            got,
            vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]
        );
        assert_eq!(b.norms(), &[1.0, 1.0, 1.0, 2.0, 1.0, 2.0]);
    }

    #[test]
    fn basis_rejects_overflow_and_empty() {
        assert!(matches!(
            BasisSet::new(&[PolyFamily::Hermite; 40], 40),
            Err(Error::BasisOverflow { .. })
        ));
        assert!(BasisSet::new(&[], 2).is_err());
        assert_eq!(basis_count(3, 2), Some(10));
    }

    #[test]
    fn multivariate_eval() {
        let h = BasisSet::new(&[PolyFamily::Hermite; 2], 2).unwrap();
        assert_eq!(h.eval(0, &[0.3, -9.0]).unwrap(), 1.0);
        assert_eq!(h.eval(4, &[2.0, 3.0]).unwrap(), 6.0);
        let l = BasisSet::new(&[PolyFamily::Legendre; 2], 2).unwrap();
        assert!((l.eval(3, &[1.0, 0.5]).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(h.eval(6, &[0.0, 0.0]), Err(Error::IndexOutOfRange { .. })));
        assert!(h.eval(0, &[0.0]).is_err());
        let all = h.eval_all(&[2.0, 3.0]).unwrap();
        for (j, v) in all.iter().enumerate() {
            assert_eq!(*v, h.eval(j, &[2.0, 3.0]).unwrap());
        }
    }

    #[test]
    fn small_gauss_rules() {
        let (x, w) = gauss_rule(PolyFamily::Hermite, 1).unwrap();
        assert_eq!(x, vec![0.0]);
        assert_eq!(w, vec![1.0]);

        let (x, w) = gauss_rule(PolyFamily::Hermite, 2).unwrap();
        assert!((x[0] + 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
        assert!((w[0] - 0.5).abs() < 1e-14 && (w[1] - 0.5).abs() < 1e-14);

        let (x, w) = gauss_rule(PolyFamily::Legendre, 2).unwrap();
        let r = 1.0 / 3f64.sqrt();
        assert!((x[0] + r).abs() < 1e-14 && (x[1] - r).abs() < 1e-14);
        assert!((w[0] - 0.5).abs() < 1e-14 && (w[1] - 0.5).abs() < 1e-14);

        assert!(gauss_rule(PolyFamily::Hermite, 0).is_err());
    }

    #[test]
    fn tensor_rules() {
        let r2 = gauss_rule(PolyFamily::Hermite, 2).unwrap();
        let t = QuadratureRule::tensor(&[r2.clone(), r2.clone()]).unwrap();
        assert_eq!(t.len(), 4);
        for (node, w) in t.nodes().zip(t.weights()) {
            assert!(node.iter().all(|v| (v.abs() - 1.0).abs() < 1e-14));
            assert!((w - 0.25).abs() < 1e-14);
        }

        let single = QuadratureRule::tensor(std::slice::from_ref(&r2)).unwrap();
        assert_eq!(single.weights(), &r2.1[..]);
        assert_eq!(single.nodes().map(|n| n[0]).collect::<Vec<_>>(), r2.0);

        let t3 = QuadratureRule::gauss(&[PolyFamily::Legendre; 3], 3).unwrap();
        assert_eq!(t3.len(), 27);
        let s: f64 = t3.weights().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }
}
