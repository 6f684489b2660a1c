//! Scaled Hermite functions, Gauss–Hermite quadrature and the scaled Hermite
//! operator `H_λ = −Δ + λ²|x|²`.
//!
//! The basis functions are `φ_α^λ(x) = |λ|^{n/4} φ_α(√|λ| x)` with `φ_k` the
//! orthonormal Hermite functions on the line, and products over axes for
//! `n = 2`. Multi-indices are ordered lexicographically, first axis major.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default per-axis degree cap.
pub const DEFAULT_DEGREE_CAP: usize = 24;

/// Extra quadrature nodes on top of `2N` required for exactness margin.
pub const QUAD_MARGIN: usize = 8;

/// Values `φ_0(x), …, φ_{count-1}(x)` of the orthonormal Hermite functions
/// (unit scale), by the stable three-term recurrence.
pub fn hermite_functions(count: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; count];
    if count == 0 {
        return out;
    }
    out[0] = PI.powf(-0.25) * (-0.5 * x * x).exp();
    if count > 1 {
        out[1] = std::f64::consts::SQRT_2 * x * out[0];
    }
    for k in 1..count.saturating_sub(1) {
        let kf = k as f64;
        out[k + 1] = (2.0 / (kf + 1.0)).sqrt() * x * out[k] - (kf / (kf + 1.0)).sqrt() * out[k - 1];
    }
    out
}

/// Gauss–Hermite rule converted to integrate `∫ f(x) dx` over the line:
/// the returned weights already carry the `e^{x²}` factor, so
/// `Σ w_q f(x_q)` is exact for `f = p·e^{−x²}` with `deg p ≤ 2·size − 1`.
///
/// Nodes come from the Jacobi matrix eigenvalues, refined by Newton steps on
/// `φ_size`; weights use the Christoffel form `1 / Σ_k φ_k(x_q)²`, which never
/// forms the overflowing `e^{x²}` explicitly.
pub fn build_quadrature(size: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if size == 0 {
        return Err(Error::Domain("quadrature size must be at least 1".into()));
    }
    if size == 1 {
        return Ok((vec![0.0], vec![PI.sqrt()]));
    }
    let jacobi = DMatrix::from_fn(size, size, |i, j| {
        if i + 1 == j {
            (j as f64 / 2.0).sqrt()
        } else if j + 1 == i {
            (i as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.total_cmp(b));

    let nf = size as f64;
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let phi = hermite_functions(size + 1, *x);
            let f = phi[size];
            let df = (2.0 * nf).sqrt() * phi[size - 1] - *x * f;
            if df == 0.0 {
                break;
            }
            let step = f / df;
            *x -= step;
            if step.abs() < 1e-15 * x.abs().max(1.0) {
                break;
            }
        }
    }
    // Enforce exact reflection symmetry of the rule.
    for i in 0..size / 2 {
        let j = size - 1 - i;
        let m = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -m;
        nodes[j] = m;
    }
    if size % 2 == 1 {
        nodes[size / 2] = 0.0;
    }
    let weights = nodes
        .iter()
        .map(|&x| 1.0 / hermite_functions(size, x).iter().map(|v| v * v).sum::<f64>())
        .collect();
    Ok((nodes, weights))
}

/// Identity of a basis, used to reject mixing coefficient vectors and
/// matrices built on different bases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisKey {
    pub dim: usize,
    pub lambda: f64,
    pub degree_cap: usize,
}

/// Truncated scaled Hermite system with its quadrature rule.
#[derive(Debug, Clone)]
pub struct HermiteBasis {
    dim: usize,
    lambda: f64,
    degree_cap: usize,
    /// Nodes and weights scaled to the `φ^λ` system (1D; tensorised for n = 2).
    quad_nodes: Vec<f64>,
    quad_weights: Vec<f64>,
}

impl HermiteBasis {
    pub fn new(dim: usize, lambda: f64, degree_cap: usize) -> Result<Self> {
        Self::with_quad_size(dim, lambda, degree_cap, 2 * degree_cap + QUAD_MARGIN)
    }

    pub fn with_quad_size(dim: usize, lambda: f64, degree_cap: usize, quad_size: usize) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::Unsupported(format!("spatial dimension {dim} (only 1 or 2)")));
        }
        if lambda == 0.0 || !lambda.is_finite() {
            return Err(Error::Domain(format!("lambda must be a nonzero finite real, got {lambda}")));
        }
        if degree_cap == 0 {
            return Err(Error::Domain("degree cap must be at least 1".into()));
        }
        if quad_size < 2 * degree_cap + QUAD_MARGIN {
            return Err(Error::Domain(format!(
                "quadrature size {quad_size} below 2N+{QUAD_MARGIN} = {}",
                2 * degree_cap + QUAD_MARGIN
            )));
        }
        let (nodes, weights) = build_quadrature(quad_size)?;
        let s = lambda.abs().sqrt();
        Ok(Self {
            dim,
            lambda,
            degree_cap,
            quad_nodes: nodes.iter().map(|x| x / s).collect(),
            quad_weights: weights.iter().map(|w| w / s).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn degree_cap(&self) -> usize {
        self.degree_cap
    }

    pub fn key(&self) -> BasisKey {
        BasisKey { dim: self.dim, lambda: self.lambda, degree_cap: self.degree_cap }
    }

    /// One-dimensional quadrature nodes (already scaled by `1/√|λ|`).
    pub fn quad_nodes(&self) -> &[f64] {
        &self.quad_nodes
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.quad_weights
    }

    /// Number of admissible multi-indices, `N^n`.
    pub fn len(&self) -> usize {
        self.degree_cap.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Same truncation and dimension at a different scale.
    pub fn rescaled(&self, lambda: f64) -> Result<Self> {
        Self::with_quad_size(self.dim, lambda, self.degree_cap, self.quad_nodes.len())
    }

    /// All multi-indices in lexicographic order.
    pub fn multi_indices(&self) -> Vec<Vec<usize>> {
        (0..self.len()).map(|i| self.multi_index(i)).collect()
    }

    pub fn multi_index(&self, linear: usize) -> Vec<usize> {
        match self.dim {
            1 => vec![linear],
            _ => vec![linear / self.degree_cap, linear % self.degree_cap],
        }
    }

    pub fn linear_index(&self, alpha: &[usize]) -> Result<usize> {
        if alpha.len() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: alpha.len() });
        }
        if let Some(&a) = alpha.iter().find(|&&a| a >= self.degree_cap) {
            return Err(Error::Index(format!("component {a} >= degree cap {}", self.degree_cap)));
        }
        Ok(alpha.iter().fold(0, |acc, &a| acc * self.degree_cap + a))
    }

    /// All scaled 1D functions `φ_k^λ(x)`, `k < N`.
    pub fn eval_axis(&self, x: f64) -> Vec<f64> {
        let s = self.lambda.abs().sqrt();
        let scale = s.sqrt();
        let mut v = hermite_functions(self.degree_cap, s * x);
        v.iter_mut().for_each(|p| *p *= scale);
        v
    }

    /// `φ_α^λ(x)`.
    pub fn eval(&self, alpha: &[usize], x: &[f64]) -> Result<f64> {
        self.linear_index(alpha)?;
        if x.len() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("evaluation point is not finite".into()));
        }
        Ok(alpha.iter().zip(x).map(|(&a, &xi)| self.eval_axis(xi)[a]).product())
    }

    /// One-dimensional discrete Gram matrix on the quadrature rule.
    pub fn gram_axis(&self) -> DMatrix<f64> {
        let n = self.degree_cap;
        let mut g = DMatrix::zeros(n, n);
        for (&x, &w) in self.quad_nodes.iter().zip(&self.quad_weights) {
            let v = self.eval_axis(x);
            for a in 0..n {
                for b in 0..n {
                    g[(a, b)] += w * v[a] * v[b];
                }
            }
        }
        g
    }

    /// Full discrete Gram matrix; the tensor rule makes the 2D matrix the
    /// Kronecker square of the axis matrix.
    pub fn gram(&self) -> DMatrix<f64> {
        let g = self.gram_axis();
        match self.dim {
            1 => g,
            _ => g.kronecker(&g),
        }
    }

    /// `‖G − I‖_max`.
    pub fn gram_defect(&self) -> f64 {
        let g = self.gram();
        let n = g.nrows();
        (g - DMatrix::<f64>::identity(n, n)).amax()
    }

    /// Rayleigh quotient of `H_λ` at `φ_α^λ`, with `H_λ` applied through the
    /// position and derivative ladder matrices of the truncated basis.
    pub fn hermite_operator_check(&self, alpha: &[usize]) -> Result<f64> {
        self.linear_index(alpha)?;
        if let Some(&a) = alpha.iter().find(|&&a| a + 2 >= self.degree_cap) {
            return Err(Error::Truncation(format!(
                "component {a} too close to degree cap {}; H_λ needs α ± 2",
                self.degree_cap
            )));
        }
        let n = self.degree_cap;
        let lam = self.lambda.abs();
        let mut total = 0.0;
        for &a in alpha {
            let mut e = vec![0.0; n];
            e[a] = 1.0;
            let d2 = apply_derivative(&apply_derivative(&e, lam), lam);
            let x2 = apply_position(&apply_position(&e, lam), lam);
            let h: Vec<f64> = d2.iter().zip(&x2).map(|(d, x)| -d + lam * lam * x).collect();
            total += h[a];
        }
        Ok(total)
    }

    /// Expected eigenvalue `(2|α| + n)|λ|`.
    pub fn hermite_eigenvalue(&self, alpha: &[usize]) -> f64 {
        (2.0 * alpha.iter().sum::<usize>() as f64 + self.dim as f64) * self.lambda.abs()
    }
}

/// Multiplication by `x` in the `φ^λ` coefficient basis.
fn apply_position(v: &[f64], lam: f64) -> Vec<f64> {
    let n = v.len();
    let s = 1.0 / lam.sqrt();
    (0..n)
        .map(|j| {
            let up = if j + 1 < n { ((j + 1) as f64 / 2.0).sqrt() * v[j + 1] } else { 0.0 };
            let down = if j > 0 { (j as f64 / 2.0).sqrt() * v[j - 1] } else { 0.0 };
            s * (up + down)
        })
        .collect()
}

/// `d/dx` in the `φ^λ` coefficient basis.
fn apply_derivative(v: &[f64], lam: f64) -> Vec<f64> {
    let n = v.len();
    let s = lam.sqrt();
    (0..n)
        .map(|j| {
            let up = if j + 1 < n { ((j + 1) as f64 / 2.0).sqrt() * v[j + 1] } else { 0.0 };
            let down = if j > 0 { (j as f64 / 2.0).sqrt() * v[j - 1] } else { 0.0 };
            s * (up - down)
        })
        .collect()
}

/// Element of the truncated `L²(ℝⁿ)`, as coefficients in a [`HermiteBasis`].
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffVector {
    pub coeffs: DVector<C64>,
    pub key: BasisKey,
}

impl CoeffVector {
    pub fn new(basis: &HermiteBasis, coeffs: DVector<C64>) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return Err(Error::Dimension { expected: basis.len(), got: coeffs.len() });
        }
        Ok(Self { coeffs, key: basis.key() })
    }

    pub fn zeros(basis: &HermiteBasis) -> Self {
        Self { coeffs: DVector::zeros(basis.len()), key: basis.key() }
    }

    /// The basis vector `φ_α^λ`.
    pub fn unit(basis: &HermiteBasis, alpha: &[usize]) -> Result<Self> {
        let mut v = Self::zeros(basis);
        v.coeffs[basis.linear_index(alpha)?] = C64::new(1.0, 0.0);
        Ok(v)
    }

    /// `⟨self, other⟩`, linear in the first slot.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        if self.key != other.key {
            return Err(Error::Contract("coefficient vectors live in different bases".into()));
        }
        Ok(other.coeffs.dotc(&self.coeffs))
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.norm()
    }

    /// Samples of the represented function at a point.
    pub fn eval(&self, basis: &HermiteBasis, x: &[f64]) -> Result<C64> {
        if basis.key() != self.key {
            return Err(Error::Contract("basis mismatch".into()));
        }
        if x.len() != basis.dim() {
            return Err(Error::Dimension { expected: basis.dim(), got: x.len() });
        }
        let axes: Vec<Vec<f64>> = x.iter().map(|&xi| basis.eval_axis(xi)).collect();
        let n = basis.degree_cap();
        Ok(match basis.dim() {
            1 => (0..n).map(|a| self.coeffs[a] * axes[0][a]).sum(),
            _ => (0..n * n).map(|i| self.coeffs[i] * axes[0][i / n] * axes[1][i % n]).sum(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_single_node() {
        let (x, w) = build_quadrature(1).unwrap();
        assert_eq!(x, vec![0.0]);
        assert!((w[0] - PI.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn quadrature_rejects_zero() {
        assert!(matches!(build_quadrature(0), Err(Error::Domain(_))));
    }

    #[test]
    fn quadrature_second_moment() {
        let (x, w) = build_quadrature(20).unwrap();
        let m: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x * (-x * x).exp()).sum();
        assert!((m - PI.sqrt() / 2.0).abs() < 1e-12);
        assert!(w.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn quadrature_orthogonality_3_5() {
        let (x, w) = build_quadrature(20).unwrap();
        let s: f64 = x
            .iter()
            .zip(&w)
            .map(|(&x, w)| {
                let p = hermite_functions(6, x);
                w * p[3] * p[5]
            })
            .sum();
        assert!(s.abs() < 1e-12);
    }

    #[test]
    fn eval_closed_forms() {
        let b = HermiteBasis::new(1, 1.0, 4).unwrap();
        assert!((b.eval(&[0], &[0.0]).unwrap() - PI.powf(-0.25)).abs() < 1e-15);
        assert_eq!(b.eval(&[1], &[0.0]).unwrap(), 0.0);
        let b4 = HermiteBasis::new(1, 4.0, 4).unwrap();
        let expect = 4f64.powf(0.25) * PI.powf(-0.25);
        assert!((b4.eval(&[0], &[0.0]).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn eval_errors() {
        let b = HermiteBasis::new(1, 1.0, 4).unwrap();
        assert!(matches!(b.eval(&[4], &[0.0]), Err(Error::Index(_))));
        assert!(matches!(b.eval(&[1], &[f64::NAN]), Err(Error::Domain(_))));
        assert!(matches!(HermiteBasis::new(1, 0.0, 4), Err(Error::Domain(_))));
        assert!(matches!(HermiteBasis::new(3, 1.0, 4), Err(Error::Unsupported(_))));
    }

    #[test]
    fn gram_is_identity() {
        for &lam in &[1.0, 2.0, 0.5, -1.0] {
            let b = HermiteBasis::new(1, lam, 24).unwrap();
            assert!(b.gram_defect() < 1e-10, "lambda {lam}: {}", b.gram_defect());
        }
        let b2 = HermiteBasis::new(2, 1.0, 6).unwrap();
        assert!(b2.gram_defect() < 1e-10);
    }

    #[test]
    fn operator_examples() {
        let b = HermiteBasis::new(1, 1.0, 24).unwrap();
        assert!((b.hermite_operator_check(&[0]).unwrap() - 1.0).abs() < 1e-12);
        let b = HermiteBasis::new(1, 2.0, 24).unwrap();
        assert!((b.hermite_operator_check(&[2]).unwrap() - 10.0).abs() < 1e-12);
        let b = HermiteBasis::new(2, 1.0, 6).unwrap();
        assert!((b.hermite_operator_check(&[1, 1]).unwrap() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn operator_truncation_flagged() {
        let b = HermiteBasis::new(1, 1.0, 8).unwrap();
        assert!(matches!(b.hermite_operator_check(&[6]), Err(Error::Truncation(_))));
        assert!(b.hermite_operator_check(&[5]).is_ok());
    }

    #[test]
    fn lexicographic_order() {
        let b = HermiteBasis::new(2, 1.0, 3).unwrap();
        assert_eq!(b.multi_index(4), vec![1, 1]);
        assert_eq!(b.linear_index(&[2, 0]).unwrap(), 6);
    }
}
