//! Numerical witnesses for the uniqueness statements: a Weyl transform of a
//! compactly supported function never has finite rank, and finite-rank
//! operators come from functions with non-compact support.
//!
//! Finite rank is replaced by the relative-threshold SVD rank and compact
//! support by tail masses outside centered balls.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::heisenberg::{fourier_wigner, inverse_weyl, weyl_transform, GridCn, GridFunction, WeylMatrix};
use crate::hermite::{CoeffVector, HermiteBasis};
use crate::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankProfile {
    pub singular_values: Vec<f64>,
    pub epsilon: f64,
    pub numerical_rank: usize,
}

/// Singular values in nonincreasing order.
pub fn singular_values(m: &DMatrix<C64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Count of singular values above `epsilon·σ_1`.
pub fn rank_profile(w: &WeylMatrix, epsilon: f64) -> Result<RankProfile> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if !w.is_finite() {
        return Err(Error::Domain("operator has non-finite entries".into()));
    }
    let singular_values = singular_values(&w.matrix);
    let top = singular_values.first().copied().unwrap_or(0.0);
    let numerical_rank = if top == 0.0 { 0 } else { singular_values.iter().filter(|&&s| s > epsilon * top).count() };
    Ok(RankProfile { singular_values, epsilon, numerical_rank })
}

/// Best rank-`rank` approximation `U_r Σ_r V_rᴴ`.
pub fn truncate_rank(m: &DMatrix<C64>, rank: usize) -> DMatrix<C64> {
    let svd = m.clone().svd(true, true);
    let (u, vt) = (svd.u.expect("requested U"), svd.v_t.expect("requested Vᴴ"));
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for &i in order.iter().take(rank) {
        let s = svd.singular_values[i];
        if s == 0.0 {
            break;
        }
        out += u.column(i) * vt.row(i) * C64::new(s, 0.0);
    }
    out
}

/// `τ̂ = Σ_j a_j f_j f_jᴴ` written as `τ(z) = Σ_j conj(⟨π_λ(z)h_j, h_j⟩)` with
/// `h_j = √(a_j / c) f_j`, `c = (2π/|λ|)ⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerDecomposition {
    pub components: Vec<CoeffVector>,
    pub weights: Vec<f64>,
    /// `‖τ̂ − Σ a_j f_j f_jᴴ‖_HS / ‖τ̂‖_HS`.
    pub residual: f64,
    /// Most negative eigenvalue that was clipped to zero.
    pub clipped: f64,
}

/// Eigenvalues below this multiple of the largest one are dropped.
const COMPONENT_CUTOFF: f64 = 1e-13;

pub fn spectral_to_wigner(tau_hat: &WeylMatrix, basis: &HermiteBasis) -> Result<WignerDecomposition> {
    if tau_hat.key != basis.key() {
        return Err(Error::Contract("operator lives in a different basis".into()));
    }
    if !tau_hat.is_finite() {
        return Err(Error::Domain("operator has non-finite entries".into()));
    }
    let m = &tau_hat.matrix;
    let scale = m.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let skew = (m - m.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max);
    if skew > 1e-8 * scale.max(1.0) {
        return Err(Error::Contract(format!("operator is not Hermitian (defect {skew:.3e})")));
    }
    if scale == 0.0 {
        return Ok(WignerDecomposition { components: Vec::new(), weights: Vec::new(), residual: 0.0, clipped: 0.0 });
    }
    let herm = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = herm.clone().symmetric_eigen();
    let top = eig.eigenvalues.max();
    let bottom = eig.eigenvalues.min();
    if bottom < -1e-10 * top.max(1.0) {
        return Err(Error::Contract(format!("operator is not positive semidefinite (eigenvalue {bottom:.3e})")));
    }
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let c = (2.0 * PI / basis.lambda().abs()).powi(basis.dim() as i32);
    let mut components = Vec::new();
    let mut weights = Vec::new();
    let mut rebuilt = DMatrix::<C64>::zeros(m.nrows(), m.ncols());
    for &i in &order {
        let a = eig.eigenvalues[i];
        if a <= COMPONENT_CUTOFF * top {
            break;
        }
        let f = eig.eigenvectors.column(i).into_owned();
        rebuilt += &f * f.adjoint() * C64::new(a, 0.0);
        components.push(CoeffVector { coeffs: f * C64::new((a / c).sqrt(), 0.0), key: basis.key() });
        weights.push(a);
    }
    let residual = (m - rebuilt).norm() / m.norm();
    Ok(WignerDecomposition { components, weights, residual, clipped: bottom.min(0.0) })
}

impl WignerDecomposition {
    /// `τ = Σ_j conj(⟨π_λ(z)h_j, h_j⟩)` on the grid.
    pub fn synthesize(&self, basis: &HermiteBasis, grid: &GridCn) -> Result<GridFunction> {
        let mut tau = GridFunction::zeros(*grid);
        for h in &self.components {
            let v = fourier_wigner(basis, h, h, grid)?;
            for (t, x) in tau.values.iter_mut().zip(&v.values) {
                *t += x.conj();
            }
        }
        Ok(tau)
    }
}

fn check_kernel_data(basis: &HermiteBasis, chi: &[CoeffVector], phi: &[CoeffVector], b: &[C64]) -> Result<()> {
    if basis.dim() != 1 {
        return Err(Error::Unsupported("K_y is sampled on the real line only".into()));
    }
    if chi.is_empty() {
        return Err(Error::Domain("K_y needs at least one term".into()));
    }
    if phi.len() != chi.len() {
        return Err(Error::Dimension { expected: chi.len(), got: phi.len() });
    }
    if b.len() != chi.len() {
        return Err(Error::Dimension { expected: chi.len(), got: b.len() });
    }
    if b.iter().any(|w| *w == C64::new(0.0, 0.0)) {
        return Err(Error::Domain("weights b_j must be nonzero".into()));
    }
    if chi.iter().chain(phi).any(|v| v.key != basis.key()) {
        return Err(Error::Contract("coefficient vector lives in a different basis".into()));
    }
    Ok(())
}

/// `K_y(ξ) = Σ_j b_j χ_j(ξ + y) conj(φ_j(ξ))` at the points `xi`.
pub fn kernel_ky(
    basis: &HermiteBasis,
    chi: &[CoeffVector],
    phi: &[CoeffVector],
    b: &[C64],
    y: f64,
    xi: &[f64],
) -> Result<Vec<C64>> {
    check_kernel_data(basis, chi, phi, b)?;
    let dot = |v: &CoeffVector, e: &[f64]| -> C64 { v.coeffs.iter().zip(e).map(|(c, x)| c * x).sum() };
    Ok(xi
        .iter()
        .map(|&x| {
            let shifted = basis.eval_axis(x + y);
            let here = basis.eval_axis(x);
            chi.iter().zip(phi).zip(b).map(|((c, p), w)| w * dot(c, &shifted) * dot(p, &here).conj()).sum()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelDecay {
    pub ys: Vec<f64>,
    /// `max_ξ |K_y(ξ)|` per sampled `y`.
    pub max_abs: Vec<f64>,
    pub tol: f64,
    /// Smallest sampled `|y|` beyond which every sampled `max_ξ |K_y|` is at
    /// most `tol`; `None` when the largest sampled `|y|` is still above it.
    pub r_hat: Option<f64>,
}

impl KernelDecay {
    /// `min_{|y| ≥ r} max_ξ |K_y(ξ)|` over the sampled `y`, or `None` when no
    /// sample lies that far out.
    pub fn floor_beyond(&self, r: f64) -> Option<f64> {
        self.ys.iter().zip(&self.max_abs).filter(|(y, _)| y.abs() >= r).map(|(_, m)| *m).reduce(f64::min)
    }
}

pub fn kernel_decay(
    basis: &HermiteBasis,
    chi: &[CoeffVector],
    phi: &[CoeffVector],
    b: &[C64],
    ys: &[f64],
    xi: &[f64],
    tol: f64,
) -> Result<KernelDecay> {
    let max_abs = ys
        .iter()
        .map(|&y| Ok(kernel_ky(basis, chi, phi, b, y, xi)?.iter().map(|v| v.norm()).fold(0.0, f64::max)))
        .collect::<Result<Vec<f64>>>()?;
    let mut by_radius: Vec<(f64, f64)> = ys.iter().map(|y| y.abs()).zip(max_abs.iter().copied()).collect();
    by_radius.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut r_hat = None;
    for (r, m) in by_radius {
        if m > tol {
            break;
        }
        r_hat = Some(r);
    }
    Ok(KernelDecay { ys: ys.to_vec(), max_abs, tol, r_hat })
}

/// Eight-point Gauss–Legendre rule on `[−1, 1]`.
const GL_NODES: [f64; 4] = [0.183_434_642_495_649_8, 0.525_532_409_916_329, 0.796_666_477_413_626_7, 0.960_289_856_497_536_3];
const GL_WEIGHTS: [f64; 4] = [0.362_683_783_378_362, 0.313_706_645_877_887_3, 0.222_381_034_453_374_5, 0.101_228_536_290_376_3];
const STENCIL: usize = 8;

/// Eight-point tensor Lagrange interpolation of a one-plane grid function.
fn interpolate(f: &GridFunction, x: f64, y: f64) -> C64 {
    let grid = &f.grid;
    let m = grid.points_per_axis;
    let h = grid.spacing();
    let weights = |t: f64| -> (usize, [f64; STENCIL]) {
        let s = (t + grid.half_width) / h;
        let k0 = (s.floor() as i64 - (STENCIL as i64 / 2 - 1)).clamp(0, (m - STENCIL) as i64) as usize;
        let mut w = [1.0; STENCIL];
        for (i, wi) in w.iter_mut().enumerate() {
            for j in 0..STENCIL {
                if j != i {
                    *wi *= (s - (k0 + j) as f64) / (i as f64 - j as f64);
                }
            }
        }
        (k0, w)
    };
    let (kx, wx) = weights(x);
    let (ky, wy) = weights(y);
    let mut v = C64::new(0.0, 0.0);
    for (i, a) in wx.iter().enumerate() {
        let row = &f.values[(kx + i) * m + ky..(kx + i) * m + ky + STENCIL];
        let s: C64 = row.iter().zip(&wy).map(|(r, b)| r * b).sum();
        v += s * a;
    }
    v
}

/// `∫_{|z| > R} |F(z)|² dz`.
///
/// On `ℂ` the annulus `R < |z| < L − 4h` is integrated in polar coordinates
/// (Gauss–Legendre panels of width `h` in `r`, trapezoid in the angle) on
/// the interpolated samples, and the lattice sum covers the rest. On `ℂ²`
/// this is the plain lattice sum over points with `|z| > R`.
pub fn tail_mass(f: &GridFunction, radius: f64) -> Result<f64> {
    let grid = &f.grid;
    if !(radius >= 0.0 && radius < grid.half_width) {
        return Err(Error::Domain(format!("radius {radius} outside [0, {})", grid.half_width)));
    }
    let h = grid.spacing();
    let lattice = |r0: f64| -> f64 {
        (0..grid.len()).filter(|&i| grid.radius(i) > r0).map(|i| f.values[i].norm_sqr()).sum::<f64>() * grid.cell_weight()
    };
    let r_out = grid.half_width - 4.0 * h;
    if grid.dim != 1 || radius >= r_out {
        return Ok(lattice(radius));
    }
    let panels = ((r_out - radius) / h).ceil() as usize;
    let width = (r_out - radius) / panels as f64;
    let angles = 64usize.max(4 * (PI * r_out / h).ceil() as usize);
    let dphi = 2.0 * PI / angles as f64;
    let ring = |r: f64| -> f64 {
        (0..angles)
            .map(|a| {
                let (s, c) = (a as f64 * dphi).sin_cos();
                interpolate(f, r * c, r * s).norm_sqr()
            })
            .sum::<f64>()
            * dphi
    };
    let mut annulus = 0.0;
    for p in 0..panels {
        let mid = radius + (p as f64 + 0.5) * width;
        for (x, w) in GL_NODES.iter().zip(&GL_WEIGHTS) {
            for r in [mid - 0.5 * width * x, mid + 0.5 * width * x] {
                annulus += 0.5 * width * w * r * ring(r);
            }
        }
    }
    Ok(annulus + lattice(r_out))
}

/// Indicator of a support set on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportMask {
    pub grid: GridCn,
    pub inside: Vec<bool>,
}

impl SupportMask {
    /// Closed centered ball of the given radius.
    pub fn ball(grid: GridCn, radius: f64) -> Self {
        Self { grid, inside: (0..grid.len()).map(|i| grid.radius(i) <= radius).collect() }
    }

    pub fn full(grid: GridCn) -> Self {
        Self { grid, inside: vec![true; grid.len()] }
    }

    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        if f.grid != self.grid {
            return Err(Error::Contract("mask and function live on different grids".into()));
        }
        let values = f.values.iter().zip(&self.inside).map(|(v, &k)| if k { *v } else { C64::new(0.0, 0.0) }).collect();
        Ok(GridFunction { grid: self.grid, values })
    }
}

/// Alternating projections between functions supported in the mask and
/// functions whose Weyl transform has rank at most `rank_cap`. Returns
/// `‖F_k‖` for `k = 0..=iterations`, where
/// `F_{k+1} = W⁻¹(truncate_rank(W(mask · F_k)))`.
pub fn pocs_explorer(
    basis: &HermiteBasis,
    mask: &SupportMask,
    f0: &GridFunction,
    rank_cap: usize,
    iterations: usize,
) -> Result<Vec<f64>> {
    if rank_cap == 0 {
        return Err(Error::Domain("rank cap must be at least 1".into()));
    }
    if iterations == 0 {
        return Err(Error::Domain("at least one iteration is required".into()));
    }
    let mut f = f0.clone();
    let mut trajectory = vec![f.norm()];
    for _ in 0..iterations {
        let w = weyl_transform(basis, &mask.apply(&f)?)?;
        let low = WeylMatrix { matrix: truncate_rank(&w.matrix, rank_cap), ..w };
        f = inverse_weyl(basis, &low, &f.grid)?;
        trajectory.push(f.norm());
    }
    Ok(trajectory)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_matrix_has_rank_zero() {
        let b = HermiteBasis::new(1, 1.0, 6).unwrap();
        let p = rank_profile(&WeylMatrix::zeros(&b), 1e-8).unwrap();
        assert_eq!(p.numerical_rank, 0);
        assert!(rank_profile(&WeylMatrix::zeros(&b), 1.0).is_err());
        let d = spectral_to_wigner(&WeylMatrix::zeros(&b), &b).unwrap();
        assert!(d.components.is_empty() && d.residual == 0.0);
    }

    #[test]
    fn truncation_keeps_leading_directions() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::new(1.0, 0.0),
            C64::new(3.0, 0.0),
            C64::new(2.0, 0.0),
        ]));
        let t = truncate_rank(&m, 2);
        let expect = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::new(0.0, 0.0),
            C64::new(3.0, 0.0),
            C64::new(2.0, 0.0),
        ]));
        assert!((t - expect).norm() < 1e-12);
    }

    #[test]
    fn gauss_legendre_integrates_degree_fifteen() {
        let mut s = 0.0;
        for (x, w) in GL_NODES.iter().zip(&GL_WEIGHTS) {
            s += w * (x.powi(14) + (-x).powi(14));
        }
        assert!((s - 2.0 / 15.0).abs() < 1e-15);
        assert!((GL_WEIGHTS.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn non_hermitian_input_is_rejected() {
        let b = HermiteBasis::new(1, 1.0, 3).unwrap();
        let mut w = WeylMatrix::zeros(&b);
        w.matrix[(0, 1)] = C64::new(1.0, 0.0);
        assert!(matches!(spectral_to_wigner(&w, &b), Err(Error::Contract(_))));
    }
}
