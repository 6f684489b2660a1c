//! Heisenberg group layer on `ℂⁿ`: the Schrödinger representation in the
//! scaled Hermite basis, special Hermite functions, the Fourier–Wigner
//! transform, the Weyl transform of grid functions and the λ-twisted
//! convolution.
//!
//! Operator matrices are stored in the usual orientation: entry `(β, α)` is
//! `⟨π_λ(z)φ_α, φ_β⟩`, so composition of operators is the matrix product.
//! Points of `ℂⁿ` are handled as real coordinate slices `(x_1..x_n, y_1..y_n)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hermite::{BasisKey, CoeffVector, HermiteBasis};

/// Fraction of the box half-width treated as the boundary band when checking
/// that a function is effectively supported inside the grid.
pub const EDGE_BAND: f64 = 0.125;

/// Rows of the outermost grid axis handled per work item. Fixed so that the
/// summation order does not depend on the thread count.
const ROWS_PER_CHUNK: usize = 4;

/// Uniform lattice `{k·h : −M/2 ≤ k < M/2}^{2n}` with `h = 2L/M`.
///
/// The layer `k = −M/2` has no mirror image under `z ↦ −z`, so grid
/// functions always vanish there and effectively live on the symmetric
/// lattice `|k| < M/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCn {
    pub dim: usize,
    pub half_width: f64,
    pub points_per_axis: usize,
}

impl GridCn {
    pub fn new(dim: usize, half_width: f64, points_per_axis: usize) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::Unsupported(format!("complex dimension {dim}")));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::Domain(format!("half width must be positive, got {half_width}")));
        }
        if points_per_axis < 8 || points_per_axis % 2 != 0 {
            return Err(Error::Domain(format!(
                "points per axis must be even and at least 8, got {points_per_axis}"
            )));
        }
        Ok(Self { dim, half_width, points_per_axis })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points_per_axis as f64
    }

    pub fn cell_weight(&self) -> f64 {
        self.spacing().powi(2 * self.dim as i32)
    }

    pub fn axes(&self) -> usize {
        2 * self.dim
    }

    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.axes() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of lattice index `k` along any axis.
    pub fn coord(&self, k: usize) -> f64 {
        (k as f64 - (self.points_per_axis / 2) as f64) * self.spacing()
    }

    /// Per-axis lattice indices of a flat index (row-major, last axis fastest).
    pub fn unravel(&self, mut idx: usize) -> Vec<usize> {
        let m = self.points_per_axis;
        let mut ks = vec![0; self.axes()];
        for k in ks.iter_mut().rev() {
            *k = idx % m;
            idx /= m;
        }
        ks
    }

    pub fn ravel(&self, ks: &[usize]) -> usize {
        ks.iter().fold(0, |acc, &k| acc * self.points_per_axis + k)
    }

    /// Real coordinates `(x_1..x_n, y_1..y_n)` of a flat index.
    pub fn point(&self, idx: usize) -> Vec<f64> {
        self.unravel(idx).into_iter().map(|k| self.coord(k)).collect()
    }

    /// Flat index of `−z`, or `None` on the unpaired layer `k = −M/2`.
    pub fn neg_index(&self, idx: usize) -> Option<usize> {
        let m = self.points_per_axis;
        let ks = self.unravel(idx);
        if ks.contains(&0) {
            return None;
        }
        Some(self.ravel(&ks.into_iter().map(|k| m - k).collect::<Vec<_>>()))
    }

    /// True unless the point lies on the unpaired layer `k = −M/2`.
    pub fn is_paired(&self, idx: usize) -> bool {
        let m = self.points_per_axis;
        let mut idx = idx;
        for _ in 0..self.axes() {
            if idx % m == 0 {
                return false;
            }
            idx /= m;
        }
        true
    }

    /// Euclidean norm of the point.
    pub fn radius(&self, idx: usize) -> f64 {
        self.point(idx).iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

/// Complex samples of a function on a [`GridCn`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub grid: GridCn,
    pub values: Vec<C64>,
}

impl GridFunction {
    /// Wraps samples in row-major order. Samples on the unpaired layer are
    /// replaced by zero.
    pub fn new(grid: GridCn, mut values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension { expected: grid.len(), got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("grid function has non-finite samples".into()));
        }
        for (i, v) in values.iter_mut().enumerate() {
            if !grid.is_paired(i) {
                *v = C64::new(0.0, 0.0);
            }
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: GridCn) -> Self {
        Self { grid, values: vec![C64::new(0.0, 0.0); grid.len()] }
    }

    /// Samples `f(x_1..x_n, y_1..y_n)` at every lattice point.
    pub fn from_fn(grid: GridCn, f: impl Fn(&[f64]) -> C64 + Sync) -> Self {
        let values = (0..grid.len())
            .into_par_iter()
            .map(|i| if grid.is_paired(i) { f(&grid.point(i)) } else { C64::new(0.0, 0.0) })
            .collect();
        Self { grid, values }
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Contract("grid functions live on different grids".into()));
        }
        Ok(())
    }

    /// Discrete `∫|F|² dz`.
    pub fn norm_sq(&self) -> f64 {
        self.grid.cell_weight() * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Discrete `∫ F·conj(G) dz`.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        self.check_same(other)?;
        let s: C64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b.conj()).sum();
        Ok(s * self.grid.cell_weight())
    }

    pub fn conj(&self) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| v.conj()).collect() }
    }

    /// `F*(z) = conj(F(−z))`.
    pub fn star(&self) -> Self {
        let values = (0..self.grid.len())
            .map(|i| self.grid.neg_index(i).map_or(C64::new(0.0, 0.0), |j| self.values[j].conj()))
            .collect();
        Self { grid: self.grid, values }
    }

    pub fn scale(&self, c: C64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| v * c).collect() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self { grid: self.grid, values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect() })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    /// Relative mass in the boundary band `max_j |coord_j| ≥ (1 − EDGE_BAND)·L`.
    pub fn edge_fraction(&self) -> f64 {
        let total: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let cut = (1.0 - EDGE_BAND) * self.grid.half_width;
        let edge: f64 = (0..self.grid.len())
            .filter(|&i| self.grid.point(i).iter().any(|c| c.abs() >= cut))
            .map(|i| self.values[i].norm_sqr())
            .sum();
        edge / total
    }
}

/// Dense operator in the truncated Hermite basis with its metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct WeylMatrix {
    pub matrix: DMatrix<C64>,
    pub lambda: f64,
    pub sigma_index: Option<i64>,
    pub key: BasisKey,
    pub truncation_residual: f64,
}

impl WeylMatrix {
    pub fn new(basis: &HermiteBasis, matrix: DMatrix<C64>) -> Self {
        Self { matrix, lambda: basis.lambda(), sigma_index: None, key: basis.key(), truncation_residual: 0.0 }
    }

    pub fn zeros(basis: &HermiteBasis) -> Self {
        let n = basis.len();
        Self::new(basis, DMatrix::zeros(n, n))
    }

    pub fn hs_norm(&self) -> f64 {
        self.matrix.norm()
    }

    pub fn adjoint(&self) -> Self {
        Self { matrix: self.matrix.adjoint(), ..self.clone() }
    }

    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.key != other.key {
            return Err(Error::Contract("operators live in different bases".into()));
        }
        Ok(Self {
            matrix: &self.matrix * &other.matrix,
            truncation_residual: self.truncation_residual.max(other.truncation_residual),
            ..self.clone()
        })
    }

    /// `⟨W φ_α, φ_β⟩`.
    pub fn coefficient(&self, basis: &HermiteBasis, alpha: &[usize], beta: &[usize]) -> Result<C64> {
        Ok(self.matrix[(basis.linear_index(beta)?, basis.linear_index(alpha)?)])
    }

    /// `‖self − other‖_HS`.
    pub fn hs_distance(&self, other: &Self) -> f64 {
        (&self.matrix - &other.matrix).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.matrix.iter().all(|v| v.is_finite())
    }
}

/// Displacement parameter of `π_λ(x + iy)` on one axis: `π_λ = exp(β a† − β̄ a)`
/// with `β = √(|λ|/2)(−y + i·sgn(λ)·x)`.
pub fn displacement_parameter(lambda: f64, x: f64, y: f64) -> C64 {
    (lambda.abs() / 2.0).sqrt() * C64::new(-y, lambda.signum() * x)
}

/// Column-major `n×n` matrix of the displacement operator `exp(β a† − β̄ a)`
/// in the number basis.
///
/// Entry `(m, k)` with `m ≥ k` is `e^{i(m−k)·arg β} ℓ_k^{(m−k)}(|β|²)`, where
/// `ℓ_k^{(a)}(x) = √(k!/(k+a)!) x^{a/2} e^{−x/2} L_k^{(a)}(x)` are normalized
/// Laguerre functions; entries above the diagonal follow from
/// `D(β)_{mk} = conj(D(−β)_{km})`. The normalized three-term recurrence in
/// `k` is forward stable; the column recurrence `D a† = (a† − β̄) D` is not.
pub fn fill_displacement(n: usize, beta: C64, out: &mut [C64]) {
    debug_assert_eq!(out.len(), n * n);
    let x = beta.norm_sqr();
    let unit = if x > 0.0 { beta / x.sqrt() } else { C64::new(1.0, 0.0) };
    let mut rot = C64::new(1.0, 0.0);
    let mut log_head = -0.5 * x;
    for a in 0..n {
        if a > 0 {
            log_head += 0.5 * (x / a as f64).ln();
            rot *= unit;
        }
        let head = if x > 0.0 || a == 0 { log_head.exp() } else { 0.0 };
        let af = a as f64;
        // Upper-diagonal phase: (−β̄/|β|)^a.
        let sign = if a % 2 == 0 { 1.0 } else { -1.0 };
        let (mut prev, mut cur) = (0.0, head);
        for k in 0..n - a {
            let kf = k as f64;
            out[k * n + k + a] = rot * cur;
            if a > 0 {
                out[(k + a) * n + k] = rot.conj() * (sign * cur);
            }
            let next = ((2.0 * kf + 1.0 + af - x) * cur - (kf * (kf + af)).sqrt() * prev) / ((kf + 1.0) * (kf + 1.0 + af)).sqrt();
            prev = cur;
            cur = next;
        }
    }
}

/// One-axis Schrödinger matrix `⟨π_λ(x+iy)φ_α^λ, φ_β^λ⟩` from the Laguerre closed form.
pub fn schrodinger_axis(n: usize, lambda: f64, x: f64, y: f64) -> DMatrix<C64> {
    let mut buf = vec![C64::new(0.0, 0.0); n * n];
    fill_displacement(n, displacement_parameter(lambda, x, y), &mut buf);
    DMatrix::from_vec(n, n, buf)
}

/// One-axis Schrödinger matrix by Gauss–Hermite quadrature of
/// `∫ e^{iλ(xξ + xy/2)} φ_α^λ(ξ + y) φ_β^λ(ξ) dξ`.
pub fn schrodinger_axis_quadrature(basis: &HermiteBasis, x: f64, y: f64) -> DMatrix<C64> {
    let n = basis.degree_cap();
    let lam = basis.lambda();
    let mut m = DMatrix::zeros(n, n);
    for (&xi, &w) in basis.quad_nodes().iter().zip(basis.quad_weights()) {
        let shifted = basis.eval_axis(xi + y);
        let here = basis.eval_axis(xi);
        let phase = C64::from_polar(w, lam * (x * xi + 0.5 * x * y));
        for a in 0..n {
            let pa = phase * shifted[a];
            for b in 0..n {
                m[(b, a)] += pa * here[b];
            }
        }
    }
    m
}

fn check_point(basis: &HermiteBasis, point: &[f64]) -> Result<()> {
    if point.len() != 2 * basis.dim() {
        return Err(Error::Dimension { expected: 2 * basis.dim(), got: point.len() });
    }
    if point.iter().any(|c| !c.is_finite()) {
        return Err(Error::Domain("point of ℂⁿ is not finite".into()));
    }
    Ok(())
}

fn unitarity_defect(m: &DMatrix<C64>) -> f64 {
    let n = m.ncols();
    (m.adjoint() * m - DMatrix::<C64>::identity(n, n)).iter().map(|v| v.norm()).fold(0.0, f64::max)
}

fn tensor_axes(basis: &HermiteBasis, point: &[f64], axis: impl Fn(f64, f64) -> DMatrix<C64>) -> DMatrix<C64> {
    let n = basis.dim();
    let mut m = axis(point[0], point[n]);
    for j in 1..n {
        m = m.kronecker(&axis(point[j], point[n + j]));
    }
    m
}

/// `π_λ(z)` at `t = 0`, by quadrature, with the unitarity defect
/// `‖PᴴP − I‖_max` of the truncated matrix in `truncation_residual`.
pub fn schrodinger_matrix(basis: &HermiteBasis, point: &[f64]) -> Result<WeylMatrix> {
    check_point(basis, point)?;
    let m = tensor_axes(basis, point, |x, y| schrodinger_axis_quadrature(basis, x, y));
    let defect = unitarity_defect(&m);
    Ok(WeylMatrix { truncation_residual: defect, ..WeylMatrix::new(basis, m) })
}

/// `π_λ(z)` from the Laguerre closed form.
pub fn schrodinger_matrix_laguerre(basis: &HermiteBasis, point: &[f64]) -> Result<WeylMatrix> {
    check_point(basis, point)?;
    let (n, lam) = (basis.degree_cap(), basis.lambda());
    let m = tensor_axes(basis, point, |x, y| schrodinger_axis(n, lam, x, y));
    let defect = unitarity_defect(&m);
    Ok(WeylMatrix { truncation_residual: defect, ..WeylMatrix::new(basis, m) })
}

/// Special Hermite function `φ_{αβ}^λ(z) = (2π)^{−n/2}⟨π_λ(z)φ_α^λ, φ_β^λ⟩`.
pub fn special_hermite(basis: &HermiteBasis, alpha: &[usize], beta: &[usize], point: &[f64]) -> Result<C64> {
    check_point(basis, point)?;
    let (ia, ib) = (basis.linear_index(alpha)?, basis.linear_index(beta)?);
    let n = basis.dim();
    let (nn, lam) = (basis.degree_cap(), basis.lambda());
    let mut v = C64::new((2.0 * PI).powf(-(n as f64) / 2.0), 0.0);
    let (ma, mb) = (basis.multi_index(ia), basis.multi_index(ib));
    for j in 0..n {
        v *= schrodinger_axis(nn, lam, point[j], point[n + j])[(mb[j], ma[j])];
    }
    Ok(v)
}

/// Per-axis Schrödinger matrices for every lattice coordinate pair of one
/// `(x_j, y_j)` plane, column-major buffers indexed `kx·M + ky`.
pub(crate) fn plane_table(grid: &GridCn, n: usize, lambda: f64) -> Vec<Vec<C64>> {
    let m = grid.points_per_axis;
    (0..m * m)
        .into_par_iter()
        .map(|i| {
            let mut buf = vec![C64::new(0.0, 0.0); n * n];
            fill_displacement(n, displacement_parameter(lambda, grid.coord(i / m), grid.coord(i % m)), &mut buf);
            buf
        })
        .collect()
}

fn check_grid_dim(basis: &HermiteBasis, grid: &GridCn) -> Result<()> {
    if basis.dim() != grid.dim {
        return Err(Error::Contract(format!("basis dimension {} vs grid dimension {}", basis.dim(), grid.dim)));
    }
    Ok(())
}

/// Discrete Weyl transform `W_λ(F) = Σ_z h^{2n} F(z) π_λ(z)`.
///
/// `truncation_residual` records the relative mass of `F` in the boundary
/// band, a measure of how well the box contains `F`.
pub fn weyl_transform(basis: &HermiteBasis, f: &GridFunction) -> Result<WeylMatrix> {
    check_grid_dim(basis, &f.grid)?;
    let lambdas = vec![basis.lambda(); basis.dim()];
    let m = weyl_sum(basis.degree_cap(), &lambdas, &f.grid, &f.values);
    Ok(WeylMatrix { truncation_residual: f.edge_fraction(), ..WeylMatrix::new(basis, m) })
}

/// Inverse Weyl transform `F(z) = (2π)^{−n}|λ|ⁿ tr(π_λ(z)* W)` on every
/// grid point.
pub fn inverse_weyl(basis: &HermiteBasis, w: &WeylMatrix, grid: &GridCn) -> Result<GridFunction> {
    check_grid_dim(basis, grid)?;
    if w.key != basis.key() {
        return Err(Error::Contract("operator lives in a different basis".into()));
    }
    let n = basis.dim();
    let lambdas = vec![basis.lambda(); n];
    // tr(π(z)* W) = Σ conj(π(z)_{βα}) W_{βα} is the conjugated synthesis up to (2π)^{n/2}.
    let scale = (2.0 * PI).powf(-(n as f64) / 2.0) * basis.lambda().abs().powi(n as i32);
    let values = crate::samples::synthesize_conj(basis.degree_cap(), &lambdas, grid, &w.matrix);
    GridFunction::new(*grid, values.into_iter().map(|v| v * scale).collect())
}

/// `Σ_z h^{2n} F(z) ⊗_j π_{λ_j}(x_j + iy_j)` with one scale per plane.
pub(crate) fn weyl_sum(n: usize, lambdas: &[f64], grid: &GridCn, values: &[C64]) -> DMatrix<C64> {
    let lam = lambdas[0];
    let mm = grid.points_per_axis;
    let w = grid.cell_weight();
    match grid.dim {
        1 => {
            let rows: Vec<usize> = (0..mm).collect();
            let partials: Vec<Vec<C64>> = rows
                .par_chunks(ROWS_PER_CHUNK)
                .map(|chunk| {
                    let mut acc = vec![C64::new(0.0, 0.0); n * n];
                    let mut buf = vec![C64::new(0.0, 0.0); n * n];
                    for &kx in chunk {
                        for ky in 0..mm {
                            let fv = values[kx * mm + ky];
                            if fv == C64::new(0.0, 0.0) {
                                continue;
                            }
                            let beta = displacement_parameter(lam, grid.coord(kx), grid.coord(ky));
                            fill_displacement(n, beta, &mut buf);
                            for (a, b) in acc.iter_mut().zip(&buf) {
                                *a += fv * b;
                            }
                        }
                    }
                    acc
                })
                .collect();
            let mut total = vec![C64::new(0.0, 0.0); n * n];
            for p in partials {
                for (t, v) in total.iter_mut().zip(p) {
                    *t += v;
                }
            }
            total.iter_mut().for_each(|v| *v *= w);
            DMatrix::from_vec(n, n, total)
        }
        _ => {
            // Axes are (x1, x2, y1, y2). Sum the second plane first, then the
            // Kronecker product with the first-plane matrix.
            let table = plane_table(grid, n, lambdas[1]);
            let plane: Vec<usize> = (0..mm * mm).collect();
            let partials: Vec<DMatrix<C64>> = plane
                .par_chunks(ROWS_PER_CHUNK * mm)
                .map(|chunk| {
                    let mut acc = DMatrix::<C64>::zeros(n * n, n * n);
                    let mut inner = vec![C64::new(0.0, 0.0); n * n];
                    let mut outer = vec![C64::new(0.0, 0.0); n * n];
                    for &p1 in chunk {
                        let (kx1, ky1) = (p1 / mm, p1 % mm);
                        inner.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
                        let mut any = false;
                        for kx2 in 0..mm {
                            for ky2 in 0..mm {
                                let idx = ((kx1 * mm + kx2) * mm + ky1) * mm + ky2;
                                let fv = values[idx];
                                if fv == C64::new(0.0, 0.0) {
                                    continue;
                                }
                                any = true;
                                for (a, b) in inner.iter_mut().zip(&table[kx2 * mm + ky2]) {
                                    *a += fv * b;
                                }
                            }
                        }
                        if !any {
                            continue;
                        }
                        fill_displacement(n, displacement_parameter(lam, grid.coord(kx1), grid.coord(ky1)), &mut outer);
                        let a = DMatrix::from_column_slice(n, n, &outer);
                        let s = DMatrix::from_column_slice(n, n, &inner);
                        acc += a.kronecker(&s);
                    }
                    acc
                })
                .collect();
            let mut total = DMatrix::<C64>::zeros(n * n, n * n);
            for p in partials {
                total += p;
            }
            total * C64::new(w, 0.0)
        }
    }
}

/// Fourier–Wigner transform `T(φ, ψ)(z) = ⟨π_λ(z)φ, ψ⟩` sampled on the grid.
pub fn fourier_wigner(basis: &HermiteBasis, phi: &CoeffVector, psi: &CoeffVector, grid: &GridCn) -> Result<GridFunction> {
    check_grid_dim(basis, grid)?;
    if phi.key != basis.key() || psi.key != basis.key() {
        return Err(Error::Contract("coefficient vectors do not belong to this basis".into()));
    }
    let lambdas = vec![basis.lambda(); basis.dim()];
    let values = fourier_wigner_values(basis.degree_cap(), &lambdas, grid, phi.coeffs.as_slice(), psi.coeffs.as_slice());
    GridFunction::new(*grid, values)
}

/// Samples of `⟨(⊗_j π_{λ_j})(z)φ, ψ⟩` with one scale per plane.
pub(crate) fn fourier_wigner_values(n: usize, lambdas: &[f64], grid: &GridCn, phi: &[C64], psi: &[C64]) -> Vec<C64> {
    match grid.dim {
        1 => (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let p = grid.point(i);
                let mut buf = vec![C64::new(0.0, 0.0); n * n];
                fill_displacement(n, displacement_parameter(lambdas[0], p[0], p[1]), &mut buf);
                bilinear(&buf, n, phi, psi)
            })
            .collect(),
        _ => {
            let t1 = plane_table(grid, n, lambdas[0]);
            let t2 = plane_table(grid, n, lambdas[1]);
            let mm = grid.points_per_axis;
            let phi_m = DMatrix::from_row_slice(n, n, phi);
            let psi_c = DMatrix::from_row_slice(n, n, psi).map(|v| v.conj());
            // (A ⊗ B) vec(Φ) with row-major Φ is A Φ Bᵀ, and
            // Σ conj(Ψ) ∘ (A Φ Bᵀ) = Σ (Aᵀ conj(Ψ)) ∘ (Φ Bᵀ).
            let left: Vec<DMatrix<C64>> =
                t1.par_iter().map(|a| DMatrix::from_column_slice(n, n, a).transpose() * &psi_c).collect();
            let right: Vec<DMatrix<C64>> =
                t2.par_iter().map(|b| &phi_m * DMatrix::from_column_slice(n, n, b).transpose()).collect();
            (0..grid.len())
                .into_par_iter()
                .map(|i| {
                    let (p, q) = ((i / (mm * mm * mm)) * mm + (i / mm) % mm, ((i / (mm * mm)) % mm) * mm + i % mm);
                    left[p].iter().zip(right[q].iter()).map(|(a, b)| a * b).sum()
                })
                .collect()
        }
    }
}

/// `ψᴴ P φ` for a column-major `P`.
fn bilinear(p: &[C64], n: usize, phi: &[C64], psi: &[C64]) -> C64 {
    let mut s = C64::new(0.0, 0.0);
    for (a, &fa) in phi.iter().enumerate() {
        if fa == C64::new(0.0, 0.0) {
            continue;
        }
        let col = &p[a * n..(a + 1) * n];
        let mut c = C64::new(0.0, 0.0);
        for (v, q) in col.iter().zip(psi) {
            c += v * q.conj();
        }
        s += fa * c;
    }
    s
}

pub(crate) fn check_tail(f: &GridFunction, which: &str) -> Result<()> {
    let tail = f.edge_fraction();
    if tail > 1e-8 {
        return Err(Error::Precondition { what: format!("{which} is not supported well inside the grid box"), tail });
    }
    Ok(())
}

/// Phase table `E[a][b] = exp(−(i/2)·λ·c_a·c_b)` over lattice coordinates.
fn phase_table(grid: &GridCn, lambda: f64) -> Vec<C64> {
    let m = grid.points_per_axis;
    let mut t = Vec::with_capacity(m * m);
    for a in 0..m {
        for b in 0..m {
            t.push(C64::from_polar(1.0, -0.5 * lambda * grid.coord(a) * grid.coord(b)));
        }
    }
    t
}

/// λ-twisted convolution `F ×_λ H(z) = Σ_w h^{2n} F(z − w) H(w) e^{−(i/2)λ Im(w·z̄)}`
/// by grid-shift summation with precomputed phase tables. Samples of `F`
/// outside the box are taken as zero.
pub fn twisted_convolution(lambda: f64, f: &GridFunction, h: &GridFunction) -> Result<GridFunction> {
    prepare_convolution(lambda, f, h)?;
    twisted_convolution_scaled(&vec![lambda; f.grid.dim], f, h)
}

/// Twisted convolution with one scale per plane: the phase is
/// `exp(−(i/2) Σ_j λ_j (w_yj z_xj − w_xj z_yj))`. Callers check the tails.
pub(crate) fn twisted_convolution_scaled(lambdas: &[f64], f: &GridFunction, h: &GridFunction) -> Result<GridFunction> {
    let grid = f.grid;
    let m = grid.points_per_axis;
    let half = m / 2;
    let table = phase_table(&grid, lambdas[0]);
    let table2 = if grid.dim == 2 { phase_table(&grid, lambdas[1]) } else { Vec::new() };
    let w = grid.cell_weight();
    let values: Vec<C64> = match grid.dim {
        1 => (0..m)
            .into_par_iter()
            .flat_map_iter(|zx| {
                // H(w) e^{−(i/2)λ w_y z_x}, then the y-convolution per w_x row.
                let mut hm = vec![C64::new(0.0, 0.0); m * m];
                for wx in 0..m {
                    for wy in 0..m {
                        hm[wx * m + wy] = h.values[wx * m + wy] * table[wy * m + zx];
                    }
                }
                let mut out = vec![C64::new(0.0, 0.0); m];
                let mut row = vec![C64::new(0.0, 0.0); m];
                for wx in 0..m {
                    let dx = zx + half;
                    if dx < wx || dx - wx >= m {
                        continue;
                    }
                    let frow = &f.values[(dx - wx) * m..(dx - wx + 1) * m];
                    let hrow = &hm[wx * m..(wx + 1) * m];
                    for (zy, r) in row.iter_mut().enumerate() {
                        let lo = (zy + half + 1).saturating_sub(m);
                        let hi = (zy + half + 1).min(m);
                        let mut s = C64::new(0.0, 0.0);
                        for wy in lo..hi {
                            s += frow[zy + half - wy] * hrow[wy];
                        }
                        *r = s;
                    }
                    for (zy, (o, r)) in out.iter_mut().zip(&row).enumerate() {
                        *o += table[wx * m + zy].conj() * r;
                    }
                }
                out.into_iter().map(move |v| v * w)
            })
            .collect(),
        _ => (0..grid.len())
            .into_par_iter()
            .map(|zi| {
                let z = [zi / (m * m * m), (zi / (m * m)) % m, (zi / m) % m, zi % m];
                // Shifts w with z − w inside the box, per axis.
                let range = |k: usize| (k + half + 1).saturating_sub(m)..(k + half + 1).min(m);
                let mut s = C64::new(0.0, 0.0);
                // Im(w·z̄) = Σ_j (w_yj z_xj − w_xj z_yj), axes ordered (x_1, x_2, y_1, y_2).
                for w0 in range(z[0]) {
                    let d0 = z[0] + half - w0;
                    let p0 = table[w0 * m + z[2]].conj();
                    for w1 in range(z[1]) {
                        let d1 = z[1] + half - w1;
                        let p01 = p0 * table2[w1 * m + z[3]].conj();
                        for w2 in range(z[2]) {
                            let d2 = z[2] + half - w2;
                            let base_h = ((w0 * m + w1) * m + w2) * m;
                            let base_f = ((d0 * m + d1) * m + d2) * m;
                            let mut acc = C64::new(0.0, 0.0);
                            for w3 in range(z[3]) {
                                acc += f.values[base_f + z[3] + half - w3] * h.values[base_h + w3] * table2[w3 * m + z[1]];
                            }
                            s += p01 * table[w2 * m + z[0]] * acc;
                        }
                    }
                }
                s * w
            })
            .collect(),
    };
    GridFunction::new(grid, values)
}

/// Reference double sum for [`twisted_convolution`], evaluating every phase
/// directly from the coordinates.
pub fn twisted_convolution_direct(lambda: f64, f: &GridFunction, h: &GridFunction) -> Result<GridFunction> {
    prepare_convolution(lambda, f, h)?;
    let grid = f.grid;
    let n = grid.dim;
    let m = grid.points_per_axis as i64;
    let half = m / 2;
    let w = grid.cell_weight();
    let values = (0..grid.len())
        .into_par_iter()
        .map(|zi| {
            let zk = grid.unravel(zi);
            let z = grid.point(zi);
            let mut s = C64::new(0.0, 0.0);
            for wi in 0..grid.len() {
                let wk = grid.unravel(wi);
                let dk: Vec<i64> = zk.iter().zip(&wk).map(|(&a, &b)| a as i64 - b as i64 + half).collect();
                if dk.iter().any(|&d| d < 0 || d >= m) {
                    continue;
                }
                let dku: Vec<usize> = dk.iter().map(|&d| d as usize).collect();
                let wpt = grid.point(wi);
                let im: f64 = (0..n).map(|j| wpt[n + j] * z[j] - wpt[j] * z[n + j]).sum();
                s += f.values[grid.ravel(&dku)] * h.values[wi] * C64::from_polar(1.0, -0.5 * lambda * im);
            }
            s * w
        })
        .collect();
    GridFunction::new(grid, values)
}

fn prepare_convolution(lambda: f64, f: &GridFunction, h: &GridFunction) -> Result<()> {
    if lambda == 0.0 || !lambda.is_finite() {
        return Err(Error::Domain("lambda must be nonzero".into()));
    }
    f.check_same(h)?;
    check_tail(h, "H")?;
    check_tail(f, "F")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn origin_is_identity() {
        let b = HermiteBasis::new(1, 1.0, 10).unwrap();
        let p = schrodinger_matrix(&b, &[0.0, 0.0]).unwrap();
        let id = DMatrix::<C64>::identity(10, 10);
        assert!((p.matrix - id).camax() < 1e-12);
    }

    #[test]
    fn ground_state_entry() {
        let b = HermiteBasis::new(1, 1.0, 6).unwrap();
        for &(x, y) in &[(0.3, -0.2), (1.0, 1.0), (-2.0, 0.5), (0.0, 3.0), (2.5, -1.5)] {
            let p = schrodinger_matrix(&b, &[x, y]).unwrap();
            let expect = (-(x * x + y * y) / 4.0).exp();
            assert!((p.matrix[(0, 0)] - c(expect, 0.0)).norm() < 1e-12, "({x},{y})");
        }
    }

    #[test]
    fn laguerre_matches_quadrature() {
        for &lam in &[1.0, 2.0, 0.5, -1.0] {
            let b = HermiteBasis::with_quad_size(1, lam, 16, 96).unwrap();
            for &(x, y) in &[(0.7, -1.1), (-2.0, 0.4), (3.0, 2.0), (0.0, 0.0)] {
                let q = schrodinger_matrix(&b, &[x, y]).unwrap();
                let l = schrodinger_matrix_laguerre(&b, &[x, y]).unwrap();
                let d = (q.matrix - l.matrix).camax();
                let tol = 1e-12 * (lam.abs() * (x * x + y * y) / 4.0).exp();
                assert!(d < tol, "lambda {lam} at ({x},{y}): {d:e}");
            }
        }
        let b = HermiteBasis::new(2, -0.5, 5).unwrap();
        let pt = [0.4, -0.3, 1.2, 0.8];
        let q = schrodinger_matrix(&b, &pt).unwrap();
        let l = schrodinger_matrix_laguerre(&b, &pt).unwrap();
        assert!((q.matrix - l.matrix).camax() < 1e-12);
    }

    #[test]
    fn displacement_matches_high_precision_values() {
        // Reference entries computed with 40-digit arithmetic from the
        // Laguerre closed form at β = 5·e^{0.7i}.
        let n = 24;
        let mut p = vec![c(0.0, 0.0); n * n];
        fill_displacement(n, C64::from_polar(5.0, 0.7), &mut p);
        let expect = [
            (0, 0, c(3.72665317208e-6, 0.0)),
            (23, 0, c(-0.255338466955, -0.105566570003)),
            (0, 23, c(0.255338466955, -0.105566570003)),
            (23, 23, c(0.0130639514819, 0.0)),
            (10, 17, c(0.0122241469118, 0.0643906090936)),
            (17, 10, c(-0.0122241469118, 0.0643906090936)),
            (12, 12, c(0.159167475689, 0.0)),
        ];
        for (m, k, v) in expect {
            assert!((p[k * n + m] - v).norm() < 1e-12, "entry ({m},{k})");
        }
    }

    #[test]
    fn special_hermite_at_origin() {
        let b = HermiteBasis::new(1, 1.0, 4).unwrap();
        let v = special_hermite(&b, &[0], &[0], &[0.0, 0.0]).unwrap();
        assert!((v - c((2.0 * PI).powf(-0.5), 0.0)).norm() < 1e-15);
        assert!(special_hermite(&b, &[0], &[0], &[f64::INFINITY, 0.0]).is_err());
    }

    #[test]
    fn grid_negation_and_coords() {
        let g = GridCn::new(1, 4.0, 8).unwrap();
        assert_eq!(g.coord(4), 0.0);
        assert_eq!(g.coord(0), -4.0);
        let i = g.ravel(&[5, 2]);
        let j = g.neg_index(i).unwrap();
        assert_eq!(g.point(j), vec![-1.0, 2.0]);
        assert_eq!(g.neg_index(g.ravel(&[0, 3])), None);
        let f = GridFunction::from_fn(g, |_| c(1.0, 0.0));
        assert_eq!(f.values[g.ravel(&[3, 0])], c(0.0, 0.0));
        assert_eq!(f.star().star(), f);
        assert!(GridCn::new(1, 4.0, 7).is_err());
        assert!(GridCn::new(1, 0.0, 8).is_err());
    }

    #[test]
    fn zero_function_gives_zero_matrix() {
        let b = HermiteBasis::new(1, 1.0, 8).unwrap();
        let g = GridCn::new(1, 6.0, 16).unwrap();
        let w = weyl_transform(&b, &GridFunction::zeros(g)).unwrap();
        assert_eq!(w.hs_norm(), 0.0);
    }

    #[test]
    fn fast_convolution_matches_direct_two_dimensional() {
        let g = GridCn::new(2, 3.0, 8).unwrap();
        let gauss = |p: &[f64], s: f64| (-(p.iter().map(|v| v * v).sum::<f64>()) * s).exp();
        let f = GridFunction::from_fn(g, |p| c(gauss(p, 2.0), 0.3 * p[0] * gauss(p, 2.0)));
        let h = GridFunction::from_fn(g, |p| c(p[1] * gauss(p, 2.5), gauss(p, 3.0)));
        let fast = twisted_convolution(0.7, &f, &h).unwrap();
        let direct = twisted_convolution_direct(0.7, &f, &h).unwrap();
        let d = fast.sub(&direct).unwrap().sup_norm();
        assert!(d < 1e-12, "{d}");
    }

    #[test]
    fn convolution_rejects_boundary_mass() {
        let g = GridCn::new(1, 4.0, 16).unwrap();
        let flat = GridFunction::from_fn(g, |_| c(1.0, 0.0));
        let tiny = GridFunction::from_fn(g, |p| c((-4.0 * (p[0] * p[0] + p[1] * p[1])).exp(), 0.0));
        match twisted_convolution(1.0, &tiny, &flat) {
            Err(Error::Precondition { tail, .. }) => assert!(tail > 0.1),
            other => panic!("expected precondition error, got {other:?}"),
        }
    }
}
