//! Heisenberg motion group layer for `n = 1` and `K = U(1)`: the metaplectic
//! phases `μ_λ(θ)`, characters `σ_m(e^{iθ}) = e^{imθ}`, the Weyl transform on
//! `G^× = ℂ × S¹`, its twisted convolution, the group Fourier transform and
//! the Fourier–Wigner transforms `V_f^g`.
//!
//! The circle is discretised by `T` equally spaced angles carrying the
//! normalised Haar weight `1/T`. All identities of this module hold exactly
//! on the subgroup `ℂ ⋊ ℤ_T`, so angular discretisation adds no error.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::heisenberg::{
    displacement_parameter, fill_displacement, schrodinger_matrix, twisted_convolution, weyl_transform, GridCn,
    GridFunction, WeylMatrix,
};
use crate::hermite::{CoeffVector, HermiteBasis};
use crate::samples::synthesize_conj;

/// Irreducible representation `σ_m` of `U(1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CharacterIndex {
    pub m: i64,
    pub d_sigma: usize,
}

impl CharacterIndex {
    pub fn new(m: i64, cap: usize) -> Result<Self> {
        if m.unsigned_abs() as usize > cap {
            return Err(Error::Index(format!("character {m} beyond cap {cap}")));
        }
        Ok(Self { m, d_sigma: 1 })
    }

    /// `σ_m(e^{iθ})`.
    pub fn value(&self, theta: f64) -> C64 {
        C64::from_polar(1.0, self.m as f64 * theta)
    }
}

/// Sign convention of the metaplectic phases, `μ(θ)φ_k = e^{±ikθ}φ_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseConvention {
    Positive,
    Negative,
}

impl PhaseConvention {
    /// The convention under which `π_λ(e^{iθ}z) = μ(θ)π_λ(z)μ(θ)*` holds:
    /// positive for `λ > 0`, negative for `λ < 0`.
    pub fn for_lambda(lambda: f64) -> Self {
        if lambda > 0.0 {
            Self::Positive
        } else {
            Self::Negative
        }
    }

    pub fn sign(&self) -> f64 {
        match self {
            Self::Positive => 1.0,
            Self::Negative => -1.0,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Positive => "mu(theta) phi_k = exp(+i k theta) phi_k",
            Self::Negative => "mu(theta) phi_k = exp(-i k theta) phi_k",
        }
    }
}

/// `G^× = ℂ × S¹` with `T` angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGx {
    pub cn: GridCn,
    pub theta_points: usize,
    pub m_char: usize,
}

impl GridGx {
    pub fn new(cn: GridCn, theta_points: usize, m_char: usize) -> Result<Self> {
        if cn.dim != 1 {
            return Err(Error::Unsupported("the motion group layer is implemented for n = 1 only".into()));
        }
        if theta_points < 2 * m_char + 4 {
            return Err(Error::Domain(format!(
                "T = {theta_points} angles cannot separate characters up to {m_char} (need T ≥ 2·M_char + 4)"
            )));
        }
        Ok(Self { cn, theta_points, m_char })
    }

    pub fn theta(&self, t: usize) -> f64 {
        2.0 * PI * t as f64 / self.theta_points as f64
    }

    pub fn len(&self) -> usize {
        self.theta_points * self.cn.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Cell weight of `dz × dθ/2π`.
    pub fn weight(&self) -> f64 {
        self.cn.cell_weight() / self.theta_points as f64
    }
}

/// Samples on [`GridGx`], angle-major: `values[t·P + i]` is `F(z_i, θ_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GxFunction {
    pub grid: GridGx,
    pub values: Vec<C64>,
}

impl GxFunction {
    pub fn zeros(grid: GridGx) -> Self {
        Self { grid, values: vec![C64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_fn(grid: GridGx, f: impl Fn(&[f64], f64) -> C64 + Sync) -> Self {
        let slices: Vec<GridFunction> =
            (0..grid.theta_points).map(|t| GridFunction::from_fn(grid.cn, |p| f(p, grid.theta(t)))).collect();
        Self::from_slices(grid, &slices).expect("slices built on the grid")
    }

    pub fn from_slices(grid: GridGx, slices: &[GridFunction]) -> Result<Self> {
        if slices.len() != grid.theta_points {
            return Err(Error::Dimension { expected: grid.theta_points, got: slices.len() });
        }
        let mut values = Vec::with_capacity(grid.len());
        for s in slices {
            if s.grid != grid.cn {
                return Err(Error::Contract("angular slice on a different grid".into()));
            }
            values.extend_from_slice(&s.values);
        }
        Ok(Self { grid, values })
    }

    /// The slice `z ↦ F(z, θ_t)`.
    pub fn slice(&self, t: usize) -> GridFunction {
        let p = self.grid.cn.len();
        GridFunction { grid: self.grid.cn, values: self.values[t * p..(t + 1) * p].to_vec() }
    }

    /// Discrete `∬|F|² dz dθ/2π`.
    pub fn norm_sq(&self) -> f64 {
        self.grid.weight() * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn inner(&self, other: &Self) -> Result<C64> {
        if self.grid != other.grid {
            return Err(Error::Contract("functions live on different grids".into()));
        }
        let s: C64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b.conj()).sum();
        Ok(s * self.grid.weight())
    }

    pub fn conj(&self) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| v.conj()).collect() }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::Contract("functions live on different grids".into()));
        }
        Ok(Self { grid: self.grid, values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect() })
    }

    /// Angular Fourier coefficient `F̂_j(z) = (1/T) Σ_t F(z, θ_t) e^{ijθ_t}`.
    pub fn angular_coefficient(&self, j: i64) -> GridFunction {
        let p = self.grid.cn.len();
        let tt = self.grid.theta_points;
        let phases: Vec<C64> =
            (0..tt).map(|t| C64::from_polar(1.0 / tt as f64, j as f64 * self.grid.theta(t))).collect();
        let values = (0..p)
            .into_par_iter()
            .map(|i| (0..tt).map(|t| self.values[t * p + i] * phases[t]).sum())
            .collect();
        GridFunction { grid: self.grid.cn, values }
    }
}

/// Weyl transform on `G^×` tagged with its character.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionWeylMatrix {
    pub weyl: WeylMatrix,
    pub character: CharacterIndex,
}

impl MotionWeylMatrix {
    pub fn hs_norm(&self) -> f64 {
        self.weyl.hs_norm()
    }
}

fn require_line(basis: &HermiteBasis) -> Result<()> {
    if basis.dim() != 1 {
        return Err(Error::Unsupported("the motion group layer is implemented for n = 1 only".into()));
    }
    Ok(())
}

/// `μ_λ(θ) = diag(e^{i·sgn(λ)·kθ})`.
pub fn metaplectic_matrix(basis: &HermiteBasis, theta: f64) -> Result<WeylMatrix> {
    metaplectic_matrix_with(basis, theta, PhaseConvention::for_lambda(basis.lambda()))
}

/// `μ(θ)` under an explicitly chosen sign convention.
pub fn metaplectic_matrix_with(basis: &HermiteBasis, theta: f64, convention: PhaseConvention) -> Result<WeylMatrix> {
    require_line(basis)?;
    if !theta.is_finite() {
        return Err(Error::Domain("angle is not finite".into()));
    }
    let n = basis.degree_cap();
    let s = convention.sign();
    let d = DMatrix::from_fn(n, n, |i, j| if i == j { C64::from_polar(1.0, s * i as f64 * theta) } else { C64::new(0.0, 0.0) });
    Ok(WeylMatrix::new(basis, d))
}

/// `‖π(e^{iθ}z) − μ(θ)π(z)μ(θ)*‖_HS`, both Schrödinger matrices computed by
/// quadrature.
pub fn intertwining_residual(basis: &HermiteBasis, theta: f64, z: [f64; 2], convention: PhaseConvention) -> Result<f64> {
    let mu = metaplectic_matrix_with(basis, theta, convention)?;
    let (c, s) = (theta.cos(), theta.sin());
    let rotated = [c * z[0] - s * z[1], s * z[0] + c * z[1]];
    let lhs = schrodinger_matrix(basis, &rotated)?;
    let rhs = &mu.matrix * schrodinger_matrix(basis, &z)?.matrix * mu.matrix.adjoint();
    Ok((lhs.matrix - rhs).norm())
}

fn check_gx(basis: &HermiteBasis, grid: &GridGx) -> Result<()> {
    require_line(basis)?;
    if grid.cn.dim != basis.dim() {
        return Err(Error::Contract("grid and basis dimensions differ".into()));
    }
    Ok(())
}

/// `W_m(F) = Σ_θ Σ_z (h²/T) F(z, θ) π_λ(z) μ_λ(θ) e^{imθ}`.
pub fn motion_weyl(basis: &HermiteBasis, m: CharacterIndex, f: &GxFunction) -> Result<MotionWeylMatrix> {
    Ok(motion_weyl_sweep(basis, &[m], f)?.remove(0))
}

/// [`motion_weyl`] for several characters sharing the angular transforms.
///
/// Column `k` of `W_m(F)` is column `k` of `W(F̂_{m + σk})`, since `μ(θ)` is
/// diagonal with phases `e^{iσkθ}`.
pub fn motion_weyl_sweep(basis: &HermiteBasis, ms: &[CharacterIndex], f: &GxFunction) -> Result<Vec<MotionWeylMatrix>> {
    check_gx(basis, &f.grid)?;
    let n = basis.degree_cap();
    let sigma = PhaseConvention::for_lambda(basis.lambda()).sign() as i64;
    let mut cache: BTreeMap<i64, WeylMatrix> = BTreeMap::new();
    let mut out = Vec::with_capacity(ms.len());
    for &m in ms {
        let mut w = DMatrix::<C64>::zeros(n, n);
        let mut residual: f64 = 0.0;
        for k in 0..n {
            let j = m.m + sigma * k as i64;
            if !cache.contains_key(&j) {
                cache.insert(j, weyl_transform(basis, &f.angular_coefficient(j))?);
            }
            let wj = &cache[&j];
            residual = residual.max(wj.truncation_residual);
            w.set_column(k, &wj.matrix.column(k));
        }
        let weyl = WeylMatrix { sigma_index: Some(m.m), truncation_residual: residual, ..WeylMatrix::new(basis, w) };
        out.push(MotionWeylMatrix { weyl, character: m });
    }
    Ok(out)
}

/// Resamples `G` at `e^{−iθ}z` through its expansion in the truncated
/// special Hermite system: the coefficient of `conj(φ_{αβ})` picks up the
/// phase `e^{iσ(β−α)θ}`.
pub fn rotate(basis: &HermiteBasis, g: &GridFunction, theta: f64) -> Result<GridFunction> {
    let c = special_coefficients(basis, g)?;
    Ok(rotate_coefficients(basis, &g.grid, &c, theta))
}

/// `C[(β, α)]` with `G = Σ C[(β, α)] conj(φ_{αβ})` on the truncated system.
fn special_coefficients(basis: &HermiteBasis, g: &GridFunction) -> Result<DMatrix<C64>> {
    require_line(basis)?;
    let w = weyl_transform(basis, g)?;
    Ok(w.matrix * C64::new(basis.lambda().abs() / (2.0 * PI).sqrt(), 0.0))
}

fn rotate_coefficients(basis: &HermiteBasis, grid: &GridCn, c: &DMatrix<C64>, theta: f64) -> GridFunction {
    let n = basis.degree_cap();
    let lam = basis.lambda();
    let sigma = PhaseConvention::for_lambda(lam).sign();
    let rc = DMatrix::from_fn(n, n, |b, a| c[(b, a)] * C64::from_polar(1.0, sigma * (b as f64 - a as f64) * theta));
    GridFunction { grid: *grid, values: synthesize_conj(n, &[lam], grid, &rc) }
}

/// Twisted convolution on `G^×`,
/// `(F × H)(u, r) = Σ_{k'} (1/T) Σ_w h² F(u − kw, k) H(w, k') e^{(iλ/2)Im(u·conj(kw))}`
/// with `k = r k'^{−1}`. After the substitution `w ↦ kw` each term is a
/// Heisenberg twisted convolution of `F(·, k)` with `H(k^{−1}·, k')`; the
/// rotated copies of `H` come from [`rotate`], so `H` should lie in the span
/// of the truncated special Hermite system.
pub fn twisted_convolution_gx(basis: &HermiteBasis, f: &GxFunction, h: &GxFunction) -> Result<GxFunction> {
    check_gx(basis, &f.grid)?;
    if f.grid != h.grid {
        return Err(Error::Contract("functions live on different grids".into()));
    }
    let grid = f.grid;
    let tt = grid.theta_points;
    let lam = basis.lambda();
    let inv_t = C64::new(1.0 / tt as f64, 0.0);
    let mut slices = Vec::with_capacity(tt);
    let f_slices: Vec<GridFunction> = (0..tt).map(|t| f.slice(t)).collect();
    let h_slices: Vec<GridFunction> = (0..tt).map(|t| h.slice(t)).collect();
    let coeffs: Result<Vec<DMatrix<C64>>> = h_slices.iter().map(|hs| special_coefficients(basis, hs)).collect();
    let coeffs = coeffs?;
    // rotated[k][k'] = H(e^{−iθ_k}·, θ_{k'})
    let rotated: Vec<Vec<GridFunction>> = (0..tt)
        .map(|k| coeffs.iter().map(|c| rotate_coefficients(basis, &grid.cn, c, grid.theta(k))).collect())
        .collect();
    for r in 0..tt {
        let mut acc = GridFunction::zeros(grid.cn);
        for kp in 0..tt {
            let k = (r + tt - kp) % tt;
            let term = twisted_convolution(lam, &f_slices[k], &rotated[k][kp])?;
            acc = acc.add(&term)?;
        }
        slices.push(acc.scale(inv_t));
    }
    GxFunction::from_slices(grid, &slices)
}

/// `V_f^g(z, θ) = ⟨π(z)μ(θ)f, g⟩·e^{imθ}` on the grid.
pub fn fourier_wigner_motion(
    basis: &HermiteBasis,
    m: CharacterIndex,
    f: &CoeffVector,
    g: &CoeffVector,
    grid: &GridGx,
) -> Result<GxFunction> {
    check_gx(basis, grid)?;
    if f.key != basis.key() || g.key != basis.key() {
        return Err(Error::Contract("coefficient vectors do not belong to this basis".into()));
    }
    let n = basis.degree_cap();
    let lam = basis.lambda();
    let sigma = PhaseConvention::for_lambda(lam).sign();
    let cn = grid.cn;
    let p = cn.len();
    // Q[i][a] = Σ_b ⟨π(z_i)φ_a, φ_b⟩ conj(g_b)
    let q: Vec<Vec<C64>> = (0..p)
        .into_par_iter()
        .map(|i| {
            if !cn.is_paired(i) {
                return vec![C64::new(0.0, 0.0); n];
            }
            let pt = cn.point(i);
            let mut buf = vec![C64::new(0.0, 0.0); n * n];
            fill_displacement(n, displacement_parameter(lam, pt[0], pt[1]), &mut buf);
            (0..n).map(|a| buf[a * n..(a + 1) * n].iter().zip(g.coeffs.iter()).map(|(v, gb)| v * gb.conj()).sum()).collect()
        })
        .collect();
    let mut values = Vec::with_capacity(grid.len());
    for t in 0..grid.theta_points {
        let th = grid.theta(t);
        let weights: Vec<C64> =
            (0..n).map(|a| f.coeffs[a] * C64::from_polar(1.0, sigma * a as f64 * th) * m.value(th)).collect();
        values.extend(q.iter().map(|qi| qi.iter().zip(&weights).map(|(x, y)| x * y).sum::<C64>()));
    }
    Ok(GxFunction { grid: *grid, values })
}

/// Coefficients of `F` in the orthonormal system
/// `E^m_{αβ} = (|λ|/2π)^{1/2} V^m_{φ_α, φ_β}`, `|m| ≤ M_char`, as matrices
/// `A_m[(β, α)] = ⟨F, E^m_{αβ}⟩ = (|λ|/2π)^{1/2} conj(W_m(F̄)[(β, α)])`.
pub fn peter_weyl_coefficients(basis: &HermiteBasis, f: &GxFunction) -> Result<Vec<(CharacterIndex, DMatrix<C64>)>> {
    let cap = f.grid.m_char;
    let ms: Result<Vec<CharacterIndex>> = (-(cap as i64)..=cap as i64).map(|m| CharacterIndex::new(m, cap)).collect();
    let ms = ms?;
    let ws = motion_weyl_sweep(basis, &ms, &f.conj())?;
    let scale = (basis.lambda().abs() / (2.0 * PI)).sqrt();
    Ok(ws.into_iter().map(|w| (w.character, w.weyl.matrix.map(|v| v.conj() * scale))).collect())
}

/// `Σ_m Σ_{αβ} A_m[(β, α)] E^m_{αβ}` on the grid.
pub fn peter_weyl_reconstruct(
    basis: &HermiteBasis,
    grid: &GridGx,
    coeffs: &[(CharacterIndex, DMatrix<C64>)],
) -> Result<GxFunction> {
    check_gx(basis, grid)?;
    let n = basis.degree_cap();
    let lam = basis.lambda();
    let sigma = PhaseConvention::for_lambda(lam).sign();
    // E^m_{αβ}(z, θ) = (|λ|/2π)^{1/2} e^{i(m+σα)θ} (2π)^{1/2} φ_{αβ}(z).
    let scale = lam.abs().sqrt();
    let mut slices = Vec::with_capacity(grid.theta_points);
    for t in 0..grid.theta_points {
        let th = grid.theta(t);
        let mut s = DMatrix::<C64>::zeros(n, n);
        for (m, a) in coeffs {
            for al in 0..n {
                let ph = C64::from_polar(scale, (m.m as f64 + sigma * al as f64) * th);
                for be in 0..n {
                    s[(be, al)] += a[(be, al)] * ph;
                }
            }
        }
        // Σ S φ_{αβ} = conj(Σ conj(S) conj(φ_{αβ})).
        let conj_s = s.map(|v| v.conj());
        let values: Vec<C64> = synthesize_conj(n, &[lam], &grid.cn, &conj_s).into_iter().map(|v| v.conj()).collect();
        slices.push(GridFunction::new(grid.cn, values)?);
    }
    GxFunction::from_slices(*grid, &slices)
}

/// Uniform grid on the central variable `t ∈ [−L_t, L_t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TGrid {
    pub half_width: f64,
    pub points: usize,
}

impl TGrid {
    pub fn new(half_width: f64, points: usize) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) || points < 2 {
            return Err(Error::Domain("t grid needs a positive half width and at least two points".into()));
        }
        Ok(Self { half_width, points })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    pub fn coord(&self, k: usize) -> f64 {
        -self.half_width + k as f64 * self.spacing()
    }
}

/// Samples on `ℂ × ℝ_t × S¹`, `values[(s·T + t)·P + i]` for `t`-node `s`,
/// angle `t` and point `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSamples {
    pub tgrid: TGrid,
    pub grid: GridGx,
    pub values: Vec<C64>,
}

impl MotionSamples {
    pub fn from_fn(tgrid: TGrid, grid: GridGx, f: impl Fn(&[f64], f64, f64) -> C64 + Sync) -> Self {
        let mut values = Vec::with_capacity(tgrid.points * grid.len());
        for s in 0..tgrid.points {
            let t = tgrid.coord(s);
            values.extend(GxFunction::from_fn(grid, |p, th| f(p, t, th)).values);
        }
        Self { tgrid, grid, values }
    }

    /// `F^λ(z, θ) = Σ_t h_t F(z, t, θ) e^{iλt}`.
    pub fn central_transform(&self, lambda: f64) -> Result<GxFunction> {
        if lambda == 0.0 || !lambda.is_finite() {
            return Err(Error::Domain("lambda must be a nonzero finite real".into()));
        }
        let nyquist = PI / self.tgrid.spacing();
        if lambda.abs() >= nyquist {
            return Err(Error::Domain(format!("|lambda| = {} aliases on a t grid with Nyquist {nyquist}", lambda.abs())));
        }
        let len = self.grid.len();
        let h = self.tgrid.spacing();
        let phases: Vec<C64> = (0..self.tgrid.points).map(|s| C64::from_polar(h, lambda * self.tgrid.coord(s))).collect();
        let values = (0..len)
            .into_par_iter()
            .map(|i| phases.iter().enumerate().map(|(s, p)| self.values[s * len + i] * p).sum())
            .collect();
        Ok(GxFunction { grid: self.grid, values })
    }
}

/// Group Fourier transform `F̂(λ, σ_m) = W_m(F^λ)` at the scale `lambda`.
pub fn group_fourier(basis: &HermiteBasis, m: CharacterIndex, f: &MotionSamples, lambda: f64) -> Result<MotionWeylMatrix> {
    let fl = f.central_transform(lambda)?;
    let b = basis.rescaled(lambda)?;
    motion_weyl(&b, m, &fl)
}

/// Residual of the matrix-coefficient identity `⟨σ(k)c, σ(k)a⟩ = ⟨c, a⟩`
/// for `d_σ = 1`, where it reads `|e^{imθ}|² = 1`.
pub fn character_unitarity_residual(m: CharacterIndex, theta: f64, c: C64, a: C64) -> f64 {
    let s = m.value(theta);
    ((s * c) * (s * a).conj() - c * a.conj()).norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metaplectic_group_law() {
        let b = HermiteBasis::new(1, 1.0, 8).unwrap();
        let id = metaplectic_matrix(&b, 0.0).unwrap();
        assert_eq!(id.matrix, DMatrix::identity(8, 8));
        let a = metaplectic_matrix(&b, 0.4).unwrap();
        let c = metaplectic_matrix(&b, 1.1).unwrap();
        let ac = metaplectic_matrix(&b, 1.5).unwrap();
        assert!((a.matrix * c.matrix - ac.matrix).camax() < 1e-14);
        let b2 = HermiteBasis::new(2, 1.0, 4).unwrap();
        assert!(matches!(metaplectic_matrix(&b2, 0.1), Err(Error::Unsupported(_))));
    }

    #[test]
    fn grid_needs_enough_angles() {
        let cn = GridCn::new(1, 6.0, 16).unwrap();
        assert!(GridGx::new(cn, 35, 16).is_err());
        assert!(GridGx::new(cn, 36, 16).is_ok());
    }

    #[test]
    fn character_cap_is_enforced() {
        assert!(CharacterIndex::new(17, 16).is_err());
        assert_eq!(CharacterIndex::new(-16, 16).unwrap().d_sigma, 1);
    }

    #[test]
    fn wrong_sign_fails_intertwining() {
        let b = HermiteBasis::new(1, 1.0, 12).unwrap();
        let good = intertwining_residual(&b, 0.9, [0.8, -0.5], PhaseConvention::Positive).unwrap();
        let bad = intertwining_residual(&b, 0.9, [0.8, -0.5], PhaseConvention::Negative).unwrap();
        assert!(good < 1e-10, "{good}");
        assert!(bad > 0.1, "{bad}");
    }
}
