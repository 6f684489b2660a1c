//! Step-two nilpotent groups `G = 𝔟 ⊕ 𝔷` given by structure constants
//! `[V_i, V_j] = Σ_l c_{ij}^l Z_l`, with group law
//! `(V, Z)(V', Z') = (V + V', Z + Z' + ½[V, V'])`.
//!
//! For `ω ∈ 𝔷*` the skew form `B_ω(X, Y) = ω([X, Y])` is brought to canonical
//! form by an orthonormal frame `X_i, Y_i` with `ω([X_i, Y_j]) = δ_ij d_i`.
//! In those coordinates
//! `π_ω(x, y, t) = e^{−iω·t} ⊗_j π_{d_j}(x_j + i y_j)`,
//! which is a representation for the group law above, and the ω-twisted
//! convolution matching it is
//! `f ∗_ω g(v) = ∫ f(v − v') g(v') e^{−(i/2) ω([v, v'])} dv'`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::heisenberg::{
    check_tail, fourier_wigner_values, schrodinger_axis, twisted_convolution_scaled, weyl_sum, GridCn, GridFunction,
    WeylMatrix,
};
use crate::hermite::{BasisKey, CoeffVector, HermiteBasis};
use crate::samples::{admissible_degree_sum, convolution_degree_sum, synthesize_conj, Band};
use crate::{Error, Result};

/// Shipped structure-constant files.
pub const FIXTURES: [(&str, &str); 3] = [
    ("heisenberg", include_str!("../fixtures/heisenberg.txt")),
    ("quaternionic", include_str!("../fixtures/quaternionic.txt")),
    ("degenerate", include_str!("../fixtures/degenerate.txt")),
];

/// Largest number of symplectic pairs handled by the dense representation.
pub const MAX_PAIRS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct StepTwoAlgebra {
    m: usize,
    k: usize,
    c: Vec<f64>,
}

impl StepTwoAlgebra {
    /// Abelian algebra with `dim 𝔟 = m`, `dim 𝔷 = k`.
    pub fn new(m: usize, k: usize) -> Result<Self> {
        if m == 0 || k == 0 {
            return Err(Error::Domain(format!("dimensions must be positive, got m = {m}, k = {k}")));
        }
        Ok(Self { m, k, c: vec![0.0; m * m * k] })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    fn at(&self, i: usize, j: usize, l: usize) -> usize {
        (i * self.m + j) * self.k + l
    }

    /// `c_{ij}^l`, zero-based.
    pub fn structure(&self, i: usize, j: usize, l: usize) -> f64 {
        self.c[self.at(i, j, l)]
    }

    /// Sets `c_{ij}^l = value` and `c_{ji}^l = −value` (zero-based).
    pub fn set(&mut self, i: usize, j: usize, l: usize, value: f64) -> Result<()> {
        if i >= self.m || j >= self.m || l >= self.k {
            return Err(Error::Index(format!("({i}, {j}, {l}) outside m = {}, k = {}", self.m, self.k)));
        }
        if !value.is_finite() {
            return Err(Error::Domain("structure constant is not finite".into()));
        }
        if i == j && value != 0.0 {
            return Err(Error::Contract(format!("c_{{{i}{i}}}^{l} must vanish")));
        }
        let (a, b) = (self.at(i, j, l), self.at(j, i, l));
        self.c[a] = value;
        self.c[b] = -value;
        Ok(())
    }

    /// Parses the text format: a header line `m k`, then one line
    /// `i j l value` (1-based) per nonzero constant. `#` starts a comment.
    /// A missing skew partner is filled in; a contradicting one is an error.
    pub fn parse(text: &str) -> Result<Self> {
        let mut alg: Option<Self> = None;
        let mut seen: BTreeMap<(usize, usize, usize), (f64, usize)> = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line_no = no + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            let perr = |msg: String| Error::Parse { line: line_no, msg };
            let Some(a) = alg.as_mut() else {
                if toks.len() != 2 {
                    return Err(perr(format!("expected header `m k`, found `{line}`")));
                }
                let m = toks[0].parse::<usize>().map_err(|e| perr(format!("m: {e}")))?;
                let k = toks[1].parse::<usize>().map_err(|e| perr(format!("k: {e}")))?;
                alg = Some(Self::new(m, k).map_err(|e| perr(e.to_string()))?);
                continue;
            };
            if toks.len() != 4 {
                return Err(perr(format!("expected `i j l value`, found `{line}`")));
            }
            let mut idx = [0usize; 3];
            for (slot, (tok, name)) in idx.iter_mut().zip(toks.iter().zip(["i", "j", "l"])) {
                *slot = tok.parse::<usize>().map_err(|e| perr(format!("{name}: {e}")))?;
            }
            let value = toks[3].parse::<f64>().map_err(|e| perr(format!("value: {e}")))?;
            let [i, j, l] = idx;
            if i == 0 || j == 0 || l == 0 || i > a.m || j > a.m || l > a.k {
                return Err(perr(format!("index ({i}, {j}, {l}) outside 1..={} × 1..={}", a.m, a.k)));
            }
            if i == j {
                return Err(perr(format!("diagonal constant c_{{{i}{i}}}^{l} is not allowed")));
            }
            let (key, signed) = if i < j { ((i, j, l), value) } else { ((j, i, l), -value) };
            if let Some(&(prev, prev_line)) = seen.get(&key) {
                if prev != signed {
                    return Err(perr(format!("contradicts the skew partner given on line {prev_line}")));
                }
            }
            seen.insert(key, (signed, line_no));
            a.set(key.0 - 1, key.1 - 1, key.2 - 1, signed).map_err(|e| perr(e.to_string()))?;
        }
        alg.ok_or(Error::Parse { line: 0, msg: "missing header `m k`".into() })
    }

    /// One of the shipped fixtures by name.
    pub fn fixture(name: &str) -> Result<Self> {
        let (_, text) = FIXTURES
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| Error::Index(format!("unknown fixture `{name}`")))?;
        Self::parse(text)
    }

    /// Text form with one line per constant `c_{ij}^l`, `i < j`.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.m, self.k);
        for i in 0..self.m {
            for j in i + 1..self.m {
                for l in 0..self.k {
                    let v = self.structure(i, j, l);
                    if v != 0.0 {
                        s.push_str(&format!("{} {} {} {}\n", i + 1, j + 1, l + 1, v));
                    }
                }
            }
        }
        s
    }

    /// `[v, w] ∈ 𝔷` in the basis `Z_l`.
    pub fn bracket(&self, v: &[f64], w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.k];
        for i in 0..self.m {
            for j in 0..self.m {
                let vw = v[i] * w[j];
                if vw == 0.0 {
                    continue;
                }
                for (l, o) in out.iter_mut().enumerate() {
                    *o += vw * self.c[self.at(i, j, l)];
                }
            }
        }
        out
    }

    /// `ω([v, w])`.
    pub fn pairing(&self, omega: &[f64], v: &[f64], w: &[f64]) -> f64 {
        self.bracket(v, w).iter().zip(omega).map(|(a, b)| a * b).sum()
    }

    /// `B_ω = Σ_l ω_l C^l` with `C^l_{ab} = c_{ab}^l`.
    pub fn bilinear_form(&self, omega: &[f64]) -> Result<DMatrix<f64>> {
        if omega.len() != self.k {
            return Err(Error::Dimension { expected: self.k, got: omega.len() });
        }
        if omega.iter().any(|w| !w.is_finite()) {
            return Err(Error::Domain("ω is not finite".into()));
        }
        Ok(DMatrix::from_fn(self.m, self.m, |a, b| {
            (0..self.k).map(|l| omega[l] * self.c[self.at(a, b, l)]).sum()
        }))
    }

    pub fn decompose(&self, omega: &[f64]) -> Result<SymplecticDecomp> {
        symplectic_decompose(&self.bilinear_form(omega)?, omega)
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement { v: vec![0.0; self.m], z: vec![0.0; self.k] }
    }

    /// `(V, Z)(V', Z') = (V + V', Z + Z' + ½[V, V'])`.
    pub fn mul(&self, a: &GroupElement, b: &GroupElement) -> GroupElement {
        let br = self.bracket(&a.v, &b.v);
        GroupElement {
            v: a.v.iter().zip(&b.v).map(|(x, y)| x + y).collect(),
            z: a.z.iter().zip(&b.z).zip(&br).map(|((x, y), c)| x + y + 0.5 * c).collect(),
        }
    }
}

/// Group element in exponential coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement {
    pub v: Vec<f64>,
    pub z: Vec<f64>,
}

impl GroupElement {
    pub fn inverse(&self) -> Self {
        Self { v: self.v.iter().map(|x| -x).collect(), z: self.z.iter().map(|x| -x).collect() }
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.v.iter().zip(&other.v).chain(self.z.iter().zip(&other.z)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Canonical form of `B_ω`: orthonormal `X_i, Y_i` with `B_ω(X_i, Y_j) = δ_ij d_i`,
/// `d_1 ≥ … ≥ d_n > 0`, and an orthonormal basis of the radical.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticDecomp {
    pub omega: Vec<f64>,
    pub b: DMatrix<f64>,
    pub d: Vec<f64>,
    pub x_basis: Vec<DVector<f64>>,
    pub y_basis: Vec<DVector<f64>>,
    pub radical: Vec<DVector<f64>>,
    pub radical_dim: usize,
    /// `Π d_i`, the empty product when there are no pairs.
    pub p_omega: f64,
    /// Set when two pairs share the same `d` and the planes were split by
    /// the deterministic selection rule.
    pub tie: bool,
}

/// Relative eigenvalue size of `BᵀB` below which a direction counts as radical.
const RADICAL_TOL: f64 = 1e-12;
/// Relative eigenvalue gap of `BᵀB` below which two values form one cluster.
const CLUSTER_TOL: f64 = 1e-9;

/// Canonical form of a skew matrix.
///
/// The eigenvalues of `BᵀB` come in equal pairs `d_i²`. Inside each cluster
/// of equal values the planes are chosen greedily: `X` is the normalized
/// projection onto the cluster of the standard basis vector with the largest
/// residual after removing the planes already chosen (lowest index on ties),
/// and `Y = −B X / d`.
pub fn symplectic_decompose(b: &DMatrix<f64>, omega: &[f64]) -> Result<SymplecticDecomp> {
    let m = b.nrows();
    if b.ncols() != m {
        return Err(Error::Dimension { expected: m, got: b.ncols() });
    }
    let scale = b.amax();
    if !scale.is_finite() {
        return Err(Error::Domain("B is not finite".into()));
    }
    let skew = (b + b.transpose()).amax();
    if skew > 1e-14 * scale {
        return Err(Error::Contract(format!("B is not skew (defect {skew:.3e})")));
    }
    let eig = SymmetricEigen::new(b.transpose() * b);
    let top = eig.eigenvalues.max();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
    let is_radical = |e: f64| top <= 0.0 || e <= RADICAL_TOL * top;

    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut radical_idx = Vec::new();
    for &i in &order {
        let e = eig.eigenvalues[i];
        if is_radical(e) {
            radical_idx.push(i);
            continue;
        }
        match clusters.last_mut() {
            Some(c) if eig.eigenvalues[c[0]] - e <= CLUSTER_TOL * top => c.push(i),
            _ => clusters.push(vec![i]),
        }
    }

    let (mut d, mut xs, mut ys) = (Vec::new(), Vec::new(), Vec::new());
    let mut tie = false;
    for cluster in &clusters {
        if cluster.len() % 2 != 0 {
            return Err(Error::Numeric(format!("odd eigenvalue cluster of size {} in BᵀB", cluster.len())));
        }
        tie |= cluster.len() > 2;
        let basis: Vec<DVector<f64>> = cluster.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
        let mut chosen: Vec<DVector<f64>> = Vec::new();
        for _ in 0..cluster.len() / 2 {
            let mut best: Option<(f64, DVector<f64>)> = None;
            for a in 0..m {
                let mut r = DVector::zeros(m);
                for u in &basis {
                    r += u * u[a];
                }
                for u in &chosen {
                    let c = u.dot(&r);
                    r -= u * c;
                }
                let nr = r.norm();
                if best.as_ref().is_none_or(|(bn, _)| nr > bn + 1e-12) {
                    best = Some((nr, r));
                }
            }
            let (nr, r) = best.expect("m ≥ 1");
            if nr < 1e-6 {
                return Err(Error::Numeric("symplectic plane selection lost rank".into()));
            }
            let x = r / nr;
            let bx = b * &x;
            let di = bx.norm();
            let y = -bx / di;
            chosen.push(x.clone());
            chosen.push(y.clone());
            d.push(di);
            xs.push(x);
            ys.push(y);
        }
    }
    let radical: Vec<DVector<f64>> = radical_idx.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
    Ok(SymplecticDecomp {
        omega: omega.to_vec(),
        b: b.clone(),
        p_omega: d.iter().product(),
        d,
        x_basis: xs,
        y_basis: ys,
        radical_dim: radical.len(),
        radical,
        tie,
    })
}

impl SymplecticDecomp {
    pub fn pairs(&self) -> usize {
        self.d.len()
    }

    pub fn is_metivier(&self) -> bool {
        self.radical_dim == 0 && self.pairs() > 0
    }

    /// Largest deviation of `ω([X_i, Y_j]) − δ_ij d_i`, `ω([X_i, X_j])`,
    /// `ω([Y_i, Y_j])` computed from the structure constants, together with
    /// the orthonormality defect of the frame.
    pub fn pairing_defect(&self, alg: &StepTwoAlgebra) -> f64 {
        let n = self.pairs();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let (xi, yi, xj, yj) = (&self.x_basis[i], &self.y_basis[i], &self.x_basis[j], &self.y_basis[j]);
                let delta = if i == j { self.d[i] } else { 0.0 };
                worst = worst
                    .max((alg.pairing(&self.omega, xi.as_slice(), yj.as_slice()) - delta).abs())
                    .max(alg.pairing(&self.omega, xi.as_slice(), xj.as_slice()).abs())
                    .max(alg.pairing(&self.omega, yi.as_slice(), yj.as_slice()).abs());
            }
        }
        let frame: Vec<&DVector<f64>> = self.x_basis.iter().chain(&self.y_basis).chain(&self.radical).collect();
        for (a, u) in frame.iter().enumerate() {
            for (c, v) in frame.iter().enumerate() {
                let target = if a == c { 1.0 } else { 0.0 };
                worst = worst.max((u.dot(v) - target).abs());
            }
        }
        worst
    }

    /// `v = Σ x_i X_i + y_i Y_i` for adapted coordinates `(x_1..x_n, y_1..y_n)`.
    pub fn to_original(&self, coords: &[f64]) -> Vec<f64> {
        let n = self.pairs();
        let mut v = DVector::zeros(self.b.nrows());
        for i in 0..n {
            v += &self.x_basis[i] * coords[i] + &self.y_basis[i] * coords[n + i];
        }
        v.as_slice().to_vec()
    }

    /// Adapted coordinates `(x_1..x_n, y_1..y_n)` of the projection of `v`
    /// onto the symplectic part.
    pub fn to_adapted(&self, v: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(v);
        self.x_basis.iter().chain(&self.y_basis).map(|u| u.dot(&v)).collect()
    }

    fn require_representable(&self) -> Result<()> {
        if self.radical_dim != 0 {
            return Err(Error::Unsupported(format!("B_ω has a radical of dimension {}", self.radical_dim)));
        }
        if !(1..=MAX_PAIRS).contains(&self.pairs()) {
            return Err(Error::Unsupported(format!("{} symplectic pairs (at most {MAX_PAIRS})", self.pairs())));
        }
        Ok(())
    }

    /// Grid on `𝔟` in adapted coordinates.
    pub fn adapted_grid(&self, half_width: f64, points_per_axis: usize) -> Result<GridCn> {
        self.require_representable()?;
        GridCn::new(self.pairs(), half_width, points_per_axis)
    }

    /// Samples `h(v)` (original coordinates) on an adapted grid.
    pub fn sample(&self, grid: GridCn, h: impl Fn(&[f64]) -> C64 + Sync) -> GridFunction {
        GridFunction::from_fn(grid, |p| h(&self.to_original(p)))
    }

    /// `c(ω) = (2π)ⁿ / p(ω)`.
    pub fn orthogonality_constant(&self) -> f64 {
        (2.0 * PI).powi(self.pairs() as i32) / self.p_omega
    }
}

/// Truncated Hermite basis of `L²(ℝⁿ)` carrying `π_ω`: per-axis scales
/// `d_j(ω)`, `N` functions per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaBasis {
    degree_cap: usize,
    scales: Vec<f64>,
}

impl OmegaBasis {
    pub fn new(decomp: &SymplecticDecomp, degree_cap: usize) -> Result<Self> {
        decomp.require_representable()?;
        if degree_cap == 0 {
            return Err(Error::Domain("degree cap must be positive".into()));
        }
        Ok(Self { degree_cap, scales: decomp.d.clone() })
    }

    pub fn pairs(&self) -> usize {
        self.scales.len()
    }

    pub fn degree_cap(&self) -> usize {
        self.degree_cap
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn len(&self) -> usize {
        self.degree_cap.pow(self.pairs() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Key with `lambda = d_1(ω)`; it matches the key of a [`HermiteBasis`]
    /// at that scale when all `d_j` agree.
    pub fn key(&self) -> BasisKey {
        BasisKey { dim: self.pairs(), lambda: self.scales[0], degree_cap: self.degree_cap }
    }

    /// Hermite basis with the same multi-index layout at the smallest scale.
    pub fn layout(&self) -> Result<HermiteBasis> {
        HermiteBasis::new(self.pairs(), self.scales[self.pairs() - 1], self.degree_cap)
    }

    /// Test-function band admissible on `grid` for every plane's scale.
    pub fn band(&self, grid: &GridCn) -> Band {
        let degree_sum = self.scales.iter().map(|&d| admissible_degree_sum(grid, d)).min().unwrap_or(0);
        Band { index_cap: self.degree_cap / 2 + 1, degree_sum }
    }

    /// Band for operands of an ω-twisted convolution on `grid`.
    pub fn convolution_band(&self, grid: &GridCn) -> Band {
        let degree_sum = self.scales.iter().map(|&d| convolution_degree_sum(grid, d)).min().unwrap_or(0);
        Band { index_cap: self.degree_cap / 2 + 1, degree_sum }
    }

    fn check(&self, decomp: &SymplecticDecomp) -> Result<()> {
        if self.scales != decomp.d {
            return Err(Error::Contract("basis scales do not match d(ω)".into()));
        }
        Ok(())
    }

    fn weyl(&self, matrix: DMatrix<C64>, residual: f64) -> WeylMatrix {
        WeylMatrix { matrix, lambda: self.scales[0], sigma_index: None, key: self.key(), truncation_residual: residual }
    }
}

/// `h(v) = Σ c_{αβ} conj(φ^ω_{αβ}(v))` on an adapted grid, for
/// `C[(β, α)] = c_{αβ}`, where `φ^ω_{αβ}(v) = (2π)^{−n/2}⟨π_ω(v)φ_α, φ_β⟩`.
/// Then `W_ω(h) = (2π)^{n/2} p(ω)^{−1} C`.
pub fn synthesize_omega(
    decomp: &SymplecticDecomp,
    basis: &OmegaBasis,
    grid: &GridCn,
    coeffs: &DMatrix<C64>,
) -> Result<GridFunction> {
    basis.check(decomp)?;
    if grid.dim != basis.pairs() {
        return Err(Error::Contract("grid dimension differs from the number of pairs".into()));
    }
    if coeffs.nrows() != basis.len() || coeffs.ncols() != basis.len() {
        return Err(Error::Dimension { expected: basis.len(), got: coeffs.nrows() });
    }
    GridFunction::new(*grid, synthesize_conj(basis.degree_cap, &basis.scales, grid, coeffs))
}

/// `π_ω(x, y, t)` with `(x, y)` in adapted coordinates and `t ∈ 𝔷`.
pub fn pi_omega_matrix(decomp: &SymplecticDecomp, basis: &OmegaBasis, coords: &[f64], t: &[f64]) -> Result<WeylMatrix> {
    basis.check(decomp)?;
    let n = basis.pairs();
    if coords.len() != 2 * n {
        return Err(Error::Dimension { expected: 2 * n, got: coords.len() });
    }
    if t.len() != decomp.omega.len() {
        return Err(Error::Dimension { expected: decomp.omega.len(), got: t.len() });
    }
    let cap = basis.degree_cap;
    let mut m = schrodinger_axis(cap, basis.scales[0], coords[0], coords[n]);
    for j in 1..n {
        m = m.kronecker(&schrodinger_axis(cap, basis.scales[j], coords[j], coords[n + j]));
    }
    let wt: f64 = decomp.omega.iter().zip(t).map(|(a, b)| a * b).sum();
    Ok(basis.weyl(m * C64::from_polar(1.0, -wt), 0.0))
}

pub fn pi_omega_action(
    decomp: &SymplecticDecomp,
    basis: &OmegaBasis,
    coords: &[f64],
    t: &[f64],
    phi: &CoeffVector,
) -> Result<CoeffVector> {
    if phi.key != basis.key() {
        return Err(Error::Contract("coefficient vector lives in a different basis".into()));
    }
    let p = pi_omega_matrix(decomp, basis, coords, t)?;
    Ok(CoeffVector { coeffs: p.matrix * &phi.coeffs, key: phi.key })
}

fn check_b_grid(basis: &OmegaBasis, h: &GridFunction) -> Result<()> {
    if h.grid.dim != basis.pairs() {
        return Err(Error::Contract(format!(
            "grid of dimension {} for {} symplectic pairs",
            h.grid.dim,
            basis.pairs()
        )));
    }
    Ok(())
}

/// `W_ω(h) = Σ_v h^{2n} h(v) π_ω(v)` over an adapted grid.
pub fn weyl_omega(decomp: &SymplecticDecomp, basis: &OmegaBasis, h: &GridFunction) -> Result<WeylMatrix> {
    basis.check(decomp)?;
    check_b_grid(basis, h)?;
    check_tail(h, "h")?;
    let m = weyl_sum(basis.degree_cap, &basis.scales, &h.grid, &h.values);
    Ok(basis.weyl(m, h.edge_fraction()))
}

/// `⟨π_ω(v)φ, ψ⟩` on an adapted grid.
pub fn fourier_wigner_omega(
    decomp: &SymplecticDecomp,
    basis: &OmegaBasis,
    phi: &CoeffVector,
    psi: &CoeffVector,
    grid: &GridCn,
) -> Result<GridFunction> {
    basis.check(decomp)?;
    if phi.key != basis.key() || psi.key != basis.key() {
        return Err(Error::Contract("coefficient vector lives in a different basis".into()));
    }
    if grid.dim != basis.pairs() {
        return Err(Error::Contract("grid dimension differs from the number of pairs".into()));
    }
    let values = fourier_wigner_values(basis.degree_cap, &basis.scales, grid, phi.coeffs.as_slice(), psi.coeffs.as_slice());
    GridFunction::new(*grid, values)
}

fn prepare_omega_convolution(decomp: &SymplecticDecomp, f: &GridFunction, g: &GridFunction) -> Result<()> {
    decomp.require_representable()?;
    if f.grid != g.grid {
        return Err(Error::Contract("grid functions live on different grids".into()));
    }
    if f.grid.dim != decomp.pairs() {
        return Err(Error::Contract("grid dimension differs from the number of pairs".into()));
    }
    check_tail(f, "f")?;
    check_tail(g, "g")
}

/// ω-twisted convolution on an adapted grid, where
/// `ω([v, v']) = Σ_j d_j (x_j y'_j − y_j x'_j)`.
pub fn twisted_convolution_omega(decomp: &SymplecticDecomp, f: &GridFunction, g: &GridFunction) -> Result<GridFunction> {
    prepare_omega_convolution(decomp, f, g)?;
    twisted_convolution_scaled(&decomp.d, f, g)
}

/// Reference double sum for [`twisted_convolution_omega`] with every phase
/// `ω([v, v'])` contracted from the structure constants in original
/// coordinates.
pub fn twisted_convolution_omega_direct(
    alg: &StepTwoAlgebra,
    decomp: &SymplecticDecomp,
    f: &GridFunction,
    g: &GridFunction,
) -> Result<GridFunction> {
    prepare_omega_convolution(decomp, f, g)?;
    let grid = f.grid;
    let m = grid.points_per_axis as i64;
    let half = m / 2;
    let original: Vec<Vec<f64>> = (0..grid.len()).map(|i| decomp.to_original(&grid.point(i))).collect();
    let w = grid.cell_weight();
    let values = (0..grid.len())
        .into_par_iter()
        .map(|zi| {
            let zk = grid.unravel(zi);
            let mut s = C64::new(0.0, 0.0);
            for wi in 0..grid.len() {
                if g.values[wi] == C64::new(0.0, 0.0) {
                    continue;
                }
                let wk = grid.unravel(wi);
                let dk: Vec<i64> = zk.iter().zip(&wk).map(|(&a, &b)| a as i64 - b as i64 + half).collect();
                if dk.iter().any(|&d| d < 0 || d >= m) {
                    continue;
                }
                let dku: Vec<usize> = dk.iter().map(|&d| d as usize).collect();
                let phase = alg.pairing(&decomp.omega, &original[zi], &original[wi]);
                s += f.values[grid.ravel(&dku)] * g.values[wi] * C64::from_polar(1.0, -0.5 * phase);
            }
            s * w
        })
        .collect();
    GridFunction::new(grid, values)
}

/// Value of the trace inversion formula with an estimate of the coefficient
/// mass that reaches the truncation boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inversion {
    pub value: C64,
    /// Relative HS mass of `F̂` on rows and columns whose multi-index touches
    /// the last retained degree.
    pub spectral_tail: f64,
}

/// `h(v) = (2π)^{−n} p(ω) tr(π_ω(v)* F̂)` at adapted coordinates `v`.
pub fn inversion(decomp: &SymplecticDecomp, basis: &OmegaBasis, fhat: &WeylMatrix, coords: &[f64]) -> Result<Inversion> {
    if fhat.key != basis.key() {
        return Err(Error::Contract("operator lives in a different basis".into()));
    }
    let t = vec![0.0; decomp.omega.len()];
    let p = pi_omega_matrix(decomp, basis, coords, &t)?;
    let tr: C64 = p.matrix.iter().zip(fhat.matrix.iter()).map(|(a, b)| a.conj() * b).sum();
    let n = basis.pairs();
    let value = tr * decomp.p_omega / (2.0 * PI).powi(n as i32);
    Ok(Inversion { value, spectral_tail: spectral_tail(basis, &fhat.matrix) })
}

fn spectral_tail(basis: &OmegaBasis, m: &DMatrix<C64>) -> f64 {
    let total = m.norm_squared();
    if total == 0.0 {
        return 0.0;
    }
    let cap = basis.degree_cap;
    let n = basis.pairs();
    let edge = |mut i: usize| {
        for _ in 0..n {
            if i % cap == cap - 1 {
                return true;
            }
            i /= cap;
        }
        false
    };
    let mut mass = 0.0;
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            if edge(r) || edge(c) {
                mass += m[(r, c)].norm_sqr();
            }
        }
    }
    mass / total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_parse() {
        let h = StepTwoAlgebra::fixture("heisenberg").unwrap();
        assert_eq!((h.m(), h.k()), (2, 1));
        assert_eq!(h.structure(0, 1, 0), 1.0);
        assert_eq!(h.structure(1, 0, 0), -1.0);
        let q = StepTwoAlgebra::fixture("quaternionic").unwrap();
        assert_eq!((q.m(), q.k()), (4, 3));
        assert!(StepTwoAlgebra::fixture("nope").is_err());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let cases = [
            ("2 1\n1 1 1 1\n", 2),
            ("2 1\n1 3 1 1\n", 2),
            ("2 1\n1 2 1 1\n2 1 1 1\n", 3),
            ("# c\n2\n", 2),
            ("2 1\n1 2 x 1\n", 2),
        ];
        for (text, line) in cases {
            match StepTwoAlgebra::parse(text) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
        let ok = StepTwoAlgebra::parse("2 1\n1 2 1 1\n2 1 1 -1\n").unwrap();
        assert_eq!(ok, StepTwoAlgebra::fixture("heisenberg").unwrap());
    }

    #[test]
    fn text_round_trip() {
        for (name, _) in FIXTURES {
            let a = StepTwoAlgebra::fixture(name).unwrap();
            assert_eq!(StepTwoAlgebra::parse(&a.to_text()).unwrap(), a);
        }
    }

    #[test]
    fn heisenberg_form_and_decomposition() {
        let h = StepTwoAlgebra::fixture("heisenberg").unwrap();
        let b = h.bilinear_form(&[3.0]).unwrap();
        assert_eq!(b, DMatrix::from_row_slice(2, 2, &[0.0, 3.0, -3.0, 0.0]));
        let d = h.decompose(&[3.0]).unwrap();
        assert_eq!(d.d.len(), 1);
        assert!((d.d[0] - 3.0).abs() < 1e-14 && (d.p_omega - 3.0).abs() < 1e-14);
        assert!(d.pairing_defect(&h) < 1e-12);
        let zero = h.decompose(&[0.0]).unwrap();
        assert_eq!((zero.pairs(), zero.radical_dim), (0, 2));
        assert!(h.bilinear_form(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn degenerate_fixture_has_radical() {
        let a = StepTwoAlgebra::fixture("degenerate").unwrap();
        let d = a.decompose(&[1.5]).unwrap();
        assert_eq!(d.radical_dim, 2);
        assert!(!d.is_metivier());
        assert!(d.pairing_defect(&a) < 1e-12);
        assert!(matches!(OmegaBasis::new(&d, 4), Err(Error::Unsupported(_))));
    }

    #[test]
    fn not_skew_is_rejected() {
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(symplectic_decompose(&b, &[1.0]), Err(Error::Contract(_))));
    }
}
