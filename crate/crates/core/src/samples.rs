//! Seeded random test data: band-limited grid functions in the span of
//! conjugated special Hermite functions, and Gaussian-weighted coefficient
//! vectors.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::heisenberg::{displacement_parameter, fill_displacement, GridCn, GridFunction};
use crate::hermite::{CoeffVector, HermiteBasis};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn complex_normal(rng: &mut impl Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Largest per-plane degree sum `α_j + β_j` whose special Hermite functions
/// stay inside `0.6·L` and below `0.6×` the grid Nyquist frequency.
///
/// The special Hermite functions with degree sum `s` concentrate in the disc
/// of radius `2√((s+1)/|λ|)` and in frequencies up to `√(|λ|(s+1))`.
pub fn admissible_degree_sum(grid: &GridCn, lambda: f64) -> usize {
    degree_sum_bound(grid, lambda, 0.3, 0.6)
}

/// Tighter degree-sum bound for operands of a twisted convolution: the
/// integrand `F(z − w)H(w)` carries the phase `λ Im(w·z̄)/2` on top of both
/// operands' frequencies, and `F(z − w)` reaches twice as far out.
pub fn convolution_degree_sum(grid: &GridCn, lambda: f64) -> usize {
    degree_sum_bound(grid, lambda, 0.2, 0.45)
}

fn degree_sum_bound(grid: &GridCn, lambda: f64, spatial: f64, spectral: f64) -> usize {
    let reach = lambda.abs() * (spatial * grid.half_width).powi(2);
    let nyquist = PI / grid.spacing();
    let band = (spectral * nyquist).powi(2) / lambda.abs();
    let bound = reach.min(band) - 1.0;
    if bound < 0.0 {
        0
    } else {
        bound.floor() as usize
    }
}

/// Band description for random test functions: per-axis index cap and a cap
/// on each plane's degree sum.
#[derive(Debug, Clone, Copy)]
pub struct Band {
    pub index_cap: usize,
    pub degree_sum: usize,
}

impl Band {
    /// `|α|, |β| ≤ N/2` intersected with the grid-admissible degree sum.
    pub fn for_grid(basis: &HermiteBasis, grid: &GridCn) -> Self {
        Self {
            index_cap: basis.degree_cap() / 2 + 1,
            degree_sum: admissible_degree_sum(grid, basis.lambda()),
        }
    }

    /// Band for operands of a twisted convolution on `grid`.
    pub fn for_convolution(basis: &HermiteBasis, grid: &GridCn) -> Self {
        Self {
            index_cap: basis.degree_cap() / 2 + 1,
            degree_sum: convolution_degree_sum(grid, basis.lambda()),
        }
    }

    fn admits(&self, alpha: &[usize], beta: &[usize]) -> bool {
        alpha.iter().zip(beta).all(|(&a, &b)| a < self.index_cap && b < self.index_cap && a + b <= self.degree_sum)
    }
}

/// Random coefficient matrix `C` with `C[(β, α)] = c_{αβ}`, nonzero only
/// inside the band.
pub fn random_band_coefficients(basis: &HermiteBasis, band: Band, rng: &mut impl Rng) -> DMatrix<C64> {
    let n = basis.len();
    let idx = basis.multi_indices();
    let mut c = DMatrix::zeros(n, n);
    for (ia, a) in idx.iter().enumerate() {
        for (ib, b) in idx.iter().enumerate() {
            if band.admits(a, b) {
                c[(ib, ia)] = complex_normal(rng);
            }
        }
    }
    c
}

/// `F(z) = Σ c_{αβ} conj(φ^λ_{αβ}(z))` on the grid, for `C[(β, α)] = c_{αβ}`.
pub fn synthesize_conj_special(basis: &HermiteBasis, grid: &GridCn, coeffs: &DMatrix<C64>) -> GridFunction {
    let lambdas = vec![basis.lambda(); basis.dim()];
    let values = synthesize_conj(basis.degree_cap(), &lambdas, grid, coeffs);
    GridFunction { grid: *grid, values }
}

/// Leading block size that carries every nonzero coefficient.
fn used_block(n: usize, dim: usize, coeffs: &DMatrix<C64>) -> usize {
    let mut used = 1;
    for ((row, col), v) in coeffs.iter().enumerate().map(|(i, v)| ((i % coeffs.nrows(), i / coeffs.nrows()), v)) {
        if *v != C64::new(0.0, 0.0) {
            let (mut r, mut c) = (row, col);
            for _ in 0..dim {
                used = used.max(r % n + 1).max(c % n + 1);
                r /= n;
                c /= n;
            }
        }
    }
    used
}

/// Conjugated special Hermite synthesis with one scale per plane, the
/// multi-index layout of a basis with per-axis cap `n`.
pub(crate) fn synthesize_conj(n: usize, lambdas: &[f64], grid: &GridCn, coeffs: &DMatrix<C64>) -> Vec<C64> {
    let dim = grid.dim;
    let norm = (2.0 * PI).powf(-(dim as f64) / 2.0);
    let nb = used_block(n, dim, coeffs);
    let mm = grid.points_per_axis;
    // Conjugated displacement blocks per plane point, row-major `[β][α]`.
    let conj_table = |lam: f64| -> Vec<Vec<C64>> {
        (0..mm * mm)
            .into_par_iter()
            .map(|i| {
                let mut buf = vec![C64::new(0.0, 0.0); nb * nb];
                fill_displacement(nb, displacement_parameter(lam, grid.coord(i / mm), grid.coord(i % mm)), &mut buf);
                let mut out = vec![C64::new(0.0, 0.0); nb * nb];
                for a in 0..nb {
                    for b in 0..nb {
                        out[b * nb + a] = buf[a * nb + b].conj();
                    }
                }
                out
            })
            .collect()
    };
    let t1 = conj_table(lambdas[0]);
    match dim {
        1 => {
            let c: Vec<C64> = (0..nb * nb).map(|i| coeffs[(i / nb, i % nb)]).collect();
            (0..grid.len())
                .into_par_iter()
                .map(|i| {
                    if !grid.is_paired(i) {
                        return C64::new(0.0, 0.0);
                    }
                    let s: C64 = t1[i].iter().zip(&c).map(|(p, q)| p * q).sum();
                    s * norm
                })
                .collect()
        }
        _ => {
            let t2 = conj_table(lambdas[1]);
            // G_q[β1][α1] = Σ_{β2,α2} C[(β1,β2),(α1,α2)]·conj(B_q)[β2][α2]
            let g: Vec<Vec<C64>> = t2
                .par_iter()
                .map(|bq| {
                    let mut out = vec![C64::new(0.0, 0.0); nb * nb];
                    for b1 in 0..nb {
                        for a1 in 0..nb {
                            let mut s = C64::new(0.0, 0.0);
                            for b2 in 0..nb {
                                for a2 in 0..nb {
                                    let cv = coeffs[(b1 * n + b2, a1 * n + a2)];
                                    if cv != C64::new(0.0, 0.0) {
                                        s += cv * bq[b2 * nb + a2];
                                    }
                                }
                            }
                            out[b1 * nb + a1] = s;
                        }
                    }
                    out
                })
                .collect();
            (0..grid.len())
                .into_par_iter()
                .map(|i| {
                    if !grid.is_paired(i) {
                        return C64::new(0.0, 0.0);
                    }
                    let ks = grid.unravel(i);
                    let a = &t1[ks[0] * mm + ks[2]];
                    let gq = &g[ks[1] * mm + ks[3]];
                    let s: C64 = a.iter().zip(gq).map(|(p, q)| p * q).sum();
                    s * norm
                })
                .collect()
        }
    }
}

/// Random band-limited function together with its coefficient matrix.
pub fn random_band_limited(basis: &HermiteBasis, grid: &GridCn, rng: &mut impl Rng) -> (GridFunction, DMatrix<C64>) {
    let c = random_band_coefficients(basis, Band::for_grid(basis, grid), rng);
    (synthesize_conj_special(basis, grid, &c), c)
}

/// Coefficient vector with i.i.d. complex normal entries damped by
/// `exp(−(|α|/width)²)`, restricted to `|α| ≤ cap`.
pub fn gaussian_weighted(basis: &HermiteBasis, width: f64, cap: usize, rng: &mut impl Rng) -> CoeffVector {
    let coeffs = DVector::from_iterator(
        basis.len(),
        basis.multi_indices().iter().map(|a| {
            let deg: usize = a.iter().sum();
            let z = complex_normal(rng);
            if deg > cap {
                C64::new(0.0, 0.0)
            } else {
                z * (-(deg as f64 / width).powi(2)).exp()
            }
        }),
    );
    CoeffVector { coeffs, key: basis.key() }
}

/// Gaussian-weighted coefficient vector sized so that Fourier–Wigner
/// transforms of pairs stay inside the band admissible on `grid`.
pub fn random_coeff_vector(basis: &HermiteBasis, grid: &GridCn, rng: &mut impl Rng) -> CoeffVector {
    let s = admissible_degree_sum(grid, basis.lambda());
    let cap = (s / 2).min(basis.degree_cap() - 1);
    gaussian_weighted(basis, (cap as f64 / 2.0).max(1.0), cap, rng)
}
