use hermweyl::heisenberg::{weyl_transform, GridCn, GridFunction, WeylMatrix};
use hermweyl::hermite::{CoeffVector, HermiteBasis};
use hermweyl::samples::{complex_normal, rng, synthesize_conj_special};
use hermweyl::uniqueness::{
    kernel_decay, kernel_ky, pocs_explorer, rank_profile, singular_values, spectral_to_wigner, tail_mass,
    truncate_rank, SupportMask,
};
use hermweyl::Error;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use std::f64::consts::PI;

fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<C64> {
    let mut r = rng(seed);
    DMatrix::from_fn(rows, cols, |_, _| complex_normal(&mut r))
}

/// Singular values from the eigenvalues of `MᴴM`, nonincreasing.
fn gram_singular_values(m: &DMatrix<C64>) -> Vec<f64> {
    let mut e: Vec<f64> = (m.adjoint() * m).symmetric_eigen().eigenvalues.iter().map(|v| v.max(0.0).sqrt()).collect();
    e.sort_by(|a, b| b.total_cmp(a));
    e
}

#[test]
fn gaussian_tail_mass_matches_closed_form() {
    // ∫_{|z|>R} e^{−2a|z|²} dz = π/(2a) e^{−2aR²}
    let a = 0.7;
    let g = GridCn::new(1, 10.0, 128).unwrap();
    let f = GridFunction::from_fn(g, |p| C64::new((-a * (p[0] * p[0] + p[1] * p[1])).exp(), 0.0));
    let total = PI / (2.0 * a);
    for r in [0.0, 0.5, 1.3, 2.0, 3.5] {
        let exact = total * (-2.0 * a * r * r).exp();
        let got = tail_mass(&f, r).unwrap();
        assert!((got - exact).abs() / total < 1e-6, "R={r}: {got} vs {exact}");
    }
    assert!(matches!(tail_mass(&f, 10.0), Err(Error::Domain(_))));
    assert!(matches!(tail_mass(&f, -1.0), Err(Error::Domain(_))));
}

#[test]
fn total_mass_on_the_product_grid() {
    let a = 1.1;
    let g = GridCn::new(2, 5.0, 24).unwrap();
    let f = GridFunction::from_fn(g, |p| C64::new((-a * p.iter().map(|x| x * x).sum::<f64>()).exp(), 0.0));
    let exact = (PI / (2.0 * a)).powi(2);
    // The lattice tail counts |z| > R strictly, so R = 0 leaves out the origin cell.
    let origin = g.cell_weight();
    assert!(((tail_mass(&f, 0.0).unwrap() + origin) / exact - 1.0).abs() < 1e-10);
    assert!(tail_mass(&f, 1.0).unwrap() < tail_mass(&f, 0.5).unwrap());
}

#[test]
fn ground_state_kernel_decays_as_a_gaussian() {
    // χ = φ = φ_0 at λ = 1: max_ξ |K_y(ξ)| = |b| e^{−y²/4} / √π at ξ = −y/2.
    let basis = HermiteBasis::new(1, 1.0, 8).unwrap();
    let e0 = vec![CoeffVector::unit(&basis, &[0]).unwrap()];
    let b = [C64::new(0.0, 2.0)];
    let xi: Vec<f64> = (0..=1600).map(|i| -8.0 + 0.01 * i as f64).collect();
    // Even multiples of the ξ step keep the maximiser −y/2 on the ξ grid.
    let ys: Vec<f64> = (0..=300).map(|i| 0.02 * i as f64).collect();
    let tol = 1e-3;
    let decay = kernel_decay(&basis, &e0, &e0, &b, &ys, &xi, tol).unwrap();
    for (y, m) in decay.ys.iter().zip(&decay.max_abs) {
        let exact = 2.0 * (-y * y / 4.0).exp() / PI.sqrt();
        assert!((m - exact).abs() < 1e-12, "y={y}");
    }
    let r_exact = 2.0 * (2.0 / (PI.sqrt() * tol)).ln().sqrt();
    let r = decay.r_hat.unwrap();
    assert!(r >= r_exact && r - r_exact <= 0.02, "{r} vs {r_exact}");
    assert!(decay.floor_beyond(r).unwrap() <= tol);
    assert!(decay.floor_beyond(7.0).is_none());
}

#[test]
fn kernel_input_errors() {
    let b1 = HermiteBasis::new(1, 1.0, 4).unwrap();
    let e = vec![CoeffVector::unit(&b1, &[1]).unwrap()];
    assert!(matches!(kernel_ky(&b1, &[], &[], &[], 0.0, &[0.0]), Err(Error::Domain(_))));
    assert!(matches!(kernel_ky(&b1, &e, &e, &[C64::new(0.0, 0.0)], 0.0, &[0.0]), Err(Error::Domain(_))));
    assert!(matches!(kernel_ky(&b1, &e, &[], &[C64::new(1.0, 0.0)], 0.0, &[0.0]), Err(Error::Dimension { .. })));
    let b2 = HermiteBasis::new(2, 1.0, 4).unwrap();
    let e2 = vec![CoeffVector::unit(&b2, &[1, 0]).unwrap()];
    assert!(matches!(kernel_ky(&b2, &e2, &e2, &[C64::new(1.0, 0.0)], 0.0, &[0.0]), Err(Error::Unsupported(_))));
    let other = HermiteBasis::new(1, 2.0, 4).unwrap();
    let f = vec![CoeffVector::unit(&other, &[1]).unwrap()];
    assert!(matches!(kernel_ky(&b1, &e, &f, &[C64::new(1.0, 0.0)], 0.0, &[0.0]), Err(Error::Contract(_))));
}

#[test]
fn hermite_data_has_the_expected_rank() {
    let b = HermiteBasis::new(1, 1.0, 16).unwrap();
    let g = GridCn::new(1, 12.0, 128).unwrap();
    let mut c = DMatrix::zeros(16, 16);
    for (a, bb) in [(0, 3), (2, 1), (4, 4)] {
        c[(bb, a)] = C64::new(1.0 + a as f64, 0.5);
    }
    let w = weyl_transform(&b, &synthesize_conj_special(&b, &g, &c)).unwrap();
    assert_eq!(rank_profile(&w, 1e-6).unwrap().numerical_rank, 3);
    assert!(matches!(rank_profile(&w, 0.0), Err(Error::Domain(_))));
}

#[test]
fn positive_operators_split_into_wigner_components() {
    let lam = -1.5;
    let b = HermiteBasis::new(1, lam, 12).unwrap();
    let g = GridCn::new(1, 12.0 / lam.abs().sqrt(), 96).unwrap();
    let f = random_matrix(12, 3, 17).map(|v| v * 0.2);
    // Damp high degrees so the components are resolved on the grid.
    let f = DMatrix::from_fn(12, 3, |i, j| f[(i, j)] * (-(i as f64) / 2.0).exp());
    let tau_hat = WeylMatrix::new(&b, &f * f.adjoint());
    let d = spectral_to_wigner(&tau_hat, &b).unwrap();
    assert_eq!(d.components.len(), 3);
    assert!(d.residual < 1e-12);
    assert!(d.weights.windows(2).all(|w| w[0] >= w[1]));
    let tau = d.synthesize(&b, &g).unwrap();
    let back = weyl_transform(&b, &tau).unwrap();
    assert!(back.hs_distance(&tau_hat) / tau_hat.hs_norm() < 1e-8);

    let other = HermiteBasis::new(1, 1.0, 12).unwrap();
    assert!(matches!(spectral_to_wigner(&tau_hat, &other), Err(Error::Contract(_))));
    let negative = WeylMatrix::new(&b, (&f * f.adjoint()).map(|v| -v));
    assert!(matches!(spectral_to_wigner(&negative, &b), Err(Error::Contract(_))));
    let mut bad = WeylMatrix::new(&b, &f * f.adjoint());
    bad.matrix[(0, 0)] = C64::new(f64::NAN, 0.0);
    assert!(matches!(spectral_to_wigner(&bad, &b), Err(Error::Domain(_))));
}

#[test]
fn pocs_trajectory_and_masks() {
    let b = HermiteBasis::new(1, 1.0, 16).unwrap();
    let g = GridCn::new(1, 12.0, 64).unwrap();
    let mask = SupportMask::ball(g, 3.0);
    let f0 = mask.apply(&GridFunction::from_fn(g, |p| C64::new(1.0 + p[0], p[1]) * (-(p[0] * p[0] + p[1] * p[1]) / 4.0).exp())).unwrap();
    let t = pocs_explorer(&b, &mask, &f0, 4, 5).unwrap();
    assert_eq!(t.len(), 6);
    assert!((t[0] - f0.norm()).abs() < 1e-15);
    assert!(t.iter().all(|v| v.is_finite()));
    assert!(t[5] < t[0]);
    assert!(matches!(pocs_explorer(&b, &mask, &f0, 0, 5), Err(Error::Domain(_))));
    assert!(matches!(pocs_explorer(&b, &mask, &f0, 4, 0), Err(Error::Domain(_))));
    let other = SupportMask::full(GridCn::new(1, 6.0, 64).unwrap());
    assert!(matches!(other.apply(&f0), Err(Error::Contract(_))));
    assert_eq!(SupportMask::full(g).apply(&f0).unwrap(), f0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn truncation_is_the_best_low_rank_approximation(
        rows in 2usize..7,
        cols in 2usize..7,
        rank in 0usize..7,
        seed in any::<u64>(),
    ) {
        let m = random_matrix(rows, cols, seed);
        let s = gram_singular_values(&m);
        let ours = singular_values(&m);
        for (a, c) in ours.iter().zip(&s) {
            prop_assert!((a - c).abs() < 1e-10);
        }
        let t = truncate_rank(&m, rank);
        // Eckart–Young: ‖M − M_r‖_F² = Σ_{i>r} σ_i².
        let tail: f64 = s.iter().skip(rank).map(|x| x * x).sum();
        prop_assert!(((&m - &t).norm_squared() - tail).abs() < 1e-9 * (1.0 + tail));
        let kept = gram_singular_values(&t).iter().filter(|&&x| x > 1e-6).count();
        prop_assert_eq!(kept, rank.min(rows).min(cols));
        // Another rank-r candidate does no better.
        let other = truncate_rank(&(&m + random_matrix(rows, cols, seed ^ 1).map(|v| v * 0.3)), rank);
        prop_assert!((&m - &other).norm_squared() >= tail - 1e-9);
    }

    #[test]
    fn numerical_rank_shrinks_as_epsilon_grows(seed in any::<u64>(), e1 in 1e-12f64..1e-2, e2 in 1e-12f64..1e-2) {
        let b = HermiteBasis::new(1, 1.0, 8).unwrap();
        let m = random_matrix(8, 8, seed);
        let diag = DMatrix::from_fn(8, 8, |i, j| if i == j { C64::new(10f64.powi(-(i as i32) * 2), 0.0) } else { C64::new(0.0, 0.0) });
        let w = WeylMatrix::new(&b, &m * diag * m.adjoint());
        let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
        prop_assert!(rank_profile(&w, hi).unwrap().numerical_rank <= rank_profile(&w, lo).unwrap().numerical_rank);
    }
}
