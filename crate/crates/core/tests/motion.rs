use hermweyl::heisenberg::{schrodinger_axis, GridCn, GridFunction};
use hermweyl::hermite::HermiteBasis;
use hermweyl::motion::{
    character_unitarity_residual, fourier_wigner_motion, group_fourier, intertwining_residual, metaplectic_matrix,
    motion_weyl, motion_weyl_sweep, peter_weyl_coefficients, peter_weyl_reconstruct, rotate, twisted_convolution_gx,
    CharacterIndex, GridGx, GxFunction, MotionSamples, PhaseConvention, TGrid,
};
use hermweyl::samples::{random_band_coefficients, random_coeff_vector, rng, synthesize_conj_special, Band};
use hermweyl::Error;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::Rng;
use std::f64::consts::PI;

/// `F(z, θ) = Σ_j A_j(z) e^{−ijθ}` with band-limited `A_j`.
fn random_gx(basis: &HermiteBasis, grid: &GridGx, band: Band, orders: &[i64], r: &mut impl Rng) -> GxFunction {
    let parts: Vec<(i64, GridFunction)> = orders
        .iter()
        .map(|&j| (j, synthesize_conj_special(basis, &grid.cn, &random_band_coefficients(basis, band, r))))
        .collect();
    let slices: Vec<GridFunction> = (0..grid.theta_points)
        .map(|t| {
            let th = grid.theta(t);
            parts.iter().fold(GridFunction::zeros(grid.cn), |acc, (j, a)| {
                acc.add(&a.scale(C64::from_polar(1.0, -(*j as f64) * th))).unwrap()
            })
        })
        .collect();
    GxFunction::from_slices(*grid, &slices).unwrap()
}

fn setup(lam: f64, points: usize, t: usize, m_char: usize) -> (HermiteBasis, GridGx) {
    let b = HermiteBasis::new(1, lam, 24).unwrap();
    let cn = GridCn::new(1, 12.0 / lam.abs().sqrt(), points).unwrap();
    (b, GridGx::new(cn, t, m_char).unwrap())
}

fn characters(cap: usize) -> Vec<CharacterIndex> {
    (-(cap as i64)..=cap as i64).map(|m| CharacterIndex::new(m, cap).unwrap()).collect()
}

#[test]
fn intertwining_holds_only_for_the_matching_convention() {
    for &lam in &[1.0, 2.0, 0.5, -1.0, -2.0] {
        let b = HermiteBasis::new(1, lam, 24).unwrap();
        let good = PhaseConvention::for_lambda(lam);
        let bad = if good == PhaseConvention::Positive { PhaseConvention::Negative } else { PhaseConvention::Positive };
        for &th in &[0.3, 2.0, 5.2] {
            for &z in &[[0.5, -0.3], [-2.0, 0.5], [0.0, 3.0]] {
                assert!(intertwining_residual(&b, th, z, good).unwrap() < 1e-6, "λ={lam} θ={th} z={z:?}");
                assert!(intertwining_residual(&b, th, z, bad).unwrap() > 1e-3);
            }
        }
    }
}

#[test]
fn sweep_matches_the_defining_double_sum() {
    let lam = -0.8;
    let n = 8;
    let b = HermiteBasis::new(1, lam, n).unwrap();
    let cn = GridCn::new(1, 4.0, 16).unwrap();
    let grid = GridGx::new(cn, 6, 1).unwrap();
    let f = GxFunction::from_fn(grid, |p, th| {
        C64::new(1.0 + p[0], th.sin()) * (-(p[0] * p[0] + p[1] * p[1])).exp() * C64::from_polar(1.0, 2.0 * th)
    });
    for m in characters(1) {
        let fast = motion_weyl(&b, m, &f).unwrap();
        let mut direct = DMatrix::<C64>::zeros(n, n);
        for t in 0..grid.theta_points {
            let th = grid.theta(t);
            let mu = metaplectic_matrix(&b, th).unwrap().matrix;
            for i in 0..cn.len() {
                let v = f.values[t * cn.len() + i];
                if v == C64::new(0.0, 0.0) {
                    continue;
                }
                let p = cn.point(i);
                direct += schrodinger_axis(n, lam, p[0], p[1]) * &mu * (v * m.value(th) * grid.weight());
            }
        }
        let d = (fast.weyl.matrix - direct).iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(d < 1e-12, "m={}: {d}", m.m);
    }
}

#[test]
fn product_law_on_four_angles() {
    let (b, grid) = setup(1.0, 64, 4, 0);
    let band = Band::for_convolution(&b, &grid.cn);
    let mut r = rng(5);
    let f = random_gx(&b, &grid, band, &[-1, 0, 1], &mut r);
    let h = random_gx(&b, &grid, band, &[-1, 0, 1], &mut r);
    let conv = twisted_convolution_gx(&b, &f, &h).unwrap();
    let m = CharacterIndex::new(0, 0).unwrap();
    let wf = motion_weyl(&b, m, &f).unwrap();
    let wh = motion_weyl(&b, m, &h).unwrap();
    let wc = motion_weyl(&b, m, &conv).unwrap();
    let expected = wf.weyl.compose(&wh.weyl).unwrap();
    assert!(wc.weyl.hs_distance(&expected) / (wf.hs_norm() * wh.hs_norm()) < 1e-5);
}

#[test]
fn plancherel_sums_over_characters() {
    let (b, grid) = setup(-0.5, 64, 64, 16);
    let f = random_gx(&b, &grid, Band::for_grid(&b, &grid.cn), &[-2, 0, 3], &mut rng(8));
    let total: f64 = motion_weyl_sweep(&b, &characters(16), &f).unwrap().iter().map(|w| w.hs_norm().powi(2)).sum();
    assert!((total / (2.0 * PI / 0.5 * f.norm_sq()) - 1.0).abs() < 1e-8);
}

#[test]
fn peter_weyl_reconstructs() {
    let (b, grid) = setup(1.0, 64, 64, 16);
    let f = random_gx(&b, &grid, Band::for_grid(&b, &grid.cn), &[-2, 1], &mut rng(2));
    let coeffs = peter_weyl_coefficients(&b, &f).unwrap();
    let g = peter_weyl_reconstruct(&b, &grid, &coeffs).unwrap();
    assert!(g.sub(&f).unwrap().sup_norm() / f.sup_norm() < 1e-8);
}

#[test]
fn fourier_wigner_separates_characters() {
    let (b, grid) = setup(1.0, 64, 16, 3);
    let mut r = rng(9);
    let f = random_coeff_vector(&b, &grid.cn, &mut r);
    let g = random_coeff_vector(&b, &grid.cn, &mut r);
    let c = 2.0 * PI * f.norm().powi(2) * g.norm().powi(2);
    let v: Vec<GxFunction> =
        characters(3).into_iter().map(|m| fourier_wigner_motion(&b, m, &f, &g, &grid).unwrap()).collect();
    for (i, a) in v.iter().enumerate() {
        for (j, e) in v.iter().enumerate() {
            let ip = a.inner(e).unwrap();
            let target = if i == j { c } else { 0.0 };
            assert!((ip - target).norm() / c < 1e-8, "({i},{j})");
        }
    }
}

#[test]
fn rotation_moves_band_limited_samples() {
    let b = HermiteBasis::new(1, 1.0, 24).unwrap();
    let cn = GridCn::new(1, 12.0, 64).unwrap();
    let g = synthesize_conj_special(&b, &cn, &random_band_coefficients(&b, Band::for_grid(&b, &cn), &mut rng(4)));
    // A rotation by a quarter turn permutes the lattice exactly.
    let rotated = rotate(&b, &g, PI / 2.0).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..cn.len() {
        let k = cn.unravel(i);
        let (kx, ky) = (k[0] as i64 - 32, k[1] as i64 - 32);
        // e^{−iπ/2}(x + iy) = y − ix
        let (sx, sy) = (ky + 32, -kx + 32);
        if (0..64).contains(&sx) && (0..64).contains(&sy) && cn.is_paired(i) {
            let j = cn.ravel(&[sx as usize, sy as usize]);
            worst = worst.max((rotated.values[i] - g.values[j]).norm());
        }
    }
    assert!(worst / g.sup_norm() < 1e-8, "{worst}");
}

#[test]
fn group_fourier_of_a_product() {
    let lam = 1.3;
    let b = HermiteBasis::new(1, 1.0, 24).unwrap();
    let cn = GridCn::new(1, 10.0, 48).unwrap();
    let grid = GridGx::new(cn, 8, 2).unwrap();
    let tg = TGrid::new(8.0, 64).unwrap();
    let spatial = |p: &[f64], th: f64| C64::new(p[1], 1.0) * (-(p[0] * p[0] + p[1] * p[1]) / 2.0).exp() * (1.0 + th.cos());
    let samples = MotionSamples::from_fn(tg, grid, |p, t, th| spatial(p, th) * (-t * t).exp());
    let m = CharacterIndex::new(1, 2).unwrap();
    let got = group_fourier(&b, m, &samples, lam).unwrap();
    let scaled = HermiteBasis::new(1, lam, 24).unwrap();
    let expected = motion_weyl(&scaled, m, &GxFunction::from_fn(grid, spatial)).unwrap();
    let gauss = PI.sqrt() * (-lam * lam / 4.0).exp();
    let d = got.weyl.matrix - &expected.weyl.matrix * C64::new(gauss, 0.0);
    assert!(d.norm() / expected.hs_norm() < 1e-10);
    assert!(matches!(samples.central_transform(100.0), Err(Error::Domain(_))));
}

#[test]
fn invalid_inputs() {
    let cn = GridCn::new(1, 4.0, 8).unwrap();
    assert!(matches!(GridGx::new(cn, 5, 1), Err(Error::Domain(_))));
    assert!(matches!(GridGx::new(GridCn::new(2, 4.0, 8).unwrap(), 8, 1), Err(Error::Unsupported(_))));
    assert!(matches!(CharacterIndex::new(3, 2), Err(Error::Index(_))));
    let b2 = HermiteBasis::new(2, 1.0, 4).unwrap();
    assert!(matches!(metaplectic_matrix(&b2, 0.1), Err(Error::Unsupported(_))));
    let b = HermiteBasis::new(1, 1.0, 4).unwrap();
    assert!(matches!(metaplectic_matrix(&b, f64::NAN), Err(Error::Domain(_))));
    assert!(TGrid::new(1.0, 1).is_err());
}

proptest! {
    #[test]
    fn characters_are_unitary(m in -6i64..=6, th in 0.0f64..(2.0 * PI), c in prop::array::uniform4(-3.0f64..3.0)) {
        let k = CharacterIndex::new(m, 6).unwrap();
        prop_assert!(character_unitarity_residual(k, th, C64::new(c[0], c[1]), C64::new(c[2], c[3])) < 1e-13);
    }

    #[test]
    fn metaplectic_phases_form_a_group(a in -4.0f64..4.0, c in -4.0f64..4.0, lam in prop_oneof![0.5f64..2.0, -2.0f64..-0.5]) {
        let b = HermiteBasis::new(1, lam, 10).unwrap();
        let prod = metaplectic_matrix(&b, a).unwrap().matrix * metaplectic_matrix(&b, c).unwrap().matrix;
        let sum = metaplectic_matrix(&b, a + c).unwrap().matrix;
        prop_assert!((prod - sum).norm() < 1e-12);
    }
}
