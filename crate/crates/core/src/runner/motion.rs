use std::f64::consts::PI;
use std::ops::RangeInclusive;

use super::config::{RunConfig, Suite};
use super::heisenberg::{fourier_wigner_defect, interior_residual};
use super::Sink;
use crate::heisenberg::{GridCn, GridFunction};
use crate::hermite::HermiteBasis;
use crate::motion::{
    fourier_wigner_motion, intertwining_residual, motion_weyl_sweep, peter_weyl_coefficients,
    peter_weyl_reconstruct, twisted_convolution_gx, CharacterIndex, GridGx, GxFunction, PhaseConvention,
};
use crate::samples::{random_band_coefficients, random_coeff_vector, rng, synthesize_conj_special, Band};
use crate::{Error, Result, C64};

/// Angles and `(x, y)` points of the intertwining sample.
pub const INTERTWINE_THETAS: [f64; 5] = [0.3, 1.1, 2.0, 3.5, 5.2];
pub const INTERTWINE_POINTS: [[f64; 2]; 5] = [[0.5, -0.3], [1.0, 1.0], [-2.0, 0.5], [0.0, 3.0], [2.5, -1.5]];

pub(super) fn setup(cfg: &RunConfig, suite: Suite) -> Result<(HermiteBasis, GridGx)> {
    let cap = cfg.degree_cap.unwrap_or(24);
    let basis = HermiteBasis::with_quad_size(1, cfg.lambda, cap, cfg.quad_size.unwrap_or(2 * cap + 8))?;
    let half_width = cfg.half_width.unwrap_or(12.0 / cfg.lambda.abs().sqrt());
    let cn = GridCn::new(1, half_width, cfg.points.unwrap_or(64))?;
    let (t, m_char) = match suite {
        Suite::ProductLaw => (8, 2),
        _ => (64, 16),
    };
    let grid = GridGx::new(cn, cfg.theta_points.unwrap_or(t), cfg.m_char.unwrap_or(m_char))?;
    Ok((basis, grid))
}

/// `F(z, θ) = Σ_j A_j(z) e^{−ijθ}` with each `A_j` random in `band`, so that
/// the angular coefficient of order `j` is `A_j`.
pub fn random_gx(
    basis: &HermiteBasis,
    grid: &GridGx,
    band: Band,
    orders: RangeInclusive<i64>,
    r: &mut impl rand::Rng,
) -> Result<GxFunction> {
    let parts: Vec<(i64, GridFunction)> = orders
        .map(|j| (j, synthesize_conj_special(basis, &grid.cn, &random_band_coefficients(basis, band, r))))
        .collect();
    let slices: Vec<GridFunction> = (0..grid.theta_points)
        .map(|t| {
            let th = grid.theta(t);
            let mut acc = GridFunction::zeros(grid.cn);
            for (j, a) in &parts {
                acc = acc.add(&a.scale(C64::from_polar(1.0, -(*j as f64) * th)))?;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    GxFunction::from_slices(*grid, &slices)
}

pub(super) fn characters(grid: &GridGx) -> Result<Vec<CharacterIndex>> {
    let cap = grid.m_char as i64;
    (-cap..=cap).map(|m| CharacterIndex::new(m, grid.m_char)).collect()
}

pub(super) fn run_suite(suite: Suite, cfg: &RunConfig, sink: &mut Sink) -> Result<()> {
    match suite {
        Suite::Plancherel => plancherel(cfg, sink),
        Suite::Ortho => ortho(cfg, sink),
        Suite::Intertwine => intertwine(cfg, sink),
        Suite::ProductLaw => product_law(cfg, sink),
        Suite::Inversion => inversion(cfg, sink),
        other => Err(Error::Unsupported(format!("suite `{other}` does not run on the motion group"))),
    }
}

fn plancherel(cfg: &RunConfig, sink: &mut Sink) -> Result<()> {
    let (basis, grid) = setup(cfg, Suite::Plancherel)?;
    let mut r = rng(cfg.seed);
    let c = 2.0 * PI / cfg.lambda.abs();
    let residual = (|| {
        let ms = characters(&grid)?;
        let mut worst: f64 = 0.0;
        for _ in 0..cfg.trials.unwrap_or(2) {
            let f = random_gx(&basis, &grid, Band::for_grid(&basis, &grid.cn), -3..=3, &mut r)?;
            let total: f64 = motion_weyl_sweep(&basis, &ms, &f)?
                .iter()
                .map(|w| w.character.d_sigma as f64 * w.hs_norm().powi(2))
                .sum();
            worst = worst.max((total / (c * f.norm_sq()) - 1.0).abs());
        }
        Ok(worst)
    })();
    sink.measure(
        "Σ_{|m|≤M_char} d_σ ‖W_m(F)‖²_HS = (2π/|λ|) ‖F‖²",
        "motion group Plancherel identity",
        1e-5,
        residual,
    )
    .add_note(format!("|m| ≤ {}", grid.m_char));
    Ok(())
}

fn ortho(cfg: &RunConfig, sink: &mut Sink) -> Result<()> {
    let (basis, grid) = setup(cfg, Suite::Ortho)?;
    let mut r = rng(cfg.seed);
    let m = CharacterIndex::new(1.min(grid.m_char as i64), grid.m_char)?;
    let c = 2.0 * PI / cfg.lambda.abs();
    let residual = fourier_wigner_defect(
        cfg.trials.unwrap_or(25),
        c,
        || Ok((random_coeff_vector(&basis, &grid.cn, &mut r), random_coeff_vector(&basis, &grid.cn, &mut r))),
        |a, b| fourier_wigner_motion(&basis, m, a, b, &grid),
        |x, y| x.inner(y),
    );
    sink.measure(
        "⟨V^m(φ₁,ψ₁), V^m(φ₂,ψ₂)⟩ = (2π/|λ|) d_σ^{−1} ⟨φ₁,φ₂⟩ conj⟨ψ₁,ψ₂⟩",
        "Fourier–Wigner orthogonality on the motion group",
        1e-5,
        residual,
    );
    let distinct = (|| {
        let f = random_coeff_vector(&basis, &grid.cn, &mut r);
        let g = random_coeff_vector(&basis, &grid.cn, &mut r);
        let top = grid.m_char.min(3) as i64;
        let v0 = fourier_wigner_motion(&basis, CharacterIndex::new(0, grid.m_char)?, &f, &g, &grid)?;
        let scale = c * f.norm().powi(2) * g.norm().powi(2);
        let mut worst: f64 = 0.0;
        for m in 1..=top {
            let vm = fourier_wigner_motion(&basis, CharacterIndex::new(m, grid.m_char)?, &f, &g, &grid)?;
            worst = worst.max(v0.inner(&vm)?.norm() / scale);
        }
        Ok(worst)
    })();
    sink.measure(
        "Fourier–Wigner transforms for distinct characters are orthogonal",
        "Fourier–Wigner orthogonality on the motion group",
        1e-10,
        distinct,
    );
    Ok(())
}

/// Worst intertwining residual over the fixed 5 × 5 sample.
pub fn intertwining_sample(basis: &HermiteBasis, convention: PhaseConvention) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &th in &INTERTWINE_THETAS {
        for &z in &INTERTWINE_POINTS {
            worst = worst.max(intertwining_residual(basis, th, z, convention)?);
        }
    }
    Ok(worst)
}

fn intertwine(cfg: &RunConfig, sink: &mut Sink) -> Result<()> {
    let (basis, _) = setup(cfg, Suite::Intertwine)?;
    let convention = PhaseConvention::for_lambda(cfg.lambda);
    let opposite = match convention {
        PhaseConvention::Positive => PhaseConvention::Negative,
        PhaseConvention::Negative => PhaseConvention::Positive,
    };
    sink.measure(
        "π_λ(e^{iθ}z) = μ_λ(θ) π_λ(z) μ_λ(θ)*",
        "metaplectic intertwining",
        1e-6,
        intertwining_sample(&basis, convention),
    )
    .add_note(format!("convention {}", convention.label()));
    let rejected = intertwining_sample(&basis, opposite).map(|r| if r > 1e-3 { 0 } else { 1 });
    sink.count("the opposite phase convention does not intertwine", "metaplectic intertwining", rejected)
        .add_note(format!("convention {}", opposite.label()));
    Ok(())
}

fn product_law(cfg: &RunConfig, sink: &mut Sink) -> Result<()> {
    let (basis, grid) = setup(cfg, Suite::ProductLaw)?;
    let mut r = rng(cfg.seed);
    let residual = (|| {
        let ms = characters(&grid)?;
        let band = Band::for_convolution(&basis, &grid.cn);
        let mut worst: f64 = 0.0;
        for _ in 0..cfg.trials.unwrap_or(1) {
            let f = random_gx(&basis, &grid, band, -1..=1, &mut r)?;
            let h = random_gx(&basis, &grid, band, -1..=1, &mut r)?;
            let conv = twisted_convolution_gx(&basis, &f, &h)?;
            let wf = motion_weyl_sweep(&basis, &ms, &f)?;
            let wh = motion_weyl_sweep(&basis, &ms, &h)?;
            let wc = motion_weyl_sweep(&basis, &ms, &conv)?;
            let scale = wf.iter().map(|w| w.hs_norm()).fold(0.0, f64::max)
                * wh.iter().map(|w| w.hs_norm()).fold(0.0, f64::max);
            for ((a, b), c) in wf.iter().zip(&wh).zip(&wc) {
                let expected = a.weyl.compose(&b.weyl)?;
                worst = worst.max(c.weyl.hs_distance(&expected) / scale);
            }
        }
        Ok(worst)
    })();
    sink.measure("W_m(F × H) = W_m(F) W_m(H)", "motion group Weyl product law", 1e-5, residual)
        .add_note("normalised by max_m ‖W_m(F)‖ · max_m ‖W_m(H)‖");
    Ok(())
}

fn inversion(cfg: &RunConfig, sink: &mut Sink) -> Result<()> {
    let (basis, grid) = setup(cfg, Suite::Inversion)?;
    let mut r = rng(cfg.seed);
    let residual = (|| {
        let f = random_gx(&basis, &grid, Band::for_grid(&basis, &grid.cn), -3..=3, &mut r)?;
        let coeffs = peter_weyl_coefficients(&basis, &f)?;
        let g = peter_weyl_reconstruct(&basis, &grid, &coeffs)?;
        let mut worst: f64 = 0.0;
        for t in 0..grid.theta_points {
            worst = worst.max(interior_residual(&f.slice(t), &g.slice(t)) * f.slice(t).sup_norm());
        }
        Ok(worst / f.sup_norm())
    })();
    sink.measure(
        "F = Σ_m Σ_{αβ} ⟨F, E^m_{αβ}⟩ E^m_{αβ}",
        "Peter–Weyl expansion on the motion group",
        1e-4,
        residual,
    );
    Ok(())
}
