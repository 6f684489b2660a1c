use std::f64::consts::PI;
use std::fs;

use nalgebra::DMatrix;

use super::config::{ConfigError, RunConfig, Suite};
use super::heisenberg::{fourier_wigner_defect, interior_residual, product_law_residuals};
use super::report::Artifact;
use super::Sink;
use crate::heisenberg::{twisted_convolution, weyl_transform, GridCn, GridFunction};
use crate::hermite::{CoeffVector, HermiteBasis};
use crate::samples::{complex_normal, random_band_coefficients, random_coeff_vector, rng, Band};
use crate::step2::{
    fourier_wigner_omega, inversion as trace_inversion, synthesize_omega, twisted_convolution_omega,
    twisted_convolution_omega_direct, weyl_omega, OmegaBasis, StepTwoAlgebra, SymplecticDecomp, FIXTURES,
};
use crate::{Error, Result, C64};

pub(super) struct Algebra {
    pub name: String,
    pub algebra: StepTwoAlgebra,
    pub omega: Vec<f64>,
}

pub(super) struct Algebras {
    pub list: Vec<Algebra>,
    /// Whether `algebra_file` named the algebra; otherwise the shipped
    /// fixtures run and only `symplectic` includes the degenerate one.
    pub explicit: bool,
}

fn omega_for(cfg: &RunConfig, alg: &StepTwoAlgebra) -> std::result::Result<Vec<f64>, ConfigError> {
    let invalid = |msg: String| ConfigError::Invalid { key: "omega".into(), msg };
    match &cfg.omega {
        Some(w) if w.len() != alg.k() => Err(invalid(format!("{} components for a center of dimension {}", w.len(), alg.k()))),
        Some(w) if w.iter().all(|x| *x == 0.0) => Err(invalid("ω must be nonzero".into())),
        Some(w) => Ok(w.clone()),
        None => {
            let mut w = vec![0.0; alg.k()];
            w[0] = 1.0;
            Ok(w)
        }
    }
}

/// Resolves `algebra_file` as a fixture name or a path.
pub(super) fn load_algebras(cfg: &RunConfig) -> std::result::Result<Algebras, ConfigError> {
    let invalid = |msg: String| ConfigError::Invalid { key: "algebra_file".into(), msg };
    let named: Vec<(String, StepTwoAlgebra)> = match &cfg.algebra_file {
        Some(name) if FIXTURES.iter().any(|(n, _)| n == name) => {
            vec![(name.clone(), StepTwoAlgebra::fixture(name).map_err(|e| invalid(e.to_string()))?)]
        }
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| invalid(format!("{path}: {e}")))?;
            let alg = StepTwoAlgebra::parse(&text).map_err(|e| invalid(format!("{path}: {e}")))?;
            let stem = std::path::Path::new(path).file_stem().and_then(|s| s.to_str()).unwrap_or("algebra");
            vec![(stem.to_string(), alg)]
        }
        None => FIXTURES
            .iter()
            .map(|(n, _)| Ok((n.to_string(), StepTwoAlgebra::fixture(n).map_err(|e| invalid(e.to_string()))?)))
            .collect::<std::result::Result<_, ConfigError>>()?,
    };
    let list = named
        .into_iter()
        .map(|(name, algebra)| Ok(Algebra { omega: omega_for(cfg, &algebra)?, name, algebra }))
        .collect::<std::result::Result<_, ConfigError>>()?;
    Ok(Algebras { list, explicit: cfg.algebra_file.is_some() })
}

pub(super) struct Plane {
    pub decomp: SymplecticDecomp,
    pub basis: OmegaBasis,
    pub grid: GridCn,
}

/// Decomposition, basis and adapted grid at `omega`. Unset grid keys take
/// `L₀/√d_min(ω)` with `(L₀, M, N) = (12, 128, 24)` for one pair and
/// `(10, 32, 6)` for two.
pub(super) fn plane(cfg: &RunConfig, alg: &StepTwoAlgebra, omega: &[f64], l0: Option<f64>, m: Option<usize>) -> Result<Plane> {
    let decomp = alg.decompose(omega)?;
    let (dl, dm, dn) = if decomp.pairs() == 1 { (12.0, 128, 24) } else { (10.0, 32, 6) };
    let basis = OmegaBasis::new(&decomp, cfg.degree_cap.unwrap_or(dn))?;
    let d_min = decomp.d.iter().copied().fold(f64::INFINITY, f64::min);
    let half_width = match l0 {
        Some(l) => l / d_min.sqrt(),
        None => cfg.half_width.unwrap_or(dl / d_min.sqrt()),
    };
    let grid = decomp.adapted_grid(half_width, m.unwrap_or(cfg.points.unwrap_or(dm)))?;
    Ok(Plane { decomp, basis, grid })
}

fn random_h(p: &Plane, band: Band, r: &mut impl rand::Rng) -> Result<GridFunction> {
    let c = random_band_coefficients(&p.basis.layout()?, band, r);
    synthesize_omega(&p.decomp, &p.basis, &p.grid, &c)
}

fn coeff_vector(p: &Plane, r: &mut impl rand::Rng) -> Result<CoeffVector> {
    let v = random_coeff_vector(&p.basis.layout()?, &p.grid, r);
    Ok(CoeffVector { coeffs: v.coeffs, key: p.basis.key() })
}

pub(super) fn run_suite(suite: Suite, cfg: &RunConfig, algebras: &Algebras, sink: &mut Sink) -> Result<()> {
    for a in &algebras.list {
        if suite != Suite::Symplectic && !algebras.explicit && a.name == "degenerate" {
            continue;
        }
        match suite {
            Suite::Symplectic => symplectic(cfg, a, sink),
            Suite::Plancherel => plancherel(cfg, a, sink),
            Suite::Ortho => ortho(cfg, a, sink),
            Suite::ProductLaw => product_law(cfg, a, sink),
            Suite::Inversion => inversion(cfg, a, sink),
            other => return Err(Error::Unsupported(format!("suite `{other}` does not run on step-two groups"))),
        }
    }
    Ok(())
}

fn named(a: &Algebra, identity: &str) -> String {
    format!("[{}] {identity}", a.name)
}

/// Rounds to twelve significant digits so that values like `2.9999999999999996`
/// print as `3`.
fn tidy(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return x.to_string();
    }
    let digits = 11 - x.abs().log10().floor() as i32;
    let scale = 10f64.powi(digits);
    ((x * scale).round() / scale).to_string()
}

fn symplectic(cfg: &RunConfig, a: &Algebra, sink: &mut Sink) {
    let anchor = "canonical form of the skew form B_ω";
    let decomp = match a.algebra.decompose(&a.omega) {
        Ok(d) => d,
        Err(e) => {
            sink.measure(&named(a, "symplectic decomposition"), anchor, 1e-10, Err(e));
            return;
        }
    };
    sink.measure(
        &named(a, "ω([X_i, Y_j]) = d_i δ_ij and every other pairing vanishes"),
        anchor,
        1e-10,
        Ok(decomp.pairing_defect(&a.algebra)),
    );
    let homogeneity = (|| {
        let mut worst: f64 = 0.0;
        for s in [-2.0, 0.5, 3.0] {
            let scaled: Vec<f64> = a.omega.iter().map(|w| s * w).collect();
            let other = a.algebra.decompose(&scaled)?;
            if other.d.len() != decomp.d.len() {
                return Ok(f64::INFINITY);
            }
            for (x, y) in other.d.iter().zip(&decomp.d) {
                worst = worst.max((x - s.abs() * y).abs() / decomp.d[0].max(1.0));
            }
        }
        Ok(worst)
    })();
    sink.measure(&named(a, "d_i(sω) = |s| d_i(ω)"), anchor, 1e-10, homogeneity);
    let count = a.algebra.m().abs_diff(2 * decomp.pairs() + decomp.radical_dim);
    sink.count(&named(a, "dim 𝔟 = 2·pairs + dim radical"), anchor, Ok(count));

    let mut r = rng(cfg.seed);
    let samples = 10;
    let metivier = (0..samples)
        .filter(|_| {
            let w: Vec<f64> = (0..a.algebra.k()).map(|_| complex_normal(&mut r).re).collect();
            a.algebra.decompose(&w).map(|d| d.is_metivier()).unwrap_or(false)
        })
        .count();
    let mut csv = Artifact::new(format!("symplectic_{}.csv", a.name), &["quantity", "value"]);
    for (i, d) in decomp.d.iter().enumerate() {
        csv.row(&[format!("d_{}", i + 1), tidy(*d)]);
    }
    csv.row(&["p_omega".into(), tidy(decomp.p_omega)]);
    csv.row(&["pairs".into(), decomp.pairs().to_string()]);
    csv.row(&["radical_dim".into(), decomp.radical_dim.to_string()]);
    csv.row(&["metivier".into(), decomp.is_metivier().to_string()]);
    csv.row(&["tie".into(), decomp.tie.to_string()]);
    csv.row(&["metivier_sampled".into(), format!("{metivier}/{samples}")]);
    sink.artifact(csv);
}

/// Ten frequencies: the configured `ω` scaled by `0.5 … 2`, or random
/// directions at those magnitudes when `omega` is unset.
fn omega_sweep(cfg: &RunConfig, a: &Algebra) -> Vec<Vec<f64>> {
    let mut r = rng(cfg.seed ^ 0x5eed);
    (0..10)
        .map(|i| {
            let s = 0.5 + 1.5 * i as f64 / 9.0;
            match &cfg.omega {
                Some(w) => w.iter().map(|x| s * x).collect(),
                None => {
                    let u: Vec<f64> = (0..a.algebra.k()).map(|_| complex_normal(&mut r).re).collect();
                    let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
                    u.iter().map(|x| s * x / norm).collect()
                }
            }
        })
        .collect()
}

fn plancherel(cfg: &RunConfig, a: &Algebra, sink: &mut Sink) {
    let mut r = rng(cfg.seed);
    let sweep = omega_sweep(cfg, a);
    let residual = (|| {
        let mut worst: f64 = 0.0;
        for w in &sweep {
            let p = plane(cfg, &a.algebra, w, None, None)?;
            let h = random_h(&p, p.basis.band(&p.grid), &mut r)?;
            let wh = weyl_omega(&p.decomp, &p.basis, &h)?;
            let c = (2.0 * PI).powi(p.basis.pairs() as i32);
            worst = worst.max((p.decomp.p_omega * wh.hs_norm().powi(2) / (c * h.norm_sq()) - 1.0).abs());
        }
        Ok(worst)
    })();
    sink.measure(
        &named(a, "p(ω) ‖W_ω(h)‖²_HS = (2π)^n ‖h‖² across a 10-point ω sweep"),
        "step-two Plancherel identity",
        1e-4,
        residual,
    );
    if a.algebra.m() == 2 && a.algebra.k() == 1 {
        let cross = cross_module(cfg, a, &mut r);
        sink.measure(
            &named(a, "W_ω and the ω-twisted convolution at ω = 1 equal their Heisenberg counterparts entrywise"),
            "Heisenberg group as a step-two group",
            1e-10,
            cross,
        );
    }
}

/// Entrywise gaps at `ω = 1` against the Heisenberg layer with `λ = 1`:
/// the Weyl transform on the default grid, and the convolution with phases
/// from structure constants against the Heisenberg fast convolution on a
/// coarse grid. Relative to the largest entry; needs the adapted frame to be
/// the standard one.
fn cross_module(cfg: &RunConfig, a: &Algebra, r: &mut impl rand::Rng) -> Result<f64> {
    let largest = |m: &[C64]| m.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let gap = |x: &[C64], y: &[C64]| {
        let d: Vec<C64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        largest(&d) / largest(y)
    };
    let p = plane(cfg, &a.algebra, &[1.0], Some(12.0), Some(256))?;
    let frame = DMatrix::from_columns(&[p.decomp.x_basis[0].clone(), p.decomp.y_basis[0].clone()]);
    if (frame - DMatrix::identity(2, 2)).amax() > 1e-12 {
        return Err(Error::Unsupported("adapted frame differs from the standard basis".into()));
    }
    let basis = HermiteBasis::new(1, 1.0, p.basis.degree_cap())?;
    let h = random_h(&p, Band::for_grid(&basis, &p.grid), r)?;
    let w_step2 = weyl_omega(&p.decomp, &p.basis, &h)?;
    let w_heis = weyl_transform(&basis, &h)?;
    let weyl_gap = gap(w_step2.matrix.as_slice(), w_heis.matrix.as_slice());

    let q = plane(cfg, &a.algebra, &[1.0], Some(12.0), Some(32))?;
    let band = q.basis.convolution_band(&q.grid);
    let f = random_h(&q, band, r)?;
    let g = random_h(&q, band, r)?;
    let conv_step2 = twisted_convolution_omega_direct(&a.algebra, &q.decomp, &f, &g)?;
    let conv_heis = twisted_convolution(1.0, &f, &g)?;
    Ok(weyl_gap.max(gap(&conv_step2.values, &conv_heis.values)))
}

fn ortho(cfg: &RunConfig, a: &Algebra, sink: &mut Sink) {
    let mut r = rng(cfg.seed);
    let residual = plane(cfg, &a.algebra, &a.omega, None, None).and_then(|p| {
        fourier_wigner_defect(
            cfg.trials.unwrap_or(25),
            p.decomp.orthogonality_constant(),
            || Ok((coeff_vector(&p, &mut r)?, coeff_vector(&p, &mut r)?)),
            |x, y| fourier_wigner_omega(&p.decomp, &p.basis, x, y, &p.grid),
            |x, y| x.inner(y),
        )
    });
    sink.measure(
        &named(a, "⟨V(φ₁,ψ₁), V(φ₂,ψ₂)⟩ = (2π)^n p(ω)^{−1} ⟨φ₁,φ₂⟩ conj⟨ψ₁,ψ₂⟩"),
        "Fourier–Wigner orthogonality for π_ω",
        1e-5,
        residual,
    );
}

/// `f₁ ⊗ f₂` on the four-dimensional grid with axes `(x₁, x₂, y₁, y₂)`.
fn tensor(grid: &GridCn, f1: &GridFunction, f2: &GridFunction) -> Result<GridFunction> {
    let m = grid.points_per_axis;
    let values = (0..grid.len())
        .map(|i| {
            let k = grid.unravel(i);
            f1.values[k[0] * m + k[2]] * f2.values[k[1] * m + k[3]]
        })
        .collect();
    GridFunction::new(*grid, values)
}

fn product_law(cfg: &RunConfig, a: &Algebra, sink: &mut Sink) {
    let anchor = "ω-twisted convolution and the Weyl transform";
    let mut r = rng(cfg.seed);
    let decomp = match a.algebra.decompose(&a.omega) {
        Ok(d) => d,
        Err(e) => {
            sink.measure(&named(a, "symplectic decomposition"), anchor, 1e-10, Err(e));
            return;
        }
    };
    let d_min = decomp.d.iter().copied().fold(f64::INFINITY, f64::min);

    let direct_points = if decomp.pairs() == 1 { 32 } else { 8 };
    let fast_vs_direct = plane(cfg, &a.algebra, &a.omega, Some(12.0), Some(direct_points)).and_then(|p| {
        let band = p.basis.convolution_band(&p.grid);
        let f = random_h(&p, band, &mut r)?;
        let g = random_h(&p, band, &mut r)?;
        let fast = twisted_convolution_omega(&p.decomp, &f, &g)?;
        let direct = twisted_convolution_omega_direct(&a.algebra, &p.decomp, &f, &g)?;
        Ok(fast.sub(&direct)?.norm() / direct.norm())
    });
    sink.measure(
        &named(a, "fast ω-twisted convolution equals the double sum with phases from structure constants"),
        anchor,
        1e-10,
        fast_vs_direct,
    );

    if decomp.pairs() == 1 {
        let law = plane(cfg, &a.algebra, &a.omega, Some(16.0), Some(96)).and_then(|p| {
            let band = p.basis.convolution_band(&p.grid);
            let mut worst: f64 = 0.0;
            for _ in 0..cfg.trials.unwrap_or(10) {
                let f = random_h(&p, band, &mut r)?;
                let g = random_h(&p, band, &mut r)?;
                let wc = weyl_omega(&p.decomp, &p.basis, &twisted_convolution_omega(&p.decomp, &f, &g)?)?;
                let expected = weyl_omega(&p.decomp, &p.basis, &f)?.compose(&weyl_omega(&p.decomp, &p.basis, &g)?)?;
                worst = worst.max(wc.hs_distance(&expected) / expected.hs_norm());
            }
            Ok(worst)
        });
        sink.measure(&named(a, "W_ω(f ∗_ω g) = W_ω(f) W_ω(g)"), anchor, 1e-5, law);
        return;
    }

    // Two pairs: the convolution and the transform both factor over the
    // symplectic planes, so the law reduces to the one-pair law at scale d_j.
    let separable = plane(cfg, &a.algebra, &a.omega, Some(10.0), Some(16)).and_then(|p| {
        let line = GridCn::new(1, p.grid.half_width, p.grid.points_per_axis)?;
        let mut parts = Vec::new();
        for &d in &p.decomp.d {
            let b = HermiteBasis::new(1, d, p.basis.degree_cap())?;
            let band = Band::for_convolution(&b, &line);
            let f = crate::samples::synthesize_conj_special(&b, &line, &random_band_coefficients(&b, band, &mut r));
            let g = crate::samples::synthesize_conj_special(&b, &line, &random_band_coefficients(&b, band, &mut r));
            parts.push((d, f, g));
        }
        let f = tensor(&p.grid, &parts[0].1, &parts[1].1)?;
        let g = tensor(&p.grid, &parts[0].2, &parts[1].2)?;
        let conv = twisted_convolution_omega(&p.decomp, &f, &g)?;
        let c1 = twisted_convolution(parts[0].0, &parts[0].1, &parts[0].2)?;
        let c2 = twisted_convolution(parts[1].0, &parts[1].1, &parts[1].2)?;
        let expected = tensor(&p.grid, &c1, &c2)?;
        Ok(conv.sub(&expected)?.norm() / expected.norm())
    });
    sink.measure(&named(a, "(f₁⊗f₂) ∗_ω (g₁⊗g₂) = (f₁ ∗_{d₁} g₁) ⊗ (f₂ ∗_{d₂} g₂)"), anchor, 1e-10, separable);

    let factor = plane(cfg, &a.algebra, &a.omega, None, None).and_then(|p| {
        let line = GridCn::new(1, p.grid.half_width, p.grid.points_per_axis)?;
        let mut fs = Vec::new();
        let mut ws = Vec::new();
        for &d in &p.decomp.d {
            let b = HermiteBasis::new(1, d, p.basis.degree_cap())?;
            let band = Band::for_grid(&b, &line);
            let f = crate::samples::synthesize_conj_special(&b, &line, &random_band_coefficients(&b, band, &mut r));
            ws.push(weyl_transform(&b, &f)?.matrix);
            fs.push(f);
        }
        let w = weyl_omega(&p.decomp, &p.basis, &tensor(&p.grid, &fs[0], &fs[1])?)?;
        let expected = ws[0].kronecker(&ws[1]);
        Ok((&w.matrix - &expected).norm() / expected.norm())
    });
    sink.measure(&named(a, "W_ω(f₁⊗f₂) = W_{d₁}(f₁) ⊗ W_{d₂}(f₂)"), anchor, 1e-10, factor);

    let trials = cfg.trials.unwrap_or(10);
    let per_plane = (|| {
        let mut worst: f64 = 0.0;
        for &d in &decomp.d {
            let b = HermiteBasis::new(1, d, 24)?;
            let grid = GridCn::new(1, 16.0 / d.sqrt(), 96)?;
            let (adj, prod) = product_law_residuals(&b, &grid, trials, &mut r)?;
            worst = worst.max(adj).max(prod);
        }
        Ok(worst)
    })();
    sink.measure(&named(a, "W_{d_j}(f ∗_{d_j} g) = W_{d_j}(f) W_{d_j}(g) on each symplectic plane"), anchor, 1e-5, per_plane)
        .add_note(format!("planes at scales {:?}, smallest {d_min}", decomp.d));
}

fn inversion(cfg: &RunConfig, a: &Algebra, sink: &mut Sink) {
    let mut r = rng(cfg.seed);
    let mut tail: f64 = 0.0;
    let residual = plane(cfg, &a.algebra, &a.omega, None, None).and_then(|p| {
        let h = random_h(&p, p.basis.band(&p.grid), &mut r)?;
        let wh = weyl_omega(&p.decomp, &p.basis, &h)?;
        let half = p.grid.half_width / 2.0;
        let mut values = vec![C64::new(0.0, 0.0); p.grid.len()];
        for (i, v) in values.iter_mut().enumerate() {
            let pt = p.grid.point(i);
            if pt.iter().all(|x| x.abs() <= half) {
                let inv = trace_inversion(&p.decomp, &p.basis, &wh, &pt)?;
                tail = tail.max(inv.spectral_tail);
                *v = inv.value;
            }
        }
        Ok(interior_residual(&h, &GridFunction::new(p.grid, values)?))
    });
    sink.measure(
        &named(a, "h(v) = (2π)^{−n} p(ω) tr(π_ω(v)* W_ω(h)) at interior points"),
        "step-two inversion formula",
        1e-4,
        residual,
    )
    .add_note(format!("spectral tail {tail:.2e}"));
}
