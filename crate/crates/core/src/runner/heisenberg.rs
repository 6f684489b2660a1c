use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::config::{RunConfig, Suite};
use super::report::Artifact;
use super::{fmt_real, pair_pool, Sink};
use crate::heisenberg::{
    fourier_wigner, inverse_weyl, twisted_convolution, twisted_convolution_direct, weyl_transform, GridCn,
    GridFunction,
};
use crate::hermite::{CoeffVector, HermiteBasis};
use crate::samples::{
    random_band_coefficients, random_band_limited, random_coeff_vector, rng, synthesize_conj_special, Band,
};
use crate::uniqueness::{
    kernel_decay, pocs_explorer, rank_profile, spectral_to_wigner, tail_mass, SupportMask,
};
use crate::{Error, Result, C64};

pub(super) struct Setup {
    pub basis: HermiteBasis,
    pub grid: GridCn,
}

pub(super) fn default_degree_cap(n: usize, suite: Suite) -> usize {
    match (n, suite) {
        (1, Suite::Pocs) => 16,
        (1, _) => 24,
        _ => 6,
    }
}

/// Unset grid keys take per-suite defaults scaled by `1/√|λ|`, the length
/// scale of the `λ`-Hermite functions.
pub(super) fn setup(cfg: &RunConfig, suite: Suite) -> Result<Setup> {
    let n = cfg.n.unwrap_or(1);
    let cap = cfg.degree_cap.unwrap_or_else(|| default_degree_cap(n, suite));
    let quad = cfg.quad_size.unwrap_or(2 * cap + 8);
    let basis = HermiteBasis::with_quad_size(n, cfg.lambda, cap, quad)?;
    let (l0, m0) = match (n, suite) {
        (2, _) => (8.0, 32),
        (_, Suite::ProductLaw) => (16.0, 96),
        (_, Suite::Pocs) => (12.0, 64),
        _ => (12.0, 256),
    };
    let half_width = cfg.half_width.unwrap_or(l0 / cfg.lambda.abs().sqrt());
    let grid = GridCn::new(n, half_width, cfg.points.unwrap_or(m0))?;
    Ok(Setup { basis, grid })
}

pub(super) fn run_suite(suite: Suite, cfg: &RunConfig, sink: &mut Sink) -> Result<()> {
    match suite {
        Suite::Plancherel => plancherel(cfg, sink),
        Suite::Ortho => ortho(cfg, sink),
        Suite::ProductLaw => product_law(cfg, sink),
        Suite::Inversion => inversion(cfg, sink),
        Suite::RankProfile => rank_profiles(cfg, sink),
        Suite::KernelSupport => kernel_support(cfg, sink),
        Suite::Pocs => pocs(cfg, sink),
        other => Err(Error::Unsupported(format!("suite `{other}` does not run on the Heisenberg group"))),
    }
}

fn plancherel(cfg: &RunConfig, sink: &mut Sink) -> Result<()> {
    let Setup { basis, grid } = setup(cfg, Suite::Plancherel)?;
    let n = basis.dim() as i32;
    let c = (2.0 * PI / cfg.lambda.abs()).powi(n);
    let mut r = rng(cfg.seed);
    let mut edge: f64 = 0.0;
    let residual = (|| {
        let mut worst: f64 = 0.0;
        for _ in 0..cfg.trials.unwrap_or(5) {
            let (f, _) = random_band_limited(&basis, &grid, &mut r);
            let w = weyl_transform(&basis, &f)?;
            edge = edge.max(w.truncation_residual);
            worst = worst.max((w.hs_norm().powi(2) / (c * f.norm_sq()) - 1.0).abs());
        }
        Ok(worst)
    })();
    sink.measure("‖W(F)‖²_HS = (2π/|λ|)^n ‖F‖²", "Heisenberg Plancherel identity", 1e-5, residual)
        .add_note(format!("largest edge-band mass {edge:.2e}"));
    Ok(())
}

/// Relative deviation of `λ^n·Gram` from the identity for the functions
/// `conj(φ_{αβ})` with every index component at most `k`.
pub(super) fn special_hermite_gram_defect(basis: &HermiteBasis, grid: &GridCn, k: usize) -> Result<f64> {
    let idx: Vec<usize> =
        (0..basis.len()).filter(|&i| basis.multi_index(i).iter().all(|&a| a <= k)).collect();
    let size = basis.len();
    let fns: Vec<GridFunction> = idx
        .iter()
        .flat_map(|&a| idx.iter().map(move |&b| (a, b)))
        .map(|(a, b)| {
            let mut c = DMatrix::zeros(size, size);
            c[(b, a)] = C64::new(1.0, 0.0);
            synthesize_conj_special(basis, grid, &c)
        })
        .collect();
    let scale = basis.lambda().abs().powi(basis.dim() as i32);
    let mut worst: f64 = 0.0;
    for i in 0..fns.len() {
        for j in i..fns.len() {
            let g = fns[i].inner(&fns[j])? * scale;
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g - target).norm());
        }
    }
    Ok(worst)
}

/// Worst relative gap between the Rayleigh quotient of `H_λ` and
/// `(2|α| + n)|λ|` over indices at least two below the cap.
pub(super) fn eigenvalue_defect(basis: &HermiteBasis) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for alpha in basis.multi_indices() {
        if alpha.iter().any(|&a| a + 2 >= basis.degree_cap()) {
            continue;
        }
        let q = basis.hermite_operator_check(&alpha)?;
        let e = basis.hermite_eigenvalue(&alpha);
        worst = worst.max((q - e).abs() / e);
    }
    Ok(worst)
}

/// `|⟨T(φ₁,ψ₁), T(φ₂,ψ₂)⟩ − c⟨φ₁,φ₂⟩conj⟨ψ₁,ψ₂⟩|` relative to
/// `c‖φ₁‖‖ψ₁‖‖φ₂‖‖ψ₂‖`, worst over `trials` quadruples drawn from a pool.
pub(super) fn fourier_wigner_defect<T>(
    trials: usize,
    c: f64,
    mut draw: impl FnMut() -> Result<(CoeffVector, CoeffVector)>,
    transform: impl Fn(&CoeffVector, &CoeffVector) -> Result<T>,
    inner: impl Fn(&T, &T) -> Result<C64>,
) -> Result<f64> {
    let (p, pairs) = pair_pool(trials);
    let pool: Vec<(CoeffVector, CoeffVector)> = (0..p).map(|_| draw()).collect::<Result<_>>()?;
    let ts: Vec<T> = pool.iter().map(|(a, b)| transform(a, b)).collect::<Result<_>>()?;
    let mut worst: f64 = 0.0;
    for (k, l) in pairs {
        let (p1, s1) = &pool[k];
        let (p2, s2) = &pool[l];
        let lhs = inner(&ts[k], &ts[l])?;
        let rhs = p1.inner(p2)? * s1.inner(s2)?.conj() * c;
        let scale = c * p1.norm() * s1.norm() * p2.norm() * s2.norm();
        worst = worst.max((lhs - rhs).norm() / scale);
    }
    Ok(worst)
}

fn ortho(cfg: &RunConfig, sink: &mut Sink) -> Result<()> {
    let Setup { basis, grid } = setup(cfg, Suite::Ortho)?;
    sink.measure("Gram matrix of φ_α^λ is the identity", "Hermite orthonormality", 1e-10, Ok(basis.gram_defect()));
    sink.measure("H_λ φ_α^λ = (2|α|+n)|λ| φ_α^λ", "scaled Hermite eigenvalues", 1e-8, eigenvalue_defect(&basis));
    let k = if basis.dim() == 1 { 8.min(basis.degree_cap() - 1) } else { 1 };
    sink.measure(
        "⟨φ_{αβ}, φ_{γδ}⟩ = |λ|^{−n} δ",
        "special Hermite orthonormality",
        1e-6,
        special_hermite_gram_defect(&basis, &grid, k),
    )
    .add_note(format!("indices with every component ≤ {k}"));
    let c = (2.0 * PI / cfg.lambda.abs()).powi(basis.dim() as i32);
    let mut r = rng(cfg.seed);
    let residual = fourier_wigner_defect(
        cfg.trials.unwrap_or(25),
        c,
        || Ok((random_coeff_vector(&basis, &grid, &mut r), random_coeff_vector(&basis, &grid, &mut r))),
        |a, b| fourier_wigner(&basis, a, b, &grid),
        |x, y| x.inner(y),
    );
    sink.measure(
        "⟨T(φ₁,ψ₁), T(φ₂,ψ₂)⟩ = (2π/|λ|)^n ⟨φ₁,φ₂⟩ conj⟨ψ₁,ψ₂⟩",
        "Fourier–Wigner orthogonality on ℂⁿ",
        1e-5,
        residual,
    );
    Ok(())
}

/// Worst adjoint and product law residuals over `trials` random pairs drawn
/// from the convolution band.
pub(super) fn product_law_residuals(
    basis: &HermiteBasis,
    grid: &GridCn,
    trials: usize,
    r: &mut impl rand::Rng,
) -> Result<(f64, f64)> {
    let band = Band::for_convolution(basis, grid);
    let lam = basis.lambda();
    let (mut adj, mut prod): (f64, f64) = (0.0, 0.0);
    for _ in 0..trials {
        let f = synthesize_conj_special(basis, grid, &random_band_coefficients(basis, band, r));
        let h = synthesize_conj_special(basis, grid, &random_band_coefficients(basis, band, r));
        let wf = weyl_transform(basis, &f)?;
        let wh = weyl_transform(basis, &h)?;
        let wstar = weyl_transform(basis, &f.star())?;
        adj = adj.max(wstar.hs_distance(&wf.adjoint()) / wf.hs_norm());
        let conv = twisted_convolution(lam, &f, &h)?;
        let wc = weyl_transform(basis, &conv)?;
        let expected = wf.compose(&wh)?;
        prod = prod.max(wc.hs_distance(&expected) / expected.hs_norm());
    }
    Ok((adj, prod))
}

fn product_law(cfg: &RunConfig, sink: &mut Sink) -> Result<()> {
    let Setup { basis, grid } = setup(cfg, Suite::ProductLaw)?;
    let mut r = rng(cfg.seed);
    let trials = cfg.trials.unwrap_or(50);
    let (adj, prod) = match product_law_residuals(&basis, &grid, trials, &mut r) {
        Ok((a, p)) => (Ok(a), Ok(p)),
        Err(e) => (Err(e.clone()), Err(e)),
    };
    sink.measure("W(F*) = W(F)*", "Weyl transform adjoint law", 1e-5, adj);
    sink.measure("W(F ×_λ H) = W(F) W(H)", "Weyl transform product law", 1e-5, prod);
    // Exact lattice identity; a half-resolution grid suffices.
    let fast_vs_direct = (|| {
        let coarse = GridCn::new(1, grid.half_width, grid.points_per_axis / 2)?;
        let band = Band::for_convolution(&basis, &coarse);
        let f = synthesize_conj_special(&basis, &coarse, &random_band_coefficients(&basis, band, &mut r));
        let h = synthesize_conj_special(&basis, &coarse, &random_band_coefficients(&basis, band, &mut r));
        let fast = twisted_convolution(cfg.lambda, &f, &h)?;
        let direct = twisted_convolution_direct(cfg.lambda, &f, &h)?;
        Ok(fast.sub(&direct)?.norm() / direct.norm())
    })();
    sink.measure("fast twisted convolution equals the direct double sum", "λ-twisted convolution", 1e-10, fast_vs_direct);
    Ok(())
}

/// Worst `|W⁻¹(W(F)) − F|` over points with every coordinate inside
/// `[−L/2, L/2]`, relative to `‖F‖_∞`.
pub(super) fn interior_residual(f: &GridFunction, g: &GridFunction) -> f64 {
    let half = f.grid.half_width / 2.0;
    let mut worst: f64 = 0.0;
    for i in 0..f.grid.len() {
        if f.grid.point(i).iter().all(|x| x.abs() <= half) {
            worst = worst.max((f.values[i] - g.values[i]).norm());
        }
    }
    worst / f.sup_norm()
}

fn inversion(cfg: &RunConfig, sink: &mut Sink) -> Result<()> {
    let Setup { basis, grid } = setup(cfg, Suite::Inversion)?;
    let mut r = rng(cfg.seed);
    let residual = (|| {
        let mut worst: f64 = 0.0;
        for _ in 0..cfg.trials.unwrap_or(5) {
            let (f, _) = random_band_limited(&basis, &grid, &mut r);
            let g = inverse_weyl(&basis, &weyl_transform(&basis, &f)?, &grid)?;
            worst = worst.max(interior_residual(&f, &g));
        }
        Ok(worst)
    })();
    sink.measure("F(z) = (2π)^{−n}|λ|^n tr(π(z)* W(F))", "Weyl inversion formula", 1e-4, residual);
    Ok(())
}

/// Smooth bump `exp(−1/(1 − |z|²/ρ²))` supported in the ball of radius `ρ`.
pub fn bump(grid: GridCn, radius: f64) -> GridFunction {
    GridFunction::from_fn(grid, move |p| {
        let s = p.iter().map(|x| x * x).sum::<f64>() / (radius * radius);
        if s < 1.0 {
            C64::new((-1.0 / (1.0 - s)).exp(), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

pub(super) const RANK_CAPS: [usize; 4] = [8, 16, 24, 32];

fn rank_profiles(cfg: &RunConfig, sink: &mut Sink) -> Result<()> {
    let Setup { basis, grid } = setup(cfg, Suite::RankProfile)?;
    let f = bump(grid, grid.half_width / 4.0);
    let mut sv = Artifact::new("singular_values.csv", &["degree_cap", "index", "sigma"]);
    let mut rp = Artifact::new("rank_profile.csv", &["degree_cap", "numerical_rank", "epsilon"]);
    let ranks: Result<Vec<usize>> = RANK_CAPS
        .iter()
        .map(|&cap| {
            let b = HermiteBasis::new(basis.dim(), cfg.lambda, cap)?;
            let profile = rank_profile(&weyl_transform(&b, &f)?, cfg.epsilon)?;
            for (i, s) in profile.singular_values.iter().enumerate() {
                sv.row(&[cap.to_string(), i.to_string(), fmt_real(*s)]);
            }
            rp.row(&[cap.to_string(), profile.numerical_rank.to_string(), fmt_real(cfg.epsilon)]);
            Ok(profile.numerical_rank)
        })
        .collect();
    let note = ranks.as_ref().map(|r| format!("ranks {r:?} at N = {RANK_CAPS:?}")).ok();
    let check = sink.count(
        "numerical rank of W(bump) is nondecreasing in N",
        "no finite-rank Weyl transform for compact support",
        ranks.map(|r| r.windows(2).filter(|w| w[1] < w[0]).count()),
    );
    if let Some(note) = note {
        check.add_note(note);
    }
    let rank_one = (|| {
        let mut c = DMatrix::zeros(basis.len(), basis.len());
        c[(2, 1)] = C64::new(1.0, 0.0);
        let g = synthesize_conj_special(&basis, &grid, &c);
        let profile = rank_profile(&weyl_transform(&basis, &g)?, 1e-6)?;
        Ok(profile.numerical_rank.abs_diff(1))
    })();
    sink.count("W(conj φ_{12}) has numerical rank one", "rank of special Hermite Weyl transforms", rank_one);
    sink.artifact(sv);
    sink.artifact(rp);
    Ok(())
}

/// Largest `|y|` with `max_ξ |φ₀(ξ + y)φ₀(ξ)| > tol`, in closed form.
pub fn gaussian_kernel_radius(lambda: f64, tol: f64) -> f64 {
    let a = lambda.abs();
    2.0 * (((a / PI).sqrt() / tol).ln() / a).sqrt()
}

fn kernel_support(cfg: &RunConfig, sink: &mut Sink) -> Result<()> {
    let Setup { basis, grid } = setup(cfg, Suite::KernelSupport)?;
    let lam = cfg.lambda;
    let step = 0.01;
    let reach = grid.half_width;
    let count = (reach / step).round() as usize;
    let ys: Vec<f64> = (0..=count).map(|k| k as f64 * step).collect();
    let xi: Vec<f64> = (0..=2 * count).map(|k| -reach + k as f64 * step).collect();
    let e0 = CoeffVector::unit(&basis, &[0])?;
    let one = [C64::new(1.0, 0.0)];
    let decay = kernel_decay(&basis, &[e0.clone()], &[e0.clone()], &one, &ys, &xi, cfg.epsilon);
    let mut csv = Artifact::new("kernel_decay.csv", &["y", "max_abs"]);
    let r_hat = decay.as_ref().map_err(Clone::clone).and_then(|d| {
        for (y, m) in d.ys.iter().zip(&d.max_abs) {
            csv.row(&[fmt_real(*y), fmt_real(*m)]);
        }
        d.r_hat.ok_or_else(|| Error::Truncation("kernel still above tolerance at the last sampled y".into()))
    });
    let oracle = gaussian_kernel_radius(lam, cfg.epsilon);
    sink.measure(
        "kernel support radius of K_y for φ₀ ⊗ φ₀ matches the Gaussian closed form",
        "kernel support of finite-rank operators",
        step,
        r_hat.map(|r| (r - oracle).abs()),
    )
    .add_note(format!("closed-form radius {oracle:.6}"));
    sink.artifact(csv);

    let mut r = rng(cfg.seed);
    let witness = (|| {
        let draw = |r: &mut _| crate::samples::gaussian_weighted(&basis, 2.0, 4, r);
        let chi: Vec<CoeffVector> = (0..3).map(|_| draw(&mut r)).collect();
        let phi: Vec<CoeffVector> = (0..3).map(|_| draw(&mut r)).collect();
        let b: Vec<C64> = (0..3).map(|_| crate::samples::complex_normal(&mut r)).collect();
        let d = kernel_decay(&basis, &chi, &phi, &b, &ys, &xi, cfg.epsilon)?;
        Ok(ys.iter().filter(|&&y| d.floor_beyond(y).is_none_or(|m| m <= 0.0)).count())
    })();
    sink.count(
        "K_y of Hermite data stays nonzero at every sampled |y|",
        "kernel support of finite-rank operators",
        witness,
    );

    let mut tails = Artifact::new("tail_mass.csv", &["witness", "radius", "tail", "oracle"]);
    let gauss = (|| {
        let f = fourier_wigner(&basis, &e0, &e0, &grid)?;
        let mut worst: f64 = 0.0;
        for k in [0.5, 1.0, 2.0, 3.0, 4.0] {
            let radius = k / lam.abs().sqrt();
            let t = tail_mass(&f, radius)?;
            let exact = 2.0 * PI / lam.abs() * (-lam.abs() * radius * radius / 2.0).exp();
            tails.row(&["gaussian".into(), fmt_real(radius), fmt_real(t), fmt_real(exact)]);
            worst = worst.max((t - exact).abs() / exact);
        }
        Ok(worst)
    })();
    sink.measure(
        "tail mass of T(φ₀,φ₀) equals (2π/|λ|) e^{−|λ|R²/2}",
        "Gaussian tail oracle",
        1e-6,
        gauss,
    );

    let product = setup(cfg, Suite::ProductLaw)?;
    let tau = (|| {
        let (pb, pg) = (&product.basis, &product.grid);
        let band = Band::for_convolution(pb, pg);
        let h = synthesize_conj_special(pb, pg, &random_band_coefficients(pb, band, &mut r));
        let wh = weyl_transform(pb, &h)?;
        let tau_hat = wh.adjoint().compose(&wh)?;
        let dec = spectral_to_wigner(&tau_hat, pb)?;
        let synth = dec.synthesize(pb, pg)?;
        let direct = twisted_convolution(lam, &h.star(), &h)?;
        let agree = synth.sub(&direct)?.norm() / direct.norm();
        let mut nonpositive = 0;
        for k in 0..=16 {
            let radius = 0.8 * pg.half_width * k as f64 / 16.0;
            let t = tail_mass(&synth, radius)?;
            tails.row(&["finite-rank".into(), fmt_real(radius), fmt_real(t), String::new()]);
            if t.is_nan() || t <= 0.0 {
                nonpositive += 1;
            }
        }
        Ok((dec.residual, agree, nonpositive, dec.components.len()))
    })();
    let split = |i: usize| -> Result<f64> {
        tau.as_ref().map_err(Clone::clone).map(|t| match i {
            0 => t.0,
            1 => t.1,
            _ => t.2 as f64,
        })
    };
    sink.measure(
        "eigen-decomposition of W(τ) reproduces it",
        "finite-rank operators as sums of Wigner transforms",
        1e-10,
        split(0),
    );
    sink.measure(
        "Σ_j conj T(h_j, h_j) equals h* ×_λ h",
        "finite-rank operators as sums of Wigner transforms",
        1e-6,
        split(1),
    );
    let comps = tau.as_ref().map(|t| t.3).unwrap_or(0);
    sink.count(
        "tail mass of the reconstructed finite-rank τ is positive for every R ≤ 0.8L",
        "finite-rank operators have non-compactly supported kernels",
        split(2).map(|x| x as usize),
    )
    .add_note(format!("{comps} rank-one components"));
    sink.artifact(tails);
    Ok(())
}

/// Relative norm after the alternating projections must stay below this on
/// the frozen reference configuration.
pub const POCS_BOUND: f64 = 0.1;

fn pocs(cfg: &RunConfig, sink: &mut Sink) -> Result<()> {
    let Setup { basis, grid } = setup(cfg, Suite::Pocs)?;
    let mask = SupportMask::ball(grid, grid.half_width / 5.0);
    let mut r = rng(cfg.seed);
    let (f, _) = random_band_limited(&basis, &grid, &mut r);
    let f0 = mask.apply(&f)?;
    let trajectory = pocs_explorer(&basis, &mask, &f0, cfg.rank_cap, cfg.iterations);
    let mut csv = Artifact::new("pocs_trajectory.csv", &["iteration", "norm"]);
    let ratio = trajectory.map(|t| {
        for (k, v) in t.iter().enumerate() {
            csv.row(&[k.to_string(), fmt_real(*v)]);
        }
        t[t.len() - 1] / t[0]
    });
    sink.measure(
        "alternating projections onto support ∩ rank ≤ cap shrink toward zero",
        "exploratory support versus rank probe",
        POCS_BOUND,
        ratio,
    )
    .add_note(format!("mask radius L/5, rank cap {}, {} iterations", cfg.rank_cap, cfg.iterations));
    sink.artifact(csv);
    Ok(())
}
