//! Pinned numerical experiments behind `coadjoint validate`. Each suite
//! returns one [`CheckRow`] per check; all randomness is seeded.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::action::{builtin_chart, sl2_on_line, ActionChart, PhaseState, BUILTIN_CHARTS};
use crate::diagnostics::{empirical_order, observable_series, strong_error, CheckRow};
use crate::dynamics::{
    casimir, hamel_system, ito_correction_phase, lie_poisson_system, phase_space_system, reconstruct_momentum,
    Potential, QuadraticLagrangian, ReducedHamiltonian, UPolicy,
};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::integrators::{integrate, integrate_deterministic, Scheme, SdeSystem};
use crate::kolmogorov::{backward_solve, generator_apply, adjoint_apply, mc_expectation, mc_samples, DensityGrid, GeneratorSpec, McEstimate, SolveOptions};
use crate::lie::{builtin, pairing, AlgebraVector, CoVector, LieAlgebra, BUILTIN_ALGEBRAS};
use crate::noise::{coarsen, sample_channels, BrownianGrid, NoiseSpec};
use crate::poisson::{nested_bracket_fd, Canonical, HamelPoisson, LiePoisson, PoissonStructure};

pub const SUITES: [&str; 7] = [
    "algebra",
    "equivariance",
    "ito",
    "casimir",
    "collectivize",
    "deterministic",
    "kolmogorov",
];

/// Shared settings. `seeds` is the number of Brownian paths averaged in
/// convergence studies.
#[derive(Debug, Clone, Copy)]
pub struct SuiteConfig {
    pub seeds: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self { seeds: 8 }
    }
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub name: String,
    pub rows: Vec<CheckRow>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// Runs one named suite, or every suite for `all`.
pub fn run(name: &str, cfg: SuiteConfig) -> Result<Vec<SuiteReport>> {
    let one = |n: &str| -> Result<SuiteReport> {
        let rows = match n {
            "algebra" => algebra()?,
            "equivariance" => equivariance()?,
            "ito" => ito(cfg)?,
            "casimir" => casimir_conservation(cfg)?,
            "collectivize" => collectivize(cfg)?,
            "deterministic" => deterministic_limits()?,
            "kolmogorov" => kolmogorov(cfg)?,
            other => {
                return Err(Error::NotFound(format!(
                    "unknown suite '{other}' (expected one of {} or all)",
                    SUITES.join(", ")
                )))
            }
        };
        Ok(SuiteReport {
            name: n.to_string(),
            rows,
        })
    };
    if name == "all" {
        SUITES.iter().map(|n| one(n)).collect()
    } else {
        Ok(vec![one(name)?])
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform(rng: &mut impl Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

fn diag(v: &[f64]) -> Vec<f64> {
    let r = v.len();
    let mut m = vec![0.0; r * r];
    for (i, x) in v.iter().enumerate() {
        m[i * r + i] = *x;
    }
    m
}

/// The stochastic rigid body used throughout: so(3), inertia (1, 2, 3),
/// two non-commuting noise directions.
pub mod rigid_body {
    use super::*;

    pub const INERTIA: [f64; 3] = [1.0, 2.0, 3.0];
    pub const M0: [f64; 3] = [0.6, 0.7, 0.4];
    pub const HORIZON: f64 = 1.0;

    pub fn algebra() -> Arc<LieAlgebra> {
        Arc::new(builtin("so3").expect("so3 builtin"))
    }

    pub fn kinetic_inverse() -> Vec<f64> {
        diag(&INERTIA.map(|i| 1.0 / i))
    }

    pub fn noise(seed: u64) -> NoiseSpec {
        NoiseSpec::new(
            vec![AlgebraVector(vec![0.5, 0.0, 0.0]), AlgebraVector(vec![0.0, 0.3, 0.0])],
            seed,
        )
    }

    pub fn system(seed: u64) -> Result<SdeSystem> {
        lie_poisson_system(algebra(), kinetic_inverse(), &noise(seed), Default::default())
    }

    /// A phase-space point on the rotation chart with momentum map `m`:
    /// `q ⊥ m` of unit length and `p = q × m`, so `p × q = m`.
    pub fn phase_point(m: &[f64; 3]) -> PhaseState {
        let c = [m[1], -m[0], 0.0];
        let nc = (c[0] * c[0] + c[1] * c[1]).sqrt();
        let q = [c[0] / nc, c[1] / nc, 0.0];
        let p = vec![
            q[1] * m[2] - q[2] * m[1],
            q[2] * m[0] - q[0] * m[2],
            q[0] * m[1] - q[1] * m[0],
        ];
        PhaseState::new(q.to_vec(), p).expect("three components each")
    }

    pub fn phase_system(seed: u64) -> Result<SdeSystem> {
        let chart = Arc::new(builtin_chart("so3_on_r3")?);
        let l = QuadraticLagrangian::diagonal(algebra(), &INERTIA)?.with_chart(chart)?;
        phase_space_system(&l, &noise(seed), UPolicy::Legendre)
    }
}

/// Refinement levels `2^8 .. 2^13` used by every convergence study.
pub const LEVELS: [u32; 6] = [8, 9, 10, 11, 12, 13];

/// Mean over `seeds` paths of `error(grid)` for each refinement level; grids
/// are coarsenings of one finest path per seed.
pub fn coupled_study(
    channels: usize,
    horizon: f64,
    seeds: usize,
    error: impl Fn(&BrownianGrid) -> Result<f64>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let finest = *LEVELS.last().expect("levels");
    let mut errs = vec![0.0; LEVELS.len()];
    for s in 0..seeds {
        let fine = sample_channels(channels, 1000 + s as u64, horizon, 1 << finest)?;
        for (e, level) in errs.iter_mut().zip(LEVELS) {
            let g = coarsen(&fine, 1 << (finest - level))?;
            *e += error(&g)? / seeds as f64;
        }
    }
    let hs = LEVELS.iter().map(|l| horizon / (1u64 << l) as f64).collect();
    Ok((hs, errs))
}

fn study_rows(label: &str, hs: &[f64], errs: &[f64]) -> Vec<CheckRow> {
    hs.iter()
        .zip(errs)
        .map(|(h, e)| CheckRow {
            check: format!("{label} error at M={}", (rigid_body::HORIZON / h).round()),
            value: *e,
            threshold: "reported".into(),
            pass: e.is_finite(),
        })
        .collect()
}

pub fn algebra() -> Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    for name in BUILTIN_ALGEBRAS {
        let alg = builtin(name)?;
        rows.push(CheckRow::at_most(format!("{name} antisymmetry residual"), alg.antisymmetry_residual(), 1e-12));
        rows.push(CheckRow::at_most(format!("{name} Jacobi residual"), alg.jacobi_residual(), 1e-12));
        let mut g = rng(17);
        let mut worst = 0.0_f64;
        let r = alg.dim();
        for _ in 0..100 {
            let m = CoVector(uniform(&mut g, r, 1.0));
            let v = uniform(&mut g, r, 1.0);
            let w = AlgebraVector(uniform(&mut g, r, 1.0));
            let lhs = pairing(&alg.ad_star(&v, &m)?, &w);
            let rhs = pairing(&m, &alg.bracket(&v, &w)?);
            worst = worst.max((lhs - rhs).abs());
        }
        rows.push(CheckRow::at_most(format!("{name} ad* pairing identity"), worst, 1e-12));
    }
    let mut broken = builtin("so3")?.dense().to_vec();
    // flip c_12^3 without touching c_21^3
    broken[5] = -1.0;
    let corrupted = LieAlgebra::from_dense_unchecked("so3-corrupted", 3, broken)?;
    rows.push(CheckRow::at_least(
        "corrupted so3 Jacobi residual (negative control)",
        corrupted.jacobi_residual(),
        1.0,
    ));
    Ok(rows)
}

pub fn equivariance() -> Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    for name in BUILTIN_CHARTS {
        let chart = Arc::new(builtin_chart(name)?);
        let n = chart.n();
        let mut g = rng(29);
        let mut worst = 0.0_f64;
        for _ in 0..100 {
            let s = PhaseState::new(uniform(&mut g, n, 2.0), uniform(&mut g, n, 2.0))?;
            let res = chart.equivariance_residual(&s)?;
            worst = worst.max(res.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
        }
        rows.push(CheckRow::at_most(format!("{name} momentum-map equivariance"), worst, 1e-9));
    }
    Ok(rows)
}

fn ito_charts() -> Result<Vec<Arc<ActionChart>>> {
    let mut v: Vec<Arc<ActionChart>> = BUILTIN_CHARTS
        .iter()
        .map(|n| builtin_chart(n).map(Arc::new))
        .collect::<Result<_>>()?;
    v.push(Arc::new(sl2_on_line()));
    Ok(v)
}

fn random_noise(r: usize, g: &mut impl Rng) -> NoiseSpec {
    NoiseSpec::new((0..2).map(|_| AlgebraVector(uniform(g, r, 1.0))).collect(), 0)
}

fn bracket_oracle(structure: &dyn PoissonStructure, gs: &[ScalarField], x: &[f64]) -> Vec<f64> {
    let d = x.len();
    (0..d)
        .map(|i| {
            let f = ScalarField::coordinate(i, d);
            gs.iter().map(|g| 0.5 * nested_bracket_fd(structure, g, &f, x)).sum()
        })
        .collect()
}

/// Worst disagreement between each builder's Itô correction and
/// `½ Σ_k {g_k, {g_k, x_i}}`, over 20 random states per chart.
pub fn ito_closed_form_residuals() -> Result<[f64; 3]> {
    let mut worst = [0.0_f64; 3];
    let mut g = rng(41);
    for chart in ito_charts()? {
        let (r, n) = (chart.r(), chart.n());
        let noise = random_noise(r, &mut g);
        let alg = chart.algebra().clone();
        let eye = diag(&vec![1.0; r]);

        let phase_gs: Vec<ScalarField> = noise.xi.iter().map(|xi| chart.momentum_pairing(xi)).collect();
        let lp = lie_poisson_system(alg.clone(), eye.clone(), &noise, Default::default())?;
        let lp_gs: Vec<ScalarField> = noise.xi.iter().map(|xi| ScalarField::linear(xi.0.clone())).collect();
        let hamel = hamel_system(chart.clone(), &ReducedHamiltonian::kinetic(alg.clone(), eye)?, &noise)?;
        let hamel_gs: Vec<ScalarField> = noise
            .xi
            .iter()
            .map(|xi| {
                let mut c = xi.0.clone();
                c.resize(r + n, 0.0);
                ScalarField::linear(c)
            })
            .collect();
        for _ in 0..20 {
            let x = uniform(&mut g, 2 * n, 1.5);
            let closed = ito_correction_phase(&chart, &noise, &PhaseState::from_flat(&x)?)?;
            worst[0] = worst[0].max(max_abs_diff(&closed, &bracket_oracle(&Canonical::new(n), &phase_gs, &x)));

            let m = uniform(&mut g, r, 1.5);
            let closed = lp.eval_ito_correction(0.0, &m)?;
            worst[1] = worst[1].max(max_abs_diff(&closed, &bracket_oracle(&LiePoisson::new(alg.clone()), &lp_gs, &m)));

            let y = uniform(&mut g, r + n, 1.5);
            let closed = hamel.eval_ito_correction(0.0, &y)?;
            worst[2] = worst[2].max(max_abs_diff(&closed, &bracket_oracle(&HamelPoisson::new(chart.clone()), &hamel_gs, &y)));
        }
    }
    Ok(worst)
}

/// Heun (Stratonovich) against corrected Euler–Maruyama on the same paths.
pub fn strat_ito_study(seeds: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let sys = rigid_body::system(0)?;
    coupled_study(2, rigid_body::HORIZON, seeds, |g| {
        let a = integrate(&sys, Scheme::HeunStrat, g, &rigid_body::M0)?;
        let b = integrate(&sys, Scheme::EulerIto, g, &rigid_body::M0)?;
        strong_error(&a, &b)
    })
}

pub fn ito(cfg: SuiteConfig) -> Result<Vec<CheckRow>> {
    let [p, l, h] = ito_closed_form_residuals()?;
    let mut rows = vec![
        CheckRow::at_most("phase-space Itô correction vs nested brackets", p, 1e-9),
        CheckRow::at_most("Lie-Poisson Itô correction vs nested brackets", l, 1e-9),
        CheckRow::at_most("Hamel Itô correction vs nested brackets", h, 1e-9),
    ];
    let (hs, errs) = strat_ito_study(cfg.seeds)?;
    rows.extend(study_rows("Heun vs corrected Euler", &hs, &errs));
    rows.push(CheckRow::within(
        "Heun vs corrected Euler empirical order",
        empirical_order(&hs, &errs)?,
        0.4,
        1.2,
    ));
    Ok(rows)
}

/// Largest `|∇C · field|` over drift and diffusion fields of the rigid
/// body at 100 random momenta.
pub fn casimir_orthogonality() -> Result<f64> {
    let sys = rigid_body::system(0)?;
    let c = casimir(&rigid_body::algebra(), "quadratic")?;
    let mut g = rng(53);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let m = uniform(&mut g, 3, 2.0);
        let grad = c.gradient(&m);
        let mut fields = vec![sys.eval_drift(0.0, &m)?];
        for k in 0..sys.channels {
            fields.push(sys.eval_diffusion(0.0, &m, k)?);
        }
        for f in fields {
            worst = worst.max(grad.iter().zip(&f).map(|(a, b)| a * b).sum::<f64>().abs());
        }
    }
    Ok(worst)
}

/// `sup_t |C(m(t)) − C(m0)|` under Heun, per refinement level.
pub fn casimir_drift_study(seeds: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let sys = rigid_body::system(0)?;
    let c = casimir(&rigid_body::algebra(), "quadratic")?;
    coupled_study(2, rigid_body::HORIZON, seeds, |g| {
        let tr = integrate(&sys, Scheme::HeunStrat, g, &rigid_body::M0)?;
        Ok(observable_series(&tr, &c)?.sup())
    })
}

pub fn casimir_conservation(cfg: SuiteConfig) -> Result<Vec<CheckRow>> {
    let mut rows = vec![CheckRow::at_most(
        "grad C . (drift, diffusion) on the rigid body",
        casimir_orthogonality()?,
        1e-12,
    )];
    let (hs, errs) = casimir_drift_study(cfg.seeds)?;
    rows.extend(study_rows("Casimir sup-drift", &hs, &errs));
    rows.push(CheckRow::at_least(
        "Casimir sup-drift empirical order",
        empirical_order(&hs, &errs)?,
        1.0,
    ));
    Ok(rows)
}

/// Free rigid body through the phase space and directly on so(3)*, RK4 at
/// dt = 1e-4 over T = 1.
pub fn collectivize_deterministic() -> Result<f64> {
    let chart = builtin_chart("so3_on_r3")?;
    let phase = rigid_body::phase_system(0)?;
    let phase = SdeSystem {
        channels: 0,
        ..phase
    };
    let lp = lie_poisson_system(
        rigid_body::algebra(),
        rigid_body::kinetic_inverse(),
        &NoiseSpec::none(0),
        Default::default(),
    )?;
    let x0 = rigid_body::phase_point(&rigid_body::M0).to_flat();
    let a = integrate_deterministic(&phase, 1.0, 10_000, &x0)?;
    let b = integrate_deterministic(&lp, 1.0, 10_000, &rigid_body::M0)?;
    strong_error(&reconstruct_momentum(&a, &chart)?, &b)
}

/// Momentum map of the phase-space Heun path against the Lie–Poisson Heun
/// path on the same grid.
pub fn collectivize_study(seeds: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let chart = builtin_chart("so3_on_r3")?;
    let phase = rigid_body::phase_system(0)?;
    let lp = rigid_body::system(0)?;
    let x0 = rigid_body::phase_point(&rigid_body::M0).to_flat();
    coupled_study(2, rigid_body::HORIZON, seeds, |g| {
        let a = integrate(&phase, Scheme::HeunStrat, g, &x0)?;
        let b = integrate(&lp, Scheme::HeunStrat, g, &rigid_body::M0)?;
        strong_error(&reconstruct_momentum(&a, &chart)?, &b)
    })
}

pub fn collectivize(cfg: SuiteConfig) -> Result<Vec<CheckRow>> {
    let mut rows = vec![CheckRow::at_most(
        "deterministic momentum map vs Lie-Poisson (rk4, dt=1e-4)",
        collectivize_deterministic()?,
        1e-6,
    )];
    let (hs, errs) = collectivize_study(cfg.seeds)?;
    rows.extend(study_rows("phase space vs Lie-Poisson", &hs, &errs));
    rows.push(CheckRow::at_least(
        "phase space vs Lie-Poisson empirical order",
        empirical_order(&hs, &errs)?,
        0.5,
    ));
    Ok(rows)
}

/// Heavy top on the rotation chart: `V(q) = g·q`.
pub fn heavy_top() -> Result<(SdeSystem, ReducedHamiltonian, Vec<f64>)> {
    let chart = Arc::new(builtin_chart("so3_on_r3")?);
    let l = QuadraticLagrangian::diagonal(rigid_body::algebra(), &rigid_body::INERTIA)?
        .with_chart(chart.clone())?
        .with_potential(Potential::Linear(vec![0.0, 0.0, 1.0]))?;
    let h = l.hamiltonian();
    let sys = hamel_system(chart, &h, &NoiseSpec::none(0))?;
    let mut x0 = rigid_body::M0.to_vec();
    x0.extend([0.3, -0.2, 0.9]);
    Ok((sys, h, x0))
}

/// Largest `|h(x(t)) − h(x0)|` for the heavy top, RK4 at dt = 1e-3 over
/// T = 10.
pub fn heavy_top_energy_drift() -> Result<f64> {
    let (sys, h, x0) = heavy_top()?;
    let tr = integrate_deterministic(&sys, 10.0, 10_000, &x0)?;
    Ok(observable_series(&tr, &h.hamel_field(3))?.sup())
}

/// Largest drift magnitude at the principal-axis equilibria, and the
/// largest departure from them after 100 RK4 steps.
pub fn equilibria_residual() -> Result<(f64, f64)> {
    let lp = lie_poisson_system(
        rigid_body::algebra(),
        rigid_body::kinetic_inverse(),
        &NoiseSpec::none(0),
        Default::default(),
    )?;
    let mut drift = 0.0_f64;
    let mut moved = 0.0_f64;
    for axis in 0..3 {
        let mut m0 = [0.0; 3];
        m0[axis] = 1.3;
        drift = drift.max(lp.eval_drift(0.0, &m0)?.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
        let tr = integrate_deterministic(&lp, 1.0, 100, &m0)?;
        moved = moved.max(max_abs_diff(tr.last(), &m0));
    }
    Ok((drift, moved))
}

pub fn deterministic_limits() -> Result<Vec<CheckRow>> {
    let (drift, moved) = equilibria_residual()?;
    Ok(vec![
        CheckRow::at_most("principal-axis equilibria drift", drift, 1e-12),
        CheckRow::at_most("principal-axis equilibria after rk4", moved, 1e-12),
        CheckRow::at_most(
            "heavy-top Hamel energy drift (rk4, dt=1e-3, T=10)",
            heavy_top_energy_drift()?,
            1e-8,
        ),
    ])
}

/// Kolmogorov cross-check settings for the rigid body.
pub mod kolmogorov_setup {
    pub const HORIZON: f64 = 0.2;
    pub const NODES: usize = 48;
    pub const BOX: (f64, f64) = (-1.5, 1.5);
    pub const PATHS: usize = 10_000;
    pub const MC_STEPS: usize = 256;
    pub const SEED: u64 = 2024;
}

/// Outcome of a PDE against Monte-Carlo comparison.
#[derive(Debug, Clone, Copy)]
pub struct CrossCheck {
    pub pde: f64,
    pub mc: McEstimate,
    pub spacing: f64,
}

impl CrossCheck {
    pub fn gap(&self) -> f64 {
        (self.pde - self.mc.mean).abs()
    }

    /// `3·stderr + 2·Δx²`.
    pub fn tolerance(&self) -> f64 {
        3.0 * self.mc.stderr + 2.0 * self.spacing * self.spacing
    }

    pub fn agrees(&self) -> bool {
        self.gap() <= self.tolerance()
    }
}

/// Backward solve of `f0` at `x0` against the ensemble mean of `f0(m(T))`.
pub fn pde_vs_mc(
    spec: &GeneratorSpec,
    sys: &SdeSystem,
    f0: &ScalarField,
    x0: &[f64],
    geometry: &DensityGrid,
    horizon: f64,
    dt: Option<f64>,
    paths: usize,
    mc_steps: usize,
    seed: u64,
) -> Result<(CrossCheck, DensityGrid)> {
    let rep = backward_solve(spec, f0, geometry, SolveOptions { horizon, dt })?;
    let pde = rep.grid.interpolate(x0)?;
    let mc = mc_expectation(sys, f0, x0, horizon, mc_steps, paths, seed)?;
    Ok((
        CrossCheck {
            pde,
            mc,
            spacing: geometry.max_spacing(),
        },
        rep.grid,
    ))
}

/// Short-time check of `(E f(X_h) − f(x))/h` against `Lf(x)` from one Heun
/// step per path. Returns `(|difference|, statistical scale)`, the scale
/// being the standard error of the difference quotient.
pub fn short_time_gap(
    spec: &GeneratorSpec,
    sys: &SdeSystem,
    f: &ScalarField,
    x: &[f64],
    h: f64,
    paths: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let lf = generator_apply(spec, f, x)?;
    let fx = f.value(x);
    let samples: Vec<f64> = mc_samples(sys, f, x, h, 1, paths, seed)?
        .into_iter()
        .map(|v| (v - fx) / h)
        .collect();
    let est = McEstimate::from_samples(&samples)?;
    Ok(((est.mean - lf).abs(), est.stderr))
}

/// Constant in the short-time gate `|gap| ≤ C (h + stat)`.
pub const SHORT_TIME_C: f64 = 3.0;

pub fn kolmogorov(_cfg: SuiteConfig) -> Result<Vec<CheckRow>> {
    use kolmogorov_setup::*;
    let alg = rigid_body::algebra();
    let k = rigid_body::kinetic_inverse();
    let noise = rigid_body::noise(0);
    let spec = GeneratorSpec::lie_poisson(alg.clone(), &k, &noise)?;
    let c = casimir(&alg, "quadratic")?;
    let one = ScalarField::constant(1.0, 3);
    let mut g = rng(67);
    let mut kill = 0.0_f64;
    let mut kill_const = 0.0_f64;
    for _ in 0..50 {
        let m = uniform(&mut g, 3, 2.0);
        kill = kill
            .max(generator_apply(&spec, &c, &m)?.abs())
            .max(adjoint_apply(&spec, &c, &m)?.abs());
        kill_const = kill_const.max(generator_apply(&spec, &one, &m)?.abs());
    }
    let mut rows = vec![
        CheckRow::at_most("L C and L* C at 50 points", kill, 1e-8),
        CheckRow::at_most("L 1 at 50 points", kill_const, 1e-8),
    ];

    let observables = [
        ScalarField::coordinate(2, 3).renamed("m3"),
        ScalarField::coordinate_product(0, 1, 3).renamed("m1*m2"),
        ScalarField::new("sin(m1)+m2^2", 3, |m| m[0].sin() + m[1] * m[1]),
    ];
    let configs = [
        NoiseSpec::new(vec![AlgebraVector(vec![1.0, 0.0, 0.0])], 0),
        noise.clone(),
    ];
    for (ci, nz) in configs.iter().enumerate() {
        let spec_c = GeneratorSpec::lie_poisson(alg.clone(), &k, nz)?;
        let sys_c = lie_poisson_system(alg.clone(), k.clone(), nz, Default::default())?;
        for f in &observables {
            for (hi, h) in [1e-3, 5e-4].into_iter().enumerate() {
                let seed = 500 + (ci * 10 + hi) as u64;
                let (gap, stat) = short_time_gap(&spec_c, &sys_c, f, &rigid_body::M0, h, 200_000, seed)?;
                let bound = SHORT_TIME_C * (h + stat);
                rows.push(CheckRow {
                    check: format!("short-time L[{}] (noise {}, h={h:e})", f.name(), ci + 1),
                    value: gap,
                    threshold: format!("<= {bound:.3e}"),
                    pass: gap <= bound,
                });
            }
        }
    }

    let sys = rigid_body::system(0)?;
    let geometry = DensityGrid::cube(BOX.0, BOX.1, NODES)?;
    let f0 = ScalarField::coordinate(0, 3);
    let (cc, _) = pde_vs_mc(&spec, &sys, &f0, &rigid_body::M0, &geometry, HORIZON, None, PATHS, MC_STEPS, SEED)?;
    rows.push(CheckRow {
        check: format!("PDE vs MC for E m1(T) (pde {:.6}, mc {:.6})", cc.pde, cc.mc.mean),
        value: cc.gap(),
        threshold: format!("<= {:.3e}", cc.tolerance()),
        pass: cc.agrees(),
    });
    Ok(rows)
}
