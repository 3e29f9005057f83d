//! Fixed-step integrators driven by a [`BrownianGrid`]: stochastic Heun
//! for Stratonovich systems, Euler–Maruyama for their Itô form, and RK4 for
//! deterministic limits.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::noise::BrownianGrid;

pub type DriftFn = Arc<dyn Fn(f64, &[f64]) -> Result<Vec<f64>> + Send + Sync>;
pub type DiffusionFn = Arc<dyn Fn(f64, &[f64], usize) -> Result<Vec<f64>> + Send + Sync>;
/// Post-step map `(previous, next)`; used for optional re-projections.
pub type ProjectionFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// `dx = drift dt + Σ_k diffusion_k ∘ dW^k`, optionally with the Itô
/// correction that turns the same diffusion into an Itô equation.
#[derive(Clone)]
pub struct SdeSystem {
    pub name: String,
    pub state_dim: usize,
    pub channels: usize,
    pub labels: Vec<String>,
    pub drift: DriftFn,
    pub diffusion: DiffusionFn,
    pub ito_correction: Option<DriftFn>,
    pub projection: Option<ProjectionFn>,
}

impl fmt::Debug for SdeSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SdeSystem")
            .field("name", &self.name)
            .field("state_dim", &self.state_dim)
            .field("channels", &self.channels)
            .field("labels", &self.labels)
            .field("ito_correction", &self.ito_correction.is_some())
            .field("projection", &self.projection.is_some())
            .finish()
    }
}

impl SdeSystem {
    /// A system with default labels `x1..xd` and no diffusion.
    pub fn deterministic(
        name: impl Into<String>,
        state_dim: usize,
        drift: impl Fn(f64, &[f64]) -> Result<Vec<f64>> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            state_dim,
            channels: 0,
            labels: (1..=state_dim).map(|i| format!("x{i}")).collect(),
            drift: Arc::new(drift),
            diffusion: Arc::new(move |_, _, _| Ok(vec![0.0; state_dim])),
            ito_correction: Some(Arc::new(move |_, _| Ok(vec![0.0; state_dim]))),
            projection: None,
        }
    }

    pub fn with_diffusion(
        mut self,
        channels: usize,
        diffusion: impl Fn(f64, &[f64], usize) -> Result<Vec<f64>> + Send + Sync + 'static,
    ) -> Self {
        self.channels = channels;
        self.diffusion = Arc::new(diffusion);
        self.ito_correction = None;
        self
    }

    pub fn with_ito_correction(
        mut self,
        corr: impl Fn(f64, &[f64]) -> Result<Vec<f64>> + Send + Sync + 'static,
    ) -> Self {
        self.ito_correction = Some(Arc::new(corr));
        self
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        self.labels = labels;
        self
    }

    pub fn with_projection(mut self, p: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.projection = Some(Arc::new(p));
        self
    }

    pub fn eval_drift(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let v = (self.drift)(t, x)?;
        check_dim("drift value", self.state_dim, v.len())?;
        Ok(v)
    }

    pub fn eval_diffusion(&self, t: f64, x: &[f64], k: usize) -> Result<Vec<f64>> {
        let v = (self.diffusion)(t, x, k)?;
        check_dim("diffusion value", self.state_dim, v.len())?;
        Ok(v)
    }

    pub fn eval_ito_correction(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let corr = self.ito_correction.as_ref().ok_or_else(|| {
            Error::Misuse(format!(
                "system '{}' has no Itô correction; refusing to integrate it in Itô form",
                self.name
            ))
        })?;
        let v = corr(t, x)?;
        check_dim("Itô correction value", self.state_dim, v.len())?;
        Ok(v)
    }
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn finite_or_diverged(x: Vec<f64>, t: f64, last: &[f64]) -> Result<Vec<f64>> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::Diverged {
            step: 0,
            time: t,
            last_state: last.to_vec(),
        })
    }
}

/// Stochastic Heun (trapezoidal predictor–corrector).
pub fn heun_stratonovich_step(sys: &SdeSystem, t: f64, x: &[f64], dt: f64, dw: &[f64]) -> Result<Vec<f64>> {
    check_step(sys, x, dt, dw)?;
    let b0 = sys.eval_drift(t, x)?;
    let s0: Vec<Vec<f64>> = (0..sys.channels)
        .map(|k| sys.eval_diffusion(t, x, k))
        .collect::<Result<_>>()?;
    let mut pred = x.to_vec();
    axpy(&mut pred, dt, &b0);
    for (k, s) in s0.iter().enumerate() {
        axpy(&mut pred, dw[k], s);
    }
    let t1 = t + dt;
    let b1 = sys.eval_drift(t1, &pred)?;
    let mut out = x.to_vec();
    axpy(&mut out, 0.5 * dt, &b0);
    axpy(&mut out, 0.5 * dt, &b1);
    for (k, s) in s0.iter().enumerate() {
        let s1 = sys.eval_diffusion(t1, &pred, k)?;
        axpy(&mut out, 0.5 * dw[k], s);
        axpy(&mut out, 0.5 * dw[k], &s1);
    }
    finite_or_diverged(out, t1, x)
}

/// Euler–Maruyama for the Itô form `dx = (drift + correction) dt + Σ σ_k dW^k`.
pub fn euler_ito_step(sys: &SdeSystem, t: f64, x: &[f64], dt: f64, dw: &[f64]) -> Result<Vec<f64>> {
    check_step(sys, x, dt, dw)?;
    let corr = sys.eval_ito_correction(t, x)?;
    let b = sys.eval_drift(t, x)?;
    let mut out = x.to_vec();
    axpy(&mut out, dt, &b);
    axpy(&mut out, dt, &corr);
    for (k, w) in dw.iter().enumerate() {
        let s = sys.eval_diffusion(t, x, k)?;
        axpy(&mut out, *w, &s);
    }
    finite_or_diverged(out, t + dt, x)
}

/// Classical RK4 on the drift alone.
pub fn rk4_step(sys: &SdeSystem, t: f64, x: &[f64], dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {dt}")));
    }
    check_dim("state", sys.state_dim, x.len())?;
    let k1 = sys.eval_drift(t, x)?;
    let mut y = x.to_vec();
    axpy(&mut y, 0.5 * dt, &k1);
    let k2 = sys.eval_drift(t + 0.5 * dt, &y)?;
    y.copy_from_slice(x);
    axpy(&mut y, 0.5 * dt, &k2);
    let k3 = sys.eval_drift(t + 0.5 * dt, &y)?;
    y.copy_from_slice(x);
    axpy(&mut y, dt, &k3);
    let k4 = sys.eval_drift(t + dt, &y)?;
    let mut out = x.to_vec();
    for i in 0..out.len() {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    finite_or_diverged(out, t + dt, x)
}

fn check_step(sys: &SdeSystem, x: &[f64], dt: f64, dw: &[f64]) -> Result<()> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {dt}")));
    }
    check_dim("state", sys.state_dim, x.len())?;
    check_dim("Brownian increment", sys.channels, dw.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "heun_strat")]
    HeunStrat,
    #[serde(rename = "euler_ito")]
    EulerIto,
    #[serde(rename = "rk4")]
    Rk4,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::HeunStrat => "heun_strat",
            Scheme::EulerIto => "euler_ito",
            Scheme::Rk4 => "rk4",
        }
    }

    pub fn step(self, sys: &SdeSystem, t: f64, x: &[f64], dt: f64, dw: &[f64]) -> Result<Vec<f64>> {
        match self {
            Scheme::HeunStrat => heun_stratonovich_step(sys, t, x, dt, dw),
            Scheme::EulerIto => euler_ito_step(sys, t, x, dt, dw),
            Scheme::Rk4 => rk4_step(sys, t, x, dt),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "heun_strat" => Ok(Scheme::HeunStrat),
            "euler_ito" => Ok(Scheme::EulerIto),
            "rk4" => Ok(Scheme::Rk4),
            other => Err(Error::InvalidArgument(format!(
                "unknown scheme '{other}' (expected heun_strat, euler_ito or rk4)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub system: String,
    pub scheme: Scheme,
    pub seed: u64,
    pub steps: usize,
    pub horizon: f64,
    pub generator: String,
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn labels(&self) -> &[String] {
        &self.meta.labels
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn initial(&self) -> &[f64] {
        &self.states[0]
    }

    pub fn last(&self) -> &[f64] {
        self.states.last().expect("trajectory holds at least one state")
    }

    /// Values of the coordinate called `label` over time.
    pub fn column(&self, label: &str) -> Result<Vec<f64>> {
        let idx = self
            .meta
            .labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::NotFound(format!("trajectory has no coordinate '{label}'")))?;
        Ok(self.states.iter().map(|s| s[idx]).collect())
    }

    /// Header `t,<labels>` followed by one row per saved state.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        write!(w, "t")?;
        for l in &self.meta.labels {
            write!(w, ",{l}")?;
        }
        writeln!(w)?;
        for (t, s) in self.times.iter().zip(&self.states) {
            write!(w, "{t:?}")?;
            for v in s {
                write!(w, ",{v:?}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }

    pub fn metadata_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.meta)?)
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let f = std::fs::File::create(dir.join(format!("{stem}.csv")))?;
        let mut w = std::io::BufWriter::new(f);
        self.write_csv(&mut w)?;
        w.flush()?;
        std::fs::write(dir.join(format!("{stem}.json")), self.metadata_json()? + "\n")?;
        Ok(())
    }

    /// Keeps every `stride`-th state (including both ends when `stride`
    /// divides the step count).
    pub fn subsample(&self, stride: usize) -> Trajectory {
        let stride = stride.max(1);
        let times = self.times.iter().step_by(stride).copied().collect();
        let states = self.states.iter().step_by(stride).cloned().collect();
        Trajectory {
            times,
            states,
            meta: self.meta.clone(),
        }
    }
}

/// Outcome of [`integrate_partial`]: the states reached and the error that
/// stopped the run, if any.
#[derive(Debug)]
pub struct PartialRun {
    pub trajectory: Trajectory,
    pub failure: Option<Error>,
}

/// Runs `scheme` over every step of `grid`.
pub fn integrate(sys: &SdeSystem, scheme: Scheme, grid: &BrownianGrid, x0: &[f64]) -> Result<Trajectory> {
    let run = integrate_partial(sys, scheme, grid, x0)?;
    match run.failure {
        None => Ok(run.trajectory),
        Some(e) => Err(e),
    }
}

/// Like [`integrate`], but keeps the states computed before a divergence.
/// Setup errors (dimensions, channels) are still returned as `Err`.
pub fn integrate_partial(sys: &SdeSystem, scheme: Scheme, grid: &BrownianGrid, x0: &[f64]) -> Result<PartialRun> {
    check_dim("initial state", sys.state_dim, x0.len())?;
    check_dim("labels", sys.state_dim, sys.labels.len())?;
    if scheme != Scheme::Rk4 {
        check_dim("grid channels", sys.channels, grid.channels())?;
    }
    if scheme == Scheme::EulerIto && sys.ito_correction.is_none() {
        // fail before the first step, not halfway through
        sys.eval_ito_correction(0.0, x0)?;
    }
    if !x0.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidArgument("initial state is not finite".into()));
    }
    let m = grid.steps();
    let dt = grid.dt();
    let meta = TrajectoryMeta {
        system: sys.name.clone(),
        scheme,
        seed: grid.seed(),
        steps: m,
        horizon: grid.horizon(),
        generator: grid.generator().to_string(),
        labels: sys.labels.clone(),
    };
    let mut times = Vec::with_capacity(m + 1);
    let mut states = Vec::with_capacity(m + 1);
    times.push(0.0);
    states.push(x0.to_vec());
    let zero_dw = vec![0.0; sys.channels];
    let mut failure = None;
    for n in 0..m {
        let t = grid.time(n);
        let x = states.last().expect("nonempty");
        let dw = if scheme == Scheme::Rk4 {
            &zero_dw[..]
        } else {
            grid.increment(n)
        };
        match scheme.step(sys, t, x, dt, dw) {
            Ok(mut next) => {
                if let Some(p) = &sys.projection {
                    p(x, &mut next);
                }
                times.push(grid.time(n + 1));
                states.push(next);
            }
            Err(Error::Diverged { time, last_state, .. }) => {
                failure = Some(Error::Diverged {
                    step: n,
                    time,
                    last_state,
                });
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(PartialRun {
        trajectory: Trajectory { times, states, meta },
        failure,
    })
}

/// RK4 on the drift with `steps` uniform steps over `[0, horizon]`; no
/// Brownian grid, so any step count is allowed.
pub fn integrate_deterministic(sys: &SdeSystem, horizon: f64, steps: usize, x0: &[f64]) -> Result<Trajectory> {
    if steps == 0 || !(horizon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need a positive horizon and step count, got T = {horizon}, M = {steps}"
        )));
    }
    check_dim("initial state", sys.state_dim, x0.len())?;
    let dt = horizon / steps as f64;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(x0.to_vec());
    for n in 0..steps {
        let t = horizon * n as f64 / steps as f64;
        let x = states.last().expect("nonempty");
        let mut next = rk4_step(sys, t, x, dt).map_err(|e| match e {
            Error::Diverged { time, last_state, .. } => Error::Diverged {
                step: n,
                time,
                last_state,
            },
            other => other,
        })?;
        if let Some(p) = &sys.projection {
            p(x, &mut next);
        }
        times.push(horizon * (n + 1) as f64 / steps as f64);
        states.push(next);
    }
    Ok(Trajectory {
        times,
        states,
        meta: TrajectoryMeta {
            system: sys.name.clone(),
            scheme: Scheme::Rk4,
            seed: 0,
            steps,
            horizon,
            generator: "none".to_string(),
            labels: sys.labels.clone(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{sample_channels, coarsen};

    fn geometric() -> SdeSystem {
        SdeSystem::deterministic("geometric", 1, |_, _| Ok(vec![0.0]))
            .with_diffusion(1, |_, x, _| Ok(vec![x[0]]))
            .with_ito_correction(|_, x| Ok(vec![0.5 * x[0]]))
    }

    #[test]
    fn deterministic_heun_matches_exponential() {
        let a = -0.7;
        let sys = SdeSystem::deterministic("linear", 1, move |_, x| Ok(vec![a * x[0]]));
        let dt = 0.01;
        let x1 = heun_stratonovich_step(&sys, 0.0, &[1.0], dt, &[]).unwrap();
        // Heun is exact through second order
        let heun = 1.0 + a * dt + 0.5 * (a * dt).powi(2);
        assert!((x1[0] - heun).abs() < 1e-15);
        assert!((x1[0] - (a * dt).exp()).abs() < (a * dt).abs().powi(3));
    }

    #[test]
    fn additive_noise_is_exact() {
        let sys = SdeSystem::deterministic("additive", 2, |_, _| Ok(vec![0.0, 0.0]))
            .with_diffusion(1, |_, _, _| Ok(vec![0.3, -1.0]))
            .with_ito_correction(|_, _| Ok(vec![0.0, 0.0]));
        let x = heun_stratonovich_step(&sys, 0.0, &[1.0, 2.0], 0.1, &[0.5]).unwrap();
        assert_eq!(x, vec![1.0 + 0.15, 2.0 - 0.5]);
        let y = euler_ito_step(&sys, 0.0, &[1.0, 2.0], 0.1, &[0.5]).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn geometric_brownian_motion_converges() {
        let sys = geometric();
        // mean terminal error over 8 paths at M = 2^6 and 2^10
        let mut coarse = (0.0, 0.0);
        let mut fine_err = (0.0, 0.0);
        for seed in 0..8 {
            let fine = sample_channels(1, seed, 1.0, 1 << 10).unwrap();
            let exact = fine.total_displacement()[0].exp();
            for (level, acc) in [(6, &mut coarse), (10, &mut fine_err)] {
                let g = coarsen(&fine, 1 << (10 - level)).unwrap();
                let h = integrate(&sys, Scheme::HeunStrat, &g, &[1.0]).unwrap();
                let e = integrate(&sys, Scheme::EulerIto, &g, &[1.0]).unwrap();
                acc.0 += (h.last()[0] - exact).abs() / 8.0;
                acc.1 += (e.last()[0] - exact).abs() / 8.0;
            }
        }
        // 16x refinement: Heun gains ~16, Euler at least ~4
        assert!(fine_err.0 < coarse.0 / 8.0, "{coarse:?} {fine_err:?}");
        assert!(fine_err.1 < coarse.1 / 2.5, "{coarse:?} {fine_err:?}");
    }

    #[test]
    fn euler_ito_requires_correction() {
        let sys = SdeSystem::deterministic("g", 1, |_, _| Ok(vec![0.0])).with_diffusion(1, |_, x, _| Ok(vec![x[0]]));
        let g = sample_channels(1, 1, 1.0, 4).unwrap();
        assert!(matches!(
            integrate(&sys, Scheme::EulerIto, &g, &[1.0]),
            Err(Error::Misuse(_))
        ));
        assert!(integrate(&sys, Scheme::HeunStrat, &g, &[1.0]).is_ok());
    }

    #[test]
    fn rk4_linear_system_matches_matrix_exponential() {
        // rotation generator: exp(tJ) is known in closed form
        let sys = SdeSystem::deterministic("rot", 2, |_, x| Ok(vec![-x[1], x[0]]));
        let g = sample_channels(0, 0, 1.0, 1024).unwrap();
        let tr = integrate(&sys, Scheme::Rk4, &g, &[1.0, 0.0]).unwrap();
        let (c, s) = (1.0_f64.cos(), 1.0_f64.sin());
        assert!((tr.last()[0] - c).abs() < 1e-8 && (tr.last()[1] - s).abs() < 1e-8);
        let constant = SdeSystem::deterministic("const", 1, |_, _| Ok(vec![2.0]));
        let g = sample_channels(0, 0, 1.0, 8).unwrap();
        let tr = integrate(&constant, Scheme::Rk4, &g, &[0.0]).unwrap();
        assert_eq!(tr.last()[0], 2.0);
    }

    #[test]
    fn divergence_reports_step() {
        let sys = SdeSystem::deterministic("blowup", 1, |_, x| Ok(vec![x[0] * x[0] * 1e300]));
        let g = sample_channels(0, 0, 1.0, 16).unwrap();
        let run = integrate_partial(&sys, Scheme::Rk4, &g, &[1.0]).unwrap();
        match run.failure {
            Some(Error::Diverged { step, ref last_state, .. }) => {
                assert_eq!(run.trajectory.len(), step + 1);
                assert!(last_state.iter().all(|v| v.is_finite()));
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn single_step_grid_and_csv() {
        let sys = geometric();
        let g = sample_channels(1, 9, 0.5, 1).unwrap();
        let tr = integrate(&sys, Scheme::HeunStrat, &g, &[1.0]).unwrap();
        assert_eq!(tr.times, vec![0.0, 0.5]);
        let csv = tr.to_csv_string();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,x1"));
        let row: Vec<f64> = lines.nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(row[1], tr.last()[0]);
        let meta: TrajectoryMeta = serde_json::from_str(&tr.metadata_json().unwrap()).unwrap();
        assert_eq!(meta, tr.meta);
    }

    #[test]
    fn channel_mismatch_rejected() {
        let sys = geometric();
        let g = sample_channels(2, 9, 1.0, 4).unwrap();
        assert!(matches!(
            integrate(&sys, Scheme::HeunStrat, &g, &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!("milstein".parse::<Scheme>().is_err());
        assert_eq!("euler_ito".parse::<Scheme>().unwrap(), Scheme::EulerIto);
    }
}
