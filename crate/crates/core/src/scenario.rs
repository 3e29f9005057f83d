//! JSON scenario documents: one file describes a system, its noise, the
//! initial state and the time grid, and is enough to rerun a simulation
//! byte for byte.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "system": "lie_poisson",
//!   "algebra": "so3",
//!   "kinetic": { "K": [[1, 0, 0], [0, 0.5, 0], [0, 0, 0.3333333333333333]] },
//!   "xi": [[0.5, 0, 0], [0, 0.3, 0]],
//!   "m0": [0.6, 0.7, 0.4],
//!   "T": 1.0,
//!   "M": 1024,
//!   "seed": 7
//! }
//! ```
//!
//! Unknown fields are rejected everywhere.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::action::builtin_chart;
use crate::diagnostics::{observable_series, DriftSeries};
use crate::dynamics::{
    casimir, collective_hamiltonian, hamel_system, lie_poisson_system, phase_space_system, reconstruct_momentum,
    LiePoissonOptions, Potential, QuadraticLagrangian, UPolicy,
};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::integrators::{integrate_partial, Scheme, SdeSystem, Trajectory, TrajectoryMeta};
use crate::kolmogorov::GeneratorSpec;
use crate::lie::{builtin, AlgebraVector, LieAlgebra};
use crate::noise::{sample_grid, NoiseSpec};

pub const SCHEMA_VERSION: u32 = 1;

/// The published JSON schema for scenario files.
pub const SCHEMA: &str = include_str!("../schema/scenario.schema.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    PhaseSpace,
    Hamel,
    LiePoisson,
}

/// Kinetic matrix, given either as `G` (Lagrangian side) or `K = G⁻¹`,
/// row by row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub enum Kinetic {
    G(Vec<Vec<f64>>),
    K(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub id: String,
    #[serde(default)]
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum UPolicySpec {
    Legendre,
    Constant { value: Vec<f64> },
    Zero,
}

fn default_stem() -> String {
    "trajectory".into()
}

fn default_stride() -> usize {
    1
}

/// Extra observables written next to the trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Diagnostic {
    /// `|m|² − |m0|²` (so3 only).
    Casimir,
    /// Hamiltonian drift.
    Energy,
    /// Momentum-map image of a phase-space run.
    Momentum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default = "default_stem")]
    pub stem: String,
    /// Keep every `stride`-th state in the CSV.
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub diagnostics: Vec<Diagnostic>,
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            stem: default_stem(),
            stride: default_stride(),
            diagnostics: Vec::new(),
        }
    }
}

fn default_scheme() -> Scheme {
    Scheme::HeunStrat
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub system: SystemKind,
    pub algebra: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart: Option<String>,
    pub kinetic: Kinetic,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialSpec>,
    #[serde(default)]
    pub xi: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_policy: Option<UPolicySpec>,
    /// Full initial state: `(q, p)`, `(m, q)` or `m`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    /// Initial momentum (Lie–Poisson only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m0: Option<Vec<f64>>,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "M")]
    pub steps: usize,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    pub seed: u64,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub casimir_projection: bool,
}

fn field_err(field: &str, e: Error) -> Error {
    Error::InvalidArgument(format!("field '{field}': {e}"))
}

fn field_msg(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::InvalidArgument(format!("field '{field}': {msg}"))
}

fn flatten_square(field: &str, rows: &[Vec<f64>], r: usize) -> Result<Vec<f64>> {
    if rows.len() != r || rows.iter().any(|row| row.len() != r) {
        return Err(field_msg(field, format_args!("expected a {r}x{r} matrix")));
    }
    Ok(rows.concat())
}

/// A scenario resolved into library objects.
#[derive(Debug)]
pub struct Prepared {
    pub system: SdeSystem,
    pub x0: Vec<f64>,
    pub noise: NoiseSpec,
    pub lagrangian: QuadraticLagrangian,
}

impl Scenario {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.check_basic()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidArgument(format!("cannot read scenario {}: {e}", path.display())))?;
        Self::from_json_str(&text).map_err(|e| match e {
            Error::Json(j) => Error::Format(format!("{}: {j}", path.display())),
            other => Error::InvalidArgument(format!("{}: {other}", path.display())),
        })
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn check_basic(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(field_msg(
                "schema_version",
                format_args!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(field_msg("T", format_args!("must be positive and finite, got {}", self.horizon)));
        }
        if self.steps == 0 || !self.steps.is_power_of_two() {
            return Err(field_msg("M", format_args!("must be a power of two, got {}", self.steps)));
        }
        if self.outputs.stride == 0 {
            return Err(field_msg("outputs.stride", "must be at least 1"));
        }
        if self.outputs.stem.is_empty() || self.outputs.stem.contains(['/', '\\']) {
            return Err(field_msg("outputs.stem", "must be a plain file name"));
        }
        Ok(())
    }

    pub fn algebra(&self) -> Result<Arc<LieAlgebra>> {
        builtin(&self.algebra).map(Arc::new).map_err(|e| field_err("algebra", e))
    }

    pub fn noise(&self, r: usize) -> Result<NoiseSpec> {
        let xi = self.xi.iter().map(|v| AlgebraVector(v.clone())).collect();
        let spec = NoiseSpec::new(xi, self.seed);
        spec.check_dim(r).map_err(|e| field_err("xi", e))?;
        Ok(spec)
    }

    fn potential(&self) -> Result<Potential> {
        match &self.potential {
            None => Ok(Potential::Zero),
            Some(p) => Potential::from_id(&p.id, &p.params).map_err(|e| field_err("potential", e)),
        }
    }

    fn u_policy(&self, r: usize) -> Result<UPolicy> {
        match &self.u_policy {
            None | Some(UPolicySpec::Legendre) => Ok(UPolicy::Legendre),
            Some(UPolicySpec::Zero) => Ok(UPolicy::Zero),
            Some(UPolicySpec::Constant { value }) => {
                if value.len() != r {
                    return Err(field_msg("u_policy.value", format_args!("expected {r} entries, got {}", value.len())));
                }
                Ok(UPolicy::Constant(AlgebraVector(value.clone())))
            }
        }
    }

    /// Kinetic Lagrangian with chart and potential attached.
    pub fn lagrangian(&self) -> Result<QuadraticLagrangian> {
        let alg = self.algebra()?;
        let r = alg.dim();
        let mut l = match &self.kinetic {
            Kinetic::G(rows) => QuadraticLagrangian::new(alg, flatten_square("kinetic.G", rows, r)?)
                .map_err(|e| field_err("kinetic.G", e))?,
            Kinetic::K(rows) => QuadraticLagrangian::from_inverse(alg, flatten_square("kinetic.K", rows, r)?)
                .map_err(|e| field_err("kinetic.K", e))?,
        };
        if let Some(name) = &self.chart {
            let chart = builtin_chart(name).map_err(|e| field_err("chart", e))?;
            l = l.with_chart(Arc::new(chart)).map_err(|e| field_err("chart", e))?;
        }
        let v = self.potential()?;
        if !v.is_zero() {
            l = l.with_potential(v).map_err(|e| field_err("potential", e))?;
        }
        Ok(l)
    }

    fn initial_state(&self, dim: usize) -> Result<Vec<f64>> {
        let (field, x0) = match (&self.x0, &self.m0, self.system) {
            (Some(_), Some(_), _) => return Err(field_msg("x0", "give either x0 or m0, not both")),
            (Some(x), None, _) => ("x0", x),
            (None, Some(m), SystemKind::LiePoisson) => ("m0", m),
            (None, Some(_), _) => return Err(field_msg("m0", "only Lie-Poisson scenarios start from m0; use x0")),
            (None, None, _) => return Err(field_msg("x0", "missing initial state")),
        };
        if x0.len() != dim {
            return Err(field_msg(field, format_args!("expected {dim} entries, got {}", x0.len())));
        }
        if !x0.iter().all(|v| v.is_finite()) {
            return Err(field_msg(field, "entries must be finite"));
        }
        Ok(x0.clone())
    }

    /// Builds the SDE system and initial state.
    pub fn prepare(&self) -> Result<Prepared> {
        self.check_basic()?;
        let l = self.lagrangian()?;
        let r = l.algebra().dim();
        let noise = self.noise(r)?;
        let system = match self.system {
            SystemKind::LiePoisson => {
                if self.chart.is_some() {
                    return Err(field_msg("chart", "Lie-Poisson scenarios take no chart"));
                }
                if !l.potential().is_zero() {
                    return Err(field_msg("potential", "Lie-Poisson scenarios have no configuration variable"));
                }
                let opts = LiePoissonOptions {
                    u: self.u_policy(r)?,
                    casimir_projection: self.casimir_projection,
                };
                lie_poisson_system(l.algebra().clone(), l.kinetic_inverse().to_vec(), &noise, opts)?
            }
            SystemKind::Hamel => {
                self.reject_projection()?;
                if !matches!(self.u_policy, None | Some(UPolicySpec::Legendre)) {
                    return Err(field_msg("u_policy", "Hamel scenarios use u = dh/dm only"));
                }
                let chart = l.require_chart().map_err(|e| field_err("chart", e))?.clone();
                hamel_system(chart, &l.hamiltonian(), &noise)?
            }
            SystemKind::PhaseSpace => {
                self.reject_projection()?;
                l.require_chart().map_err(|e| field_err("chart", e))?;
                phase_space_system(&l, &noise, self.u_policy(r)?)?
            }
        };
        let x0 = self.initial_state(system.state_dim)?;
        Ok(Prepared {
            system,
            x0,
            noise,
            lagrangian: l,
        })
    }

    fn reject_projection(&self) -> Result<()> {
        if self.casimir_projection {
            return Err(field_msg("casimir_projection", "only available for Lie-Poisson scenarios"));
        }
        Ok(())
    }

    /// Kolmogorov generator of a Lie–Poisson scenario.
    pub fn generator_spec(&self) -> Result<GeneratorSpec> {
        if self.system != SystemKind::LiePoisson {
            return Err(field_msg("system", "a Kolmogorov solve needs a lie_poisson scenario"));
        }
        if !matches!(self.u_policy, None | Some(UPolicySpec::Legendre)) {
            return Err(field_msg("u_policy", "a Kolmogorov solve needs u = K m"));
        }
        let p = self.prepare()?;
        GeneratorSpec::lie_poisson(p.lagrangian.algebra().clone(), p.lagrangian.kinetic_inverse(), &p.noise)
    }
}

/// Where a run stopped early.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergedAt {
    pub step: usize,
    pub time: f64,
}

/// JSON sidecar written next to a trajectory CSV.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub library: &'static str,
    pub version: &'static str,
    pub generator: String,
    pub seed: u64,
    pub scheme: Scheme,
    #[serde(rename = "M")]
    pub steps: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub rows: usize,
    pub diverged_at: Option<DivergedAt>,
    pub trajectory: TrajectoryMeta,
    pub scenario: Scenario,
}

/// Result of [`simulate`].
#[derive(Debug)]
pub struct Simulation {
    pub trajectory: Trajectory,
    pub diagnostics: Vec<(Diagnostic, Trajectory)>,
    pub series: Vec<DriftSeries>,
    pub failure: Option<Error>,
    pub record: RunRecord,
}

impl Simulation {
    pub fn diverged(&self) -> bool {
        self.failure.is_some()
    }

    /// Writes `<stem>.csv`, `<stem>.json` and one CSV per diagnostic.
    /// Returns the paths written.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<Vec<std::path::PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let stem = &self.record.scenario.outputs.stem;
        let mut written = Vec::new();
        let csv = dir.join(format!("{stem}.csv"));
        write_file(&csv, |w| self.trajectory.write_csv(w))?;
        written.push(csv);
        let json = dir.join(format!("{stem}.json"));
        std::fs::write(&json, serde_json::to_string_pretty(&self.record)? + "\n")?;
        written.push(json);
        for (d, tr) in &self.diagnostics {
            let p = dir.join(format!("{stem}_{}.csv", diagnostic_name(*d)));
            write_file(&p, |w| tr.write_csv(w))?;
            written.push(p);
        }
        for s in &self.series {
            let p = dir.join(format!("{stem}_{}_drift.csv", s.observable.to_lowercase()));
            write_file(&p, |w| s.write_csv(w))?;
            written.push(p);
        }
        Ok(written)
    }
}

fn diagnostic_name(d: Diagnostic) -> &'static str {
    match d {
        Diagnostic::Casimir => "casimir",
        Diagnostic::Energy => "energy",
        Diagnostic::Momentum => "momentum",
    }
}

fn write_file(path: &Path, f: impl FnOnce(&mut std::io::BufWriter<std::fs::File>) -> Result<()>) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Momentum coordinates of a trajectory, whatever the system level.
fn momentum_trajectory(sc: &Scenario, p: &Prepared, tr: &Trajectory) -> Result<Trajectory> {
    let r = p.lagrangian.algebra().dim();
    match sc.system {
        SystemKind::LiePoisson => Ok(tr.clone()),
        SystemKind::Hamel => {
            let mut out = tr.clone();
            out.states.iter_mut().for_each(|s| s.truncate(r));
            out.meta.labels.truncate(r);
            Ok(out)
        }
        SystemKind::PhaseSpace => reconstruct_momentum(tr, p.lagrangian.require_chart()?),
    }
}

fn energy_field(sc: &Scenario, p: &Prepared) -> Result<ScalarField> {
    let l = &p.lagrangian;
    Ok(match sc.system {
        SystemKind::LiePoisson => l.hamiltonian().lie_poisson_field(),
        SystemKind::Hamel => l.hamiltonian().hamel_field(l.require_chart()?.n()),
        SystemKind::PhaseSpace => collective_hamiltonian(l)?,
    }
    .renamed("energy"))
}

/// Runs a scenario. Divergence is not an error: the states reached so far
/// are kept and the failure is reported in [`Simulation::failure`] and the
/// record's `diverged_at`.
pub fn simulate(sc: &Scenario) -> Result<Simulation> {
    let p = sc.prepare()?;
    let grid = sample_grid(&p.noise, sc.horizon, sc.steps)?;
    let run = integrate_partial(&p.system, sc.scheme, &grid, &p.x0)?;
    let full = run.trajectory;
    let diverged_at = match &run.failure {
        Some(Error::Diverged { step, time, .. }) => Some(DivergedAt {
            step: *step,
            time: *time,
        }),
        _ => None,
    };
    let mut diagnostics = Vec::new();
    let mut series = Vec::new();
    for d in &sc.outputs.diagnostics {
        match d {
            Diagnostic::Momentum => {
                if sc.system != SystemKind::PhaseSpace {
                    return Err(field_msg("outputs.diagnostics", "momentum is only written for phase_space runs"));
                }
                let m = momentum_trajectory(sc, &p, &full)?;
                diagnostics.push((*d, m.subsample(sc.outputs.stride)));
            }
            Diagnostic::Casimir => {
                let c = casimir(p.lagrangian.algebra(), "quadratic").map_err(|e| field_err("outputs.diagnostics", e))?;
                let m = momentum_trajectory(sc, &p, &full)?;
                series.push(subsample_series(observable_series(&m, &c.renamed("casimir"))?, sc.outputs.stride));
            }
            Diagnostic::Energy => {
                let h = energy_field(sc, &p)?;
                series.push(subsample_series(observable_series(&full, &h)?, sc.outputs.stride));
            }
        }
    }
    let trajectory = full.subsample(sc.outputs.stride);
    let record = RunRecord {
        library: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        generator: grid.generator().to_string(),
        seed: sc.seed,
        scheme: sc.scheme,
        steps: sc.steps,
        horizon: sc.horizon,
        rows: trajectory.len(),
        diverged_at,
        trajectory: trajectory.meta.clone(),
        scenario: sc.clone(),
    };
    Ok(Simulation {
        trajectory,
        diagnostics,
        series,
        failure: run.failure,
        record,
    })
}

fn subsample_series(s: DriftSeries, stride: usize) -> DriftSeries {
    DriftSeries {
        observable: s.observable,
        times: s.times.into_iter().step_by(stride).collect(),
        values: s.values.into_iter().step_by(stride).collect(),
    }
}
