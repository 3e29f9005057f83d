//! Conservation drift, pathwise strong errors and empirical convergence
//! orders.

use std::io::Write;

use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::field::ScalarField;
use crate::integrators::Trajectory;

/// `f(x(t)) − f(x(0))` along a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftSeries {
    pub observable: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl DriftSeries {
    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn terminal(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "t,{}", self.observable)?;
        for (t, v) in self.times.iter().zip(&self.values) {
            writeln!(w, "{t:?},{v:?}")?;
        }
        Ok(())
    }
}

pub fn observable_series(traj: &Trajectory, f: &ScalarField) -> Result<DriftSeries> {
    let d = traj.labels().len();
    check_dim("observable on trajectory states", d, f.dim())?;
    let f0 = f.value(traj.initial());
    Ok(DriftSeries {
        observable: f.name().to_string(),
        times: traj.times.clone(),
        values: traj.states.iter().map(|x| f.value(x) - f0).collect(),
    })
}

/// Max over shared nodes of the Euclidean distance between two
/// trajectories on nested uniform grids; the finer one is subsampled.
pub fn strong_error(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    if a.labels() != b.labels() {
        return Err(Error::InvalidArgument(format!(
            "trajectories have different coordinates: {:?} vs {:?}",
            a.labels(),
            b.labels()
        )));
    }
    let (coarse, fine) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let (mc, mf) = (coarse.len() - 1, fine.len() - 1);
    if mc == 0 || mf % mc != 0 || coarse.meta.horizon != fine.meta.horizon {
        return Err(Error::InvalidArgument(format!(
            "incompatible grids: {mc} and {mf} steps over horizons {} and {}",
            coarse.meta.horizon, fine.meta.horizon
        )));
    }
    let stride = mf / mc;
    Ok(coarse
        .states
        .iter()
        .zip(fine.states.iter().step_by(stride))
        .map(|(x, y)| {
            x.iter()
                .zip(y)
                .map(|(u, v)| (u - v) * (u - v))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max))
}

/// Least-squares slope of `log err` against `log h`.
pub fn empirical_order(hs: &[f64], errs: &[f64]) -> Result<f64> {
    check_dim("error list", hs.len(), errs.len())?;
    if hs.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "an order fit needs at least 3 points, got {}",
            hs.len()
        )));
    }
    if hs.iter().chain(errs).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "step sizes and errors must be positive and finite".into(),
        ));
    }
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("step sizes must not all be equal".into()));
    }
    Ok(sxy / sxx)
}

/// One line of a validation table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub check: String,
    pub value: f64,
    pub threshold: String,
    pub pass: bool,
}

impl CheckRow {
    /// Passes when `value <= limit`.
    pub fn at_most(check: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            check: check.into(),
            value,
            threshold: format!("<= {limit:e}"),
            pass: value <= limit,
        }
    }

    /// Passes when `value >= limit`.
    pub fn at_least(check: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            check: check.into(),
            value,
            threshold: format!(">= {limit}"),
            pass: value >= limit,
        }
    }

    /// Passes when `lo <= value <= hi`.
    pub fn within(check: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Self {
            check: check.into(),
            value,
            threshold: format!("in [{lo}, {hi}]"),
            pass: (lo..=hi).contains(&value),
        }
    }
}

/// Renders rows as an aligned text table.
pub fn format_table(rows: &[CheckRow]) -> String {
    let w = rows.iter().map(|r| r.check.len()).max().unwrap_or(5).max(5);
    let mut out = format!("{:<w$}  {:>14}  {:<18}  pass\n", "check", "value", "threshold");
    for r in rows {
        out.push_str(&format!(
            "{:<w$}  {:>14.6e}  {:<18}  {}\n",
            r.check,
            r.value,
            r.threshold,
            if r.pass { "yes" } else { "NO" }
        ));
    }
    out
}
