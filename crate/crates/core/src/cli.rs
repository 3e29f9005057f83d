//! Pieces of the `coadjoint` command line that are worth testing without a
//! process: argument parsers, the Kolmogorov command and exit codes.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::dynamics::casimir;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::kolmogorov::{backward_solve, generator_apply, mc_expectation, DensityGrid, McEstimate, SolveOptions};
use crate::scenario::Scenario;

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Ok = 0,
    Input = 1,
    Diverged = 2,
    Validation = 3,
}

impl ExitCode {
    /// Exit code for an error that escaped a command.
    pub fn of(e: &Error) -> Self {
        match e {
            Error::Diverged { .. } | Error::Ensemble { .. } => ExitCode::Diverged,
            _ => ExitCode::Input,
        }
    }
}

/// Parses an observable on `g* = R^3`: `casimir`, `const:c`, `m<i>`,
/// `m<i>*m<j>` or `linear:a,b,c`.
pub fn parse_observable(spec: &str) -> Result<ScalarField> {
    let bad = || {
        Error::InvalidArgument(format!(
            "cannot parse observable '{spec}' (expected casimir, const:c, m<i>, m<i>*m<j> or linear:a,b,c)"
        ))
    };
    let coord = |s: &str| -> Result<usize> {
        let i: usize = s.strip_prefix('m').ok_or_else(bad)?.parse().map_err(|_| bad())?;
        if (1..=3).contains(&i) {
            Ok(i - 1)
        } else {
            Err(bad())
        }
    };
    let spec = spec.trim();
    let f = if spec == "casimir" {
        casimir(&crate::lie::builtin("so3")?, "quadratic")?.renamed("casimir")
    } else if let Some(c) = spec.strip_prefix("const:") {
        ScalarField::constant(c.trim().parse().map_err(|_| bad())?, 3)
    } else if let Some(cs) = spec.strip_prefix("linear:") {
        let a = parse_floats(cs).map_err(|_| bad())?;
        if a.len() != 3 {
            return Err(bad());
        }
        ScalarField::linear(a)
    } else if let Some((a, b)) = spec.split_once('*') {
        ScalarField::coordinate_product(coord(a.trim())?, coord(b.trim())?, 3)
    } else {
        ScalarField::coordinate(coord(spec)?, 3)
    };
    Ok(f.renamed(spec))
}

fn parse_floats(s: &str) -> std::result::Result<Vec<f64>, std::num::ParseFloatError> {
    s.split(',').map(|t| t.trim().parse()).collect()
}

/// `nx,ny,nz`, or a single `n` for a cube.
pub fn parse_grid(s: &str) -> Result<[usize; 3]> {
    let v: Vec<usize> = s
        .split(',')
        .map(|t| t.trim().parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::InvalidArgument(format!("--grid expects nx,ny,nz, got '{s}'")))?;
    match v[..] {
        [n] => Ok([n; 3]),
        [a, b, c] => Ok([a, b, c]),
        _ => Err(Error::InvalidArgument(format!("--grid expects nx,ny,nz, got '{s}'"))),
    }
}

/// `a,b`: the box `[a, b]^3`.
pub fn parse_box(s: &str) -> Result<(f64, f64)> {
    match parse_floats(s).ok().as_deref() {
        Some(&[a, b]) if a < b => Ok((a, b)),
        _ => Err(Error::InvalidArgument(format!("--box expects a,b with a < b, got '{s}'"))),
    }
}

#[derive(Debug, Clone)]
pub struct KolmogorovArgs {
    pub scenario: PathBuf,
    pub f0: String,
    pub grid: [usize; 3],
    pub bounds: (f64, f64),
    pub dt: Option<f64>,
    pub paths: usize,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// `L f0 = 0` and both solvers agree.
    Conserved,
    Agree,
    Disagree,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Conserved => "conserved",
            Verdict::Agree => "agree",
            Verdict::Disagree => "disagree",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct McSummary {
    pub mean: f64,
    pub stderr: f64,
    pub paths: usize,
    pub steps: usize,
    pub seed: u64,
}

/// Contents of the cross-check JSON.
#[derive(Debug, Clone, Serialize)]
pub struct KolmogorovReport {
    pub library: &'static str,
    pub version: &'static str,
    pub f0: String,
    pub x0: Vec<f64>,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub grid: [usize; 3],
    #[serde(rename = "box")]
    pub bounds: (f64, f64),
    pub boundary: String,
    /// `d / |m0| − 1` with `d` the distance from the origin to the nearest
    /// face; below [`MIN_BOX_MARGIN`] the boundary reaches the orbit.
    pub box_margin: f64,
    pub dt: f64,
    pub steps: usize,
    pub admissible_dt: f64,
    pub pde: f64,
    pub mc: McSummary,
    pub gap: f64,
    pub tolerance: f64,
    /// Largest `|L f0|` over the sampled interior nodes.
    pub generator_residual: f64,
    pub verdict: Verdict,
}

/// Smallest recommended [`KolmogorovReport::box_margin`].
pub const MIN_BOX_MARGIN: f64 = 0.3;

/// Threshold on `|L f0|` below which `f0` counts as conserved.
pub const CONSERVED_TOL: f64 = 1e-8;

/// Backward solve of `f0` for a Lie–Poisson scenario, Monte-Carlo
/// expectation at `m0`, and the artifacts of both. Returns the report and
/// the files written.
pub fn run_kolmogorov(args: &KolmogorovArgs) -> Result<(KolmogorovReport, Vec<PathBuf>)> {
    let sc = Scenario::load(&args.scenario)?;
    let spec = sc.generator_spec()?;
    let prepared = sc.prepare()?;
    let f0 = parse_observable(&args.f0)?;
    let (a, b) = args.bounds;
    let geometry = DensityGrid::new([a; 3], [b; 3], args.grid)?;
    let x0 = prepared.x0.clone();
    if x0.iter().any(|v| !(a..=b).contains(v)) {
        return Err(Error::InvalidArgument(format!(
            "initial momentum {x0:?} lies outside the box [{a}, {b}]^3"
        )));
    }
    if args.paths == 0 {
        return Err(Error::InvalidArgument("--paths must be positive".into()));
    }
    let rep = backward_solve(
        &spec,
        &f0,
        &geometry,
        SolveOptions {
            horizon: sc.horizon,
            dt: args.dt,
        },
    )?;
    let pde = rep.grid.interpolate(&x0)?;
    let mc: McEstimate = mc_expectation(&prepared.system, &f0, &x0, sc.horizon, sc.steps, args.paths, sc.seed)?;
    let h = geometry.max_spacing();
    let tolerance = 3.0 * mc.stderr + 2.0 * h * h;
    let gap = (pde - mc.mean).abs();
    let generator_residual = generator_residual(&spec, &f0, &geometry)?;
    let box_margin = (-a).min(b) / x0.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0;
    let verdict = if gap > tolerance {
        Verdict::Disagree
    } else if generator_residual <= CONSERVED_TOL {
        Verdict::Conserved
    } else {
        Verdict::Agree
    };
    let report = KolmogorovReport {
        library: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        f0: args.f0.clone(),
        x0,
        horizon: sc.horizon,
        grid: args.grid,
        bounds: args.bounds,
        boundary: rep.grid.boundary.clone(),
        box_margin,
        dt: rep.dt,
        steps: rep.steps,
        admissible_dt: rep.admissible_dt,
        pde,
        mc: McSummary {
            mean: mc.mean,
            stderr: mc.stderr,
            paths: args.paths,
            steps: sc.steps,
            seed: sc.seed,
        },
        gap,
        tolerance,
        generator_residual,
        verdict,
    };
    let files = write_kolmogorov(&args.out, &rep.grid, &report)?;
    Ok((report, files))
}

/// `max |L f0|` over every fourth interior node on each axis.
fn generator_residual(spec: &crate::kolmogorov::GeneratorSpec, f0: &ScalarField, g: &DensityGrid) -> Result<f64> {
    let mut worst = 0.0_f64;
    for i in (1..g.shape[0] - 1).step_by(4) {
        for j in (1..g.shape[1] - 1).step_by(4) {
            for k in (1..g.shape[2] - 1).step_by(4) {
                worst = worst.max(generator_apply(spec, f0, &g.node(i, j, k))?.abs());
            }
        }
    }
    Ok(worst)
}

fn write_kolmogorov(out: &Path, grid: &DensityGrid, report: &KolmogorovReport) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out)?;
    let mut files = Vec::new();
    let bin = out.join("density.bin");
    grid.save(&bin)?;
    files.push(bin);
    for (axis, name) in ["m1", "m2", "m3"].iter().enumerate() {
        let p = out.join(format!("slice_{name}.csv"));
        let mut w = std::io::BufWriter::new(std::fs::File::create(&p)?);
        grid.write_slice_csv(axis, grid.shape[axis] / 2, &mut w)?;
        std::io::Write::flush(&mut w)?;
        files.push(p);
    }
    let json = out.join("crosscheck.json");
    std::fs::write(&json, serde_json::to_string_pretty(report)? + "\n")?;
    files.push(json);
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn observables() {
        let x = [0.5, -1.0, 2.0];
        assert_eq!(parse_observable("m2").unwrap().value(&x), -1.0);
        assert_eq!(parse_observable("m1*m3").unwrap().value(&x), 1.0);
        assert_eq!(parse_observable("const:2.5").unwrap().value(&x), 2.5);
        assert_eq!(parse_observable("linear:1,0,1").unwrap().value(&x), 2.5);
        assert_eq!(parse_observable("casimir").unwrap().value(&x), 5.25);
        for bad in ["m4", "m0", "x1", "linear:1,2", "const:", "m1*"] {
            assert!(parse_observable(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn grid_and_box() {
        assert_eq!(parse_grid("48,48,32").unwrap(), [48, 48, 32]);
        assert_eq!(parse_grid("20").unwrap(), [20; 3]);
        assert!(parse_grid("1,2").is_err());
        assert_eq!(parse_box("-1.5,1.5").unwrap(), (-1.5, 1.5));
        assert!(parse_box("1,-1").is_err());
        assert!(parse_box("1").is_err());
    }

    #[test]
    fn exit_codes() {
        let d = Error::Diverged {
            step: 3,
            time: 0.1,
            last_state: vec![],
        };
        assert_eq!(ExitCode::of(&d), ExitCode::Diverged);
        assert_eq!(ExitCode::of(&Error::InvalidArgument("x".into())), ExitCode::Input);
        assert_eq!(ExitCode::Validation as i32, 3);
    }
}
