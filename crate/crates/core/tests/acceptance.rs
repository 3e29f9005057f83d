//! Acceptance run: one line per criterion, non-zero exit if any fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use coadjoint::diagnostics::{empirical_order, CheckRow};
use coadjoint::suites::{self, SuiteConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn rows_outcome(rows: &[CheckRow]) -> Outcome {
    let failed: Vec<&str> = rows.iter().filter(|r| !r.pass).map(|r| r.check.as_str()).collect();
    let worst = rows
        .iter()
        .filter(|r| r.threshold.starts_with("<="))
        .map(|r| r.value)
        .fold(0.0_f64, f64::max);
    Outcome {
        pass: failed.is_empty(),
        detail: if failed.is_empty() {
            format!("{} checks, worst bounded residual {worst:.2e}", rows.len())
        } else {
            format!("failed: {}", failed.join("; "))
        },
    }
}

fn algebra() -> coadjoint::Result<Outcome> {
    Ok(rows_outcome(&suites::algebra()?))
}

fn equivariance() -> coadjoint::Result<Outcome> {
    Ok(rows_outcome(&suites::equivariance()?))
}

fn ito() -> coadjoint::Result<Outcome> {
    let res = suites::ito_closed_form_residuals()?;
    let (hs, errs) = suites::strat_ito_study(8)?;
    let order = empirical_order(&hs, &errs)?;
    let worst = res.iter().fold(0.0_f64, |m, v| m.max(*v));
    Ok(Outcome {
        pass: worst <= 1e-9 && (0.4..=1.2).contains(&order),
        detail: format!("closed form vs nested brackets {worst:.2e} (<= 1e-9), order {order:.3} (in [0.4, 1.2])"),
    })
}

fn casimir() -> coadjoint::Result<Outcome> {
    let orth = suites::casimir_orthogonality()?;
    let (hs, errs) = suites::casimir_drift_study(8)?;
    let order = empirical_order(&hs, &errs)?;
    Ok(Outcome {
        pass: orth <= 1e-12 && order >= 1.0,
        detail: format!("orthogonality {orth:.2e} (<= 1e-12), sup-drift order {order:.4} (>= 1)"),
    })
}

fn collectivize() -> coadjoint::Result<Outcome> {
    let det = suites::collectivize_deterministic()?;
    let (hs, errs) = suites::collectivize_study(8)?;
    let order = empirical_order(&hs, &errs)?;
    Ok(Outcome {
        pass: det <= 1e-6 && order >= 0.5,
        detail: format!("deterministic {det:.2e} (<= 1e-6), stochastic order {order:.3} (>= 0.5)"),
    })
}

fn deterministic() -> coadjoint::Result<Outcome> {
    let (drift, moved) = suites::equilibria_residual()?;
    let energy = suites::heavy_top_energy_drift()?;
    Ok(Outcome {
        pass: drift <= 1e-12 && moved <= 1e-12 && energy <= 1e-8,
        detail: format!("equilibria {:.2e} (<= 1e-12), heavy-top energy drift {energy:.2e} (<= 1e-8)", drift.max(moved)),
    })
}

fn kolmogorov() -> coadjoint::Result<Outcome> {
    let rows = suites::kolmogorov(SuiteConfig::default())?;
    let failed: Vec<&str> = rows.iter().filter(|r| !r.pass).map(|r| r.check.as_str()).collect();
    let kill = rows[..2].iter().fold(0.0_f64, |m, r| m.max(r.value));
    let short: Vec<&CheckRow> = rows.iter().filter(|r| r.check.starts_with("short-time")).collect();
    let pde = rows.last().expect("cross-check row");
    Ok(Outcome {
        pass: failed.is_empty(),
        detail: format!(
            "L kills C and 1 to {kill:.2e} (<= 1e-8), short-time {}/{} within C(h + stat), PDE vs MC gap {:.2e} ({}){}",
            short.iter().filter(|r| r.pass).count(),
            short.len(),
            pde.value,
            pde.threshold,
            if failed.is_empty() { String::new() } else { format!("; failed: {}", failed.join("; ")) }
        ),
    })
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_coadjoint")
}

fn run_bin(args: &[&str], threads: &str) -> std::process::Output {
    Command::new(bin())
        .args(args)
        .env("COADJOINT_THREADS", threads)
        .output()
        .expect("spawn coadjoint")
}

fn reproducibility() -> coadjoint::Result<Outcome> {
    let a = run_bin(&["validate", "all"], "1");
    let b = run_bin(&["validate", "all"], "2");
    let validate_same = a.status.success() && b.status.success() && a.stdout == b.stdout && !a.stdout.is_empty();

    let scenario = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/rigid_body.json");
    let dirs = [tempfile::tempdir()?, tempfile::tempdir()?];
    let mut files = Vec::new();
    for d in &dirs {
        let out = run_bin(
            &["simulate", scenario.to_str().expect("utf-8 path"), "--out", d.path().to_str().expect("utf-8 path")],
            "1",
        );
        if !out.status.success() {
            return Ok(Outcome {
                pass: false,
                detail: format!("simulate failed: {}", String::from_utf8_lossy(&out.stderr)),
            });
        }
        let mut set = Vec::new();
        for name in ["rigid_body.csv", "rigid_body.json", "rigid_body_casimir_drift.csv"] {
            set.push(std::fs::read(d.path().join(name))?);
        }
        files.push(set);
    }
    let sim_same = files[0] == files[1];
    Ok(Outcome {
        pass: validate_same && sim_same,
        detail: format!(
            "validate all byte-identical across 1 and 2 threads: {validate_same}; scenario rerun byte-identical: {sim_same}"
        ),
    })
}

type Criterion = (&'static str, fn() -> coadjoint::Result<Outcome>, Duration);

fn main() {
    let criteria: [Criterion; 8] = [
        ("algebraic identities", algebra, Duration::from_secs(1)),
        ("momentum-map equivariance", equivariance, Duration::from_secs(1)),
        ("Itô = Stratonovich + double bracket", ito, Duration::from_secs(60)),
        ("Casimir conservation", casimir, Duration::from_secs(30)),
        ("collectivization", collectivize, Duration::from_secs(30)),
        ("deterministic limits", deterministic, Duration::from_secs(10)),
        ("generator and Kolmogorov", kolmogorov, Duration::from_secs(600)),
        ("reproducibility", reproducibility, Duration::from_secs(600)),
    ];
    let mut failures = 0;
    for (i, (name, f, budget)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = f().unwrap_or_else(|e| Outcome {
            pass: false,
            detail: format!("error: {e}"),
        });
        let elapsed = t.elapsed();
        let pass = outcome.pass && elapsed <= *budget;
        failures += usize::from(!pass);
        println!(
            "criterion {} {:<36} {}  {}  [{:.2}s of {}s]",
            i + 1,
            name,
            if pass { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
