use std::path::PathBuf;
use std::process;

use clap::{Parser, Subcommand};

use coadjoint::cli::{parse_box, parse_grid, run_kolmogorov, ExitCode, KolmogorovArgs, Verdict, MIN_BOX_MARGIN};
use coadjoint::diagnostics::format_table;
use coadjoint::scenario::{simulate, Scenario};
use coadjoint::suites::{self, SuiteConfig};
use coadjoint::Error;

#[derive(Parser)]
#[command(name = "coadjoint", version, about = "Stochastic coadjoint motion: simulate, validate, solve Kolmogorov equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write the trajectory CSV and JSON sidecar.
    Simulate {
        file: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run a validation suite and print its table.
    Validate {
        /// algebra, equivariance, ito, casimir, collectivize, deterministic, kolmogorov or all
        suite: String,
        /// Brownian paths averaged in convergence studies.
        #[arg(long, default_value_t = 8)]
        seeds: usize,
    },
    /// Backward Kolmogorov solve for a Lie-Poisson scenario, checked against Monte Carlo.
    Kolmogorov {
        file: PathBuf,
        /// casimir, const:c, m<i>, m<i>*m<j> or linear:a,b,c
        #[arg(long)]
        f0: String,
        /// nx,ny,nz
        #[arg(long, default_value = "48,48,48")]
        grid: String,
        /// a,b for the box [a,b]^3
        #[arg(long = "box", default_value = "-1.5,1.5", allow_hyphen_values = true)]
        bounds: String,
        /// Time step; defaults to 0.9 of the admissible step.
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, default_value_t = 10_000)]
        paths: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn init_threads() -> Result<(), Error> {
    let Ok(v) = std::env::var("COADJOINT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::InvalidArgument(format!("COADJOINT_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Misuse(e.to_string()))
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    init_threads()?;
    match cli.command {
        Command::Simulate { file, out } => {
            let sc = Scenario::load(&file)?;
            let sim = simulate(&sc)?;
            for p in sim.write(&out)? {
                println!("wrote {}", p.display());
            }
            match &sim.failure {
                Some(e) => {
                    eprintln!("error: {e}");
                    Ok(ExitCode::of(e))
                }
                None => Ok(ExitCode::Ok),
            }
        }
        Command::Validate { suite, seeds } => {
            if seeds == 0 {
                return Err(Error::InvalidArgument("--seeds must be positive".into()));
            }
            let mut ok = true;
            for rep in suites::run(&suite, SuiteConfig { seeds })? {
                println!("== {} ({})", rep.name, if rep.passed() { "pass" } else { "FAIL" });
                print!("{}", format_table(&rep.rows));
                ok &= rep.passed();
            }
            Ok(if ok { ExitCode::Ok } else { ExitCode::Validation })
        }
        Command::Kolmogorov {
            file,
            f0,
            grid,
            bounds,
            dt,
            paths,
            out,
        } => {
            let args = KolmogorovArgs {
                scenario: file,
                f0,
                grid: parse_grid(&grid)?,
                bounds: parse_box(&bounds)?,
                dt,
                paths,
                out,
            };
            let (rep, files) = run_kolmogorov(&args)?;
            for p in files {
                println!("wrote {}", p.display());
            }
            println!(
                "pde {:.6e}  mc {:.6e} +- {:.2e}  gap {:.2e}  tolerance {:.2e}  verdict {}",
                rep.pde,
                rep.mc.mean,
                rep.mc.stderr,
                rep.gap,
                rep.tolerance,
                rep.verdict.as_str()
            );
            if rep.box_margin < MIN_BOX_MARGIN {
                eprintln!(
                    "warning: box margin {:.2} around the initial orbit is below {MIN_BOX_MARGIN}; boundary error may dominate",
                    rep.box_margin
                );
            }
            Ok(if rep.verdict == Verdict::Disagree {
                ExitCode::Validation
            } else {
                ExitCode::Ok
            })
        }
    }
}

fn main() {
    let code = match run(Cli::parse()) {
        Ok(c) => c,
        Err(e) => {
            if let Error::Cfl { admissible, .. } = &e {
                eprintln!("error: {e}\nadmissible dt: {admissible:e}");
            } else {
                eprintln!("error: {e}");
            }
            ExitCode::of(&e)
        }
    };
    process::exit(code as i32);
}
