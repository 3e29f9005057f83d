//! Casimir drift of the Heun scheme under refinement, averaged over seeds.

use coadjoint::diagnostics::empirical_order;
use coadjoint::suites::casimir_drift_study;

fn main() -> coadjoint::Result<()> {
    let seeds = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(8);
    let (hs, errs) = casimir_drift_study(seeds)?;
    for (h, e) in hs.iter().zip(&errs) {
        println!("dt {h:.2e}  mean sup drift {e:.3e}");
    }
    println!("order {:.3}", empirical_order(&hs, &errs)?);
    Ok(())
}
