//! Deterministic heavy top in Hamel coordinates, energy over time.

use coadjoint::diagnostics::observable_series;
use coadjoint::integrators::integrate_deterministic;
use coadjoint::suites::heavy_top;

fn main() -> coadjoint::Result<()> {
    let (sys, h, x0) = heavy_top()?;
    let energy = h.hamel_field(3);
    for steps in [500, 1000, 2000] {
        let tr = integrate_deterministic(&sys, 10.0, steps, &x0)?;
        let drift = observable_series(&tr, &energy)?;
        println!("dt = {:.4}  sup |H - H0| = {:.3e}  final state {:?}", 10.0 / steps as f64, drift.sup(), tr.last());
    }
    Ok(())
}
