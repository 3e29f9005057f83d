//! Heun (Stratonovich) and corrected Euler (Itô) on the same Brownian path.

use coadjoint::diagnostics::{empirical_order, strong_error};
use coadjoint::integrators::{integrate, Scheme};
use coadjoint::noise::{coarsen, sample_grid};
use coadjoint::suites::rigid_body;

fn main() -> coadjoint::Result<()> {
    let sys = rigid_body::system(0)?;
    let fine = sample_grid(&rigid_body::noise(5), 1.0, 1 << 12)?;
    let (mut hs, mut errs) = (Vec::new(), Vec::new());
    for factor in [32, 16, 8, 4, 2, 1] {
        let g = coarsen(&fine, factor)?;
        let a = integrate(&sys, Scheme::HeunStrat, &g, &rigid_body::M0)?;
        let b = integrate(&sys, Scheme::EulerIto, &g, &rigid_body::M0)?;
        let e = strong_error(&a, &b)?;
        println!("M = {:5}  max |heun - euler| = {e:.3e}", g.steps());
        hs.push(g.dt());
        errs.push(e);
    }
    println!("fitted order {:.3} (one path)", empirical_order(&hs, &errs)?);
    Ok(())
}
