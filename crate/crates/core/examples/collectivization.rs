//! Phase-space dynamics pushed through the momentum map match the
//! Lie-Poisson equation driven by the same noise.

use coadjoint::action::builtin_chart;
use coadjoint::diagnostics::strong_error;
use coadjoint::dynamics::reconstruct_momentum;
use coadjoint::integrators::{integrate, Scheme};
use coadjoint::noise::sample_grid;
use coadjoint::suites::rigid_body;

fn main() -> coadjoint::Result<()> {
    let chart = builtin_chart("so3_on_r3")?;
    let phase = rigid_body::phase_system(0)?;
    let reduced = rigid_body::system(0)?;
    let x0 = rigid_body::phase_point(&rigid_body::M0).to_flat();
    for steps in [256, 1024, 4096] {
        let g = sample_grid(&rigid_body::noise(11), 1.0, steps)?;
        let lifted = reconstruct_momentum(&integrate(&phase, Scheme::HeunStrat, &g, &x0)?, &chart)?;
        let direct = integrate(&reduced, Scheme::HeunStrat, &g, &rigid_body::M0)?;
        println!("M = {steps:5}  max |J(q,p) - m| = {:.3e}", strong_error(&lifted, &direct)?);
    }
    Ok(())
}
