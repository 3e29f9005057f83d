//! Backward Kolmogorov solve for E[m1(T)] and a Monte Carlo check.

use coadjoint::field::ScalarField;
use coadjoint::kolmogorov::{backward_solve, mc_expectation, DensityGrid, GeneratorSpec, SolveOptions};
use coadjoint::suites::rigid_body;

fn main() -> coadjoint::Result<()> {
    let horizon = 0.2;
    let spec = GeneratorSpec::lie_poisson(rigid_body::algebra(), &rigid_body::kinetic_inverse(), &rigid_body::noise(0))?;
    let f0 = ScalarField::coordinate(0, 3);
    let geometry = DensityGrid::cube(-1.5, 1.5, 40)?;
    let rep = backward_solve(&spec, &f0, &geometry, SolveOptions { horizon, dt: None })?;
    let pde = rep.grid.interpolate(&rigid_body::M0)?;
    println!("pde: {pde:.6} after {} steps", rep.steps);

    let sys = rigid_body::system(0)?;
    let mc = mc_expectation(&sys, &f0, &rigid_body::M0, horizon, 256, 20_000, 1)?;
    println!("mc:  {:.6} +- {:.1e}", mc.mean, mc.stderr);
    Ok(())
}
