//! One stochastic rigid-body path with Casimir and energy diagnostics.

use coadjoint::diagnostics::observable_series;
use coadjoint::dynamics::{casimir, ReducedHamiltonian};
use coadjoint::integrators::{integrate, Scheme};
use coadjoint::noise::sample_grid;
use coadjoint::suites::rigid_body;

fn main() -> coadjoint::Result<()> {
    let sys = rigid_body::system(0)?;
    let grid = sample_grid(&rigid_body::noise(42), 1.0, 1024)?;
    let traj = integrate(&sys, Scheme::HeunStrat, &grid, &rigid_body::M0)?;
    println!("m(0) = {:?}", traj.initial());
    println!("m(T) = {:?}", traj.last());

    let c = casimir(&rigid_body::algebra(), "quadratic")?;
    let h = ReducedHamiltonian::kinetic(rigid_body::algebra(), rigid_body::kinetic_inverse())?;
    println!("sup Casimir drift {:e}", observable_series(&traj, &c)?.sup());
    println!("sup energy drift  {:e}", observable_series(&traj, &h.lie_poisson_field())?.sup());

    let mut csv = Vec::new();
    traj.subsample(256).write_csv(&mut csv)?;
    print!("{}", String::from_utf8_lossy(&csv));
    Ok(())
}
