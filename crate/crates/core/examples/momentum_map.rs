//! Momentum map of the rotation action on R³ and its equivariance.

use std::sync::Arc;

use coadjoint::action::{builtin_chart, canonical_poisson, PhaseState};
use coadjoint::lie::pairing;

fn main() -> coadjoint::Result<()> {
    let chart = Arc::new(builtin_chart("so3_on_r3")?);
    let s = PhaseState::new(vec![1.0, 0.2, -0.3], vec![0.4, 0.9, 0.1])?;
    let m = chart.momentum_map(&s)?;
    println!("J(q, p) = {:?}", m.0);

    let (u, v) = ([1.0, 0.0, 0.0], [0.0, 0.0, 1.0]);
    let pb = canonical_poisson(&chart.momentum_pairing(&u), &chart.momentum_pairing(&v), &s)?;
    let uv = chart.algebra().bracket(&u, &v)?;
    println!("{{<J,u>, <J,v>}} = {pb:.6}, -<J, [u,v]> = {:.6}", -pairing(&m, &uv));

    let res = chart.equivariance_residual(&s)?;
    println!("equivariance residual {:e}", res.iter().fold(0.0_f64, |a, b| a.max(b.abs())));
    Ok(())
}
