//! Builds a Lie algebra from structure constants and checks its identities.

use coadjoint::lie::{builtin, pairing, AlgebraVector, CoVector, LieAlgebra};

fn main() -> coadjoint::Result<()> {
    // se(2) with basis (rotation, x, y): [r, x] = y, [r, y] = -x
    let se2 = LieAlgebra::from_entries(
        "se2_custom",
        3,
        &[(0, 1, 2, 1.0), (1, 0, 2, -1.0), (0, 2, 1, -1.0), (2, 0, 1, 1.0)],
    )?;
    println!("{}: antisymmetry {:e}, jacobi {:e}", se2.name(), se2.antisymmetry_residual(), se2.jacobi_residual());

    let so3 = builtin("so3")?;
    let (u, v) = ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
    println!("[e1, e2] in so3 = {:?}", so3.bracket(&u, &v)?.0);

    let m = [0.3, -0.5, 0.8];
    let w = [0.2, 0.1, -0.4];
    let lhs = pairing(&so3.ad_star(&v, &m)?, &AlgebraVector(w.to_vec()));
    let rhs = pairing(&CoVector(m.to_vec()), &so3.bracket(&v, &w)?);
    println!("<ad*_v m, w> = {lhs:.6}, <m, [v, w]> = {rhs:.6}");

    println!("so3 as JSON: {}", so3.to_json_string()?);
    Ok(())
}
