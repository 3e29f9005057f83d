use std::sync::Arc;

use coadjoint::dynamics::{casimir, lie_poisson_system};
use coadjoint::field::ScalarField;
use coadjoint::integrators::integrate_deterministic;
use coadjoint::kolmogorov::{
    adjoint_apply, backward_solve, forward_solve, generator_apply, DensityGrid, GeneratorSpec, SolveOptions,
};
use coadjoint::lie::{builtin, LieAlgebra};
use coadjoint::noise::NoiseSpec;
use coadjoint::suites::rigid_body;

fn so3() -> Arc<LieAlgebra> {
    Arc::new(builtin("so3").unwrap())
}

fn rigid_spec() -> GeneratorSpec {
    GeneratorSpec::lie_poisson(so3(), &rigid_body::kinetic_inverse(), &rigid_body::noise(0)).unwrap()
}

/// `exp(−|x − c|² / 2s²)` with analytic derivatives.
fn bump(c: [f64; 3], s: f64) -> ScalarField {
    let v = move |x: &[f64]| -> f64 {
        let r2: f64 = (0..3).map(|i| (x[i] - c[i]).powi(2)).sum();
        (-0.5 * r2 / (s * s)).exp()
    };
    ScalarField::new("bump", 3, v)
        .with_gradient(move |x| (0..3).map(|i| -(x[i] - c[i]) / (s * s) * v(x)).collect())
        .with_hessian(move |x| {
            let mut h = vec![0.0; 9];
            for i in 0..3 {
                for j in 0..3 {
                    let d = if i == j { 1.0 } else { 0.0 };
                    h[i * 3 + j] = ((x[i] - c[i]) * (x[j] - c[j]) / (s * s * s * s) - d / (s * s)) * v(x);
                }
            }
            h
        })
}

#[test]
fn generator_and_adjoint_are_dual() {
    let spec = rigid_spec();
    let f = bump([0.3, -0.2, 0.1], 0.35);
    let g = bump([-0.1, 0.25, 0.0], 0.3);
    let geometry = DensityGrid::cube(-2.0, 2.0, 64).unwrap();
    let h = geometry.spacing();
    let w = h[0] * h[1] * h[2];
    let (mut lhs, mut rhs, mut scale) = (0.0, 0.0, 0.0);
    for i in 0..64 {
        for j in 0..64 {
            for k in 0..64 {
                let x = geometry.node(i, j, k);
                let a = generator_apply(&spec, &f, &x).unwrap() * g.value(&x);
                let b = f.value(&x) * adjoint_apply(&spec, &g, &x).unwrap();
                lhs += a * w;
                rhs += b * w;
                scale += a.abs() * w;
            }
        }
    }
    assert!(scale > 1e-3, "test functions overlap too little: {scale}");
    assert!((lhs - rhs).abs() <= 1e-4, "{lhs} vs {rhs}");
}

#[test]
fn casimir_is_a_stationary_backward_solution() {
    let spec = rigid_spec();
    let c = casimir(&so3(), "quadratic").unwrap();
    let geometry = DensityGrid::cube(-1.5, 1.5, 64).unwrap();
    let rep = backward_solve(&spec, &c, &geometry, SolveOptions { horizon: 0.1, dt: None }).unwrap();
    // boundary extrapolation only reaches a few cells in over this horizon
    let drift = rep.grid.max_deviation_from(&c, 12);
    assert!(drift <= 1e-4, "Casimir drift {drift:e}");
    // off-node values carry interpolation error, so compare like with like
    let mut initial = DensityGrid::cube(-1.5, 1.5, 64).unwrap();
    initial.fill(&c).unwrap();
    let m0 = rigid_body::M0;
    assert!((rep.grid.interpolate(&m0).unwrap() - initial.interpolate(&m0).unwrap()).abs() <= 1e-4);
}

#[test]
fn pure_transport_follows_characteristics() {
    let spec = GeneratorSpec::lie_poisson(so3(), &rigid_body::kinetic_inverse(), &NoiseSpec::none(0)).unwrap();
    let flow = lie_poisson_system(so3(), rigid_body::kinetic_inverse(), &NoiseSpec::none(0), Default::default()).unwrap();
    let f0 = ScalarField::new("sin", 3, |m| (2.0 * m[0]).sin() + m[1] * m[2]);
    let horizon = 0.1;
    let probes = [[0.6, 0.7, 0.4], [-0.5, 0.2, 0.3], [0.1, -0.4, -0.6]];
    let err = |n: usize| -> f64 {
        let geometry = DensityGrid::cube(-1.5, 1.5, n).unwrap();
        let rep = backward_solve(&spec, &f0, &geometry, SolveOptions { horizon, dt: None }).unwrap();
        probes
            .iter()
            .map(|x| {
                let end = integrate_deterministic(&flow, horizon, 200, x).unwrap();
                (rep.grid.interpolate(x).unwrap() - f0.value(end.last())).abs()
            })
            .fold(0.0, f64::max)
    };
    let (coarse, fine) = (err(25), err(49));
    assert!(fine < 2e-2, "{fine:e}");
    assert!(fine < coarse / 2.0, "{coarse:e} -> {fine:e}");
}

#[test]
fn forward_density_reproduces_backward_expectation() {
    let spec = rigid_spec();
    let geometry = DensityGrid::cube(-1.5, 1.5, 40).unwrap();
    let opts = SolveOptions { horizon: 0.2, dt: None };
    let fwd = forward_solve(&spec, &rigid_body::M0, &geometry, opts).unwrap();
    let mass = fwd.grid.mass();
    assert!((mass - 1.0).abs() < 1e-3, "mass {mass}");
    let h = geometry.spacing();
    let w = h[0] * h[1] * h[2];
    let mut mean_m1 = 0.0;
    for i in 0..40 {
        for j in 0..40 {
            for k in 0..40 {
                mean_m1 += geometry.node(i, j, k)[0] * fwd.grid.values[geometry.index(i, j, k)] * w;
            }
        }
    }
    let bwd = backward_solve(&spec, &ScalarField::coordinate(0, 3), &geometry, opts).unwrap();
    let expected = bwd.grid.interpolate(&rigid_body::M0).unwrap();
    assert!((mean_m1 - expected).abs() < 1e-2, "forward {mean_m1} vs backward {expected}");
}
