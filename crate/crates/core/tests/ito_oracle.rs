mod common;

use std::sync::Arc;

use coadjoint::action::{builtin_chart, sl2_on_line, ActionChart, PhaseState};
use coadjoint::dynamics::{
    hamel_system, ito_correction_phase, lie_poisson_system, phase_space_system, QuadraticLagrangian,
    ReducedHamiltonian, UPolicy,
};
use coadjoint::field::ScalarField;
use coadjoint::lie::AlgebraVector;
use coadjoint::noise::NoiseSpec;
use coadjoint::poisson::{nested_bracket_fd, Canonical, HamelPoisson, LiePoisson};
use common::{max_abs_diff, rng, uniform_vec};

fn charts() -> Vec<Arc<ActionChart>> {
    vec![
        Arc::new(builtin_chart("so3_on_r3").unwrap()),
        Arc::new(builtin_chart("h3_on_r3").unwrap()),
        Arc::new(builtin_chart("rn_translation").unwrap()),
        Arc::new(sl2_on_line()),
    ]
}

fn noise_for(r: usize, seed: u64) -> NoiseSpec {
    let mut g = rng(seed);
    NoiseSpec::new(
        (0..2).map(|_| AlgebraVector(uniform_vec(&mut g, r, 1.0))).collect(),
        seed,
    )
}

fn identity(r: usize) -> Vec<f64> {
    let mut k = vec![0.0; r * r];
    for i in 0..r {
        k[i * r + i] = 1.0;
    }
    k
}

/// ½ Σ_k {g_k, {g_k, x_i}} for every coordinate `x_i`.
fn oracle(structure: &dyn coadjoint::poisson::PoissonStructure, gs: &[ScalarField], x: &[f64]) -> Vec<f64> {
    let d = x.len();
    (0..d)
        .map(|i| {
            let f = ScalarField::coordinate(i, d);
            gs.iter().map(|g| 0.5 * nested_bracket_fd(structure, g, &f, x)).sum()
        })
        .collect()
}

#[test]
fn phase_space_correction_matches_nested_brackets() {
    for (ci, chart) in charts().into_iter().enumerate() {
        let (r, n) = (chart.r(), chart.n());
        let noise = noise_for(r, 100 + ci as u64);
        let gs: Vec<ScalarField> = noise.xi.iter().map(|xi| chart.momentum_pairing(xi)).collect();
        let mut g = rng(ci as u64);
        for _ in 0..20 {
            let x = uniform_vec(&mut g, 2 * n, 1.5);
            let s = PhaseState::from_flat(&x).unwrap();
            let closed = ito_correction_phase(&chart, &noise, &s).unwrap();
            let expected = oracle(&Canonical::new(n), &gs, &x);
            let err = max_abs_diff(&closed, &expected);
            assert!(err <= 1e-9, "chart {} at {x:?}: {closed:?} vs {expected:?}", chart.name());
        }
        // the builder wires the same correction in
        let l = QuadraticLagrangian::new(chart.algebra().clone(), identity(r))
            .unwrap()
            .with_chart(chart.clone())
            .unwrap();
        let sys = phase_space_system(&l, &noise, UPolicy::Legendre).unwrap();
        let x = uniform_vec(&mut g, 2 * n, 1.0);
        let s = PhaseState::from_flat(&x).unwrap();
        assert_eq!(
            sys.eval_ito_correction(0.0, &x).unwrap(),
            ito_correction_phase(&chart, &noise, &s).unwrap()
        );
    }
}

#[test]
fn lie_poisson_correction_matches_nested_brackets() {
    for chart in charts() {
        let alg = chart.algebra().clone();
        let r = alg.dim();
        let noise = noise_for(r, 7);
        let sys = lie_poisson_system(alg.clone(), identity(r), &noise, Default::default()).unwrap();
        let gs: Vec<ScalarField> = noise.xi.iter().map(|xi| ScalarField::linear(xi.0.clone())).collect();
        let lp = LiePoisson::new(alg);
        let mut g = rng(3);
        for _ in 0..20 {
            let m = uniform_vec(&mut g, r, 2.0);
            let closed = sys.eval_ito_correction(0.0, &m).unwrap();
            let expected = oracle(&lp, &gs, &m);
            assert!(max_abs_diff(&closed, &expected) <= 1e-9, "{closed:?} vs {expected:?}");
        }
    }
}

#[test]
fn hamel_correction_matches_nested_brackets() {
    for chart in charts() {
        let (r, n) = (chart.r(), chart.n());
        let noise = noise_for(r, 21);
        let h = ReducedHamiltonian::kinetic(chart.algebra().clone(), identity(r)).unwrap();
        let sys = hamel_system(chart.clone(), &h, &noise).unwrap();
        let gs: Vec<ScalarField> = noise
            .xi
            .iter()
            .map(|xi| {
                let mut c = xi.0.clone();
                c.extend(vec![0.0; n]);
                ScalarField::linear(c)
            })
            .collect();
        let hp = HamelPoisson::new(chart.clone());
        let mut g = rng(5);
        for _ in 0..20 {
            let x = uniform_vec(&mut g, r + n, 1.5);
            let closed = sys.eval_ito_correction(0.0, &x).unwrap();
            let expected = oracle(&hp, &gs, &x);
            assert!(
                max_abs_diff(&closed, &expected) <= 1e-9,
                "chart {}: {closed:?} vs {expected:?}",
                chart.name()
            );
        }
    }
}

#[test]
fn rotation_chart_q_block_by_hand() {
    // ξ = e3 on the rotation chart: a(q) = q × e3 = (q2, −q1, 0), so
    // ½ ∂_j a^i a^j = ½ (−q1, −q2, 0).
    let chart = builtin_chart("so3_on_r3").unwrap();
    let noise = NoiseSpec::new(vec![AlgebraVector::basis(3, 2)], 0);
    let s = PhaseState::new(vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 0.0]).unwrap();
    let c = ito_correction_phase(&chart, &noise, &s).unwrap();
    assert_eq!(&c[..3], &[-0.5, 0.0, 0.0]);
    let s = PhaseState::new(vec![0.3, -0.7, 2.0], vec![1.0, 0.5, -0.2]).unwrap();
    let c = ito_correction_phase(&chart, &noise, &s).unwrap();
    assert!(max_abs_diff(&c[..3], &[-0.15, 0.35, 0.0]) < 1e-15);
    // p-block: the lifted field is linear in p and rotates it the same way
    assert!(max_abs_diff(&c[3..], &[-0.5, -0.25, 0.0]) < 1e-15);
}
