//! Poisson tensors `Π^{ij}(x) = {x^i, x^j}` and the bracket calculus built
//! on them: `{f, g} = ∂_i f Π^{ij} ∂_j g`, Hamiltonian vector fields
//! `X_h = Π ∇h` (so that `X_h f = {f, h}`), and nested brackets.
//!
//! Three structures are provided:
//!
//! * [`Canonical`] on `T*Q` with coordinates `(q, p)`;
//! * [`LiePoisson`], the minus Lie–Poisson bracket on `g*`,
//!   `{m_α, m_β} = −c_αβ^γ m_γ`;
//! * [`HamelPoisson`] on `g* × Q` with coordinates `(m, q)`,
//!   `{m_α, m_β} = −c_αβ^γ m_γ`, `{q^i, m_β} = A_β^i(q)`, `{q^i, q^j} = 0`.

use std::sync::Arc;

use crate::action::ActionChart;
use crate::field::{fd_step, ScalarField};
use crate::lie::LieAlgebra;

pub trait PoissonStructure: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    /// Row-major `d × d` tensor at `x`.
    fn tensor(&self, x: &[f64]) -> Vec<f64>;

    /// `∂_l Π^{ij}` stored at `(l·d + i)·d + j`.
    fn tensor_derivative(&self, x: &[f64]) -> Vec<f64>;
}

#[derive(Debug, Clone)]
pub struct Canonical {
    n: usize,
}

impl Canonical {
    pub fn new(n: usize) -> Self {
        Self { n }
    }
}

impl PoissonStructure for Canonical {
    fn name(&self) -> &str {
        "canonical"
    }

    fn dim(&self) -> usize {
        2 * self.n
    }

    fn tensor(&self, _x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let d = 2 * n;
        let mut pi = vec![0.0; d * d];
        for k in 0..n {
            pi[k * d + n + k] = 1.0;
            pi[(n + k) * d + k] = -1.0;
        }
        pi
    }

    fn tensor_derivative(&self, _x: &[f64]) -> Vec<f64> {
        let d = 2 * self.n;
        vec![0.0; d * d * d]
    }
}

#[derive(Debug, Clone)]
pub struct LiePoisson {
    alg: Arc<LieAlgebra>,
}

impl LiePoisson {
    pub fn new(alg: Arc<LieAlgebra>) -> Self {
        Self { alg }
    }
}

impl PoissonStructure for LiePoisson {
    fn name(&self) -> &str {
        "lie_poisson"
    }

    fn dim(&self) -> usize {
        self.alg.dim()
    }

    fn tensor(&self, m: &[f64]) -> Vec<f64> {
        let r = self.alg.dim();
        let mut pi = vec![0.0; r * r];
        for a in 0..r {
            for b in 0..r {
                let s: f64 = (0..r).map(|g| self.alg.c(a, b, g) * m[g]).sum();
                pi[a * r + b] = -s;
            }
        }
        pi
    }

    fn tensor_derivative(&self, _m: &[f64]) -> Vec<f64> {
        let r = self.alg.dim();
        let mut d = vec![0.0; r * r * r];
        for l in 0..r {
            for a in 0..r {
                for b in 0..r {
                    d[(l * r + a) * r + b] = -self.alg.c(a, b, l);
                }
            }
        }
        d
    }
}

#[derive(Clone)]
pub struct HamelPoisson {
    chart: Arc<ActionChart>,
}

impl HamelPoisson {
    pub fn new(chart: Arc<ActionChart>) -> Self {
        Self { chart }
    }
}

impl PoissonStructure for HamelPoisson {
    fn name(&self) -> &str {
        "hamel"
    }

    fn dim(&self) -> usize {
        self.chart.algebra().dim() + self.chart.n()
    }

    fn tensor(&self, x: &[f64]) -> Vec<f64> {
        let alg = self.chart.algebra();
        let r = alg.dim();
        let n = self.chart.n();
        let d = r + n;
        let (m, q) = x.split_at(r);
        let a = self.chart.coefficients(q);
        let mut pi = vec![0.0; d * d];
        for al in 0..r {
            for be in 0..r {
                let s: f64 = (0..r).map(|g| alg.c(al, be, g) * m[g]).sum();
                pi[al * d + be] = -s;
            }
            for i in 0..n {
                let v = a[al * n + i];
                // {q^i, m_α} = A_α^i, {m_α, q^i} = −A_α^i
                pi[(r + i) * d + al] = v;
                pi[al * d + r + i] = -v;
            }
        }
        pi
    }

    fn tensor_derivative(&self, x: &[f64]) -> Vec<f64> {
        let alg = self.chart.algebra();
        let r = alg.dim();
        let n = self.chart.n();
        let d = r + n;
        let q = &x[r..];
        let da = self.chart.derivatives(q);
        let mut out = vec![0.0; d * d * d];
        for l in 0..r {
            for a in 0..r {
                for b in 0..r {
                    out[(l * d + a) * d + b] = -alg.c(a, b, l);
                }
            }
        }
        for j in 0..n {
            let l = r + j;
            for al in 0..r {
                for i in 0..n {
                    let v = da[(al * n + i) * n + j];
                    out[(l * d + r + i) * d + al] = v;
                    out[(l * d + al) * d + r + i] = -v;
                }
            }
        }
        out
    }
}

fn bilinear(u: &[f64], pi: &[f64], v: &[f64]) -> f64 {
    let d = u.len();
    let mut s = 0.0;
    for i in 0..d {
        if u[i] == 0.0 {
            continue;
        }
        let row = &pi[i * d..(i + 1) * d];
        s += u[i] * row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    }
    s
}

/// `{f, g}(x) = ∇f · Π ∇g`.
pub fn bracket(structure: &dyn PoissonStructure, f: &ScalarField, g: &ScalarField, x: &[f64]) -> f64 {
    let pi = structure.tensor(x);
    bilinear(&f.gradient(x), &pi, &g.gradient(x))
}

/// `X_h(x) = Π ∇h`, so that `X_h f = {f, h}`.
pub fn hamiltonian_vector(structure: &dyn PoissonStructure, h: &ScalarField, x: &[f64]) -> Vec<f64> {
    let pi = structure.tensor(x);
    let gh = h.gradient(x);
    let d = x.len();
    (0..d)
        .map(|i| pi[i * d..(i + 1) * d].iter().zip(&gh).map(|(a, b)| a * b).sum())
        .collect()
}

/// Gradient of `{f, g}` from Hessians and `∂Π`:
/// `∂_l{f,g} = f_il Π^{ij} g_j + f_i ∂_lΠ^{ij} g_j + f_i Π^{ij} g_jl`.
pub fn bracket_gradient(
    structure: &dyn PoissonStructure,
    f: &ScalarField,
    g: &ScalarField,
    x: &[f64],
) -> Vec<f64> {
    let d = x.len();
    let pi = structure.tensor(x);
    let dpi = structure.tensor_derivative(x);
    let gf = f.gradient(x);
    let gg = g.gradient(x);
    let hf = f.hessian(x);
    let hg = g.hessian(x);
    let pi_gg: Vec<f64> = (0..d)
        .map(|i| (0..d).map(|j| pi[i * d + j] * gg[j]).sum())
        .collect();
    let gf_pi: Vec<f64> = (0..d)
        .map(|j| (0..d).map(|i| gf[i] * pi[i * d + j]).sum())
        .collect();
    (0..d)
        .map(|l| {
            let t1: f64 = (0..d).map(|i| hf[i * d + l] * pi_gg[i]).sum();
            let t2 = bilinear(&gf, &dpi[l * d * d..(l + 1) * d * d], &gg);
            let t3: f64 = (0..d).map(|j| gf_pi[j] * hg[j * d + l]).sum();
            t1 + t2 + t3
        })
        .collect()
}

/// `{g, {g, f}}(x)` using analytic (or field-level fallback) Hessians.
pub fn nested_bracket(
    structure: &dyn PoissonStructure,
    g: &ScalarField,
    f: &ScalarField,
    x: &[f64],
) -> f64 {
    let inner = bracket_gradient(structure, g, f, x);
    let pi = structure.tensor(x);
    bilinear(&g.gradient(x), &pi, &inner)
}

/// `{g, {g, f}}(x)` with the outer gradient taken by central differences of
/// the inner bracket. Independent of [`bracket_gradient`]; used as an
/// oracle.
pub fn nested_bracket_fd(
    structure: &dyn PoissonStructure,
    g: &ScalarField,
    f: &ScalarField,
    x: &[f64],
) -> f64 {
    let h = fd_step(x);
    let mut probe = x.to_vec();
    let inner = |p: &[f64]| -> f64 {
        let pi = structure.tensor(p);
        bilinear(&g.gradient(p), &pi, &f.gradient(p))
    };
    let grad: Vec<f64> = (0..x.len())
        .map(|l| {
            probe[l] = x[l] + h;
            let fp = inner(&probe);
            probe[l] = x[l] - h;
            let fm = inner(&probe);
            probe[l] = x[l];
            (fp - fm) / (2.0 * h)
        })
        .collect();
    let pi = structure.tensor(x);
    bilinear(&g.gradient(x), &pi, &grad)
}

/// Max-norm of `Π + Πᵀ` at `x`.
pub fn antisymmetry_residual(structure: &dyn PoissonStructure, x: &[f64]) -> f64 {
    let d = structure.dim();
    let pi = structure.tensor(x);
    let mut worst = 0.0_f64;
    for i in 0..d {
        for j in 0..d {
            worst = worst.max((pi[i * d + j] + pi[j * d + i]).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::builtin_chart;
    use crate::lie::builtin;

    #[test]
    fn canonical_relations() {
        let c = Canonical::new(2);
        let x = [0.1, 0.2, 0.3, 0.4];
        for i in 0..2 {
            for j in 0..2 {
                let q = ScalarField::coordinate(i, 4);
                let p = ScalarField::coordinate(2 + j, 4);
                let v = bracket(&c, &q, &p, &x);
                assert_eq!(v, if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn lie_poisson_coordinate_brackets() {
        let so3 = Arc::new(builtin("so3").unwrap());
        let lp = LiePoisson::new(so3);
        let m = [0.3, -0.5, 1.2];
        let m1 = ScalarField::coordinate(0, 3);
        let m2 = ScalarField::coordinate(1, 3);
        assert!((bracket(&lp, &m1, &m2, &m) + m[2]).abs() < 1e-15);
    }

    #[test]
    fn tensor_derivative_matches_fd() {
        let chart = Arc::new(builtin_chart("h3_on_r3").unwrap());
        let hp = HamelPoisson::new(chart);
        let x = [0.4, -0.2, 0.9, 1.1, -0.6, 0.3];
        let d = 6;
        let dpi = hp.tensor_derivative(&x);
        let h = 1e-6;
        for l in 0..d {
            let mut xp = x;
            let mut xm = x;
            xp[l] += h;
            xm[l] -= h;
            let tp = hp.tensor(&xp);
            let tm = hp.tensor(&xm);
            for k in 0..d * d {
                let fd = (tp[k] - tm[k]) / (2.0 * h);
                assert!((fd - dpi[l * d * d + k]).abs() < 1e-8);
            }
        }
        assert_eq!(antisymmetry_residual(&hp, &x), 0.0);
    }

    #[test]
    fn nested_bracket_routes_agree() {
        let so3 = Arc::new(builtin("so3").unwrap());
        let lp = LiePoisson::new(so3);
        let g = ScalarField::linear(vec![0.2, -0.7, 0.4]);
        let f = ScalarField::new("cubic", 3, |m| m[0] * m[1] * m[2] + m[0].powi(3));
        let m = [0.5, 1.3, -0.8];
        let a = nested_bracket(&lp, &g, &f, &m);
        let b = nested_bracket_fd(&lp, &g, &f, &m);
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
}
