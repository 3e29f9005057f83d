//! Scalar observables on flat coordinate spaces with optional analytic
//! derivatives. Missing derivatives fall back to central differences with
//! step `1e-5·(1 + |x|)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{check_dim, Result};

pub type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Relative step used by the finite-difference fallback.
pub const FD_STEP: f64 = 1e-5;

pub(crate) fn fd_step(x: &[f64]) -> f64 {
    FD_STEP * (1.0 + norm(x))
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[derive(Clone)]
pub struct ScalarField {
    name: String,
    dim: usize,
    value: ValueFn,
    grad: Option<VectorFn>,
    hess: Option<VectorFn>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("analytic_gradient", &self.grad.is_some())
            .field("analytic_hessian", &self.hess.is_some())
            .finish()
    }
}

impl ScalarField {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            dim,
            value: Arc::new(value),
            grad: None,
            hess: None,
        }
    }

    pub fn with_gradient(
        mut self,
        grad: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.grad = Some(Arc::new(grad));
        self
    }

    /// Row-major `dim × dim` Hessian.
    pub fn with_hessian(
        mut self,
        hess: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.hess = Some(Arc::new(hess));
        self
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Drops analytic derivatives so every query goes through finite
    /// differences.
    pub fn without_derivatives(&self) -> Self {
        Self {
            name: self.name.clone(),
            dim: self.dim,
            value: self.value.clone(),
            grad: None,
            hess: None,
        }
    }

    /// Keeps the analytic gradient but forces the Hessian through finite
    /// differences of it.
    pub fn without_hessian(&self) -> Self {
        Self {
            hess: None,
            ..self.clone()
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_analytic_gradient(&self) -> bool {
        self.grad.is_some()
    }

    pub fn has_analytic_hessian(&self) -> bool {
        self.hess.is_some()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn try_value(&self, x: &[f64]) -> Result<f64> {
        check_dim("scalar field argument", self.dim, x.len())?;
        Ok(self.value(x))
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match &self.grad {
            Some(g) => g(x),
            None => self.gradient_fd(x),
        }
    }

    /// Central-difference gradient regardless of analytic availability.
    pub fn gradient_fd(&self, x: &[f64]) -> Vec<f64> {
        let h = fd_step(x);
        let mut probe = x.to_vec();
        (0..x.len())
            .map(|i| {
                probe[i] = x[i] + h;
                let fp = self.value(&probe);
                probe[i] = x[i] - h;
                let fm = self.value(&probe);
                probe[i] = x[i];
                (fp - fm) / (2.0 * h)
            })
            .collect()
    }

    pub fn hessian(&self, x: &[f64]) -> Vec<f64> {
        if let Some(hs) = &self.hess {
            return hs(x);
        }
        let d = x.len();
        let mut out = vec![0.0; d * d];
        let mut probe = x.to_vec();
        if self.grad.is_some() {
            let h = fd_step(x);
            for l in 0..d {
                probe[l] = x[l] + h;
                let gp = self.gradient(&probe);
                probe[l] = x[l] - h;
                let gm = self.gradient(&probe);
                probe[l] = x[l];
                for i in 0..d {
                    out[i * d + l] = (gp[i] - gm[i]) / (2.0 * h);
                }
            }
            symmetrize(&mut out, d);
        } else {
            // second differences of values; a larger step keeps the
            // cancellation error near 1e-8
            let h = 1e-4 * (1.0 + norm(x));
            let f0 = self.value(x);
            for i in 0..d {
                for j in i..d {
                    let v = if i == j {
                        probe[i] = x[i] + h;
                        let fp = self.value(&probe);
                        probe[i] = x[i] - h;
                        let fm = self.value(&probe);
                        probe[i] = x[i];
                        (fp - 2.0 * f0 + fm) / (h * h)
                    } else {
                        let mut eval = |si: f64, sj: f64| {
                            probe[i] = x[i] + si * h;
                            probe[j] = x[j] + sj * h;
                            let v = self.value(&probe);
                            probe[i] = x[i];
                            probe[j] = x[j];
                            v
                        };
                        (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0))
                            / (4.0 * h * h)
                    };
                    out[i * d + j] = v;
                    out[j * d + i] = v;
                }
            }
        }
        out
    }

    /// Worst relative disagreement between the analytic gradient and central
    /// differences at `x`, normalized by `1 + |∇f|∞`.
    pub fn gradient_residual(&self, x: &[f64]) -> f64 {
        let a = self.gradient(x);
        let n = self.gradient_fd(x);
        let scale = 1.0 + a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        a.iter()
            .zip(&n)
            .fold(0.0_f64, |m, (u, v)| m.max((u - v).abs()))
            / scale
    }

    pub fn constant(c: f64, dim: usize) -> Self {
        Self::new(format!("const({c})"), dim, move |_| c)
            .with_gradient(move |_| vec![0.0; dim])
            .with_hessian(move |_| vec![0.0; dim * dim])
    }

    /// The coordinate function `x ↦ x_index`.
    pub fn coordinate(index: usize, dim: usize) -> Self {
        Self::new(format!("x{}", index + 1), dim, move |x| x[index])
            .with_gradient(move |_| {
                let mut g = vec![0.0; dim];
                g[index] = 1.0;
                g
            })
            .with_hessian(move |_| vec![0.0; dim * dim])
    }

    /// `x ↦ a · x`.
    pub fn linear(coeffs: Vec<f64>) -> Self {
        let dim = coeffs.len();
        let c2 = coeffs.clone();
        Self::new("linear", dim, move |x| {
            coeffs.iter().zip(x).map(|(a, b)| a * b).sum()
        })
        .with_gradient(move |_| c2.clone())
        .with_hessian(move |_| vec![0.0; dim * dim])
    }

    /// `x ↦ x_i · x_j`.
    pub fn coordinate_product(i: usize, j: usize, dim: usize) -> Self {
        Self::new(format!("x{}*x{}", i + 1, j + 1), dim, move |x| x[i] * x[j])
            .with_gradient(move |x| {
                let mut g = vec![0.0; dim];
                g[i] += x[j];
                g[j] += x[i];
                g
            })
            .with_hessian(move |_| {
                let mut h = vec![0.0; dim * dim];
                h[i * dim + j] += 1.0;
                h[j * dim + i] += 1.0;
                h
            })
    }

    /// `x ↦ ½ xᵀ S x` for a symmetric row-major `S`.
    pub fn quadratic(name: impl Into<String>, s: Vec<f64>) -> Self {
        let dim = (s.len() as f64).sqrt().round() as usize;
        assert_eq!(dim * dim, s.len(), "quadratic form must be square");
        let s1 = s.clone();
        let s2 = s.clone();
        Self::new(name, dim, move |x| {
            let mut v = 0.0;
            for i in 0..dim {
                for j in 0..dim {
                    v += x[i] * s1[i * dim + j] * x[j];
                }
            }
            0.5 * v
        })
        .with_gradient(move |x| {
            (0..dim)
                .map(|i| (0..dim).map(|j| s2[i * dim + j] * x[j]).sum())
                .collect()
        })
        .with_hessian(move |_| s.clone())
    }
}

fn symmetrize(m: &mut [f64], d: usize) {
    for i in 0..d {
        for j in (i + 1)..d {
            let avg = 0.5 * (m[i * d + j] + m[j * d + i]);
            m[i * d + j] = avg;
            m[j * d + i] = avg;
        }
    }
}
