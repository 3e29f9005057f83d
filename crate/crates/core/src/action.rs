//! Coordinate charts for the algebra action on `Q`, the cotangent-lift
//! momentum map and canonical Poisson brackets on `T*Q`.
//!
//! A chart supplies `A_α^i(q)` with `(e_α)_Q = A_α^i ∂/∂q^i`. For a right
//! action these fields satisfy
//!
//! ```text
//! A_α^s ∂_s A_β^k − A_β^s ∂_s A_α^k = c_αβ^γ A_γ^k
//! ```
//!
//! and the momentum map `m_α = p_i A_α^i(q)` obeys
//! `{m_α, m_β} = −c_αβ^γ m_γ`.
//!
//! Coefficient layouts are flat row-major: `A[α][i]`, `dA[α][i][j] =
//! ∂_j A_α^i`, `d2A[α][i][j][k] = ∂_j ∂_k A_α^i`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{check_dim, Error, Result};
use crate::field::{fd_step, ScalarField, VectorFn};
use crate::lie::{builtin, AlgebraVector, CoVector, LieAlgebra};
use crate::poisson::{self, Canonical};

/// Standard cotangent coordinates `(q, p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl PhaseState {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        check_dim("phase state momentum", q.len(), p.len())?;
        Ok(Self { q, p })
    }

    /// Splits a flat `[q, p]` vector.
    pub fn from_flat(x: &[f64]) -> Result<Self> {
        if !x.len().is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "phase state must have even length, got {}",
                x.len()
            )));
        }
        let n = x.len() / 2;
        Ok(Self {
            q: x[..n].to_vec(),
            p: x[n..].to_vec(),
        })
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.q.clone();
        v.extend_from_slice(&self.p);
        v
    }
}

/// A chart of the algebra action: coefficient callbacks plus optional
/// analytic first and second derivatives.
#[derive(Clone)]
pub struct ActionChart {
    name: String,
    alg: Arc<LieAlgebra>,
    n: usize,
    a: VectorFn,
    da: Option<VectorFn>,
    d2a: Option<VectorFn>,
}

impl fmt::Debug for ActionChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ActionChart")
            .field("name", &self.name)
            .field("algebra", &self.alg.name())
            .field("n", &self.n)
            .field("analytic_da", &self.da.is_some())
            .field("analytic_d2a", &self.d2a.is_some())
            .finish()
    }
}

impl ActionChart {
    pub fn new(
        name: impl Into<String>,
        alg: Arc<LieAlgebra>,
        n: usize,
        a: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            alg,
            n,
            a: Arc::new(a),
            da: None,
            d2a: None,
        }
    }

    pub fn with_derivatives(
        mut self,
        da: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.da = Some(Arc::new(da));
        self
    }

    pub fn with_second_derivatives(
        mut self,
        d2a: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.d2a = Some(Arc::new(d2a));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn algebra(&self) -> &Arc<LieAlgebra> {
        &self.alg
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.alg.dim()
    }

    pub fn has_analytic_derivatives(&self) -> bool {
        self.da.is_some() && self.d2a.is_some()
    }

    /// `A[α][i]` at `q`.
    pub fn coefficients(&self, q: &[f64]) -> Vec<f64> {
        (self.a)(q)
    }

    /// `dA[α][i][j]` at `q`; central differences when not supplied.
    pub fn derivatives(&self, q: &[f64]) -> Vec<f64> {
        match &self.da {
            Some(f) => f(q),
            None => self.fd_jacobian(q, |p| self.coefficients(p)),
        }
    }

    /// `d2A[α][i][j][k]` at `q`; central differences of `dA` when not
    /// supplied.
    pub fn second_derivatives(&self, q: &[f64]) -> Vec<f64> {
        match &self.d2a {
            Some(f) => f(q),
            None => self.fd_jacobian(q, |p| self.derivatives(p)),
        }
    }

    /// Differentiates a flat array-valued function of `q`, appending the
    /// derivative index last.
    fn fd_jacobian(&self, q: &[f64], f: impl Fn(&[f64]) -> Vec<f64>) -> Vec<f64> {
        let n = self.n;
        let h = fd_step(q);
        let mut probe = q.to_vec();
        let mut cols = Vec::with_capacity(n);
        for j in 0..n {
            probe[j] = q[j] + h;
            let fp = f(&probe);
            probe[j] = q[j] - h;
            let fm = f(&probe);
            probe[j] = q[j];
            cols.push(
                fp.iter()
                    .zip(&fm)
                    .map(|(a, b)| (a - b) / (2.0 * h))
                    .collect::<Vec<_>>(),
            );
        }
        let len = cols.first().map_or(0, |c| c.len());
        let mut out = vec![0.0; len * n];
        for (j, col) in cols.iter().enumerate() {
            for (idx, v) in col.iter().enumerate() {
                out[idx * n + j] = *v;
            }
        }
        out
    }

    pub fn jet(&self, q: &[f64]) -> ChartJet {
        ChartJet {
            r: self.r(),
            n: self.n,
            a: self.coefficients(q),
            da: self.derivatives(q),
            d2a: self.second_derivatives(q),
        }
    }

    /// `u_Q(q)^i = A_α^i(q) u^α`.
    pub fn action_field(&self, u: &[f64], q: &[f64]) -> Result<Vec<f64>> {
        check_dim("algebra element", self.r(), u.len())?;
        check_dim("configuration", self.n, q.len())?;
        Ok(contract_a(&self.coefficients(q), u, self.r(), self.n))
    }

    /// `m_α = p_i A_α^i(q)`.
    pub fn momentum_map(&self, s: &PhaseState) -> Result<CoVector> {
        check_dim("configuration", self.n, s.q.len())?;
        check_dim("momentum", self.n, s.p.len())?;
        let a = self.coefficients(&s.q);
        let (r, n) = (self.r(), self.n);
        Ok(CoVector(
            (0..r)
                .map(|al| (0..n).map(|i| s.p[i] * a[al * n + i]).sum())
                .collect(),
        ))
    }

    /// Residual of `[A_α, A_β] = c_αβ^γ A_γ` at `q` (max-norm).
    pub fn closure_residual(&self, q: &[f64]) -> f64 {
        let jet = self.jet(q);
        let alg = &self.alg;
        let (r, n) = (self.r(), self.n);
        let mut worst = 0.0_f64;
        for al in 0..r {
            for be in 0..r {
                for k in 0..n {
                    let mut lie = 0.0;
                    for s in 0..n {
                        lie += jet.a(al, s) * jet.da(be, k, s) - jet.a(be, s) * jet.da(al, k, s);
                    }
                    let rhs: f64 = (0..r).map(|g| alg.c(al, be, g) * jet.a(g, k)).sum();
                    worst = worst.max((lie - rhs).abs());
                }
            }
        }
        worst
    }

    /// Relative disagreement between the supplied `dA` and central
    /// differences of `A`, normalized by `1 + |dA|∞`.
    pub fn derivative_residual(&self, q: &[f64]) -> f64 {
        let analytic = self.derivatives(q);
        let numeric = self.fd_jacobian(q, |p| self.coefficients(p));
        max_rel_diff(&analytic, &numeric)
    }

    /// Same check for `d2A` against differences of `dA`.
    pub fn second_derivative_residual(&self, q: &[f64]) -> f64 {
        let analytic = self.second_derivatives(q);
        let numeric = self.fd_jacobian(q, |p| self.derivatives(p));
        max_rel_diff(&analytic, &numeric)
    }

    /// Numerical rank of `A(q)` (relative threshold 1e-10).
    pub fn action_rank(&self, q: &[f64]) -> usize {
        let a = self.coefficients(q);
        let mat = nalgebra::DMatrix::from_row_slice(self.r(), self.n, &a);
        let sv = mat.singular_values();
        let top = sv.iter().cloned().fold(0.0_f64, f64::max);
        sv.iter().filter(|s| **s > 1e-10 * top.max(1e-300)).count()
    }

    /// The momentum component `m_α` as a field over `(q, p)` with analytic
    /// gradient and Hessian.
    pub fn momentum_component(self: &Arc<Self>, alpha: usize) -> ScalarField {
        let mut dir = vec![0.0; self.r()];
        dir[alpha] = 1.0;
        self.momentum_pairing(&dir).renamed(format!("m{}", alpha + 1))
    }

    /// `⟨m(q, p), ξ⟩ = p_i A_α^i(q) ξ^α` as a field over `(q, p)`.
    pub fn momentum_pairing(self: &Arc<Self>, xi: &[f64]) -> ScalarField {
        let (r, n) = (self.r(), self.n);
        let xi = xi.to_vec();
        let (c1, c2, c3) = (self.clone(), self.clone(), self.clone());
        let (x1, x2, x3) = (xi.clone(), xi.clone(), xi);
        ScalarField::new("<m,xi>", 2 * n, move |x| {
            let (q, p) = x.split_at(n);
            let v = contract_a(&c1.coefficients(q), &x1, r, n);
            v.iter().zip(p).map(|(a, b)| a * b).sum()
        })
        .with_gradient(move |x| {
            let (q, p) = x.split_at(n);
            let a = contract_a(&c2.coefficients(q), &x2, r, n);
            let da = contract_da(&c2.derivatives(q), &x2, r, n);
            let mut g = vec![0.0; 2 * n];
            for k in 0..n {
                g[k] = (0..n).map(|i| p[i] * da[i * n + k]).sum();
                g[n + k] = a[k];
            }
            g
        })
        .with_hessian(move |x| {
            let (q, p) = x.split_at(n);
            let da = contract_da(&c3.derivatives(q), &x3, r, n);
            let d2a = contract_d2a(&c3.second_derivatives(q), &x3, r, n);
            let d = 2 * n;
            let mut h = vec![0.0; d * d];
            for k in 0..n {
                for l in 0..n {
                    h[k * d + l] = (0..n).map(|i| p[i] * d2a[(i * n + k) * n + l]).sum();
                }
                for i in 0..n {
                    // ∂²/∂q^k∂p_i = ∂_k a^i
                    h[k * d + n + i] = da[i * n + k];
                    h[(n + i) * d + k] = da[i * n + k];
                }
            }
            h
        })
    }

    /// `R_αβ = {m_α, m_β} + c_αβ^γ m_γ` at `s`, row-major `r × r`.
    pub fn equivariance_residual(self: &Arc<Self>, s: &PhaseState) -> Result<Vec<f64>> {
        let r = self.r();
        let m = self.momentum_map(s)?;
        let comps: Vec<ScalarField> = (0..r).map(|a| self.momentum_component(a)).collect();
        let mut out = vec![0.0; r * r];
        for a in 0..r {
            for b in 0..r {
                let pb = canonical_poisson(&comps[a], &comps[b], s)?;
                let cm: f64 = (0..r).map(|g| self.alg.c(a, b, g) * m[g]).sum();
                out[a * r + b] = pb + cm;
            }
        }
        Ok(out)
    }
}

fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = 1.0 + a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    a.iter()
        .zip(b)
        .fold(0.0_f64, |m, (u, v)| m.max((u - v).abs()))
        / scale
}

/// `a^i = A_α^i ξ^α`.
pub(crate) fn contract_a(a: &[f64], xi: &[f64], r: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for al in 0..r {
        if xi[al] == 0.0 {
            continue;
        }
        for i in 0..n {
            out[i] += a[al * n + i] * xi[al];
        }
    }
    out
}

/// `da^i_j = ∂_j A_α^i ξ^α`, layout `[i][j]`.
pub(crate) fn contract_da(da: &[f64], xi: &[f64], r: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for al in 0..r {
        if xi[al] == 0.0 {
            continue;
        }
        for k in 0..n * n {
            out[k] += da[al * n * n + k] * xi[al];
        }
    }
    out
}

/// `d2a^i_{jk} = ∂_j ∂_k A_α^i ξ^α`, layout `[i][j][k]`.
pub(crate) fn contract_d2a(d2a: &[f64], xi: &[f64], r: usize, n: usize) -> Vec<f64> {
    let nnn = n * n * n;
    let mut out = vec![0.0; nnn];
    for al in 0..r {
        if xi[al] == 0.0 {
            continue;
        }
        for k in 0..nnn {
            out[k] += d2a[al * nnn + k] * xi[al];
        }
    }
    out
}

/// Coefficients and derivatives of a chart evaluated at one point.
#[derive(Debug, Clone)]
pub struct ChartJet {
    pub r: usize,
    pub n: usize,
    pub a: Vec<f64>,
    pub da: Vec<f64>,
    pub d2a: Vec<f64>,
}

impl ChartJet {
    #[inline]
    pub fn a(&self, al: usize, i: usize) -> f64 {
        self.a[al * self.n + i]
    }

    #[inline]
    pub fn da(&self, al: usize, i: usize, j: usize) -> f64 {
        self.da[(al * self.n + i) * self.n + j]
    }

    #[inline]
    pub fn d2a(&self, al: usize, i: usize, j: usize, k: usize) -> f64 {
        self.d2a[((al * self.n + i) * self.n + j) * self.n + k]
    }
}

/// `{f, g}(s) = ∂f/∂q^k ∂g/∂p_k − ∂g/∂q^k ∂f/∂p_k`.
pub fn canonical_poisson(f: &ScalarField, g: &ScalarField, s: &PhaseState) -> Result<f64> {
    let x = s.to_flat();
    check_dim("scalar field on T*Q", x.len(), f.dim())?;
    check_dim("scalar field on T*Q", x.len(), g.dim())?;
    Ok(poisson::bracket(&Canonical::new(s.n()), f, g, &x))
}

/// Hamilton's equations `dq = ∂h/∂p`, `dp = −∂h/∂q`.
pub fn hamiltonian_vector_field(h: &ScalarField, s: &PhaseState) -> Result<(Vec<f64>, Vec<f64>)> {
    let x = s.to_flat();
    check_dim("Hamiltonian on T*Q", x.len(), h.dim())?;
    let g = h.gradient(&x);
    let n = s.n();
    let dq = g[n..].to_vec();
    let dp = g[..n].iter().map(|v| -v).collect();
    Ok((dq, dp))
}

/// Abelian `R^n` (all structure constants zero).
pub fn abelian(n: usize) -> LieAlgebra {
    LieAlgebra::from_dense(format!("r{n}"), n, vec![0.0; n * n * n]).expect("zero table is valid")
}

/// Rotations of `R^3`: `A_α^i(q) = ε_αij q^j`, i.e. `(e_α)_Q(q) = q × e_α`.
///
/// The sign is the one for which `[A_α, A_β] = ε_αβγ A_γ` with the `so3`
/// constants of [`crate::lie::builtin`]; the resulting momentum map is
/// `m = p × q`.
pub fn so3_on_r3() -> ActionChart {
    let alg = Arc::new(builtin("so3").expect("so3 builtin"));
    ActionChart::new("so3_on_r3", alg, 3, |q| {
        let mut a = vec![0.0; 9];
        for al in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    a[al * 3 + i] += levi_civita(al, i, j) * q[j];
                }
            }
        }
        a
    })
    .with_derivatives(|_| {
        let mut da = vec![0.0; 27];
        for al in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    da[(al * 3 + i) * 3 + j] = levi_civita(al, i, j);
                }
            }
        }
        da
    })
    .with_second_derivatives(|_| vec![0.0; 81])
}

/// Translations of `R^n` by the abelian algebra: `A_α^i = δ_α^i`.
pub fn translation(n: usize) -> ActionChart {
    let alg = Arc::new(abelian(n));
    ActionChart::new("rn_translation", alg, n, move |_| {
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = 1.0;
        }
        a
    })
    .with_derivatives(move |_| vec![0.0; n * n * n])
    .with_second_derivatives(move |_| vec![0.0; n * n * n * n])
}

/// Heisenberg action on `R^3`: `A_1 = ∂_x`, `A_2 = ∂_y + x ∂_z`, `A_3 = ∂_z`.
pub fn h3_on_r3() -> ActionChart {
    let alg = Arc::new(builtin("h3").expect("h3 builtin"));
    ActionChart::new("h3_on_r3", alg, 3, |q| {
        vec![1.0, 0.0, 0.0, 0.0, 1.0, q[0], 0.0, 0.0, 1.0]
    })
    .with_derivatives(|_| {
        let mut da = vec![0.0; 27];
        // ∂_x A_2^z = 1
        da[(3 + 2) * 3] = 1.0;
        da
    })
    .with_second_derivatives(|_| vec![0.0; 81])
}

/// sl(2) acting on the line by `∂x, x∂x, x²∂x`, with
/// `[e1,e2] = e1`, `[e1,e3] = 2e2`, `[e2,e3] = e3`. Not registered as a
/// builtin; useful because its second derivatives do not vanish.
pub fn sl2_on_line() -> ActionChart {
    let alg = LieAlgebra::from_entries(
        "sl2",
        3,
        &[
            (0, 1, 0, 1.0),
            (1, 0, 0, -1.0),
            (0, 2, 1, 2.0),
            (2, 0, 1, -2.0),
            (1, 2, 2, 1.0),
            (2, 1, 2, -1.0),
        ],
    )
    .expect("sl2 constants are antisymmetric");
    ActionChart::new("sl2_on_line", Arc::new(alg), 1, |q| vec![1.0, q[0], q[0] * q[0]])
        .with_derivatives(|q| vec![0.0, 1.0, 2.0 * q[0]])
        .with_second_derivatives(|_| vec![0.0, 0.0, 2.0])
}

pub fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

pub const BUILTIN_CHARTS: [&str; 3] = ["so3_on_r3", "rn_translation", "h3_on_r3"];

/// Built-in charts: `so3_on_r3`, `rn_translation` (n = 3), `h3_on_r3`.
pub fn builtin_chart(name: &str) -> Result<ActionChart> {
    match name {
        "so3_on_r3" => Ok(so3_on_r3()),
        "rn_translation" => Ok(translation(3)),
        "h3_on_r3" => Ok(h3_on_r3()),
        other => Err(Error::NotFound(format!("builtin chart '{other}'"))),
    }
}

/// Named charts: the built-ins plus user-registered callbacks.
#[derive(Debug, Clone)]
pub struct ChartRegistry {
    charts: BTreeMap<String, Arc<ActionChart>>,
}

impl Default for ChartRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl ChartRegistry {
    pub fn empty() -> Self {
        Self {
            charts: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut reg = Self::empty();
        for name in BUILTIN_CHARTS {
            reg.register(builtin_chart(name).expect("builtin chart"));
        }
        reg
    }

    /// Registers (or replaces) a chart under its own name.
    pub fn register(&mut self, chart: ActionChart) -> Arc<ActionChart> {
        let chart = Arc::new(chart);
        self.charts.insert(chart.name().to_string(), chart.clone());
        chart
    }

    pub fn get(&self, name: &str) -> Result<Arc<ActionChart>> {
        self.charts
            .get(name)
            .cloned()
            .ok_or_else(|| Error::NotFound(format!("chart '{name}'")))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.charts.keys().map(String::as_str)
    }
}

/// Convenience: `u_Q(q)` for an [`AlgebraVector`].
pub fn action_field(chart: &ActionChart, u: &AlgebraVector, q: &[f64]) -> Result<Vec<f64>> {
    chart.action_field(u, q)
}
