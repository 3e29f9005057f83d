//! Stochastic equations of motion at three levels: canonical phase space
//! `T*Q`, Hamel's equations on `g* × Q`, and the collective Lie–Poisson
//! equation on `g*`. Every builder returns an [`SdeSystem`] in Stratonovich
//! form together with its closed-form Itô correction.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::action::{contract_a, contract_da, contract_d2a, ActionChart, PhaseState};
use crate::error::{check_dim, Error, Result};
use crate::field::ScalarField;
use crate::integrators::{SdeSystem, Trajectory};
use crate::lie::{builtin, AlgebraVector, CoVector, LieAlgebra};
use crate::noise::NoiseSpec;

/// Symmetry tolerance for kinetic matrices.
const SYMMETRY_TOL: f64 = 1e-12;

fn mat_vec(a: &[f64], x: &[f64]) -> Vec<f64> {
    let r = x.len();
    (0..r)
        .map(|i| a[i * r..(i + 1) * r].iter().zip(x).map(|(u, v)| u * v).sum())
        .collect()
}

fn check_spd(what: &str, r: usize, m: &[f64]) -> Result<()> {
    if m.len() != r * r {
        return Err(Error::InvalidArgument(format!(
            "{what} must be {r}x{r}, got {} entries",
            m.len()
        )));
    }
    for i in 0..r {
        for j in 0..i {
            let (a, b) = (m[i * r + j], m[j * r + i]);
            if (a - b).abs() > SYMMETRY_TOL * (1.0 + a.abs().max(b.abs())) {
                return Err(Error::InvalidArgument(format!("{what} is not symmetric")));
            }
        }
    }
    if m.iter().any(|v| !v.is_finite()) || DMatrix::from_row_slice(r, r, m).cholesky().is_none() {
        return Err(Error::InvalidArgument(format!("{what} is not positive definite")));
    }
    Ok(())
}

fn invert_spd(r: usize, m: &[f64]) -> Vec<f64> {
    let inv = DMatrix::from_row_slice(r, r, m)
        .cholesky()
        .expect("checked positive definite")
        .inverse();
    let mut out = vec![0.0; r * r];
    for i in 0..r {
        for j in 0..r {
            // symmetrize away the last-bit asymmetry of the inverse
            out[i * r + j] = 0.5 * (inv[(i, j)] + inv[(j, i)]);
        }
    }
    out
}

/// Potential energy `V(q)` on the configuration chart.
#[derive(Debug, Clone)]
pub enum Potential {
    Zero,
    /// `V(q) = g · q`.
    Linear(Vec<f64>),
    /// `V(q) = ½ k |q|²`.
    Harmonic(f64),
}

impl Potential {
    /// Parses an id with its parameter list: `zero`, `linear` (g_1..g_n) or
    /// `harmonic` (k).
    pub fn from_id(id: &str, params: &[f64]) -> Result<Self> {
        match id {
            "zero" | "none" => {
                if !params.is_empty() {
                    return Err(Error::InvalidArgument("potential 'zero' takes no parameters".into()));
                }
                Ok(Potential::Zero)
            }
            "linear" => Ok(Potential::Linear(params.to_vec())),
            "harmonic" => match params {
                [k] => Ok(Potential::Harmonic(*k)),
                _ => Err(Error::InvalidArgument(
                    "potential 'harmonic' takes exactly one parameter".into(),
                )),
            },
            other => Err(Error::NotFound(format!(
                "unknown potential '{other}' (expected zero, linear or harmonic)"
            ))),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            Potential::Zero => "zero",
            Potential::Linear(_) => "linear",
            Potential::Harmonic(_) => "harmonic",
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Potential::Zero)
    }

    fn check(&self, n: usize) -> Result<()> {
        if let Potential::Linear(g) = self {
            check_dim("linear potential coefficients", n, g.len())?;
        }
        Ok(())
    }

    pub fn value(&self, q: &[f64]) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::Linear(g) => g.iter().zip(q).map(|(a, b)| a * b).sum(),
            Potential::Harmonic(k) => 0.5 * k * q.iter().map(|v| v * v).sum::<f64>(),
        }
    }

    pub fn gradient(&self, q: &[f64]) -> Vec<f64> {
        match self {
            Potential::Zero => vec![0.0; q.len()],
            Potential::Linear(g) => g.clone(),
            Potential::Harmonic(k) => q.iter().map(|v| k * v).collect(),
        }
    }

    /// Row-major Hessian.
    pub fn hessian(&self, n: usize) -> Vec<f64> {
        let mut h = vec![0.0; n * n];
        if let Potential::Harmonic(k) = self {
            for i in 0..n {
                h[i * n + i] = *k;
            }
        }
        h
    }
}

/// `ℓ(u, q) = ½ u·G u − V(q)` on a Lie algebra, optionally tied to an
/// action chart.
#[derive(Clone)]
pub struct QuadraticLagrangian {
    alg: Arc<LieAlgebra>,
    chart: Option<Arc<ActionChart>>,
    g: Vec<f64>,
    k: Vec<f64>,
    potential: Potential,
}

impl fmt::Debug for QuadraticLagrangian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("QuadraticLagrangian")
            .field("algebra", &self.alg.name())
            .field("chart", &self.chart.as_ref().map(|c| c.name().to_string()))
            .field("g", &self.g)
            .field("potential", &self.potential)
            .finish()
    }
}

impl QuadraticLagrangian {
    /// Free Lagrangian `½ u·G u`; `G` must be symmetric positive definite.
    pub fn new(alg: Arc<LieAlgebra>, g: Vec<f64>) -> Result<Self> {
        let r = alg.dim();
        check_spd("kinetic matrix G", r, &g)?;
        let k = invert_spd(r, &g);
        Ok(Self {
            alg,
            chart: None,
            g,
            k,
            potential: Potential::Zero,
        })
    }

    /// Builds from the inverse kinetic matrix `K = G⁻¹`.
    pub fn from_inverse(alg: Arc<LieAlgebra>, k: Vec<f64>) -> Result<Self> {
        let r = alg.dim();
        check_spd("kinetic inverse K", r, &k)?;
        let g = invert_spd(r, &k);
        Ok(Self {
            alg,
            chart: None,
            g,
            k,
            potential: Potential::Zero,
        })
    }

    pub fn diagonal(alg: Arc<LieAlgebra>, inertia: &[f64]) -> Result<Self> {
        let r = inertia.len();
        let mut g = vec![0.0; r * r];
        for (i, v) in inertia.iter().enumerate() {
            g[i * r + i] = *v;
        }
        Self::new(alg, g)
    }

    pub fn with_chart(mut self, chart: Arc<ActionChart>) -> Result<Self> {
        if chart.algebra().dense() != self.alg.dense() {
            return Err(Error::InvalidArgument(format!(
                "chart '{}' acts by a different algebra than '{}'",
                chart.name(),
                self.alg.name()
            )));
        }
        self.potential.check(chart.n())?;
        self.chart = Some(chart);
        Ok(self)
    }

    pub fn with_potential(mut self, v: Potential) -> Result<Self> {
        if let Some(c) = &self.chart {
            v.check(c.n())?;
        }
        self.potential = v;
        Ok(self)
    }

    pub fn algebra(&self) -> &Arc<LieAlgebra> {
        &self.alg
    }

    pub fn chart(&self) -> Option<&Arc<ActionChart>> {
        self.chart.as_ref()
    }

    pub fn require_chart(&self) -> Result<&Arc<ActionChart>> {
        self.chart
            .as_ref()
            .ok_or_else(|| Error::Misuse("this system needs a Lagrangian with an action chart".into()))
    }

    pub fn kinetic(&self) -> &[f64] {
        &self.g
    }

    pub fn kinetic_inverse(&self) -> &[f64] {
        &self.k
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn value(&self, u: &[f64], q: &[f64]) -> f64 {
        let gu = mat_vec(&self.g, u);
        0.5 * u.iter().zip(&gu).map(|(a, b)| a * b).sum::<f64>() - self.potential.value(q)
    }

    pub fn hamiltonian(&self) -> ReducedHamiltonian {
        ReducedHamiltonian {
            alg: self.alg.clone(),
            k: self.k.clone(),
            potential: self.potential.clone(),
        }
    }
}

/// `h(m, q) = ½ m·K m + V(q)`.
#[derive(Debug, Clone)]
pub struct ReducedHamiltonian {
    alg: Arc<LieAlgebra>,
    k: Vec<f64>,
    potential: Potential,
}

impl ReducedHamiltonian {
    /// Kinetic-only Hamiltonian on `g*`.
    pub fn kinetic(alg: Arc<LieAlgebra>, k: Vec<f64>) -> Result<Self> {
        check_spd("kinetic inverse K", alg.dim(), &k)?;
        Ok(Self {
            alg,
            k,
            potential: Potential::Zero,
        })
    }

    pub fn algebra(&self) -> &Arc<LieAlgebra> {
        &self.alg
    }

    pub fn kinetic_inverse(&self) -> &[f64] {
        &self.k
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    /// `∂h/∂m = K m`.
    pub fn velocity(&self, m: &[f64]) -> Vec<f64> {
        mat_vec(&self.k, m)
    }

    pub fn kinetic_energy(&self, m: &[f64]) -> f64 {
        0.5 * m.iter().zip(self.velocity(m)).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn value(&self, m: &[f64], q: &[f64]) -> f64 {
        self.kinetic_energy(m) + self.potential.value(q)
    }

    /// `½ m·K m` as a field on `g*`.
    pub fn lie_poisson_field(&self) -> ScalarField {
        ScalarField::quadratic("h", self.k.clone())
    }

    /// `h` as a field on `(m, q)` with `n`-dimensional `q`.
    pub fn hamel_field(&self, n: usize) -> ScalarField {
        let r = self.alg.dim();
        let d = r + n;
        let (k1, k2, k3) = (self.k.clone(), self.k.clone(), self.k.clone());
        let (v1, v2, v3) = (self.potential.clone(), self.potential.clone(), self.potential.clone());
        ScalarField::new("h", d, move |x| {
            let (m, q) = x.split_at(r);
            let km = mat_vec(&k1, m);
            0.5 * m.iter().zip(&km).map(|(a, b)| a * b).sum::<f64>() + v1.value(q)
        })
        .with_gradient(move |x| {
            let (m, q) = x.split_at(r);
            let mut g = mat_vec(&k2, m);
            g.extend(v2.gradient(q));
            g
        })
        .with_hessian(move |_| {
            let mut h = vec![0.0; d * d];
            for i in 0..r {
                for j in 0..r {
                    h[i * d + j] = k3[i * r + j];
                }
            }
            let hv = v3.hessian(n);
            for i in 0..n {
                for j in 0..n {
                    h[(r + i) * d + r + j] = hv[i * n + j];
                }
            }
            h
        })
    }
}

/// `m = G u` and the energy `h = ½ m·K m + V(q)`.
pub fn legendre(l: &QuadraticLagrangian, u: &AlgebraVector, q: &[f64]) -> Result<(CoVector, f64)> {
    check_dim("algebra element", l.alg.dim(), u.len())?;
    let m = mat_vec(&l.g, u);
    let h = l.hamiltonian().value(&m, q);
    Ok((CoVector(m), h))
}

/// Inverse Legendre transform `u = K m`.
pub fn inverse_legendre(l: &QuadraticLagrangian, m: &CoVector) -> Result<AlgebraVector> {
    check_dim("covector", l.alg.dim(), m.len())?;
    Ok(AlgebraVector(mat_vec(&l.k, m)))
}

pub type FeedbackFn = Arc<dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync>;

/// How the velocity `u` entering the drift is chosen. `u` is always a
/// deterministic function of time and state.
#[derive(Clone)]
pub enum UPolicy {
    /// `u = K m` with `m` the current momentum (the free Euler–Poincaré
    /// choice).
    Legendre,
    Constant(AlgebraVector),
    Zero,
    /// `u = f(t, x)` with `x` the full system state.
    Feedback(FeedbackFn),
}

impl fmt::Debug for UPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UPolicy::Legendre => f.write_str("Legendre"),
            UPolicy::Constant(u) => f.debug_tuple("Constant").field(u).finish(),
            UPolicy::Zero => f.write_str("Zero"),
            UPolicy::Feedback(_) => f.write_str("Feedback(..)"),
        }
    }
}

impl UPolicy {
    pub fn feedback(f: impl Fn(f64, &[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        UPolicy::Feedback(Arc::new(f))
    }

    fn eval(&self, k: &[f64], t: f64, x: &[f64], m: &dyn Fn() -> Vec<f64>, r: usize) -> Result<Vec<f64>> {
        let u = match self {
            UPolicy::Legendre => mat_vec(k, &m()),
            UPolicy::Constant(u) => u.0.clone(),
            UPolicy::Zero => vec![0.0; r],
            UPolicy::Feedback(f) => f(t, x),
        };
        check_dim("velocity u", r, u.len())?;
        Ok(u)
    }
}

fn labels(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

/// Phase-space labels `q1..qn, p1..pn`.
pub fn phase_labels(n: usize) -> Vec<String> {
    let mut l = labels("q", n);
    l.extend(labels("p", n));
    l
}

/// `p_j ∂_i A_α^j v^α` for the contracted jet `da = ∂_j(A v)^i` (`[i][j]`).
fn pullback_term(da: &[f64], p: &[f64], n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (0..n).map(|j| p[j] * da[j * n + i]).sum())
        .collect()
}

/// Cotangent lift of the infinitesimal action of `v` at `(q, p)`:
/// `(A v, −p·∂(A v))`.
fn lifted_field(chart: &ActionChart, v: &[f64], q: &[f64], p: &[f64]) -> Vec<f64> {
    let (r, n) = (chart.r(), chart.n());
    let mut out = contract_a(&chart.coefficients(q), v, r, n);
    let da = contract_da(&chart.derivatives(q), v, r, n);
    out.extend(pullback_term(&da, p, n).into_iter().map(|x| -x));
    out
}

/// Stratonovich dynamics on `T*Q` generated by `ℓ`, noise and `u`:
/// `dq = A(q)(u dt + ξ_k ∘ dW^k)`, `dp = −p·∂A(u dt + ξ_k ∘ dW^k) − ∇V dt`.
pub fn phase_space_system(l: &QuadraticLagrangian, noise: &NoiseSpec, u: UPolicy) -> Result<SdeSystem> {
    let chart = l.require_chart()?.clone();
    let (r, n) = (chart.r(), chart.n());
    noise.check_dim(r)?;
    let kin = l.k.clone();
    let pot = l.potential.clone();
    let c1 = chart.clone();
    let drift = move |t: f64, x: &[f64]| -> Result<Vec<f64>> {
        check_dim("phase-space state", 2 * n, x.len())?;
        let (q, p) = x.split_at(n);
        let mom = || {
            let a = c1.coefficients(q);
            (0..r)
                .map(|al| (0..n).map(|i| p[i] * a[al * n + i]).sum())
                .collect::<Vec<f64>>()
        };
        let uv = u.eval(&kin, t, x, &mom, r)?;
        let mut out = lifted_field(&c1, &uv, q, p);
        for (o, g) in out[n..].iter_mut().zip(pot.gradient(q)) {
            *o -= g;
        }
        Ok(out)
    };
    let xi = noise.xi.clone();
    let c2 = chart.clone();
    let diffusion = move |_t: f64, x: &[f64], k: usize| -> Result<Vec<f64>> {
        let (q, p) = x.split_at(n);
        Ok(lifted_field(&c2, &xi[k], q, p))
    };
    let c3 = chart.clone();
    let noise3 = noise.clone();
    let corr = move |_t: f64, x: &[f64]| -> Result<Vec<f64>> {
        ito_correction_phase(&c3, &noise3, &PhaseState::from_flat(x)?)
    };
    Ok(SdeSystem::deterministic(format!("phase_space[{}]", chart.name()), 2 * n, drift)
        .with_diffusion(noise.channels(), diffusion)
        .with_ito_correction(corr)
        .with_labels(phase_labels(n)))
}

/// `½ Σ_k (DV_k)V_k` for the cotangent-lifted noise fields `V_k`, in closed
/// form from `A`, `∂A`, `∂²A`. With `a = A ξ`:
/// q-block `½ ∂_j a^i a^j`; p-block
/// `½ (−p_j ∂_i∂_l a^j a^l + p_j ∂_l a^j ∂_i a^l)`.
pub fn ito_correction_phase(chart: &ActionChart, noise: &NoiseSpec, s: &PhaseState) -> Result<Vec<f64>> {
    let (r, n) = (chart.r(), chart.n());
    noise.check_dim(r)?;
    check_dim("configuration", n, s.q.len())?;
    check_dim("momentum", n, s.p.len())?;
    let mut out = vec![0.0; 2 * n];
    if noise.xi.is_empty() {
        return Ok(out);
    }
    let jet = chart.jet(&s.q);
    let p = &s.p;
    for xi in &noise.xi {
        let a = contract_a(&jet.a, xi, r, n);
        let da = contract_da(&jet.da, xi, r, n);
        let d2a = contract_d2a(&jet.d2a, xi, r, n);
        for i in 0..n {
            let mut dq = 0.0;
            let mut dp = 0.0;
            for j in 0..n {
                dq += da[i * n + j] * a[j];
                for l in 0..n {
                    dp -= p[j] * d2a[(j * n + i) * n + l] * a[l];
                    dp += p[j] * da[j * n + l] * da[l * n + i];
                }
            }
            out[i] += 0.5 * dq;
            out[n + i] += 0.5 * dp;
        }
    }
    Ok(out)
}

/// The collective Hamiltonian `H(q, p) = ½ J·K J + V(q)` with `J` the
/// momentum map, as a field over `(q, p)`.
pub fn collective_hamiltonian(l: &QuadraticLagrangian) -> Result<ScalarField> {
    let chart = l.require_chart()?.clone();
    let (r, n) = (chart.r(), chart.n());
    let (k1, k2) = (l.k.clone(), l.k.clone());
    let (v1, v2) = (l.potential.clone(), l.potential.clone());
    let c2 = chart.clone();
    let mom = move |c: &ActionChart, q: &[f64], p: &[f64]| -> Vec<f64> {
        let a = c.coefficients(q);
        (0..r)
            .map(|al| (0..n).map(|i| p[i] * a[al * n + i]).sum())
            .collect()
    };
    Ok(ScalarField::new("H", 2 * n, move |x| {
        let (q, p) = x.split_at(n);
        let m = mom(&chart, q, p);
        let km = mat_vec(&k1, &m);
        0.5 * m.iter().zip(&km).map(|(a, b)| a * b).sum::<f64>() + v1.value(q)
    })
    .with_gradient(move |x| {
        let (q, p) = x.split_at(n);
        let m = mom(&c2, q, p);
        let u = mat_vec(&k2, &m);
        // ∂H/∂p = A u, ∂H/∂q_k = p_i ∂_k(A u)^i + ∂_k V
        let au = contract_a(&c2.coefficients(q), &u, r, n);
        let dau = contract_da(&c2.derivatives(q), &u, r, n);
        let gv = v2.gradient(q);
        let mut g: Vec<f64> = (0..n)
            .map(|k| (0..n).map(|i| p[i] * dau[i * n + k]).sum::<f64>() + gv[k])
            .collect();
        g.extend(au);
        g
    }))
}

/// Options for [`lie_poisson_system`].
#[derive(Debug, Clone)]
pub struct LiePoissonOptions {
    pub u: UPolicy,
    /// Rescale `m` after each step to the norm it had before the step.
    pub casimir_projection: bool,
}

impl Default for LiePoissonOptions {
    fn default() -> Self {
        Self {
            u: UPolicy::Legendre,
            casimir_projection: false,
        }
    }
}

/// `dm = ad*_u m dt + Σ_k ad*_{ξ_k} m ∘ dW^k` with `u` from `opts.u`
/// (default `u = K m`); Itô correction `½ Σ_k ad*_{ξ_k} ad*_{ξ_k} m`.
pub fn lie_poisson_system(
    alg: Arc<LieAlgebra>,
    k: Vec<f64>,
    noise: &NoiseSpec,
    opts: LiePoissonOptions,
) -> Result<SdeSystem> {
    let r = alg.dim();
    check_spd("kinetic inverse K", r, &k)?;
    noise.check_dim(r)?;
    let a1 = alg.clone();
    let u = opts.u;
    let drift = move |t: f64, m: &[f64]| -> Result<Vec<f64>> {
        check_dim("momentum", r, m.len())?;
        let uv = u.eval(&k, t, m, &|| m.to_vec(), r)?;
        Ok(a1.ad_star_raw(&uv, m))
    };
    let a2 = alg.clone();
    let xi = noise.xi.clone();
    let diffusion = move |_t: f64, m: &[f64], ch: usize| -> Result<Vec<f64>> { Ok(a2.ad_star_raw(&xi[ch], m)) };
    let a3 = alg.clone();
    let xi3 = noise.xi.clone();
    let corr = move |_t: f64, m: &[f64]| -> Result<Vec<f64>> { Ok(lie_poisson_ito_correction(&a3, &xi3, m)) };
    let mut sys = SdeSystem::deterministic(format!("lie_poisson[{}]", alg.name()), r, drift)
        .with_diffusion(noise.channels(), diffusion)
        .with_ito_correction(corr)
        .with_labels(labels("m", r));
    if opts.casimir_projection {
        sys = sys.with_projection(|prev, next| {
            let target = prev.iter().map(|v| v * v).sum::<f64>().sqrt();
            let now = next.iter().map(|v| v * v).sum::<f64>().sqrt();
            if now > 0.0 {
                let s = target / now;
                next.iter_mut().for_each(|v| *v *= s);
            }
        });
    }
    Ok(sys)
}

/// `½ Σ_k ad*_{ξ_k} ad*_{ξ_k} m`.
pub fn lie_poisson_ito_correction(alg: &LieAlgebra, xi: &[AlgebraVector], m: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; m.len()];
    for x in xi {
        let once = alg.ad_star_raw(x, m);
        let twice = alg.ad_star_raw(x, &once);
        for (o, v) in out.iter_mut().zip(twice) {
            *o += 0.5 * v;
        }
    }
    out
}

/// Hamel's equations on `(m, q)`:
/// `dm = ad*_{∂h/∂m} m dt − Aᵀ∇V dt + Σ_k ad*_{ξ_k} m ∘ dW^k`,
/// `dq = A (∂h/∂m dt + ξ_k ∘ dW^k)`.
pub fn hamel_system(chart: Arc<ActionChart>, h: &ReducedHamiltonian, noise: &NoiseSpec) -> Result<SdeSystem> {
    let (r, n) = (chart.r(), chart.n());
    if chart.algebra().dense() != h.alg.dense() {
        return Err(Error::InvalidArgument(
            "Hamiltonian and chart use different algebras".into(),
        ));
    }
    h.potential.check(n)?;
    noise.check_dim(r)?;
    let c1 = chart.clone();
    let h1 = h.clone();
    let drift = move |_t: f64, x: &[f64]| -> Result<Vec<f64>> {
        check_dim("Hamel state", r + n, x.len())?;
        let (m, q) = x.split_at(r);
        let alg = c1.algebra();
        let a = c1.coefficients(q);
        let u = h1.velocity(m);
        let gv = h1.potential.gradient(q);
        let mut out = alg.ad_star_raw(&u, m);
        for (al, o) in out.iter_mut().enumerate() {
            *o -= (0..n).map(|j| a[al * n + j] * gv[j]).sum::<f64>();
        }
        out.extend(contract_a(&a, &u, r, n));
        Ok(out)
    };
    let c2 = chart.clone();
    let xi = noise.xi.clone();
    let diffusion = move |_t: f64, x: &[f64], k: usize| -> Result<Vec<f64>> {
        let (m, q) = x.split_at(r);
        let mut out = c2.algebra().ad_star_raw(&xi[k], m);
        out.extend(contract_a(&c2.coefficients(q), &xi[k], r, n));
        Ok(out)
    };
    let c3 = chart.clone();
    let xi3 = noise.xi.clone();
    let corr = move |_t: f64, x: &[f64]| -> Result<Vec<f64>> {
        let (m, q) = x.split_at(r);
        let mut out = lie_poisson_ito_correction(c3.algebra(), &xi3, m);
        let mut dq = vec![0.0; n];
        if !xi3.is_empty() {
            let a = c3.coefficients(q);
            let da = c3.derivatives(q);
            for x in &xi3 {
                let av = contract_a(&a, x, r, n);
                let dav = contract_da(&da, x, r, n);
                for i in 0..n {
                    dq[i] += 0.5 * (0..n).map(|j| dav[i * n + j] * av[j]).sum::<f64>();
                }
            }
        }
        out.extend(dq);
        Ok(out)
    };
    let mut l = labels("m", r);
    l.extend(labels("q", n));
    Ok(SdeSystem::deterministic(format!("hamel[{}]", chart.name()), r + n, drift)
        .with_diffusion(noise.channels(), diffusion)
        .with_ito_correction(corr)
        .with_labels(l))
}

/// Maps a phase-space trajectory through the momentum map.
pub fn reconstruct_momentum(traj: &Trajectory, chart: &ActionChart) -> Result<Trajectory> {
    let n = chart.n();
    if traj.labels() != phase_labels(n).as_slice() {
        return Err(Error::InvalidArgument(format!(
            "trajectory labels {:?} are not phase-space coordinates for chart '{}'",
            traj.labels(),
            chart.name()
        )));
    }
    let states = traj
        .states
        .iter()
        .map(|x| chart.momentum_map(&PhaseState::from_flat(x)?).map(CoVector::into_inner))
        .collect::<Result<Vec<_>>>()?;
    let mut meta = traj.meta.clone();
    meta.system = format!("momentum_map({})", meta.system);
    meta.labels = labels("m", chart.r());
    Ok(Trajectory {
        times: traj.times.clone(),
        states,
        meta,
    })
}

/// Named Casimir functions. Only `quadratic` on so(3): `C(m) = |m|²`.
pub fn casimir(alg: &LieAlgebra, name: &str) -> Result<ScalarField> {
    if name != "quadratic" {
        return Err(Error::NotFound(format!("unknown Casimir '{name}'")));
    }
    let so3 = builtin("so3")?;
    if alg.dense() != so3.dense() {
        return Err(Error::Unsupported(format!(
            "the quadratic Casimir is only provided for so3, not '{}'",
            alg.name()
        )));
    }
    Ok(ScalarField::quadratic("C", vec![2.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 2.0]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{builtin_chart, so3_on_r3};
    use crate::integrators::{integrate, Scheme};
    use crate::noise::sample_channels;

    fn so3() -> Arc<LieAlgebra> {
        Arc::new(builtin("so3").unwrap())
    }

    #[test]
    fn legendre_rigid_body() {
        let l = QuadraticLagrangian::diagonal(so3(), &[1.0, 2.0, 3.0]).unwrap();
        let (m, h) = legendre(&l, &AlgebraVector(vec![1.0, 1.0, 1.0]), &[]).unwrap();
        assert_eq!(m.0, vec![1.0, 2.0, 3.0]);
        assert!((h - 3.0).abs() < 1e-15);
        let u = inverse_legendre(&l, &m).unwrap();
        for v in u.iter() {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_kinetic() {
        assert!(QuadraticLagrangian::new(so3(), vec![1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0]).is_err());
        assert!(QuadraticLagrangian::new(so3(), vec![1.0, 0.5, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).is_err());
        assert!(QuadraticLagrangian::new(so3(), vec![1.0; 4]).is_err());
    }

    #[test]
    fn isotropic_body_is_stationary() {
        let sys = lie_poisson_system(so3(), vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0], &NoiseSpec::none(0), Default::default()).unwrap();
        let d = sys.eval_drift(0.0, &[0.3, -1.2, 0.8]).unwrap();
        assert!(d.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn principal_axes_are_equilibria() {
        let k = vec![1.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 1.0 / 3.0];
        let sys = lie_poisson_system(so3(), k, &NoiseSpec::none(0), Default::default()).unwrap();
        for m0 in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] {
            assert_eq!(sys.eval_drift(0.0, &m0).unwrap(), vec![0.0; 3]);
        }
    }

    #[test]
    fn lie_poisson_ito_correction_about_e3() {
        let xi = vec![AlgebraVector::basis(3, 2)];
        let m = [0.7, -0.4, 1.1];
        let c = lie_poisson_ito_correction(&so3(), &xi, &m);
        assert_eq!(c, vec![-0.35, 0.2, 0.0]);
    }

    #[test]
    fn translation_chart_is_additive() {
        let chart = Arc::new(builtin_chart("rn_translation").unwrap());
        let l = QuadraticLagrangian::new(chart.algebra().clone(), vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0])
            .unwrap()
            .with_chart(chart)
            .unwrap();
        let noise = NoiseSpec::new(vec![AlgebraVector(vec![0.5, 0.0, 0.0]), AlgebraVector(vec![0.0, 0.0, 1.0])], 4);
        let u = AlgebraVector(vec![1.0, -1.0, 0.5]);
        let sys = phase_space_system(&l, &noise, UPolicy::Constant(u.clone())).unwrap();
        let x = [0.1, 0.2, 0.3, 1.0, 2.0, 3.0];
        assert_eq!(sys.eval_ito_correction(0.0, &x).unwrap(), vec![0.0; 6]);
        let g = sample_channels(2, 4, 1.0, 64).unwrap();
        let tr = integrate(&sys, Scheme::HeunStrat, &g, &x).unwrap();
        let w = g.total_displacement();
        let expected = [0.1 + 1.0 + 0.5 * w[0], 0.2 - 1.0, 0.3 + 0.5 + w[1]];
        for i in 0..3 {
            assert!((tr.last()[i] - expected[i]).abs() < 1e-12);
            assert_eq!(tr.last()[3 + i], x[3 + i]);
        }
        let back = reconstruct_momentum(&tr, &builtin_chart("rn_translation").unwrap()).unwrap();
        assert_eq!(back.last(), &tr.last()[3..]);
    }

    #[test]
    fn hamel_decouples_without_potential() {
        let chart = Arc::new(so3_on_r3());
        let k = vec![1.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.25];
        let h = ReducedHamiltonian::kinetic(so3(), k.clone()).unwrap();
        let noise = NoiseSpec::new(vec![AlgebraVector(vec![0.4, 0.0, 0.1]), AlgebraVector(vec![0.0, 0.3, 0.0])], 12);
        let hamel = hamel_system(chart, &h, &noise).unwrap();
        let lp = lie_poisson_system(so3(), k, &noise, Default::default()).unwrap();
        let g = sample_channels(2, 12, 1.0, 256).unwrap();
        let a = integrate(&hamel, Scheme::HeunStrat, &g, &[0.6, 0.7, 0.4, 1.0, 0.0, 0.5]).unwrap();
        let b = integrate(&lp, Scheme::HeunStrat, &g, &[0.6, 0.7, 0.4]).unwrap();
        for (x, y) in a.states.iter().zip(&b.states) {
            for i in 0..3 {
                assert!((x[i] - y[i]).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn casimir_rules() {
        let c = casimir(&so3(), "quadratic").unwrap();
        assert_eq!(c.value(&[0.0; 3]), 0.0);
        assert_eq!(c.value(&[1.0, 2.0, 2.0]), 9.0);
        assert!(matches!(casimir(&builtin("se2").unwrap(), "quadratic"), Err(Error::Unsupported(_))));
        assert!(casimir(&so3(), "cubic").is_err());
        // the Itô correction is not tangent to the sphere
        let corr = lie_poisson_ito_correction(&so3(), &[AlgebraVector::basis(3, 2)], &[1.0, 0.0, 0.0]);
        let dot: f64 = c.gradient(&[1.0, 0.0, 0.0]).iter().zip(&corr).map(|(a, b)| a * b).sum();
        assert!(dot < -0.5);
    }

    #[test]
    fn feedback_dimension_checked() {
        let sys = lie_poisson_system(
            so3(),
            vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            &NoiseSpec::none(0),
            LiePoissonOptions {
                u: UPolicy::feedback(|_, _| vec![1.0, 2.0]),
                casimir_projection: false,
            },
        )
        .unwrap();
        assert!(matches!(sys.eval_drift(0.0, &[1.0, 0.0, 0.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn potentials_parse() {
        assert!(matches!(Potential::from_id("linear", &[0.0, 0.0, -1.0]), Ok(Potential::Linear(_))));
        assert!(Potential::from_id("harmonic", &[]).is_err());
        assert!(Potential::from_id("quartic", &[]).is_err());
        let chart = Arc::new(so3_on_r3());
        let l = QuadraticLagrangian::new(so3(), vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(l.with_potential(Potential::Linear(vec![1.0])).unwrap().with_chart(chart).is_err());
    }
}
