//! The generator `Lf = {f, ψ} + ½ Σ_k {g_k, {g_k, f}}` of a Stratonovich
//! Hamiltonian diffusion, its formal adjoint, an explicit finite-difference
//! solver for `∂ρ/∂t = Lρ` on three-dimensional duals, and Monte-Carlo
//! expectations to check it against.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use crate::action::ActionChart;
use crate::dynamics::{collective_hamiltonian, QuadraticLagrangian, ReducedHamiltonian};
use crate::error::{check_dim, Error, Result};
use crate::field::ScalarField;
use crate::integrators::{integrate, Scheme, SdeSystem};
use crate::lie::LieAlgebra;
use crate::noise::{sample_channels, split_seed, NoiseSpec};
use crate::poisson::{bracket, nested_bracket, Canonical, HamelPoisson, LiePoisson, PoissonStructure};

/// Poisson structure, Hamiltonian `ψ` and noise Hamiltonians `g_k`.
#[derive(Clone)]
pub struct GeneratorSpec {
    pub structure: Arc<dyn PoissonStructure>,
    pub psi: ScalarField,
    pub phis: Vec<ScalarField>,
}

impl std::fmt::Debug for GeneratorSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GeneratorSpec")
            .field("structure", &self.structure.name())
            .field("psi", &self.psi)
            .field("phis", &self.phis)
            .finish()
    }
}

impl GeneratorSpec {
    pub fn new(structure: Arc<dyn PoissonStructure>, psi: ScalarField, phis: Vec<ScalarField>) -> Result<Self> {
        let d = structure.dim();
        check_dim("Hamiltonian", d, psi.dim())?;
        for p in &phis {
            check_dim("noise Hamiltonian", d, p.dim())?;
        }
        Ok(Self { structure, psi, phis })
    }

    /// `ψ = ½ m·K m`, `g_k = ⟨m, ξ_k⟩` on `g*`.
    pub fn lie_poisson(alg: Arc<LieAlgebra>, k: &[f64], noise: &NoiseSpec) -> Result<Self> {
        let r = alg.dim();
        noise.check_dim(r)?;
        let h = ReducedHamiltonian::kinetic(alg.clone(), k.to_vec())?;
        let phis = noise.xi.iter().map(|xi| ScalarField::linear(xi.0.clone())).collect();
        Self::new(Arc::new(LiePoisson::new(alg)), h.lie_poisson_field(), phis)
    }

    /// `ψ = h(m, q)`, `g_k = ⟨m, ξ_k⟩` on `g* × Q`.
    pub fn hamel(chart: Arc<ActionChart>, h: &ReducedHamiltonian, noise: &NoiseSpec) -> Result<Self> {
        let (r, n) = (chart.r(), chart.n());
        noise.check_dim(r)?;
        let phis = noise
            .xi
            .iter()
            .map(|xi| {
                let mut c = xi.0.clone();
                c.resize(r + n, 0.0);
                ScalarField::linear(c)
            })
            .collect();
        Self::new(Arc::new(HamelPoisson::new(chart)), h.hamel_field(n), phis)
    }

    /// `ψ = H(q, p)`, `g_k = ⟨J(q, p), ξ_k⟩` on `T*Q`.
    pub fn phase_space(l: &QuadraticLagrangian, noise: &NoiseSpec) -> Result<Self> {
        let chart = l.require_chart()?.clone();
        noise.check_dim(chart.r())?;
        let phis = noise.xi.iter().map(|xi| chart.momentum_pairing(xi)).collect();
        Self::new(Arc::new(Canonical::new(chart.n())), collective_hamiltonian(l)?, phis)
    }

    pub fn dim(&self) -> usize {
        self.structure.dim()
    }
}

fn second_order_part(spec: &GeneratorSpec, f: &ScalarField, x: &[f64]) -> f64 {
    spec.phis
        .iter()
        .map(|g| 0.5 * nested_bracket(spec.structure.as_ref(), g, f, x))
        .sum()
}

/// `Lf(x) = {f, ψ}(x) + ½ Σ_k {g_k, {g_k, f}}(x)`.
pub fn generator_apply(spec: &GeneratorSpec, f: &ScalarField, x: &[f64]) -> Result<f64> {
    check_dim("point", spec.dim(), x.len())?;
    check_dim("observable", spec.dim(), f.dim())?;
    Ok(bracket(spec.structure.as_ref(), f, &spec.psi, x) + second_order_part(spec, f, x))
}

/// `L*f(x) = −{f, ψ}(x) + ½ Σ_k {g_k, {g_k, f}}(x)`. This is the formal
/// adjoint with respect to a measure preserved by every Hamiltonian flow
/// involved (Liouville measure on `T*Q`, Lebesgue measure on `g*` for
/// unimodular algebras), with boundary terms assumed to vanish.
pub fn adjoint_apply(spec: &GeneratorSpec, f: &ScalarField, x: &[f64]) -> Result<f64> {
    check_dim("point", spec.dim(), x.len())?;
    check_dim("observable", spec.dim(), f.dim())?;
    Ok(-bracket(spec.structure.as_ref(), f, &spec.psi, x) + second_order_part(spec, f, x))
}

/// Which operator a grid solve advances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `∂ρ/∂t = Lρ`.
    Backward,
    /// `∂ρ/∂t = L*ρ`.
    Forward,
}

/// Boundary treatment recorded in every grid.
pub const BOUNDARY_POLICY: &str = "linear-extrapolation-ghost";

const DENSITY_MAGIC: &[u8; 4] = b"CADG";
const DENSITY_VERSION: u32 = 1;

/// Axis-aligned node grid on a box in `R^3`; `values` are stored with the
/// z index fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    pub shape: [usize; 3],
    pub time: f64,
    pub boundary: String,
    pub values: Vec<f64>,
}

impl DensityGrid {
    /// Zero-valued grid; every axis needs at least 3 nodes.
    pub fn new(lo: [f64; 3], hi: [f64; 3], shape: [usize; 3]) -> Result<Self> {
        for a in 0..3 {
            if shape[a] < 3 {
                return Err(Error::InvalidArgument(format!(
                    "grid axis {a} needs at least 3 nodes, got {}",
                    shape[a]
                )));
            }
            if !(hi[a] > lo[a]) || !lo[a].is_finite() || !hi[a].is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "grid axis {a} has an empty or non-finite range [{}, {}]",
                    lo[a], hi[a]
                )));
            }
        }
        Ok(Self {
            lo,
            hi,
            shape,
            time: 0.0,
            boundary: BOUNDARY_POLICY.to_string(),
            values: vec![0.0; shape[0] * shape[1] * shape[2]],
        })
    }

    /// Cube `[a, b]^3` with `n` nodes per axis.
    pub fn cube(a: f64, b: f64, n: usize) -> Result<Self> {
        Self::new([a; 3], [b; 3], [n; 3])
    }

    pub fn spacing(&self) -> [f64; 3] {
        std::array::from_fn(|a| (self.hi[a] - self.lo[a]) / (self.shape[a] - 1) as f64)
    }

    /// Largest spacing over the three axes.
    pub fn max_spacing(&self) -> f64 {
        self.spacing().into_iter().fold(0.0, f64::max)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.shape[1] + j) * self.shape[2] + k
    }

    pub fn node(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        let h = self.spacing();
        [
            self.lo[0] + i as f64 * h[0],
            self.lo[1] + j as f64 * h[1],
            self.lo[2] + k as f64 * h[2],
        ]
    }

    fn node_of(&self, idx: usize) -> [f64; 3] {
        let k = idx % self.shape[2];
        let j = (idx / self.shape[2]) % self.shape[1];
        let i = idx / (self.shape[1] * self.shape[2]);
        self.node(i, j, k)
    }

    /// Fills the grid with `f` at every node.
    pub fn fill(&mut self, f: &ScalarField) -> Result<()> {
        check_dim("grid observable", 3, f.dim())?;
        self.values = (0..self.len()).map(|idx| f.value(&self.node_of(idx))).collect();
        Ok(())
    }

    /// Value at signed indices; one node outside a face is extrapolated
    /// linearly from the two nearest nodes on that axis.
    fn at(&self, idx: [isize; 3]) -> f64 {
        for a in 0..3 {
            let n = self.shape[a] as isize;
            if idx[a] < 0 {
                let mut p0 = idx;
                let mut p1 = idx;
                p0[a] = 0;
                p1[a] = 1;
                return 2.0 * self.at(p0) - self.at(p1);
            }
            if idx[a] >= n {
                let mut p0 = idx;
                let mut p1 = idx;
                p0[a] = n - 1;
                p1[a] = n - 2;
                return 2.0 * self.at(p0) - self.at(p1);
            }
        }
        self.values[self.index(idx[0] as usize, idx[1] as usize, idx[2] as usize)]
    }

    /// Trilinear interpolation at `x` (must lie inside the box).
    pub fn interpolate(&self, x: &[f64]) -> Result<f64> {
        check_dim("interpolation point", 3, x.len())?;
        let h = self.spacing();
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            if x[a] < self.lo[a] || x[a] > self.hi[a] {
                return Err(Error::InvalidArgument(format!(
                    "point {x:?} lies outside the grid box"
                )));
            }
            let s = (x[a] - self.lo[a]) / h[a];
            let i = (s.floor() as usize).min(self.shape[a] - 2);
            base[a] = i;
            frac[a] = s - i as f64;
        }
        let mut v = 0.0;
        for corner in 0..8 {
            let mut w = 1.0;
            let mut id = [0usize; 3];
            for a in 0..3 {
                let bit = (corner >> a) & 1;
                id[a] = base[a] + bit;
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
            }
            v += w * self.values[self.index(id[0], id[1], id[2])];
        }
        Ok(v)
    }

    /// `Σ values · cell volume` (trapezoid-free node sum).
    pub fn mass(&self) -> f64 {
        let h = self.spacing();
        self.values.iter().sum::<f64>() * h[0] * h[1] * h[2]
    }

    /// Largest `|value − f(node)|` over nodes at least `margin` cells away
    /// from every face.
    pub fn max_deviation_from(&self, f: &ScalarField, margin: usize) -> f64 {
        let mut worst = 0.0_f64;
        let [nx, ny, nz] = self.shape;
        for i in margin..nx.saturating_sub(margin) {
            for j in margin..ny.saturating_sub(margin) {
                for k in margin..nz.saturating_sub(margin) {
                    let v = self.values[self.index(i, j, k)];
                    worst = worst.max((v - f.value(&self.node(i, j, k))).abs());
                }
            }
        }
        worst
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(DENSITY_MAGIC)?;
        w.write_all(&DENSITY_VERSION.to_le_bytes())?;
        for n in self.shape {
            w.write_all(&(n as u64).to_le_bytes())?;
        }
        for v in self.lo.iter().chain(&self.hi) {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&self.time.to_le_bytes())?;
        let b = self.boundary.as_bytes();
        w.write_all(&(b.len() as u32).to_le_bytes())?;
        w.write_all(b)?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        fn bytes<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
            let mut b = [0u8; N];
            r.read_exact(&mut b)?;
            Ok(b)
        }
        if &bytes::<4>(&mut r)? != DENSITY_MAGIC {
            return Err(Error::Format("not a density grid file (bad magic)".into()));
        }
        let version = u32::from_le_bytes(bytes(&mut r)?);
        if version != DENSITY_VERSION {
            return Err(Error::Format(format!("unsupported density grid version {version}")));
        }
        let mut shape = [0usize; 3];
        for s in &mut shape {
            *s = u64::from_le_bytes(bytes(&mut r)?) as usize;
        }
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for v in lo.iter_mut().chain(hi.iter_mut()) {
            *v = f64::from_le_bytes(bytes(&mut r)?);
        }
        let time = f64::from_le_bytes(bytes(&mut r)?);
        let mut bnd = vec![0u8; u32::from_le_bytes(bytes(&mut r)?) as usize];
        r.read_exact(&mut bnd)?;
        let boundary = String::from_utf8(bnd).map_err(|_| Error::Format("boundary id is not UTF-8".into()))?;
        let mut g = Self::new(lo, hi, shape)?;
        for v in &mut g.values {
            *v = f64::from_le_bytes(bytes(&mut r)?);
        }
        g.time = time;
        g.boundary = boundary;
        Ok(g)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    /// Writes the plane `axis = index` as CSV with the two remaining
    /// coordinates and the value.
    pub fn write_slice_csv(&self, axis: usize, index: usize, mut w: impl Write) -> Result<()> {
        if axis > 2 || index >= self.shape.get(axis).copied().unwrap_or(0) {
            return Err(Error::InvalidArgument(format!(
                "slice {index} on axis {axis} is outside the grid"
            )));
        }
        let names = ["m1", "m2", "m3"];
        let (a, b) = match axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        writeln!(w, "{},{},value", names[a], names[b])?;
        for s in 0..self.shape[a] {
            for t in 0..self.shape[b] {
                let mut id = [0usize; 3];
                id[axis] = index;
                id[a] = s;
                id[b] = t;
                let x = self.node(id[0], id[1], id[2]);
                let v = self.values[self.index(id[0], id[1], id[2])];
                writeln!(w, "{:?},{:?},{:?}", x[a], x[b], v)?;
            }
        }
        Ok(())
    }
}

/// Pointwise coefficients of a second-order operator
/// `Pf = b·∇f + Σ_ij D_ij ∂_i∂_j f`, per node: `b` (3) and the upper
/// triangle of `D` (xx, yy, zz, xy, xz, yz).
#[derive(Debug, Clone)]
pub struct OperatorCoefficients {
    pub b: Vec<[f64; 3]>,
    pub d: Vec<[f64; 6]>,
}

/// Reads off `b_i = P(x_i)` and `D_ij = ½[P(x_i x_j) − x_i P(x_j) − x_j P(x_i)]`
/// at every node.
pub fn operator_coefficients(spec: &GeneratorSpec, grid: &DensityGrid, dir: Direction) -> Result<OperatorCoefficients> {
    check_dim("generator dimension for grid solves", 3, spec.dim())?;
    let apply = |f: &ScalarField, x: &[f64]| match dir {
        Direction::Backward => generator_apply(spec, f, x),
        Direction::Forward => adjoint_apply(spec, f, x),
    };
    let coords: Vec<ScalarField> = (0..3).map(|i| ScalarField::coordinate(i, 3)).collect();
    let pairs = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)];
    let products: Vec<ScalarField> = pairs
        .iter()
        .map(|&(i, j)| ScalarField::coordinate_product(i, j, 3))
        .collect();
    let mut b = Vec::with_capacity(grid.len());
    let mut d = Vec::with_capacity(grid.len());
    for idx in 0..grid.len() {
        let x = grid.node_of(idx);
        let mut bi = [0.0; 3];
        for i in 0..3 {
            bi[i] = apply(&coords[i], &x)?;
        }
        let mut di = [0.0; 6];
        for (s, &(i, j)) in pairs.iter().enumerate() {
            let pij = apply(&products[s], &x)?;
            di[s] = 0.5 * (pij - x[i] * bi[j] - x[j] * bi[i]);
        }
        b.push(bi);
        d.push(di);
    }
    Ok(OperatorCoefficients { b, d })
}

/// Largest explicit-Euler step admitted by the diffusion and drift
/// conditions `dt ≤ Δx² / (2 max(Σ D_ii + Σ_{i<j} |D_ij|))` and
/// `dt ≤ Δx / max Σ |b_i|`.
pub fn admissible_dt(coef: &OperatorCoefficients, grid: &DensityGrid) -> f64 {
    let h = grid.spacing().into_iter().fold(f64::INFINITY, f64::min);
    let mut dmax = 0.0_f64;
    let mut bmax = 0.0_f64;
    for (b, d) in coef.b.iter().zip(&coef.d) {
        let diff = d[0] + d[1] + d[2] + d[3].abs() + d[4].abs() + d[5].abs();
        dmax = dmax.max(diff);
        bmax = bmax.max(b.iter().map(|v| v.abs()).sum());
    }
    let diffusive = if dmax > 0.0 { h * h / (2.0 * dmax) } else { f64::INFINITY };
    let advective = if bmax > 0.0 { h / bmax } else { f64::INFINITY };
    diffusive.min(advective)
}

/// Grid solve settings. `dt = None` picks 0.9 of the admissible step.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub horizon: f64,
    pub dt: Option<f64>,
}

/// Summary of a grid solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub grid: DensityGrid,
    pub steps: usize,
    pub dt: f64,
    pub admissible_dt: f64,
}

/// Explicit Euler on `∂ρ/∂t = Pρ` with central differences (mixed
/// derivatives included) and linearly extrapolated ghost nodes. The step is
/// shrunk to `T / ceil(T/dt)` so the horizon is hit exactly.
pub fn solve(spec: &GeneratorSpec, initial: &DensityGrid, dir: Direction, opts: SolveOptions) -> Result<SolveReport> {
    if !(opts.horizon >= 0.0) || !opts.horizon.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "horizon must be non-negative and finite, got {}",
            opts.horizon
        )));
    }
    let coef = operator_coefficients(spec, initial, dir)?;
    let admissible = admissible_dt(&coef, initial);
    let requested = opts.dt.unwrap_or(0.9 * admissible);
    if !(requested > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {requested}")));
    }
    if requested > admissible {
        return Err(Error::Cfl {
            requested,
            admissible,
        });
    }
    let steps = if opts.horizon == 0.0 {
        0
    } else {
        (opts.horizon / requested).ceil() as usize
    };
    let dt = if steps == 0 { requested } else { opts.horizon / steps as f64 };
    let mut cur = initial.clone();
    let mut next = initial.clone();
    let h = cur.spacing();
    let [nx, ny, nz] = cur.shape;
    for step in 0..steps {
        for i in 0..nx {
            for j in 0..ny {
                for k in 0..nz {
                    let idx = cur.index(i, j, k);
                    let p = [i as isize, j as isize, k as isize];
                    let u0 = cur.values[idx];
                    let shifted = |da: [isize; 3]| cur.at([p[0] + da[0], p[1] + da[1], p[2] + da[2]]);
                    let unit = |a: usize, s: isize| {
                        let mut d = [0isize; 3];
                        d[a] = s;
                        d
                    };
                    let mut first = [0.0; 3];
                    let mut second = [0.0; 3];
                    for a in 0..3 {
                        let up = shifted(unit(a, 1));
                        let dn = shifted(unit(a, -1));
                        first[a] = (up - dn) / (2.0 * h[a]);
                        second[a] = (up - 2.0 * u0 + dn) / (h[a] * h[a]);
                    }
                    let mixed = |a: usize, c: usize| {
                        let mut pp = [0isize; 3];
                        pp[a] = 1;
                        pp[c] = 1;
                        let mut pm = pp;
                        pm[c] = -1;
                        let mut mp = pp;
                        mp[a] = -1;
                        let mut mm = pm;
                        mm[a] = -1;
                        (shifted(pp) - shifted(pm) - shifted(mp) + shifted(mm)) / (4.0 * h[a] * h[c])
                    };
                    let b = &coef.b[idx];
                    let d = &coef.d[idx];
                    let mut rate = b[0] * first[0] + b[1] * first[1] + b[2] * first[2];
                    rate += d[0] * second[0] + d[1] * second[1] + d[2] * second[2];
                    // D is symmetric: the off-diagonal pair contributes twice
                    if d[3] != 0.0 {
                        rate += 2.0 * d[3] * mixed(0, 1);
                    }
                    if d[4] != 0.0 {
                        rate += 2.0 * d[4] * mixed(0, 2);
                    }
                    if d[5] != 0.0 {
                        rate += 2.0 * d[5] * mixed(1, 2);
                    }
                    next.values[idx] = u0 + dt * rate;
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
        if cur.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                step,
                time: cur.time,
                last_state: Vec::new(),
            });
        }
        cur.time += dt;
    }
    cur.time = opts.horizon;
    Ok(SolveReport {
        grid: cur,
        steps,
        dt,
        admissible_dt: admissible,
    })
}

/// `ρ(T, ·)` for `∂ρ/∂t = Lρ`, `ρ(0, ·) = f0`, on the geometry of `geometry`.
pub fn backward_solve(
    spec: &GeneratorSpec,
    f0: &ScalarField,
    geometry: &DensityGrid,
    opts: SolveOptions,
) -> Result<SolveReport> {
    let mut init = geometry.clone();
    init.fill(f0)?;
    init.time = 0.0;
    solve(spec, &init, Direction::Backward, opts)
}

/// Density evolved by `∂ρ/∂t = L*ρ` from a unit-mass Gaussian of width
/// `2Δx` centred at `x0`, standing in for a point mass.
pub fn forward_solve(spec: &GeneratorSpec, x0: &[f64], geometry: &DensityGrid, opts: SolveOptions) -> Result<SolveReport> {
    check_dim("initial point", 3, x0.len())?;
    let sigma = 2.0 * geometry.max_spacing();
    let c = x0.to_vec();
    let bump = ScalarField::new("gaussian", 3, move |x| {
        let r2: f64 = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
        (-0.5 * r2 / (sigma * sigma)).exp()
    });
    let mut init = geometry.clone();
    init.fill(&bump)?;
    let mass = init.mass();
    if !(mass > 0.0) {
        return Err(Error::InvalidArgument("initial point lies too far outside the grid".into()));
    }
    init.values.iter_mut().for_each(|v| *v /= mass);
    init.time = 0.0;
    solve(spec, &init, Direction::Forward, opts)
}

/// Ensemble mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub sd: f64,
    pub count: usize,
}

impl McEstimate {
    pub fn from_samples(xs: &[f64]) -> Result<Self> {
        let n = xs.len();
        if n == 0 {
            return Err(Error::InvalidArgument("empty sample".into()));
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Ok(Self {
            mean,
            stderr: sd / (n as f64).sqrt(),
            sd,
            count: n,
        })
    }
}

/// Evaluates `f(X_T)` over `count` independent Heun paths; path `i` uses
/// the grid seeded with `split_seed(seed, i)`. Systems without noise are
/// integrated once with RK4. Paths run in parallel; the reduction order is
/// fixed, so the result does not depend on the thread count.
pub fn mc_samples(
    sys: &SdeSystem,
    f: &ScalarField,
    x0: &[f64],
    horizon: f64,
    steps: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::InvalidArgument("ensemble size must be positive".into()));
    }
    check_dim("observable", sys.state_dim, f.dim())?;
    if sys.channels == 0 {
        let g = sample_channels(0, seed, horizon, steps)?;
        let tr = integrate(sys, Scheme::Rk4, &g, x0)?;
        return Ok(vec![f.value(tr.last()); count]);
    }
    (0..count)
        .into_par_iter()
        .map(|i| {
            let s = split_seed(seed, i as u64);
            let run = || -> Result<f64> {
                let g = sample_channels(sys.channels, s, horizon, steps)?;
                let tr = integrate(sys, Scheme::HeunStrat, &g, x0)?;
                Ok(f.value(tr.last()))
            };
            run().map_err(|e| Error::Ensemble {
                path: i,
                seed: s,
                source: Box::new(e),
            })
        })
        .collect()
}

pub fn mc_expectation(
    sys: &SdeSystem,
    f: &ScalarField,
    x0: &[f64],
    horizon: f64,
    steps: usize,
    count: usize,
    seed: u64,
) -> Result<McEstimate> {
    McEstimate::from_samples(&mc_samples(sys, f, x0, horizon, steps, count, seed)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{casimir, lie_poisson_system};
    use crate::lie::{builtin, AlgebraVector};

    fn so3() -> Arc<LieAlgebra> {
        Arc::new(builtin("so3").unwrap())
    }

    const K: [f64; 9] = [1.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 1.0 / 3.0];

    fn noise() -> NoiseSpec {
        NoiseSpec::new(
            vec![AlgebraVector(vec![0.5, 0.0, 0.0]), AlgebraVector(vec![0.0, 0.3, 0.0])],
            1,
        )
    }

    #[test]
    fn generator_kills_casimir_and_constants() {
        let spec = GeneratorSpec::lie_poisson(so3(), &K, &noise()).unwrap();
        let c = casimir(&so3(), "quadratic").unwrap();
        let one = ScalarField::constant(1.0, 3);
        for m in [[0.3, -0.2, 0.9], [1.5, 0.4, -0.7]] {
            assert!(generator_apply(&spec, &c, &m).unwrap().abs() < 1e-12);
            assert!(adjoint_apply(&spec, &c, &m).unwrap().abs() < 1e-12);
            assert_eq!(generator_apply(&spec, &one, &m).unwrap(), 0.0);
        }
    }

    #[test]
    fn noise_free_generator_is_transport() {
        let spec = GeneratorSpec::lie_poisson(so3(), &K, &NoiseSpec::none(0)).unwrap();
        let f = ScalarField::coordinate(2, 3);
        let m = [0.6, 0.7, 0.4];
        let lf = generator_apply(&spec, &f, &m).unwrap();
        // dm3/dt = (m × K m)_3 = m1 m2 (1/2 − 1)
        assert!((lf - 0.6 * 0.7 * (0.5 - 1.0)).abs() < 1e-15);
        assert_eq!(adjoint_apply(&spec, &f, &m).unwrap(), -lf);
    }

    #[test]
    fn coefficients_match_sde() {
        // b = Stratonovich drift + Itô correction, D = ½ Σ σσᵀ
        let nz = noise();
        let spec = GeneratorSpec::lie_poisson(so3(), &K, &nz).unwrap();
        let sys = lie_poisson_system(so3(), K.to_vec(), &nz, Default::default()).unwrap();
        let grid = DensityGrid::cube(-1.0, 1.0, 3).unwrap();
        let coef = operator_coefficients(&spec, &grid, Direction::Backward).unwrap();
        for idx in 0..grid.len() {
            let x = grid.node_of(idx);
            let drift = sys.eval_drift(0.0, &x).unwrap();
            let corr = sys.eval_ito_correction(0.0, &x).unwrap();
            for i in 0..3 {
                assert!((coef.b[idx][i] - drift[i] - corr[i]).abs() < 1e-12);
            }
            let s: Vec<Vec<f64>> = (0..2).map(|k| sys.eval_diffusion(0.0, &x, k).unwrap()).collect();
            let dd = |i: usize, j: usize| 0.5 * s.iter().map(|v| v[i] * v[j]).sum::<f64>();
            let expect = [dd(0, 0), dd(1, 1), dd(2, 2), dd(0, 1), dd(0, 2), dd(1, 2)];
            for t in 0..6 {
                assert!((coef.d[idx][t] - expect[t]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_initial_data_stays_constant() {
        let spec = GeneratorSpec::lie_poisson(so3(), &K, &noise()).unwrap();
        let geo = DensityGrid::cube(-1.5, 1.5, 12).unwrap();
        let rep = backward_solve(
            &spec,
            &ScalarField::constant(2.5, 3),
            &geo,
            SolveOptions { horizon: 0.05, dt: None },
        )
        .unwrap();
        assert!(rep.grid.values.iter().all(|v| *v == 2.5));
        assert_eq!(rep.grid.time, 0.05);
    }

    #[test]
    fn cfl_violation_reports_admissible_step() {
        let spec = GeneratorSpec::lie_poisson(so3(), &K, &noise()).unwrap();
        let geo = DensityGrid::cube(-1.5, 1.5, 12).unwrap();
        match backward_solve(&spec, &ScalarField::coordinate(0, 3), &geo, SolveOptions { horizon: 0.1, dt: Some(1.0) }) {
            Err(Error::Cfl { requested, admissible }) => {
                assert_eq!(requested, 1.0);
                assert!(admissible > 0.0 && admissible < 1.0);
            }
            other => panic!("expected CFL error, got {other:?}"),
        }
    }

    #[test]
    fn interpolation_reproduces_linear_fields() {
        let mut g = DensityGrid::new([-1.0, 0.0, 2.0], [1.0, 3.0, 4.0], [5, 7, 4]).unwrap();
        g.fill(&ScalarField::linear(vec![1.0, -2.0, 0.5])).unwrap();
        let x = [0.13, 2.2, 3.7];
        let v = g.interpolate(&x).unwrap();
        assert!((v - (0.13 - 4.4 + 1.85)).abs() < 1e-13);
        assert!(g.interpolate(&[2.0, 0.0, 3.0]).is_err());
        // extrapolated ghosts are exact for linear data
        assert!((g.at([-1, 0, 0]) - (-1.5 - 0.0 + 1.0)).abs() < 1e-13);
    }

    #[test]
    fn density_grid_round_trip() {
        let mut g = DensityGrid::cube(-1.0, 1.0, 4).unwrap();
        g.fill(&ScalarField::coordinate_product(0, 2, 3)).unwrap();
        g.time = 0.25;
        let mut buf = Vec::new();
        g.write_to(&mut buf).unwrap();
        assert_eq!(DensityGrid::read_from(&buf[..]).unwrap(), g);
        // z fastest
        assert_eq!(g.index(0, 0, 1), 1);
        let mut csv = Vec::new();
        g.write_slice_csv(2, 3, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 1 + 16);
        assert!(text.starts_with("m1,m2,value"));
        assert!(g.write_slice_csv(3, 0, Vec::new()).is_err());
    }

    #[test]
    fn deterministic_ensemble_has_no_spread() {
        let sys = lie_poisson_system(so3(), K.to_vec(), &NoiseSpec::none(0), Default::default()).unwrap();
        let est = mc_expectation(&sys, &ScalarField::coordinate(0, 3), &[0.6, 0.7, 0.4], 0.5, 64, 5, 3).unwrap();
        assert_eq!(est.stderr, 0.0);
        assert_eq!(est.count, 5);
    }

    #[test]
    fn ensemble_is_thread_count_independent() {
        let sys = lie_poisson_system(so3(), K.to_vec(), &noise(), Default::default()).unwrap();
        let f = ScalarField::coordinate(2, 3);
        let a = mc_samples(&sys, &f, &[0.6, 0.7, 0.4], 0.2, 16, 64, 9).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| mc_samples(&sys, &f, &[0.6, 0.7, 0.4], 0.2, 16, 64, 9).unwrap());
        assert_eq!(a, b);
    }
}
