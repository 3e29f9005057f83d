//! Finite-dimensional Lie algebras given by structure constants.
//!
//! Sign conventions are fixed here once and every other module routes
//! through this file:
//!
//! ```text
//! [u, v]^γ        =  c_αβ^γ u^α v^β
//! (ad*_v m)_α     = −c_αβ^γ v^β m_γ
//! ⟨ad*_v m, w⟩    =  ⟨m, [v, w]⟩
//! ```
//!
//! The action of the algebra on a configuration manifold is a *right*
//! action, so `[A_α, A_β] = c_αβ^γ A_γ` for the generating vector fields
//! (see [`crate::action`]).

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Tolerance used for exact algebraic identities in double precision.
pub const ALGEBRA_TOL: f64 = 1e-12;

/// Element of the Lie algebra in the basis `e_1..e_r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgebraVector(pub Vec<f64>);

/// Element of the dual `g*` in the dual basis `e^1..e^r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoVector(pub Vec<f64>);

macro_rules! vector_newtype {
    ($ty:ident) => {
        impl $ty {
            pub fn zeros(dim: usize) -> Self {
                Self(vec![0.0; dim])
            }

            /// Basis element `index` (zero based).
            pub fn basis(dim: usize, index: usize) -> Self {
                let mut v = vec![0.0; dim];
                v[index] = 1.0;
                Self(v)
            }

            pub fn dim(&self) -> usize {
                self.0.len()
            }

            pub fn norm(&self) -> f64 {
                self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
            }

            pub fn scaled(&self, s: f64) -> Self {
                Self(self.0.iter().map(|x| x * s).collect())
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }
        }

        impl Deref for $ty {
            type Target = [f64];
            fn deref(&self) -> &[f64] {
                &self.0
            }
        }

        impl DerefMut for $ty {
            fn deref_mut(&mut self) -> &mut [f64] {
                &mut self.0
            }
        }

        impl From<Vec<f64>> for $ty {
            fn from(v: Vec<f64>) -> Self {
                Self(v)
            }
        }

        impl From<&[f64]> for $ty {
            fn from(v: &[f64]) -> Self {
                Self(v.to_vec())
            }
        }
    };
}

vector_newtype!(AlgebraVector);
vector_newtype!(CoVector);

/// Natural pairing `⟨m, u⟩ = m_α u^α`.
pub fn pairing(m: &CoVector, u: &AlgebraVector) -> f64 {
    m.iter().zip(u.iter()).map(|(a, b)| a * b).sum()
}

/// A Lie algebra described by dense structure constants `c[α][β][γ]`.
///
/// Immutable after construction; share it behind an `Arc`.
#[derive(Debug, Clone, PartialEq)]
pub struct LieAlgebra {
    name: String,
    dim: usize,
    c: Vec<f64>,
}

impl LieAlgebra {
    /// Builds an algebra from dense constants indexed `(α·r + β)·r + γ`,
    /// rejecting tables that are not antisymmetric in the lower indices.
    pub fn from_dense(name: impl Into<String>, dim: usize, c: Vec<f64>) -> Result<Self> {
        let alg = Self::from_dense_unchecked(name, dim, c)?;
        let res = alg.antisymmetry_residual();
        if res > ALGEBRA_TOL {
            return Err(Error::InvalidArgument(format!(
                "structure constants of '{}' are not antisymmetric (residual {res:e})",
                alg.name
            )));
        }
        Ok(alg)
    }

    /// Same as [`LieAlgebra::from_dense`] without the antisymmetry check.
    /// Useful for exercising the residual diagnostics on broken tables.
    pub fn from_dense_unchecked(name: impl Into<String>, dim: usize, c: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("algebra dimension must be positive".into()));
        }
        check_dim("structure constant table", dim * dim * dim, c.len())?;
        if c.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite structure constant".into()));
        }
        Ok(Self {
            name: name.into(),
            dim,
            c,
        })
    }

    /// Builds an algebra from sparse zero-based entries `(α, β, γ, value)`.
    /// Both `(α,β,γ)` and `(β,α,γ)` must be listed.
    pub fn from_entries(
        name: impl Into<String>,
        dim: usize,
        entries: &[(usize, usize, usize, f64)],
    ) -> Result<Self> {
        let mut c = vec![0.0; dim * dim * dim];
        let mut seen = vec![false; dim * dim * dim];
        for &(a, b, g, v) in entries {
            if a >= dim || b >= dim || g >= dim {
                return Err(Error::InvalidArgument(format!(
                    "structure constant index ({a},{b},{g}) out of range for dim {dim}"
                )));
            }
            let idx = (a * dim + b) * dim + g;
            if seen[idx] {
                return Err(Error::InvalidArgument(format!(
                    "duplicate structure constant entry ({a},{b},{g})"
                )));
            }
            seen[idx] = true;
            c[idx] = v;
        }
        Self::from_dense(name, dim, c)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn c(&self, a: usize, b: usize, g: usize) -> f64 {
        self.c[(a * self.dim + b) * self.dim + g]
    }

    pub fn dense(&self) -> &[f64] {
        &self.c
    }

    /// `[u, v]^γ = c_αβ^γ u^α v^β`.
    pub fn bracket(&self, u: &[f64], v: &[f64]) -> Result<AlgebraVector> {
        check_dim("bracket lhs", self.dim, u.len())?;
        check_dim("bracket rhs", self.dim, v.len())?;
        Ok(AlgebraVector(self.bracket_raw(u, v)))
    }

    pub(crate) fn bracket_raw(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let r = self.dim;
        let mut w = vec![0.0; r];
        for a in 0..r {
            if u[a] == 0.0 {
                continue;
            }
            for b in 0..r {
                let uv = u[a] * v[b];
                if uv == 0.0 {
                    continue;
                }
                let row = &self.c[(a * r + b) * r..(a * r + b + 1) * r];
                for (wg, cg) in w.iter_mut().zip(row) {
                    *wg += cg * uv;
                }
            }
        }
        w
    }

    /// `(ad*_v m)_α = −c_αβ^γ v^β m_γ`.
    pub fn ad_star(&self, v: &[f64], m: &[f64]) -> Result<CoVector> {
        check_dim("ad* direction", self.dim, v.len())?;
        check_dim("ad* covector", self.dim, m.len())?;
        Ok(CoVector(self.ad_star_raw(v, m)))
    }

    pub(crate) fn ad_star_raw(&self, v: &[f64], m: &[f64]) -> Vec<f64> {
        let r = self.dim;
        let mut out = vec![0.0; r];
        for (a, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for b in 0..r {
                if v[b] == 0.0 {
                    continue;
                }
                let row = &self.c[(a * r + b) * r..(a * r + b + 1) * r];
                let dot: f64 = row.iter().zip(m).map(|(c, mg)| c * mg).sum();
                s += v[b] * dot;
            }
            *o = -s;
        }
        out
    }

    /// Matrix of `ad*_v` acting on covectors, row-major `r × r`.
    pub fn ad_star_matrix(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_dim("ad* direction", self.dim, v.len())?;
        let r = self.dim;
        let mut mat = vec![0.0; r * r];
        for a in 0..r {
            for g in 0..r {
                let mut s = 0.0;
                for b in 0..r {
                    s += self.c(a, b, g) * v[b];
                }
                mat[a * r + g] = -s;
            }
        }
        Ok(mat)
    }

    /// Max-norm of `c_αβ^γ + c_βα^γ` over all index triples.
    pub fn antisymmetry_residual(&self) -> f64 {
        let r = self.dim;
        let mut worst = 0.0_f64;
        for a in 0..r {
            for b in 0..r {
                for g in 0..r {
                    worst = worst.max((self.c(a, b, g) + self.c(b, a, g)).abs());
                }
            }
        }
        worst
    }

    /// Max-norm of the cyclic Jacobi sum
    /// `c_αβ^δ c_δγ^ε + c_βγ^δ c_δα^ε + c_γα^δ c_δβ^ε`.
    pub fn jacobi_residual(&self) -> f64 {
        let r = self.dim;
        let mut worst = 0.0_f64;
        for a in 0..r {
            for b in 0..r {
                for g in 0..r {
                    for e in 0..r {
                        let mut s = 0.0;
                        for d in 0..r {
                            s += self.c(a, b, d) * self.c(d, g, e)
                                + self.c(b, g, d) * self.c(d, a, e)
                                + self.c(g, a, d) * self.c(d, b, e);
                        }
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst
    }

    /// Loads `{"dim": r, "c": [[α,β,γ,value], ...]}` with one-based indices.
    pub fn from_json_str(name: impl Into<String>, text: &str) -> Result<Self> {
        let doc: AlgebraDocument = serde_json::from_str(text)?;
        doc.into_algebra(name)
    }

    /// Serializes the nonzero constants in the same document format.
    pub fn to_json_string(&self) -> Result<String> {
        let r = self.dim;
        let mut entries = Vec::new();
        for a in 0..r {
            for b in 0..r {
                for g in 0..r {
                    let v = self.c(a, b, g);
                    if v != 0.0 {
                        entries.push((a + 1, b + 1, g + 1, v));
                    }
                }
            }
        }
        Ok(serde_json::to_string(&AlgebraDocument { dim: r, c: entries })?)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AlgebraDocument {
    dim: usize,
    c: Vec<(usize, usize, usize, f64)>,
}

impl AlgebraDocument {
    fn into_algebra(self, name: impl Into<String>) -> Result<LieAlgebra> {
        let mut zero_based = Vec::with_capacity(self.c.len());
        for (a, b, g, v) in self.c {
            if a == 0 || b == 0 || g == 0 {
                return Err(Error::InvalidArgument(
                    "structure constant indices are one-based".into(),
                ));
            }
            zero_based.push((a - 1, b - 1, g - 1, v));
        }
        LieAlgebra::from_entries(name, self.dim, &zero_based)
    }
}

/// Built-in algebras: `so3`, `h3`, `se2`.
///
/// * `so3`: `c_αβ^γ = ε_αβγ`.
/// * `h3`: Heisenberg, `[e1, e2] = e3`.
/// * `se2`: `[e3, e1] = e2`, `[e3, e2] = −e1`, `[e1, e2] = 0`
///   (e1, e2 translations, e3 rotation).
pub fn builtin(name: &str) -> Result<LieAlgebra> {
    match name {
        "so3" => {
            let mut entries = Vec::new();
            for (a, b, g) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
                entries.push((a, b, g, 1.0));
                entries.push((b, a, g, -1.0));
            }
            LieAlgebra::from_entries("so3", 3, &entries)
        }
        "h3" => LieAlgebra::from_entries("h3", 3, &[(0, 1, 2, 1.0), (1, 0, 2, -1.0)]),
        "se2" => LieAlgebra::from_entries(
            "se2",
            3,
            &[
                (2, 0, 1, 1.0),
                (0, 2, 1, -1.0),
                (2, 1, 0, -1.0),
                (1, 2, 0, 1.0),
            ],
        ),
        other => Err(Error::NotFound(format!("builtin algebra '{other}'"))),
    }
}

pub const BUILTIN_ALGEBRAS: [&str; 3] = ["so3", "h3", "se2"];
