//! Reproducible multichannel Brownian increments.
//!
//! Channel `k` of a grid with seed `s` is drawn from a ChaCha20 generator
//! keyed by `ChaCha20Rng::seed_from_u64(s)` with stream id `k`; standard
//! normals come from the ziggurat sampler of `rand_distr` and are scaled by
//! `sqrt(T/M)`. Increments live at the finest level only; coarser grids are
//! produced by pairwise summation, so coarsening by `2^a` then `2^b` is
//! bit-identical to coarsening by `2^(a+b)`.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::lie::AlgebraVector;

/// Identifier of the increment generator, recorded in every artifact.
pub const GENERATOR_ID: &str = "chacha20-seed_from_u64/stream=channel/normal=ziggurat(rand_distr-0.5)";

const GRID_MAGIC: &[u8; 4] = b"CABG";
const GRID_VERSION: u32 = 1;

/// Diffusion directions `ξ_1..ξ_N` and the seed of their Brownian drivers.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub xi: Vec<AlgebraVector>,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(xi: Vec<AlgebraVector>, seed: u64) -> Self {
        Self { xi, seed }
    }

    pub fn none(seed: u64) -> Self {
        Self {
            xi: Vec::new(),
            seed,
        }
    }

    pub fn channels(&self) -> usize {
        self.xi.len()
    }

    /// Checks every direction against the algebra dimension.
    pub fn check_dim(&self, r: usize) -> Result<()> {
        for xi in &self.xi {
            check_dim("noise direction", r, xi.len())?;
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            xi: self.xi.clone(),
            seed,
        }
    }
}

/// Brownian increments `dW[step][channel]`, each `N(0, T/M)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianGrid {
    horizon: f64,
    steps: usize,
    channels: usize,
    seed: u64,
    generator: String,
    increments: Vec<f64>,
}

fn check_power_of_two(what: &str, m: usize) -> Result<()> {
    if m == 0 || !m.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "{what} must be a positive power of two, got {m}"
        )));
    }
    Ok(())
}

/// Samples the grid for `(spec.seed, T, M, N)`.
pub fn sample_grid(spec: &NoiseSpec, horizon: f64, steps: usize) -> Result<BrownianGrid> {
    sample_channels(spec.channels(), spec.seed, horizon, steps)
}

/// Same as [`sample_grid`] when only the channel count matters.
pub fn sample_channels(channels: usize, seed: u64, horizon: f64, steps: usize) -> Result<BrownianGrid> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "horizon must be positive and finite, got {horizon}"
        )));
    }
    check_power_of_two("number of steps", steps)?;
    let scale = (horizon / steps as f64).sqrt();
    let mut increments = vec![0.0; steps * channels];
    for k in 0..channels {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        for step in 0..steps {
            let z: f64 = rng.sample(StandardNormal);
            increments[step * channels + k] = z * scale;
        }
    }
    Ok(BrownianGrid {
        horizon,
        steps,
        channels,
        seed,
        generator: GENERATOR_ID.to_string(),
        increments,
    })
}

/// Derives the seed of ensemble member `index` from a base seed
/// (SplitMix64 finalizer applied to `seed ⊕ mix(index)`).
pub fn split_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl BrownianGrid {
    /// A grid with explicit increments (row-major `[step][channel]`).
    pub fn from_increments(
        horizon: f64,
        steps: usize,
        channels: usize,
        seed: u64,
        increments: Vec<f64>,
    ) -> Result<Self> {
        check_power_of_two("number of steps", steps)?;
        check_dim("increment table", steps * channels, increments.len())?;
        if !(horizon > 0.0) {
            return Err(Error::InvalidArgument("horizon must be positive".into()));
        }
        Ok(Self {
            horizon,
            steps,
            channels,
            seed,
            generator: "explicit".to_string(),
            increments,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn generator(&self) -> &str {
        &self.generator
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// Time of grid node `n`.
    pub fn time(&self, n: usize) -> f64 {
        self.horizon * n as f64 / self.steps as f64
    }

    pub fn increment(&self, step: usize) -> &[f64] {
        &self.increments[step * self.channels..(step + 1) * self.channels]
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// Increments of one channel.
    pub fn channel(&self, k: usize) -> Vec<f64> {
        (0..self.steps)
            .map(|s| self.increments[s * self.channels + k])
            .collect()
    }

    /// `W_T` per channel, summed along the same pairwise tree used by
    /// [`coarsen`], so it is invariant under coarsening.
    pub fn total_displacement(&self) -> Vec<f64> {
        coarsen(self, self.steps)
            .expect("steps divides itself")
            .increments
    }

    /// Brownian path values `W(t_n)` per node (left-to-right partial sums).
    pub fn path(&self) -> Vec<Vec<f64>> {
        let mut w = vec![0.0; self.channels];
        let mut out = Vec::with_capacity(self.steps + 1);
        out.push(w.clone());
        for s in 0..self.steps {
            for (wk, dw) in w.iter_mut().zip(self.increment(s)) {
                *wk += dw;
            }
            out.push(w.clone());
        }
        out
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(GRID_MAGIC)?;
        w.write_all(&GRID_VERSION.to_le_bytes())?;
        w.write_all(&(self.channels as u64).to_le_bytes())?;
        w.write_all(&(self.steps as u64).to_le_bytes())?;
        w.write_all(&self.horizon.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        let gen = self.generator.as_bytes();
        w.write_all(&(gen.len() as u32).to_le_bytes())?;
        w.write_all(gen)?;
        for v in &self.increments {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != GRID_MAGIC {
            return Err(Error::Format("not a Brownian grid file (bad magic)".into()));
        }
        let version = read_u32(&mut r)?;
        if version != GRID_VERSION {
            return Err(Error::Format(format!("unsupported grid version {version}")));
        }
        let channels = read_u64(&mut r)? as usize;
        let steps = read_u64(&mut r)? as usize;
        let horizon = f64::from_le_bytes(read_array(&mut r)?);
        let seed = read_u64(&mut r)?;
        let gen_len = read_u32(&mut r)? as usize;
        let mut gen = vec![0u8; gen_len];
        r.read_exact(&mut gen)?;
        let generator = String::from_utf8(gen)
            .map_err(|_| Error::Format("generator id is not UTF-8".into()))?;
        let total = steps
            .checked_mul(channels)
            .ok_or_else(|| Error::Format("grid size overflows".into()))?;
        let mut increments = Vec::with_capacity(total);
        for _ in 0..total {
            increments.push(f64::from_le_bytes(read_array(&mut r)?));
        }
        let mut grid = Self::from_increments(horizon, steps, channels, seed, increments)?;
        grid.generator = generator;
        Ok(grid)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

fn read_array<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(r)?))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    Ok(u64::from_le_bytes(read_array(r)?))
}

/// Sums increments in blocks of `factor` (a power of two dividing the step
/// count) by repeated pairwise halving. The result drives the same Brownian
/// path on the coarser grid.
pub fn coarsen(g: &BrownianGrid, factor: usize) -> Result<BrownianGrid> {
    check_power_of_two("coarsening factor", factor)?;
    if factor > g.steps || !g.steps.is_multiple_of(factor) {
        return Err(Error::InvalidArgument(format!(
            "coarsening factor {factor} does not divide {} steps",
            g.steps
        )));
    }
    let n = g.channels;
    let mut inc = g.increments.clone();
    let mut steps = g.steps;
    let mut f = factor;
    while f > 1 {
        let half = steps / 2;
        let mut next = vec![0.0; half * n];
        for s in 0..half {
            for k in 0..n {
                next[s * n + k] = inc[2 * s * n + k] + inc[(2 * s + 1) * n + k];
            }
        }
        inc = next;
        steps = half;
        f /= 2;
    }
    Ok(BrownianGrid {
        horizon: g.horizon,
        steps,
        channels: n,
        seed: g.seed,
        generator: g.generator.clone(),
        increments: inc,
    })
}
