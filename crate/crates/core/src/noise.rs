//! Reproducible Wiener increments shared by every particle of a flow.
//!
//! Process `k` is one ChaCha20 stream: key from `seed`, stream id `k`. Normals
//! come from the Box–Muller transform, two `u64` draws per pair of normals, so
//! the number of draws consumed is fixed and the output is bit-stable across
//! platforms (transcendentals go through `libm`).

use alloc::vec::Vec;

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRealization {
    seed: u64,
    m: usize,
    grid: TimeGrid,
    /// `increments[k * n + (i - 1)] = ΔW_k(i)`
    increments: Vec<f64>,
}

/// Generate `m` independent increment streams on `grid`.
pub fn make_noise(seed: u64, m: usize, grid: TimeGrid) -> Result<NoiseRealization> {
    if m == 0 {
        return Err(Error::InvalidParameter { name: "m", reason: "need at least one driving process" });
    }
    let n = grid.n_steps();
    let sd = libm::sqrt(grid.dt());
    let mut increments = Vec::with_capacity(m * n);
    for k in 0..m {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let mut normals = NormalStream::new(rng);
        increments.extend((0..n).map(|_| sd * normals.next()));
    }
    Ok(NoiseRealization { seed, m, grid, increments })
}

impl NoiseRealization {
    /// Build from explicit increments, `increments[k]` being the `n_steps`
    /// increments of process `k`. Mostly for tests and oracles.
    pub fn from_increments(grid: TimeGrid, increments: &[&[f64]]) -> Result<Self> {
        if increments.is_empty() {
            return Err(Error::InvalidParameter { name: "m", reason: "need at least one driving process" });
        }
        let mut flat = Vec::with_capacity(increments.len() * grid.n_steps());
        for inc in increments {
            if inc.len() != grid.n_steps() {
                return Err(Error::DimensionMismatch { expected: grid.n_steps(), found: inc.len() });
            }
            if inc.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite);
            }
            flat.extend_from_slice(inc);
        }
        Ok(NoiseRealization { seed: 0, m: increments.len(), grid, increments: flat })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// `ΔW_k(i) = W_k(t_i) − W_k(t_{i−1})` for `k < m`, `1 ≤ i ≤ n_steps`.
    #[inline]
    pub fn increment(&self, k: usize, i: usize) -> f64 {
        debug_assert!(i >= 1);
        self.increments[k * self.grid.n_steps() + (i - 1)]
    }

    /// All increments of process `k`, indexed from step 1.
    pub fn increments(&self, k: usize) -> &[f64] {
        let n = self.grid.n_steps();
        &self.increments[k * n..(k + 1) * n]
    }

    /// The path `W_k(t_i)`, `i = 0..=n_steps`, with `W_k(0) = 0`.
    pub fn path(&self, k: usize) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.grid.n_steps() + 1);
        let mut acc = 0.0;
        w.push(acc);
        for &dw in self.increments(k) {
            acc += dw;
            w.push(acc);
        }
        w
    }
}

struct NormalStream {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl NormalStream {
    fn new(rng: ChaCha20Rng) -> Self {
        NormalStream { rng, spare: None }
    }

    fn next(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // u1 in (0, 1], u2 in [0, 1), 53 random bits each.
        let u1 = ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let theta = 2.0 * core::f64::consts::PI * u2;
        self.spare = Some(r * libm::sin(theta));
        r * libm::cos(theta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_variance(x: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
    }

    #[test]
    fn rejects_empty() {
        assert!(TimeGrid::new(1.0, 0).is_err());
        let g = TimeGrid::new(1.0, 10).unwrap();
        assert!(make_noise(7, 0, g).is_err());
    }

    #[test]
    fn deterministic() {
        let g = TimeGrid::new(1.0, 10_000).unwrap();
        let a = make_noise(7, 1, g).unwrap();
        let b = make_noise(7, 1, g).unwrap();
        assert!(a.increments(0).iter().zip(b.increments(0)).all(|(x, y)| x.to_bits() == y.to_bits()));
        let c = make_noise(8, 1, g).unwrap();
        assert_ne!(a.increments(0), c.increments(0));
    }

    #[test]
    fn streams_differ_per_process() {
        let g = TimeGrid::new(1.0, 100).unwrap();
        let a = make_noise(7, 2, g).unwrap();
        assert_ne!(a.increments(0), a.increments(1));
        // Process 0 does not depend on how many processes are requested.
        let b = make_noise(7, 1, g).unwrap();
        assert_eq!(a.increments(0), b.increments(0));
    }

    #[test]
    fn variance_matches_dt() {
        let g = TimeGrid::new(1.0, 10_000).unwrap();
        let noise = make_noise(7, 1, g).unwrap();
        let var = sample_variance(noise.increments(0));
        let dt = g.dt();
        assert!(libm::fabs(var - dt) / dt <= 3.0 / libm::sqrt(10_000.0), "var {var}");
    }

    #[test]
    fn path_starts_at_zero() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        let noise = NoiseRealization::from_increments(g, &[&[1.0, -2.0, 1.0, 0.5]]).unwrap();
        assert_eq!(noise.path(0), alloc::vec![0.0, 1.0, -1.0, 0.0, 0.5]);
    }
}
