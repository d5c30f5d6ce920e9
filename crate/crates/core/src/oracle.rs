//! Brute-force first-passage estimators used to cross-check the slot
//! simulator. Nothing here touches the simulator's generators: paths are
//! drawn from `SmallRng` seeded per chunk.
//!
//! Results are reduced chunk by chunk in index order, so they are bitwise
//! identical for any thread count.

use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, SimError};

/// Paths per parallel work unit.
const CHUNK: u64 = 1000;

/// Largest tolerated fraction of paths cut off by the step cap.
pub const MAX_CAPPED_FRACTION: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HittingMoments {
    pub e_j: f64,
    pub e_j2: f64,
    /// E[∫B²dt] for Brownian paths, E[Σ_{n≤J} S_n²] for the walk.
    pub e_int: f64,
    pub e_sj2: f64,
    pub se_j: f64,
    pub se_j2: f64,
    pub se_int: f64,
    pub se_sj2: f64,
    pub n_paths: u64,
    pub capped: u64,
    /// The level is within a few steps of the origin, so J mostly reflects
    /// the step size.
    pub resolution_limited: bool,
}

#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    n: u64,
    capped: u64,
    j: [f64; 2],
    j2: [f64; 2],
    int: [f64; 2],
    sj2: [f64; 2],
}

impl Sums {
    fn push(&mut self, j: f64, int: f64, sj2: f64) {
        self.n += 1;
        let j2 = j * j;
        for (acc, x) in [(&mut self.j, j), (&mut self.j2, j2), (&mut self.int, int), (&mut self.sj2, sj2)] {
            acc[0] += x;
            acc[1] += x * x;
        }
    }

    fn merge(mut self, o: Sums) -> Sums {
        self.n += o.n;
        self.capped += o.capped;
        for (a, b) in [(&mut self.j, o.j), (&mut self.j2, o.j2), (&mut self.int, o.int), (&mut self.sj2, o.sj2)] {
            a[0] += b[0];
            a[1] += b[1];
        }
        self
    }

    fn finish(self, resolution_limited: bool) -> Result<HittingMoments> {
        let total = self.n + self.capped;
        let fraction = self.capped as f64 / total as f64;
        if fraction > MAX_CAPPED_FRACTION {
            return Err(SimError::PathCapExceeded {
                capped: self.capped,
                paths: total,
                fraction,
                limit: MAX_CAPPED_FRACTION,
            });
        }
        let n = self.n as f64;
        let mean_se = |s: [f64; 2]| {
            let mean = s[0] / n;
            let var = (s[1] / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
            (mean, (var / n).sqrt())
        };
        let (e_j, se_j) = mean_se(self.j);
        let (e_j2, se_j2) = mean_se(self.j2);
        let (e_int, se_int) = mean_se(self.int);
        let (e_sj2, se_sj2) = mean_se(self.sj2);
        Ok(HittingMoments {
            e_j,
            e_j2,
            e_int,
            e_sj2,
            se_j,
            se_j2,
            se_int,
            se_sj2,
            n_paths: self.n,
            capped: self.capped,
            resolution_limited,
        })
    }
}

fn chunk_rng(seed: u64, chunk: u64) -> SmallRng {
    SmallRng::seed_from_u64(seed ^ chunk.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn reduce_chunks<F>(n_paths: u64, seed: u64, path: F) -> Sums
where
    F: Fn(&mut SmallRng, &mut Sums) + Sync,
{
    let chunks = n_paths.div_ceil(CHUNK);
    let partial: Vec<Sums> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c);
            let mut sums = Sums::default();
            let len = CHUNK.min(n_paths - c * CHUNK);
            for _ in 0..len {
                path(&mut rng, &mut sums);
            }
            sums
        })
        .collect();
    partial.into_iter().fold(Sums::default(), Sums::merge)
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(SimError::NonPositiveParameter { name, value })
    }
}

/// Exit time of standard Brownian motion from (-a, a), simulated with
/// Gaussian increments of variance `dt`.
///
/// Between grid points the path is a Brownian bridge; a crossing inside a
/// step is detected with the bridge's exact crossing probability, which
/// removes the O(√dt) delay of checking the level on the grid alone.
pub fn brownian_hitting_moments(a: f64, dt: f64, n_paths: u64, seed: u64) -> Result<HittingMoments> {
    positive("a", a)?;
    positive("dt", dt)?;
    let sd = dt.sqrt();
    let cap = (1e3 * a * a / dt).ceil() as u64;
    // (a - x)(a - y) beyond this makes the bridge crossing chance < e^-40
    let far = 20.0 * dt;
    let sums = reduce_chunks(n_paths, seed, |rng, sums| {
        let mut x = 0.0f64;
        let mut int = 0.0f64;
        for step in 1..=cap {
            let z: f64 = rng.sample(StandardNormal);
            let y = x + sd * z;
            int += 0.5 * (x * x + y * y) * dt;
            let t = step as f64 * dt;
            if y.abs() >= a {
                sums.push(t, int, a * a);
                return;
            }
            let du = (a - x) * (a - y);
            let dl = (a + x) * (a + y);
            if du < far || dl < far {
                let p_up = (-2.0 * du / dt).exp();
                let p_low = (-2.0 * dl / dt).exp();
                let u: f64 = rng.random();
                if u < p_up + p_low - p_up * p_low {
                    sums.push(t, int, a * a);
                    return;
                }
            }
            x = y;
        }
        sums.capped += 1;
    });
    sums.finish(a * a < 100.0 * dt)
}

/// First n with |S_n| ≥ β for the Gaussian walk S_n = Σ W_j, W ~ N(0, σ²).
pub fn random_walk_hitting_moments(beta: f64, sigma: f64, n_paths: u64, seed: u64) -> Result<HittingMoments> {
    positive("beta", beta)?;
    positive("sigma", sigma)?;
    let cap = (1e3 * (beta / sigma).powi(2)).clamp(1.0, 1e7).ceil() as u64;
    let sums = reduce_chunks(n_paths, seed, |rng, sums| {
        let mut s = 0.0f64;
        let mut int = 0.0f64;
        for n in 1..=cap {
            let z: f64 = rng.sample(StandardNormal);
            s += sigma * z;
            int += s * s;
            if s.abs() >= beta {
                sums.push(n as f64, int, s * s);
                return;
            }
        }
        sums.capped += 1;
    });
    sums.finish(beta < 3.0 * sigma)
}
