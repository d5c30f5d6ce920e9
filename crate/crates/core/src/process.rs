//! Gauss-Markov (random-walk) sources with reproducible per-node noise.
//!
//! Each node owns a ChaCha8 stream keyed by `(seed, purpose, node_id)`, so
//! source innovations never share state with the transmission coins or the
//! channel. The walk is stored in units of `sigma`; sample values are
//! `sigma * unit`, which makes runs with different `sigma` exact rescalings
//! of each other.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SimError};

/// Purpose tag folded into the ChaCha stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamPurpose {
    Source = 0,
    Decision = 1,
    Channel = 2,
}

/// Builds the generator for `(seed, purpose, index)`.
pub fn stream_rng(seed: u64, purpose: StreamPurpose, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 32) | (index & 0xffff_ffff));
    rng
}

/// SplitMix64 finalizer, used to derive replication seeds.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of replication `rep` under master seed `seed`. Earlier replications
/// do not depend on how many replications are requested.
pub fn replication_seed(seed: u64, rep: u32) -> u64 {
    seed ^ splitmix64(u64::from(rep))
}

/// Standard-normal innovation stream of one node.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    seed: u64,
    node_id: usize,
    cursor: u64,
    rng: ChaCha8Rng,
}

impl NoiseStream {
    pub fn new(seed: u64, node_id: usize) -> Self {
        Self {
            seed,
            node_id,
            cursor: 0,
            rng: stream_rng(seed, StreamPurpose::Source, node_id as u64),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn node_id(&self) -> usize {
        self.node_id
    }

    /// Index of the next draw.
    pub fn cursor(&self) -> u64 {
        self.cursor
    }

    #[inline]
    pub fn next_normal(&mut self) -> f64 {
        self.cursor += 1;
        self.rng.sample(StandardNormal)
    }
}

/// One stream per node, all keyed by the same master seed.
pub fn noise_streams(seed: u64, m: usize) -> Vec<NoiseStream> {
    (0..m).map(|i| NoiseStream::new(seed, i)).collect()
}

/// True sample values X_i(k) of all nodes at one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceState {
    pub(crate) unit: Vec<f64>,
    sigma: f64,
    slot: u64,
}

impl SourceState {
    /// All processes start at zero in slot 0.
    pub fn new(m: usize, sigma: f64) -> Self {
        Self {
            unit: vec![0.0; m],
            sigma,
            slot: 0,
        }
    }

    pub fn m(&self) -> usize {
        self.unit.len()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    #[inline]
    pub fn value(&self, node: usize) -> f64 {
        self.sigma * self.unit[node]
    }

    pub fn values(&self) -> Vec<f64> {
        self.unit.iter().map(|u| self.sigma * u).collect()
    }

    /// Advances every node by one innovation and reports `(node, z)` for each
    /// draw, where `z` is the standard-normal variate behind `W_i(k)`.
    #[inline]
    pub fn step_with<F: FnMut(usize, f64)>(&mut self, streams: &mut [NoiseStream], mut f: F) {
        debug_assert_eq!(streams.len(), self.unit.len());
        for (i, (u, s)) in self.unit.iter_mut().zip(streams.iter_mut()).enumerate() {
            debug_assert_eq!(s.cursor, self.slot);
            let z = s.next_normal();
            *u += z;
            f(i, z);
        }
        self.slot += 1;
    }
}

/// Advances the sources from slot k to k+1.
pub fn step_sources(state: &mut SourceState, streams: &mut [NoiseStream]) {
    state.step_with(streams, |_, _| {});
}

/// Storage policy for past innovations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogMode {
    #[default]
    Off,
    Full,
    /// Keeps only the most recent `n` innovations per node.
    Ring(usize),
}

/// Record of raw standard-normal draws per node.
#[derive(Debug, Clone)]
pub struct InnovationLog {
    mode: LogMode,
    per_node: Vec<VecDeque<f64>>,
    /// Slot index of the oldest retained draw.
    first: u64,
    len: u64,
}

impl InnovationLog {
    pub fn new(mode: LogMode, m: usize) -> Self {
        let per_node = match mode {
            LogMode::Off => Vec::new(),
            _ => vec![VecDeque::new(); m],
        };
        Self {
            mode,
            per_node,
            first: 0,
            len: 0,
        }
    }

    pub fn mode(&self) -> LogMode {
        self.mode
    }

    #[inline]
    pub fn push(&mut self, node: usize, z: f64) {
        match self.mode {
            LogMode::Off => {}
            LogMode::Full => self.per_node[node].push_back(z),
            LogMode::Ring(cap) => {
                let q = &mut self.per_node[node];
                if q.len() == cap {
                    q.pop_front();
                }
                q.push_back(z);
            }
        }
    }

    /// Marks the end of one slot's worth of pushes.
    #[inline]
    pub fn end_slot(&mut self) {
        if self.mode == LogMode::Off {
            return;
        }
        self.len += 1;
        if let LogMode::Ring(cap) = self.mode {
            if self.len - self.first > cap as u64 {
                self.first += 1;
            }
        }
    }

    /// Draw that produced `W_node(slot)`.
    pub fn draw(&self, node: usize, slot: u64) -> Result<f64> {
        if self.mode == LogMode::Off {
            return Err(SimError::InnovationLogDisabled);
        }
        let q = self.per_node.get(node).ok_or(SimError::NodeOutOfRange {
            node,
            m: self.per_node.len(),
        })?;
        if slot < self.first || slot >= self.len {
            return Err(SimError::SlotOutOfRange {
                slot,
                max: self.len,
            });
        }
        Ok(q[(slot - self.first) as usize])
    }

    /// `X_node(to) - X_node(from)` rebuilt from the stored draws, summed in
    /// slot order.
    pub fn increment_window_sum(&self, node: usize, from: u64, to: u64, sigma: f64) -> Result<f64> {
        if from > to {
            return Err(SimError::InvertedWindow { from, to });
        }
        if self.mode == LogMode::Off {
            return Err(SimError::InnovationLogDisabled);
        }
        if to > self.len {
            return Err(SimError::SlotOutOfRange {
                slot: to,
                max: self.len,
            });
        }
        let mut acc = 0.0;
        for j in from..to {
            acc += self.draw(node, j)?;
        }
        Ok(sigma * acc)
    }
}

/// Sources, their noise streams and the innovation log, stepped together.
#[derive(Debug, Clone)]
pub struct SourceProcess {
    state: SourceState,
    streams: Vec<NoiseStream>,
    log: InnovationLog,
}

impl SourceProcess {
    pub fn new(m: usize, sigma: f64, seed: u64, log: LogMode) -> Self {
        Self {
            state: SourceState::new(m, sigma),
            streams: noise_streams(seed, m),
            log: InnovationLog::new(log, m),
        }
    }

    pub fn state(&self) -> &SourceState {
        &self.state
    }

    pub fn log(&self) -> &InnovationLog {
        &self.log
    }

    pub fn step(&mut self) {
        self.step_with(|_, _| {});
    }

    #[inline]
    pub fn step_with<F: FnMut(usize, f64)>(&mut self, mut f: F) {
        let log = &mut self.log;
        self.state.step_with(&mut self.streams, |i, z| {
            log.push(i, z);
            f(i, z);
        });
        log.end_slot();
    }

    pub fn increment_window_sum(&self, node: usize, from: u64, to: u64) -> Result<f64> {
        if to > self.state.slot() {
            return Err(SimError::SlotOutOfRange {
                slot: to,
                max: self.state.slot(),
            });
        }
        self.log
            .increment_window_sum(node, from, to, self.state.sigma())
    }
}
