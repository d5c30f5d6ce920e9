//! Slotted collision channel with optional post-collision erasures.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SimError};
use crate::process::{stream_rng, StreamPurpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutcomeKind {
    Idle,
    Collision,
    Delivered(usize),
    Erased(usize),
}

/// Resolution of one slot together with the feedback each party sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotOutcome {
    pub kind: OutcomeKind,
}

impl SlotOutcome {
    pub const IDLE: SlotOutcome = SlotOutcome {
        kind: OutcomeKind::Idle,
    };

    /// Broadcast collision bit c(k).
    #[inline]
    pub fn collision_feedback(&self) -> bool {
        matches!(self.kind, OutcomeKind::Collision)
    }

    /// Private delivery flag d_i(k) of node `i`.
    #[inline]
    pub fn delivered_to(&self, i: usize) -> bool {
        self.kind == OutcomeKind::Delivered(i)
    }

    pub fn delivered(&self) -> Option<usize> {
        match self.kind {
            OutcomeKind::Delivered(i) => Some(i),
            _ => None,
        }
    }

    /// All M delivery flags; at most one is set.
    pub fn delivery_flags(&self, m: usize) -> Vec<bool> {
        (0..m).map(|i| self.delivered_to(i)).collect()
    }
}

/// Collision channel configuration and its erasure stream.
#[derive(Debug, Clone)]
pub struct Channel {
    m: usize,
    epsilon: f64,
    rng: ChaCha8Rng,
}

impl Channel {
    pub fn new(m: usize, epsilon: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&epsilon) {
            return Err(SimError::invalid("epsilon", format!("{epsilon} not in [0, 1)")));
        }
        Ok(Self {
            m,
            epsilon,
            rng: stream_rng(seed, StreamPurpose::Channel, 0),
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Resolves one slot given the set of transmitting nodes.
    pub fn resolve_slot(&mut self, transmitters: &[usize]) -> SlotOutcome {
        debug_assert!(transmitters.iter().all(|&i| i < self.m));
        let kind = match *transmitters {
            [] => OutcomeKind::Idle,
            [i] => {
                if self.epsilon > 0.0 && self.rng.random::<f64>() < self.epsilon {
                    OutcomeKind::Erased(i)
                } else {
                    OutcomeKind::Delivered(i)
                }
            }
            _ => OutcomeKind::Collision,
        };
        SlotOutcome { kind }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_feedback(o: &SlotOutcome, m: usize) {
        let flags = o.delivery_flags(m);
        let n = flags.iter().filter(|&&d| d).count();
        assert!(n <= 1);
        match o.kind {
            OutcomeKind::Collision => {
                assert!(o.collision_feedback());
                assert_eq!(n, 0);
            }
            OutcomeKind::Delivered(i) => {
                assert!(!o.collision_feedback());
                assert!(flags[i]);
            }
            OutcomeKind::Idle | OutcomeKind::Erased(_) => {
                assert!(!o.collision_feedback());
                assert_eq!(n, 0);
            }
        }
    }

    #[test]
    fn idle_collision_delivery() {
        let mut ch = Channel::new(10, 0.0, 1).unwrap();
        let o = ch.resolve_slot(&[]);
        assert_eq!(o.kind, OutcomeKind::Idle);
        check_feedback(&o, 10);
        let o = ch.resolve_slot(&[3, 7]);
        assert_eq!(o.kind, OutcomeKind::Collision);
        check_feedback(&o, 10);
        let o = ch.resolve_slot(&[5]);
        assert_eq!(o.kind, OutcomeKind::Delivered(5));
        assert!(o.delivered_to(5));
        check_feedback(&o, 10);
    }

    #[test]
    fn collisions_ignore_erasures() {
        let mut ch = Channel::new(10, 0.9, 1).unwrap();
        for _ in 0..100 {
            assert_eq!(ch.resolve_slot(&[1, 2, 3]).kind, OutcomeKind::Collision);
        }
    }

    #[test]
    fn near_certain_erasure_matches_binomial() {
        let delta = 0.01;
        let mut ch = Channel::new(8, 1.0 - delta, 3).unwrap();
        let n = 100_000;
        let mut delivered = 0;
        for _ in 0..n {
            let o = ch.resolve_slot(&[5]);
            check_feedback(&o, 8);
            if o.delivered().is_some() {
                delivered += 1;
            }
        }
        let frac = delivered as f64 / n as f64;
        let se = (delta * (1.0 - delta) / n as f64).sqrt();
        assert!((frac - delta).abs() <= 3.0 * se, "frac = {frac}");
    }

    #[test]
    fn delivery_fraction_is_one_minus_epsilon() {
        let eps = 0.3;
        let mut ch = Channel::new(2, eps, 99).unwrap();
        let n = 200_000;
        let hits = (0..n)
            .filter(|_| ch.resolve_slot(&[0]).delivered().is_some())
            .count();
        let frac = hits as f64 / n as f64;
        let se = (eps * (1.0 - eps) / n as f64).sqrt();
        assert!((frac - (1.0 - eps)).abs() <= 4.0 * se, "frac = {frac}");
    }

    #[test]
    fn rejects_certain_erasure() {
        assert!(Channel::new(2, 1.0, 0).is_err());
        assert!(Channel::new(2, -0.1, 0).is_err());
    }
}
