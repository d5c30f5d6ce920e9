//! Transmission policies.
//!
//! Decentralized policies share one structure: a per-node activation rule
//! followed by Rivest's pseudo-Bayesian ALOHA among active nodes (or a fixed
//! probability for the stationary randomized policy). Centralized policies
//! pick one node per slot from global state.

use std::f64::consts::E;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::estimator::{ErrorVector, ReceiverView};

/// Policy as written in a config file. Parameters left out are filled in by
/// [`PolicyConfig::resolve`] from M, σ and ε.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicyConfig {
    StationaryRandomized {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<f64>,
    },
    PseudoBayesAloha,
    Sat {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<u64>,
    },
    Ebt {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        beta: Option<f64>,
    },
    CentralMw,
    CentralGreedyError,
}

impl PolicyConfig {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyConfig::StationaryRandomized { .. } => "stationary_randomized",
            PolicyConfig::PseudoBayesAloha => "pseudo_bayes_aloha",
            PolicyConfig::Sat { .. } => "sat",
            PolicyConfig::Ebt { .. } => "ebt",
            PolicyConfig::CentralMw => "central_mw",
            PolicyConfig::CentralGreedyError => "central_greedy_error",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "stationary_randomized" => PolicyConfig::StationaryRandomized { p: None },
            "pseudo_bayes_aloha" => PolicyConfig::PseudoBayesAloha,
            "sat" => PolicyConfig::Sat { gamma: None },
            "ebt" => PolicyConfig::Ebt { beta: None },
            "central_mw" => PolicyConfig::CentralMw,
            "central_greedy_error" => PolicyConfig::CentralGreedyError,
            _ => return None,
        })
    }
}

/// Policy with every parameter fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Policy {
    StationaryRandomized { p: f64 },
    PseudoBayesAloha,
    Sat { gamma: u64 },
    Ebt { beta: f64 },
    CentralMw,
    CentralGreedyError,
}

impl Policy {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::StationaryRandomized { .. } => "stationary_randomized",
            Policy::PseudoBayesAloha => "pseudo_bayes_aloha",
            Policy::Sat { .. } => "sat",
            Policy::Ebt { .. } => "ebt",
            Policy::CentralMw => "central_mw",
            Policy::CentralGreedyError => "central_greedy_error",
        }
    }

    pub fn is_centralized(&self) -> bool {
        matches!(self, Policy::CentralMw | Policy::CentralGreedyError)
    }

    /// Decisions never read the process values.
    pub fn is_oblivious(&self) -> bool {
        !matches!(self, Policy::Ebt { .. } | Policy::CentralGreedyError)
    }

    /// β, γ or p, whichever the policy carries.
    pub fn parameter(&self) -> Option<f64> {
        match *self {
            Policy::StationaryRandomized { p } => Some(p),
            Policy::Sat { gamma } => Some(gamma as f64),
            Policy::Ebt { beta } => Some(beta),
            _ => None,
        }
    }

    /// Activation rule of an inactive node given its local error and age.
    #[inline]
    pub fn activates(&self, psi: f64, age: u64) -> Result<bool> {
        match *self {
            Policy::StationaryRandomized { .. } | Policy::PseudoBayesAloha => Ok(true),
            Policy::Sat { gamma } => Ok(age >= gamma),
            Policy::Ebt { beta } => Ok(psi >= beta),
            Policy::CentralMw | Policy::CentralGreedyError => {
                Err(SimError::CentralizedPolicy(self.name()))
            }
        }
    }

    /// Transmission probability of an active node in the current slot.
    #[inline]
    pub fn transmit_probability(&self, aloha: &AlohaState) -> f64 {
        match *self {
            Policy::StationaryRandomized { p } => p,
            _ => aloha.p_b(),
        }
    }
}

/// What one node knows at the start of a slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalView {
    pub psi: f64,
    pub age: u64,
    pub active: bool,
}

/// Per-node decision: returns `(active, transmit)` for this slot. A node
/// that is already active stays active whatever its error.
pub fn decide_decentralized<R: Rng + ?Sized>(
    policy: &Policy,
    local: &LocalView,
    aloha: &AlohaState,
    coin: &mut R,
) -> Result<(bool, bool)> {
    let active = local.active || policy.activates(local.psi, local.age)?;
    if !active {
        return Ok((false, false));
    }
    let p = policy.transmit_probability(aloha);
    let transmit = p >= 1.0 || coin.random::<f64>() < p;
    Ok((true, transmit))
}

/// Node scheduled by a centralized policy; ties go to the lowest index.
pub fn decide_centralized(policy: &Policy, view: &ReceiverView, errors: &ErrorVector) -> Result<usize> {
    let key = |i: usize| -> f64 {
        match policy {
            Policy::CentralMw => view.age(i) as f64,
            _ => errors.psi()[i],
        }
    };
    match policy {
        Policy::CentralMw | Policy::CentralGreedyError => {
            let mut best = 0;
            let mut best_key = key(0);
            for i in 1..view.m() {
                let k = key(i);
                if k > best_key {
                    best = i;
                    best_key = k;
                }
            }
            Ok(best)
        }
        _ => Err(SimError::DecentralizedPolicy(policy.name())),
    }
}

/// Rivest's pseudo-Bayesian backlog estimate, identical at every node
/// because it only reads the broadcast collision bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlohaState {
    n_hat: f64,
    lambda_hat: f64,
    p_b: f64,
}

impl AlohaState {
    /// Starts from N̂ = 0, p_b = 1 with λ̂ = (1 - ε)/e.
    pub fn new(epsilon: f64) -> Self {
        Self::with_rate((1.0 - epsilon) / E)
    }

    pub fn with_rate(lambda_hat: f64) -> Self {
        Self {
            n_hat: 0.0,
            lambda_hat,
            p_b: 1.0,
        }
    }

    pub fn n_hat(&self) -> f64 {
        self.n_hat
    }

    pub fn lambda_hat(&self) -> f64 {
        self.lambda_hat
    }

    #[inline]
    pub fn p_b(&self) -> f64 {
        self.p_b
    }

    /// Applies the previous slot's collision bit.
    #[inline]
    pub fn update(&mut self, collision: bool) {
        self.n_hat = if collision {
            self.n_hat + self.lambda_hat + 1.0 / (E - 2.0)
        } else {
            self.lambda_hat + (self.n_hat - 1.0).max(0.0)
        };
        self.p_b = (1.0 / self.n_hat).min(1.0);
    }
}

/// Functional form of [`AlohaState::update`].
pub fn update_aloha(aloha: AlohaState, collision: bool) -> AlohaState {
    let mut next = aloha;
    next.update(collision);
    next
}

/// Activation flags with an O(1) active list.
#[derive(Debug, Clone)]
pub struct NodeActivation {
    activation_slot: Vec<Option<u64>>,
    position: Vec<usize>,
    active: Vec<usize>,
}

const NOT_ACTIVE: usize = usize::MAX;

impl NodeActivation {
    pub fn new(m: usize) -> Self {
        Self {
            activation_slot: vec![None; m],
            position: vec![NOT_ACTIVE; m],
            active: Vec::new(),
        }
    }

    #[inline]
    pub fn is_active(&self, i: usize) -> bool {
        self.position[i] != NOT_ACTIVE
    }

    pub fn activation_slot(&self, i: usize) -> Option<u64> {
        self.activation_slot[i]
    }

    #[inline]
    pub fn activate(&mut self, i: usize, slot: u64) {
        debug_assert!(!self.is_active(i));
        self.position[i] = self.active.len();
        self.active.push(i);
        self.activation_slot[i] = Some(slot);
    }

    /// Only a successful delivery deactivates a node.
    #[inline]
    pub fn deactivate(&mut self, i: usize) {
        let pos = self.position[i];
        debug_assert_ne!(pos, NOT_ACTIVE);
        self.active.swap_remove(pos);
        if let Some(&moved) = self.active.get(pos) {
            self.position[moved] = pos;
        }
        self.position[i] = NOT_ACTIVE;
        self.activation_slot[i] = None;
    }

    pub fn active_nodes(&self) -> &[usize] {
        &self.active
    }

    pub fn count(&self) -> usize {
        self.active.len()
    }
}

/// Threshold β = σ√(eM/(1-ε)) for error-based thinning.
pub fn default_threshold(m: usize, sigma: f64, epsilon: f64) -> Result<f64> {
    if m == 0 {
        return Err(SimError::invalid("m", "must be at least 1"));
    }
    if !(0.0..1.0).contains(&epsilon) {
        return Err(SimError::ErasureProbabilityOne(epsilon));
    }
    Ok(sigma * (E * m as f64 / (1.0 - epsilon)).sqrt())
}
