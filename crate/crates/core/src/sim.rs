//! The slot loop shared by every policy.
//!
//! Each slot k = 1..=K runs in five steps:
//! 1. every party folds the outcome of slot k-1 into its state (receiver
//!    view, node mirrors, ALOHA backlog estimate);
//! 2. sources step to X(k), and inactive nodes test their activation rule;
//! 3. active nodes flip their transmission coins (or the central scheduler
//!    picks one node);
//! 4. the channel resolves the slot;
//! 5. metrics absorb the slot, and a delivery closes the sender's interval.
//!
//! Errors are tracked per node as the sum of unit innovations since the last
//! delivery, so ψ_i(k) = σ·|w_i(k)| and every decision depends on ψ/σ only.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{Channel, SlotOutcome};
use crate::config::SimConfig;
use crate::error::Result;
use crate::estimator::{NodeMirror, ReceiverView};
use crate::metrics::{IntervalRecord, MetricsAccumulator, MetricsReport};
use crate::policy::{AlohaState, NodeActivation, Policy};
use crate::process::{replication_seed, stream_rng, LogMode, SourceProcess, StreamPurpose};

/// Fully resolved inputs of one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineParams {
    pub m: usize,
    pub k: u64,
    pub sigma: f64,
    pub epsilon: f64,
    pub policy: Policy,
    pub seed: u64,
    pub burn_in: u64,
    pub log: LogMode,
    /// When false the sources are never stepped and ψ stays zero; used by
    /// age-only pilots of oblivious policies.
    pub sources: bool,
}

impl EngineParams {
    /// Parameters of replication `rep` of `cfg` under an already resolved
    /// policy.
    pub fn replication(cfg: &SimConfig, policy: Policy, rep: u32) -> Self {
        Self {
            m: cfg.m,
            k: cfg.k,
            sigma: cfg.sigma(),
            epsilon: cfg.epsilon,
            policy,
            seed: replication_seed(cfg.seed, rep),
            burn_in: cfg.burn_in,
            log: LogMode::Off,
            sources: true,
        }
    }
}

/// State visible at the end of slot `slot`, after the channel resolved it
/// and before metrics and deactivation absorb the outcome.
pub struct SlotSnapshot<'a> {
    pub slot: u64,
    pub sources: &'a SourceProcess,
    /// Receiver view at the start of the slot.
    pub view: &'a ReceiverView,
    pub mirrors: &'a [NodeMirror],
    pub transmitters: &'a [usize],
    pub outcome: SlotOutcome,
    pub active: &'a NodeActivation,
    pub aloha: &'a AlohaState,
    sigma: f64,
    win: &'a [f64],
}

impl SlotSnapshot<'_> {
    #[inline]
    pub fn psi(&self, i: usize) -> f64 {
        self.sigma * self.win[i].abs()
    }

    pub fn psi_all(&self) -> Vec<f64> {
        (0..self.win.len()).map(|i| self.psi(i)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: MetricsReport,
    pub records: Vec<IntervalRecord>,
}

#[derive(Debug, Clone, Copy)]
enum Trigger {
    Always,
    Age(u64),
    Error(f64),
    Scheduled,
}

impl Trigger {
    fn of(policy: &Policy) -> Self {
        match *policy {
            Policy::StationaryRandomized { .. } | Policy::PseudoBayesAloha => Trigger::Always,
            Policy::Sat { gamma } => Trigger::Age(gamma),
            Policy::Ebt { beta } => Trigger::Error(beta),
            Policy::CentralMw | Policy::CentralGreedyError => Trigger::Scheduled,
        }
    }
}

pub fn run(params: &EngineParams) -> Result<RunOutput> {
    run_observed(params, &mut |_: &SlotSnapshot<'_>| {})
}

/// Runs one replication and calls `observe` once per slot.
pub fn run_observed<O>(p: &EngineParams, observe: &mut O) -> Result<RunOutput>
where
    O: FnMut(&SlotSnapshot<'_>),
{
    let m = p.m;
    let sigma = p.sigma;
    let centralized = p.policy.is_centralized();
    let by_age = matches!(p.policy, Policy::CentralMw);
    let trigger = Trigger::of(&p.policy);

    let mut src = SourceProcess::new(m, sigma, p.seed, p.log);
    let mut view = ReceiverView::new(m);
    let mut mirrors = vec![NodeMirror::default(); m];
    let mut channel = Channel::new(m, p.epsilon, p.seed)?;
    let mut coins: Vec<ChaCha8Rng> = (0..m)
        .map(|i| stream_rng(p.seed, StreamPurpose::Decision, i as u64))
        .collect();
    let mut aloha = AlohaState::new(p.epsilon);
    let mut act = NodeActivation::new(m);
    let mut acc = MetricsAccumulator::new(m, p.burn_in);
    let mut win = vec![0.0f64; m];
    let mut last = vec![0u64; m];
    let mut sum_last: u64 = 0;
    let mut transmitters: Vec<usize> = Vec::with_capacity(m);
    let mut prev = SlotOutcome::IDLE;
    let mut prev_value: Option<f64> = None;

    for k in 1..=p.k {
        // 1. feedback of slot k-1
        if let Some(d) = prev.delivered() {
            let v = prev_value.expect("delivered value recorded");
            mirrors[d].observe_ack(k - 1, true, v);
            sum_last += (k - 1) - last[d];
            last[d] = k - 1;
            win[d] = 0.0;
        }
        view.apply_slot(&prev, prev_value)?;
        if let Some(d) = prev.delivered() {
            assert!(mirrors[d].matches(&view, d), "node {d} lost track of its estimate");
        }
        if cfg!(debug_assertions) {
            for (i, mirror) in mirrors.iter().enumerate() {
                debug_assert!(mirror.matches(&view, i));
            }
        }
        if k > 1 && !centralized {
            aloha.update(prev.collision_feedback());
        }

        // 2. sources and activation
        let mut slot_sq = 0.0f64;
        let mut best = 0usize;
        let mut best_key = f64::NEG_INFINITY;
        {
            let mut node = |i: usize, z: f64| {
                let w = win[i] + z;
                win[i] = w;
                let psi = sigma * w.abs();
                let sq = psi * psi;
                slot_sq += sq;
                acc.add_node_error(i, sq);
                let age = k - last[i];
                let fires = match trigger {
                    Trigger::Always => true,
                    Trigger::Age(gamma) => age >= gamma,
                    Trigger::Error(beta) => psi >= beta,
                    Trigger::Scheduled => {
                        let key = if by_age { age as f64 } else { psi };
                        if key > best_key {
                            best = i;
                            best_key = key;
                        }
                        false
                    }
                };
                if fires && !act.is_active(i) {
                    act.activate(i, k);
                    acc.on_activation(i, k, psi);
                }
            };
            if p.sources {
                src.step_with(&mut node);
            } else {
                for i in 0..m {
                    node(i, 0.0);
                }
            }
        }

        // 3. transmission decisions
        transmitters.clear();
        if centralized {
            if !act.is_active(best) {
                act.activate(best, k);
                acc.on_activation(best, k, sigma * win[best].abs());
            }
            transmitters.push(best);
        } else {
            let q = p.policy.transmit_probability(&aloha);
            for &i in act.active_nodes() {
                if q >= 1.0 || coins[i].random::<f64>() < q {
                    transmitters.push(i);
                }
            }
        }

        // 4. channel
        let outcome = channel.resolve_slot(&transmitters);
        assert!(
            outcome.delivered().is_none_or(|d| transmitters.contains(&d)),
            "delivery to a silent node"
        );
        assert!(!(centralized && outcome.collision_feedback()), "collision under a central scheduler");

        observe(&SlotSnapshot {
            slot: k,
            sources: &src,
            view: &view,
            mirrors: &mirrors,
            transmitters: &transmitters,
            outcome,
            active: &act,
            aloha: &aloha,
            sigma,
            win: &win,
        });

        // 5. metrics
        let n_active = act.count();
        prev_value = outcome.delivered().map(|d| {
            acc.on_delivery(d, k);
            act.deactivate(d);
            src.state().value(d)
        });
        let sum_age = m as u64 * k - sum_last;
        acc.end_slot(k, slot_sq, sum_age, n_active)?;
        prev = outcome;
    }

    let (report, records) = acc.finish_with_records(sigma);
    Ok(RunOutput { report, records })
}

/// Replication `rep` of `cfg` with a resolved policy.
pub fn run_replication(cfg: &SimConfig, policy: Policy, rep: u32) -> Result<RunOutput> {
    run(&EngineParams::replication(cfg, policy, rep))
}

/// First replication of `cfg`, resolving default policy parameters first.
pub fn run_single(cfg: &SimConfig) -> Result<MetricsReport> {
    cfg.validate()?;
    let policy = cfg.policy.resolve(cfg.m, cfg.sigma(), cfg.epsilon, cfg.seed)?;
    Ok(run_replication(cfg, policy, 0)?.report)
}
