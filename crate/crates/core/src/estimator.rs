//! Fusion-center estimates and ages, and the per-node mirror of them.
//!
//! The receiver holds the last delivered sample of each node (the
//! Kalman-like estimate for a random walk) and the slot of that delivery.
//! Ages are derived as `h_i(k) = k - k_last`, with every node treated as
//! having delivered `X_i(0) = 0` at slot 0. The view at slot 0 reports
//! `h_i(0) = 1`.

use crate::channel::{OutcomeKind, SlotOutcome};
use crate::error::{Result, SimError};
use crate::process::SourceState;

#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverView {
    estimates: Vec<f64>,
    last_delivery: Vec<u64>,
    slot: u64,
}

impl ReceiverView {
    pub fn new(m: usize) -> Self {
        Self {
            estimates: vec![0.0; m],
            last_delivery: vec![0; m],
            slot: 0,
        }
    }

    pub fn m(&self) -> usize {
        self.estimates.len()
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    #[inline]
    pub fn estimate(&self, i: usize) -> f64 {
        self.estimates[i]
    }

    pub fn estimates(&self) -> &[f64] {
        &self.estimates
    }

    #[inline]
    pub fn last_delivery(&self, i: usize) -> u64 {
        self.last_delivery[i]
    }

    /// Age h_i(k) at the current slot.
    #[inline]
    pub fn age(&self, i: usize) -> u64 {
        (self.slot - self.last_delivery[i]).max(1)
    }

    pub fn ages(&self) -> Vec<u64> {
        (0..self.m()).map(|i| self.age(i)).collect()
    }

    /// Folds the outcome of the current slot into the view and moves it to
    /// the next slot. `delivered_value` must be present exactly when the
    /// outcome is a delivery.
    pub fn apply_slot(&mut self, outcome: &SlotOutcome, delivered_value: Option<f64>) -> Result<()> {
        match (outcome.kind, delivered_value) {
            (OutcomeKind::Delivered(i), Some(v)) => {
                if i >= self.m() {
                    return Err(SimError::NodeOutOfRange { node: i, m: self.m() });
                }
                self.estimates[i] = v;
                self.last_delivery[i] = self.slot;
            }
            (OutcomeKind::Delivered(i), None) => return Err(SimError::MissingDeliveredValue(i)),
            (_, Some(_)) => return Err(SimError::UnexpectedDeliveredValue),
            (_, None) => {}
        }
        self.slot += 1;
        Ok(())
    }
}

/// Instantaneous errors ψ_i(k) = |X_i(k) - X̂_i(k)|.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorVector(pub Vec<f64>);

impl ErrorVector {
    pub fn psi(&self) -> &[f64] {
        &self.0
    }
}

pub fn error_vector(sources: &SourceState, view: &ReceiverView) -> Result<ErrorVector> {
    if sources.slot() != view.slot() {
        return Err(SimError::SlotMismatch {
            sources: sources.slot(),
            view: view.slot(),
        });
    }
    Ok(ErrorVector(
        (0..view.m())
            .map(|i| (sources.value(i) - view.estimate(i)).abs())
            .collect(),
    ))
}

/// What node i reconstructs of the receiver's state from c(k), its own
/// ACK d_i(k) and the sample it sent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeMirror {
    pub estimate: f64,
    pub last_delivery: u64,
}

impl Default for NodeMirror {
    fn default() -> Self {
        Self {
            estimate: 0.0,
            last_delivery: 0,
        }
    }
}

impl NodeMirror {
    /// Applies the node's own ACK for `slot`; `sent` is the sample it put on
    /// the air in that slot.
    #[inline]
    pub fn observe_ack(&mut self, slot: u64, acked: bool, sent: f64) {
        if acked {
            self.estimate = sent;
            self.last_delivery = slot;
        }
    }

    pub fn matches(&self, view: &ReceiverView, i: usize) -> bool {
        self.estimate == view.estimate(i) && self.last_delivery == view.last_delivery(i)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{LogMode, SourceProcess};

    fn outcome(kind: OutcomeKind) -> SlotOutcome {
        SlotOutcome { kind }
    }

    #[test]
    fn initial_ages_are_one() {
        let mut v = ReceiverView::new(3);
        assert_eq!(v.ages(), vec![1, 1, 1]);
        v.apply_slot(&SlotOutcome::IDLE, None).unwrap();
        assert_eq!(v.ages(), vec![1, 1, 1]);
        v.apply_slot(&SlotOutcome::IDLE, None).unwrap();
        assert_eq!(v.ages(), vec![2, 2, 2]);
    }

    #[test]
    fn idle_increments_ages() {
        let mut v = ReceiverView::new(3);
        for _ in 0..4 {
            v.apply_slot(&SlotOutcome::IDLE, None).unwrap();
        }
        let before = v.clone();
        v.apply_slot(&SlotOutcome::IDLE, None).unwrap();
        for i in 0..3 {
            assert_eq!(v.age(i), before.age(i) + 1);
            assert_eq!(v.estimate(i), before.estimate(i));
        }
    }

    #[test]
    fn delivery_sets_estimate_and_resets_age() {
        let mut v = ReceiverView::new(4);
        for _ in 0..5 {
            v.apply_slot(&SlotOutcome::IDLE, None).unwrap();
        }
        v.apply_slot(&outcome(OutcomeKind::Delivered(2)), Some(1.25)).unwrap();
        assert_eq!(v.estimate(2), 1.25);
        assert_eq!(v.age(2), 1);
        assert_eq!(v.age(1), 6);
    }

    #[test]
    fn erasure_and_collision_look_like_idle() {
        let mut a = ReceiverView::new(4);
        let mut b = a.clone();
        let mut c = a.clone();
        for _ in 0..3 {
            a.apply_slot(&SlotOutcome::IDLE, None).unwrap();
            b.apply_slot(&outcome(OutcomeKind::Erased(2)), None).unwrap();
            c.apply_slot(&outcome(OutcomeKind::Collision), None).unwrap();
        }
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn value_presence_must_match_outcome() {
        let mut v = ReceiverView::new(2);
        assert!(matches!(
            v.apply_slot(&outcome(OutcomeKind::Delivered(1)), None),
            Err(SimError::MissingDeliveredValue(1))
        ));
        assert!(matches!(
            v.apply_slot(&SlotOutcome::IDLE, Some(0.5)),
            Err(SimError::UnexpectedDeliveredValue)
        ));
        assert!(matches!(
            v.apply_slot(&outcome(OutcomeKind::Erased(0)), Some(0.5)),
            Err(SimError::UnexpectedDeliveredValue)
        ));
    }

    #[test]
    fn error_after_delivery_is_one_innovation() {
        let mut p = SourceProcess::new(2, 1.5, 8, LogMode::Full);
        let mut v = ReceiverView::new(2);
        v.apply_slot(&SlotOutcome::IDLE, None).unwrap();
        p.step();
        // deliver node 1's sample of slot 1
        let x = p.state().value(1);
        v.apply_slot(&outcome(OutcomeKind::Delivered(1)), Some(x)).unwrap();
        p.step();
        let e = error_vector(p.state(), &v).unwrap();
        let w = p.log().draw(1, 1).unwrap() * 1.5;
        assert!((e.psi()[1] - w.abs()).abs() < 1e-12);
        let win = p.increment_window_sum(0, 0, 2).unwrap();
        assert!((e.psi()[0] - win.abs()).abs() < 1e-12);
    }

    #[test]
    fn zero_sigma_zero_error() {
        let mut p = SourceProcess::new(3, 0.0, 8, LogMode::Off);
        let mut v = ReceiverView::new(3);
        for _ in 0..10 {
            p.step();
            v.apply_slot(&SlotOutcome::IDLE, None).unwrap();
            assert!(error_vector(p.state(), &v).unwrap().psi().iter().all(|&e| e == 0.0));
        }
    }

    #[test]
    fn slot_mismatch_is_rejected() {
        let mut p = SourceProcess::new(1, 1.0, 8, LogMode::Off);
        let v = ReceiverView::new(1);
        p.step();
        assert!(matches!(
            error_vector(p.state(), &v),
            Err(SimError::SlotMismatch { sources: 1, view: 0 })
        ));
    }

    #[test]
    fn mirror_tracks_view() {
        let mut v = ReceiverView::new(2);
        let mut mirror = NodeMirror::default();
        v.apply_slot(&SlotOutcome::IDLE, None).unwrap();
        let o = outcome(OutcomeKind::Delivered(0));
        mirror.observe_ack(v.slot(), o.delivered_to(0), 3.0);
        v.apply_slot(&o, Some(3.0)).unwrap();
        assert!(mirror.matches(&v, 0));
    }
}
