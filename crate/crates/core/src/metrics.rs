//! Running metrics and the per-interval decomposition of the estimation
//! error.
//!
//! Slot averages (NAEE, NAAoI, throughput, active fraction) cover every slot
//! after the burn-in. Interval statistics use closed inter-delivery
//! intervals only: the interval still open at the horizon is dropped.

use serde::Serialize;

use crate::channel::{OutcomeKind, SlotOutcome};
use crate::error::{Result, SimError};
use crate::estimator::{ErrorVector, ReceiverView};
use crate::policy::NodeActivation;

/// Neumaier-compensated sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// One closed inter-delivery interval of one node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntervalRecord {
    pub node: usize,
    /// Silence delay: slots from the previous delivery to the activation.
    pub j: u64,
    /// Transmission delay: activation slot through delivery slot.
    pub u: u64,
    /// Inter-delivery time.
    pub i: u64,
    /// Σψ² over the whole interval.
    pub sum_sq_err: f64,
    /// Σψ² over the first `j` slots of the interval.
    pub sum_sq_silence: f64,
    /// ψ at the activation slot.
    pub s_at_activation: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct OpenInterval {
    start: u64,
    activation: Option<u64>,
    sum_sq: f64,
    sum_sq_silence: f64,
    s_at_activation: f64,
}

/// Per-replication accumulator, fed once per slot in order.
#[derive(Debug, Clone)]
pub struct MetricsAccumulator {
    m: usize,
    burn_in: u64,
    next_slot: u64,
    slots: u64,
    sum_sq: CompensatedSum,
    sum_age: u128,
    sum_active: u64,
    activations: u64,
    deliveries: u64,
    open: Vec<OpenInterval>,
    records: Vec<IntervalRecord>,
}

impl MetricsAccumulator {
    pub fn new(m: usize, burn_in: u64) -> Self {
        Self {
            m,
            burn_in,
            next_slot: 1,
            slots: 0,
            sum_sq: CompensatedSum::default(),
            sum_age: 0,
            sum_active: 0,
            activations: 0,
            deliveries: 0,
            open: vec![OpenInterval::default(); m],
            records: Vec::new(),
        }
    }

    pub fn records(&self) -> &[IntervalRecord] {
        &self.records
    }

    pub fn next_slot(&self) -> u64 {
        self.next_slot
    }

    /// Adds node `i`'s ψ² for the current slot to its open interval.
    #[inline]
    pub fn add_node_error(&mut self, i: usize, psi_sq: f64) {
        let o = &mut self.open[i];
        o.sum_sq += psi_sq;
        if o.activation.is_none() {
            o.sum_sq_silence += psi_sq;
        }
    }

    /// Node `i` became active in `slot` with error `psi`. Call after the
    /// node's [`add_node_error`](Self::add_node_error) for that slot so the
    /// crossing slot counts toward the silence part.
    #[inline]
    pub fn on_activation(&mut self, i: usize, slot: u64, psi: f64) {
        let o = &mut self.open[i];
        debug_assert!(o.activation.is_none());
        o.activation = Some(slot);
        o.s_at_activation = psi;
        if slot > self.burn_in {
            self.activations += 1;
        }
    }

    /// Closes node `i`'s interval with a delivery at the end of `slot`.
    #[inline]
    pub fn on_delivery(&mut self, i: usize, slot: u64) {
        let o = std::mem::take(&mut self.open[i]);
        let activation = o.activation.expect("delivery from a node that never activated");
        let j = activation - o.start;
        let u = slot - activation + 1;
        let rec = IntervalRecord {
            node: i,
            j,
            u,
            i: slot - o.start,
            sum_sq_err: o.sum_sq,
            sum_sq_silence: o.sum_sq_silence,
            s_at_activation: o.s_at_activation,
        };
        assert_eq!(rec.i, rec.j - 1 + rec.u, "interval identity broken: {rec:?}");
        if o.start >= self.burn_in {
            self.records.push(rec);
        }
        if slot > self.burn_in {
            self.deliveries += 1;
        }
        self.open[i].start = slot;
    }

    /// Closes slot `slot` with its summed ψ², summed age and active count.
    #[inline]
    pub fn end_slot(&mut self, slot: u64, sum_psi_sq: f64, sum_age: u64, active: usize) -> Result<()> {
        if slot != self.next_slot {
            return Err(SimError::OutOfOrderSlot {
                expected: self.next_slot,
                got: slot,
            });
        }
        self.next_slot += 1;
        if slot > self.burn_in {
            self.slots += 1;
            self.sum_sq.add(sum_psi_sq);
            self.sum_age += u128::from(sum_age);
            self.sum_active += active as u64;
        }
        Ok(())
    }

    /// One-call form: `errors` and `view` describe slot `slot` before its
    /// outcome, `activation` holds the nodes active in that slot and
    /// `newly_active` those that crossed their threshold in it.
    pub fn accumulate_slot(
        &mut self,
        slot: u64,
        errors: &ErrorVector,
        view: &ReceiverView,
        outcome: &SlotOutcome,
        activation: &NodeActivation,
        newly_active: &[usize],
    ) -> Result<()> {
        if slot != self.next_slot {
            return Err(SimError::OutOfOrderSlot {
                expected: self.next_slot,
                got: slot,
            });
        }
        let mut total = 0.0;
        let mut ages = 0u64;
        for (i, &psi) in errors.psi().iter().enumerate() {
            let sq = psi * psi;
            total += sq;
            ages += view.age(i);
            self.add_node_error(i, sq);
            if newly_active.contains(&i) {
                self.on_activation(i, slot, psi);
            }
        }
        if let OutcomeKind::Delivered(i) = outcome.kind {
            self.on_delivery(i, slot);
        }
        self.end_slot(slot, total, ages, activation.count())
    }

    pub fn finish(self, sigma: f64) -> MetricsReport {
        let m = self.m as f64;
        let k = self.slots.max(1) as f64;
        let moments = Moments::from_records(&self.records);
        let decomposition = decompose_naee(&self.records, self.m, sigma).ok();
        let naee_intervals = decomposition.map(|d| d.naee_intervals).unwrap_or(f64::NAN);
        MetricsReport {
            m: self.m,
            slots: self.slots,
            naee: self.sum_sq.value() / (m * m * k),
            naaoi: self.sum_age as f64 / (m * m * k),
            throughput: self.deliveries as f64 / k,
            alpha_hat: self.sum_active as f64 / (m * k),
            activation_rate: self.activations as f64 / k,
            records: self.records.len(),
            moments,
            l1: decomposition.map(|d| d.l1).unwrap_or(f64::NAN),
            l2: decomposition.map(|d| d.l2).unwrap_or(f64::NAN),
            l2_closed_form: decomposition.map(|d| d.l2_closed_form).unwrap_or(f64::NAN),
            naee_intervals,
            wald_ratio: check_wald(&self.records, sigma).unwrap_or(f64::NAN),
        }
    }

    /// Like [`finish`](Self::finish) but also hands back the records.
    pub fn finish_with_records(self, sigma: f64) -> (MetricsReport, Vec<IntervalRecord>) {
        let records = self.records.clone();
        (self.finish(sigma), records)
    }
}

/// Sample moments of the closed intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub e_j: f64,
    pub e_j2: f64,
    pub e_u: f64,
    pub e_u2: f64,
    pub e_i: f64,
    /// Mean Σψ² over the silence part of an interval.
    pub e_sumsq: f64,
    /// Mean Σψ² over a whole interval.
    pub e_sumsq_interval: f64,
    /// Mean ψ² at activation.
    pub e_sj2: f64,
}

impl Moments {
    pub fn from_records(records: &[IntervalRecord]) -> Self {
        let n = records.len() as f64;
        let mean = |f: &dyn Fn(&IntervalRecord) -> f64| -> f64 {
            if records.is_empty() {
                f64::NAN
            } else {
                records.iter().map(f).collect::<CompensatedSum>().value() / n
            }
        };
        Moments {
            e_j: mean(&|r| r.j as f64),
            e_j2: mean(&|r| (r.j as f64).powi(2)),
            e_u: mean(&|r| r.u as f64),
            e_u2: mean(&|r| (r.u as f64).powi(2)),
            e_i: mean(&|r| r.i as f64),
            e_sumsq: mean(&|r| r.sum_sq_silence),
            e_sumsq_interval: mean(&|r| r.sum_sq_err),
            e_sj2: mean(&|r| r.s_at_activation * r.s_at_activation),
        }
    }
}

/// Summary of one replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsReport {
    pub m: usize,
    pub slots: u64,
    pub naee: f64,
    pub naaoi: f64,
    pub throughput: f64,
    pub alpha_hat: f64,
    pub activation_rate: f64,
    pub records: usize,
    pub moments: Moments,
    pub l1: f64,
    pub l2: f64,
    pub l2_closed_form: f64,
    /// (1/M)·ΣΔ/ΣI over the closed intervals; equals `l1 + l2`.
    pub naee_intervals: f64,
    pub wald_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition {
    pub l1: f64,
    pub l2: f64,
    pub l2_closed_form: f64,
    pub naee_intervals: f64,
}

/// Splits the interval-average error into the silence part and the
/// transmission part, and evaluates the closed form of the latter from the
/// same empirical moments of J and U.
pub fn decompose_naee(records: &[IntervalRecord], m: usize, sigma: f64) -> Result<Decomposition> {
    if records.is_empty() {
        return Err(SimError::NotEnoughRecords { needed: 1, have: 0 });
    }
    let n = records.len() as f64;
    let m = m as f64;
    let total_i: f64 = records.iter().map(|r| r.i as f64).sum();
    let silence: CompensatedSum = records.iter().map(|r| r.sum_sq_silence).collect();
    let tail: CompensatedSum = records
        .iter()
        .map(|r| r.sum_sq_err - r.sum_sq_silence)
        .collect();
    let whole: CompensatedSum = records.iter().map(|r| r.sum_sq_err).collect();
    let mean_i = total_i / n;
    let l1 = silence.value() / n / mean_i / m;
    let l2 = tail.value() / n / mean_i / m;
    let mo = Moments::from_records(records);
    let l2_closed_form =
        (2.0 * mo.e_j * (mo.e_u - 1.0) + mo.e_u2 - mo.e_u) / (2.0 * mo.e_i) * sigma * sigma / m;
    Ok(Decomposition {
        l1,
        l2,
        l2_closed_form,
        naee_intervals: whole.value() / n / mean_i / m,
    })
}

pub const WALD_MIN_RECORDS: usize = 1000;

/// Ê[S_J²] / (σ² Ê[J]); one for any stopping rule of the node's own walk.
pub fn check_wald(records: &[IntervalRecord], sigma: f64) -> Result<f64> {
    if records.len() < WALD_MIN_RECORDS {
        return Err(SimError::NotEnoughRecords {
            needed: WALD_MIN_RECORDS,
            have: records.len(),
        });
    }
    let mo = Moments::from_records(records);
    Ok(mo.e_sj2 / (sigma * sigma * mo.e_j))
}

/// Residuals of the active-fraction identities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaResiduals {
    /// |α̂ - Ê[U]/Ê[I]|
    pub vs_u_over_i: f64,
    pub vs_u_over_i_rel: f64,
    /// |(1-α̂)Mα̂ - activation rate|
    pub fixed_point: f64,
    pub fixed_point_rel: f64,
}

pub fn check_alpha_fixed_point(report: &MetricsReport) -> AlphaResiduals {
    let a = report.alpha_hat;
    let u_over_i = report.moments.e_u / report.moments.e_i;
    let lhs = (1.0 - a) * report.m as f64 * a;
    let vs = (a - u_over_i).abs();
    let fp = (lhs - report.activation_rate).abs();
    AlphaResiduals {
        vs_u_over_i: vs,
        vs_u_over_i_rel: vs / u_over_i,
        fixed_point: fp,
        fixed_point_rel: fp / report.activation_rate,
    }
}
