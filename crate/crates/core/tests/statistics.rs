//! Statistical checks at reduced scale.

use rae_core::metrics::{check_wald, Moments};
use rae_core::policy::{default_threshold, Policy};
use rae_core::process::LogMode;
use rae_core::sim::{run, EngineParams};

fn params(m: usize, k: u64, policy: Policy) -> EngineParams {
    EngineParams {
        m,
        k,
        sigma: 1.0,
        epsilon: 0.0,
        policy,
        seed: 77,
        burn_in: 0,
        log: LogMode::Off,
        sources: true,
    }
}

/// Mean ψ² equals σ² times mean age for policies blind to the processes.
#[test]
fn oblivious_error_equals_age() {
    for policy in [Policy::StationaryRandomized { p: 0.05 }, Policy::Sat { gamma: 40 }] {
        let mut p = params(20, 1_000_000, policy);
        p.sigma = 1.7;
        let r = run(&p).unwrap().report;
        let ratio = r.naee / (p.sigma * p.sigma * r.naaoi);
        assert!((ratio - 1.0).abs() < 0.02, "{policy:?}: {ratio}");
    }
}

#[test]
fn saturated_aloha_throughput_near_one_over_e() {
    let r = run(&params(100, 200_000, Policy::PseudoBayesAloha)).unwrap().report;
    assert!((0.33..=0.40).contains(&r.throughput), "{}", r.throughput);
}

#[test]
fn wald_identity_on_engine_records() {
    let m = 100;
    let beta = default_threshold(m, 1.0, 0.0).unwrap();
    let out = run(&params(m, 400_000, Policy::Ebt { beta })).unwrap();
    assert!(out.records.len() >= 10_000, "{}", out.records.len());
    let w = check_wald(&out.records, 1.0).unwrap();
    assert!((0.98..=1.02).contains(&w), "{w}");
}

#[test]
fn inter_delivery_time_matches_throughput() {
    let m = 100;
    let beta = default_threshold(m, 1.0, 0.0).unwrap();
    let out = run(&params(m, 300_000, Policy::Ebt { beta })).unwrap();
    let mo = Moments::from_records(&out.records);
    let predicted = m as f64 / out.report.throughput;
    assert!((mo.e_i / predicted - 1.0).abs() < 0.05, "{} vs {predicted}", mo.e_i);
}

#[test]
fn erasures_cut_throughput() {
    let m = 100;
    for eps in [0.3, 0.5] {
        let beta = default_threshold(m, 1.0, eps).unwrap();
        let mut p = params(m, 300_000, Policy::Ebt { beta });
        p.epsilon = eps;
        let r = run(&p).unwrap().report;
        let target = (1.0 - eps) / std::f64::consts::E;
        assert!((r.throughput / target - 1.0).abs() < 0.1, "eps {eps}: {}", r.throughput);
    }
}
