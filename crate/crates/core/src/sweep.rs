//! Replication fan-out, sweeps and CSV output.

use std::f64::consts::E;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{SimConfig, SweepSpec};
use crate::error::{Result, SimError};
use crate::metrics::MetricsReport;
use crate::oracle::HittingMoments;
use crate::policy::Policy;
use crate::sim::run_replication;

/// Env var naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "RAE_OUTPUT_DIR";

pub const CSV_HEADER: [&str; 23] = [
    "policy",
    "M",
    "K",
    "sigma2",
    "epsilon",
    "beta_or_gamma",
    "seed",
    "replication",
    "naee",
    "naaoi",
    "throughput",
    "alpha_hat",
    "activation_rate",
    "e_j",
    "e_j2",
    "e_u",
    "e_u2",
    "e_i",
    "e_sumsq",
    "wald_ratio",
    "l1",
    "l2",
    "l2_closed_form",
];

/// Analytic reference columns appended to sweep tables.
pub const REFERENCE_HEADER: [&str; 6] = [
    "ref_sat_e_over_2",
    "ref_ebt_e_over_6",
    "ref_mw_half",
    "ref_ebt_erasure",
    "ref_sat_erasure",
    "ref_oblivious_floor",
];

pub const OBLIVIOUS_FLOOR: f64 = 0.88;

const METRICS: usize = 15;

/// Reference values (e/2)σ², (e/6)σ², σ²/2, e/(6(1-ε))σ², e/(2(1-ε))σ²,
/// 0.88σ².
pub fn reference_values(sigma2: f64, epsilon: f64) -> [f64; 6] {
    let q = 1.0 - epsilon;
    [
        E / 2.0 * sigma2,
        E / 6.0 * sigma2,
        sigma2 / 2.0,
        E / (6.0 * q) * sigma2,
        E / (2.0 * q) * sigma2,
        OBLIVIOUS_FLOOR * sigma2,
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RowKind {
    Replication(u32),
    Mean,
    Stderr,
}

impl RowKind {
    fn label(&self) -> String {
        match self {
            RowKind::Replication(r) => r.to_string(),
            RowKind::Mean => "mean".into(),
            RowKind::Stderr => "stderr".into(),
        }
    }
}

/// One CSV line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub policy: &'static str,
    pub m: usize,
    pub k: u64,
    pub sigma2: f64,
    pub epsilon: f64,
    pub parameter: Option<f64>,
    pub seed: u64,
    pub kind: RowKind,
    pub values: [f64; METRICS],
}

impl Row {
    pub fn naee(&self) -> f64 {
        self.values[0]
    }

    pub fn naaoi(&self) -> f64 {
        self.values[1]
    }

    pub fn throughput(&self) -> f64 {
        self.values[2]
    }

    /// Column by header name.
    pub fn get(&self, name: &str) -> Option<f64> {
        CSV_HEADER[8..]
            .iter()
            .position(|&h| h == name)
            .map(|i| self.values[i])
    }
}

fn metric_values(r: &MetricsReport) -> [f64; METRICS] {
    let mo = &r.moments;
    [
        r.naee,
        r.naaoi,
        r.throughput,
        r.alpha_hat,
        r.activation_rate,
        mo.e_j,
        mo.e_j2,
        mo.e_u,
        mo.e_u2,
        mo.e_i,
        mo.e_sumsq,
        r.wald_ratio,
        r.l1,
        r.l2,
        r.l2_closed_form,
    ]
}

/// Result of one configuration: its resolved policy and every replication.
#[derive(Debug, Clone)]
pub struct PointResult {
    pub config: SimConfig,
    pub policy: Policy,
    pub reports: Vec<MetricsReport>,
}

impl PointResult {
    fn row(&self, kind: RowKind, values: [f64; METRICS]) -> Row {
        Row {
            policy: self.policy.name(),
            m: self.config.m,
            k: self.config.k,
            sigma2: self.config.sigma2,
            epsilon: self.config.epsilon,
            parameter: self.policy.parameter(),
            seed: self.config.seed,
            kind,
            values,
        }
    }

    /// Per-replication rows followed by the mean and standard-error rows.
    pub fn rows(&self) -> Vec<Row> {
        let mut rows: Vec<Row> = self
            .reports
            .iter()
            .enumerate()
            .map(|(i, r)| self.row(RowKind::Replication(i as u32), metric_values(r)))
            .collect();
        let n = self.reports.len() as f64;
        let mut mean = [0.0; METRICS];
        let mut stderr = [0.0; METRICS];
        for c in 0..METRICS {
            let xs = rows.iter().map(|r| r.values[c]);
            mean[c] = xs.clone().sum::<f64>() / n;
            let ss: f64 = xs.map(|x| (x - mean[c]).powi(2)).sum();
            stderr[c] = if n > 1.0 { (ss / (n - 1.0) / n).sqrt() } else { f64::NAN };
        }
        rows.push(self.row(RowKind::Mean, mean));
        rows.push(self.row(RowKind::Stderr, stderr));
        rows
    }

    pub fn mean(&self, f: impl Fn(&MetricsReport) -> f64) -> f64 {
        self.reports.iter().map(f).sum::<f64>() / self.reports.len() as f64
    }
}

/// Runs every point of `configs` with all its replications. Replications of
/// all points share one parallel pass; results keep the input order.
pub fn run_points(configs: &[SimConfig]) -> Result<Vec<PointResult>> {
    let mut resolved = Vec::with_capacity(configs.len());
    for cfg in configs {
        cfg.validate()?;
        resolved.push(cfg.policy.resolve(cfg.m, cfg.sigma(), cfg.epsilon, cfg.seed)?);
    }
    let jobs: Vec<(usize, u32)> = configs
        .iter()
        .enumerate()
        .flat_map(|(i, c)| (0..c.replications).map(move |r| (i, r)))
        .collect();
    let reports = jobs
        .par_iter()
        .map(|&(i, r)| run_replication(&configs[i], resolved[i], r).map(|o| o.report))
        .collect::<Result<Vec<_>>>()?;
    let mut out: Vec<PointResult> = configs
        .iter()
        .zip(resolved)
        .map(|(c, p)| PointResult {
            config: c.clone(),
            policy: p,
            reports: Vec::with_capacity(c.replications as usize),
        })
        .collect();
    for (&(i, _), report) in jobs.iter().zip(reports) {
        out[i].reports.push(report);
    }
    Ok(out)
}

/// All replications of one config.
pub fn run_config(cfg: &SimConfig) -> Result<PointResult> {
    Ok(run_points(std::slice::from_ref(cfg))?.remove(0))
}

/// Points of a sweep in table order: axis value outer, policy inner.
pub fn sweep_configs(spec: &SweepSpec) -> Result<Vec<SimConfig>> {
    spec.validate()?;
    let mut v = Vec::new();
    for &x in &spec.values {
        for p in &spec.policies {
            v.push(spec.point(x, p)?);
        }
    }
    Ok(v)
}

pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<PointResult>> {
    run_points(&sweep_configs(spec)?)
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn record(row: &Row, references: bool) -> Vec<String> {
    let mut rec = vec![
        row.policy.to_string(),
        row.m.to_string(),
        row.k.to_string(),
        fmt_f64(row.sigma2),
        fmt_f64(row.epsilon),
        row.parameter.map(fmt_f64).unwrap_or_default(),
        row.seed.to_string(),
        row.kind.label(),
    ];
    rec.extend(row.values.iter().map(|&v| fmt_f64(v)));
    if references {
        rec.extend(reference_values(row.sigma2, row.epsilon).iter().map(|&v| fmt_f64(v)));
    }
    rec
}

/// Writes the table as CSV text.
pub fn csv_string(rows: &[Row], references: bool) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = CSV_HEADER.to_vec();
    if references {
        header.extend(REFERENCE_HEADER);
    }
    w.write_record(&header)?;
    for row in rows {
        w.write_record(record(row, references))?;
    }
    let bytes = w.into_inner().map_err(|e| SimError::io("<csv buffer>", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("CSV is ASCII"))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| SimError::io(path, e))
}

pub fn write_csv(path: &Path, rows: &[Row], references: bool) -> Result<()> {
    write_text(path, &csv_string(rows, references)?)
}

/// Explicit path if given, else `name` inside `$RAE_OUTPUT_DIR` (or the
/// working directory).
pub fn output_path(explicit: Option<&Path>, name: &str) -> PathBuf {
    match explicit {
        Some(p) => p.to_path_buf(),
        None => std::env::var_os(OUTPUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("."))
            .join(name),
    }
}

/// Sidecar path `<stem>.meta.json` next to an output file.
pub fn metadata_path(output: &Path) -> PathBuf {
    output.with_extension("meta.json")
}

fn git_revision() -> String {
    std::process::Command::new("git")
        .args(["rev-parse", "HEAD"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .unwrap_or_else(|| "unknown".into())
}

#[derive(Serialize)]
struct Metadata<'a, C: Serialize> {
    command: &'a str,
    config: &'a C,
    git_revision: String,
    wall_time_s: f64,
    threads: usize,
    output: &'a Path,
}

pub fn write_metadata<C: Serialize>(output: &Path, command: &str, config: &C, wall: Duration) -> Result<PathBuf> {
    let meta = Metadata {
        command,
        config,
        git_revision: git_revision(),
        wall_time_s: wall.as_secs_f64(),
        threads: rayon::current_num_threads(),
        output,
    };
    let path = metadata_path(output);
    write_text(&path, &serde_json::to_string_pretty(&meta)?)?;
    Ok(path)
}

pub const MOMENTS_HEADER: [&str; 15] = [
    "kind",
    "level",
    "sigma",
    "dt",
    "n_paths",
    "capped",
    "e_j",
    "se_j",
    "e_j2",
    "se_j2",
    "e_int",
    "se_int",
    "e_sj2",
    "se_sj2",
    "resolution_limited",
];

/// One-row CSV table of first-passage moments.
pub fn moments_csv(kind: &str, level: f64, sigma: f64, dt: Option<f64>, h: &HittingMoments) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(MOMENTS_HEADER)?;
    let mut rec = vec![
        kind.to_string(),
        fmt_f64(level),
        fmt_f64(sigma),
        dt.map(fmt_f64).unwrap_or_default(),
        h.n_paths.to_string(),
        h.capped.to_string(),
    ];
    rec.extend([h.e_j, h.se_j, h.e_j2, h.se_j2, h.e_int, h.se_int, h.e_sj2, h.se_sj2].map(fmt_f64));
    rec.push(h.resolution_limited.to_string());
    w.write_record(rec)?;
    let bytes = w.into_inner().map_err(|e| SimError::io("<csv buffer>", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("CSV is ASCII"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::PolicyConfig;

    fn small(policy: PolicyConfig) -> SimConfig {
        SimConfig {
            m: 8,
            k: 3_000,
            replications: 3,
            policy,
            ..SimConfig::default()
        }
    }

    #[test]
    fn header_is_fixed() {
        let text = csv_string(&[], false).unwrap();
        assert_eq!(
            text.trim_end(),
            "policy,M,K,sigma2,epsilon,beta_or_gamma,seed,replication,naee,naaoi,throughput,alpha_hat,\
             activation_rate,e_j,e_j2,e_u,e_u2,e_i,e_sumsq,wald_ratio,l1,l2,l2_closed_form"
        );
    }

    #[test]
    fn rows_end_with_aggregates() {
        let res = run_config(&small(PolicyConfig::Ebt { beta: None })).unwrap();
        let rows = res.rows();
        assert_eq!(rows.len(), 5);
        assert_eq!(rows[3].kind, RowKind::Mean);
        assert_eq!(rows[4].kind, RowKind::Stderr);
        let mean = rows[..3].iter().map(Row::naee).sum::<f64>() / 3.0;
        assert!((rows[3].naee() - mean).abs() < 1e-15);
        assert_eq!(rows[3].get("naaoi"), Some(rows[3].naaoi()));
    }

    #[test]
    fn floats_keep_seventeen_digits() {
        let res = run_config(&small(PolicyConfig::CentralMw)).unwrap();
        let text = csv_string(&res.rows(), true).unwrap();
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        assert_eq!(rdr.headers().unwrap().len(), 29);
        let first = rdr.records().next().unwrap().unwrap();
        let naee: f64 = first[8].parse().unwrap();
        assert_eq!(naee, res.reports[0].naee);
        assert_eq!(&first[7], "0");
    }

    #[test]
    fn earlier_replications_do_not_depend_on_count() {
        let a = run_config(&small(PolicyConfig::PseudoBayesAloha)).unwrap();
        let mut more = small(PolicyConfig::PseudoBayesAloha);
        more.replications = 5;
        let b = run_config(&more).unwrap();
        assert_eq!(a.reports[..], b.reports[..3]);
    }

    #[test]
    fn references_follow_sigma_and_epsilon() {
        let r = reference_values(3.0, 0.5);
        assert!((r[3] - E).abs() < 1e-12);
        assert!((r[0] - 1.5 * E).abs() < 1e-12);
        assert_eq!(r[5], 0.88 * 3.0);
    }

    #[test]
    fn unwritable_path_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let err = write_csv(&blocker.join("out.csv"), &[], false).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }
}
