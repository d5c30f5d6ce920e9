//! Command-line front end: single runs, sweeps, oracle tables and the SAT
//! threshold pilot.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use rae_core::calibrate::calibrate_sat;
use rae_core::config::{SimConfig, SweepSpec};
use rae_core::error::{Result, SimError};
use rae_core::oracle::{brownian_hitting_moments, random_walk_hitting_moments};
use rae_core::policy::PolicyConfig;
use rae_core::sweep::{self, PointResult, Row};

#[derive(Parser)]
#[command(name = "rae", version, about = "Remote estimation of random walks over a collision channel")]
struct Cli {
    /// Worker threads; 1 gives bitwise reproducible output.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration with all its replications.
    Run(RunArgs),
    /// Run a figure sweep.
    Sweep(SweepArgs),
    /// First-passage moment tables.
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Pilot search for the SAT age threshold.
    CalibrateSat(CalibrateArgs),
}

#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    k: Option<u64>,
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replications: Option<u32>,
    #[arg(long)]
    burn_in: Option<u64>,
}

impl Overrides {
    fn apply(&self, cfg: &mut SimConfig) {
        if let Some(v) = self.m {
            cfg.m = v;
        }
        if let Some(v) = self.k {
            cfg.k = v;
        }
        if let Some(v) = self.sigma2 {
            cfg.sigma2 = v;
        }
        if let Some(v) = self.epsilon {
            cfg.epsilon = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.replications {
            cfg.replications = v;
        }
        if let Some(v) = self.burn_in {
            cfg.burn_in = v;
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    /// stationary_randomized, pseudo_bayes_aloha, sat, ebt, central_mw or
    /// central_greedy_error.
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<u64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Built-in grid: sigma2, epsilon or m.
    #[arg(long, conflicts_with = "spec")]
    preset: Option<String>,
    /// JSON sweep spec.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    /// Comma-separated axis values replacing the spec's.
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
    /// Comma-separated policy names replacing the spec's.
    #[arg(long, value_delimiter = ',')]
    policies: Option<Vec<String>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Exit time of Brownian motion from (-a, a).
    Brownian {
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        /// Step size; defaults to 1e-4·a².
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, default_value_t = 100_000)]
        paths: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// First passage of a Gaussian random walk above |β|.
    Walk {
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 100_000)]
        paths: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long, default_value_t = 500)]
    m: usize,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn policy_from_flags(name: Option<&str>, base: &PolicyConfig, a: &RunArgs) -> Result<PolicyConfig> {
    let mut policy = match name {
        Some(n) => PolicyConfig::from_name(n)
            .ok_or_else(|| SimError::InvalidConfig {
                field: "policy",
                reason: format!("unknown policy `{n}`"),
            })?,
        None => base.clone(),
    };
    match &mut policy {
        PolicyConfig::Ebt { beta } if a.beta.is_some() => *beta = a.beta,
        PolicyConfig::Sat { gamma } if a.gamma.is_some() => *gamma = a.gamma,
        PolicyConfig::StationaryRandomized { p } if a.p.is_some() => *p = a.p,
        _ => {}
    }
    Ok(policy)
}

fn print_summary(points: &[PointResult]) {
    for pt in points {
        let c = &pt.config;
        println!(
            "{:<22} M={:<4} sigma2={:<5} eps={:<4} naee={:.5} naaoi={:.5} throughput={:.5}",
            pt.policy.name(),
            c.m,
            c.sigma2,
            c.epsilon,
            pt.mean(|r| r.naee),
            pt.mean(|r| r.naaoi),
            pt.mean(|r| r.throughput),
        );
    }
}

fn rows_of(points: &[PointResult]) -> Vec<Row> {
    points.iter().flat_map(PointResult::rows).collect()
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => SimConfig::load(p)?,
        None => SimConfig::default(),
    };
    a.overrides.apply(&mut cfg);
    cfg.policy = policy_from_flags(a.policy.as_deref(), &cfg.policy, &a)?;
    cfg.validate()?;
    let start = Instant::now();
    let point = sweep::run_config(&cfg)?;
    let path = sweep::output_path(a.out.as_deref().or(cfg.output.as_deref()), "run.csv");
    let points = [point];
    sweep::write_csv(&path, &rows_of(&points), false)?;
    sweep::write_metadata(&path, "run", &cfg, start.elapsed())?;
    print_summary(&points);
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let mut spec = match (&a.preset, &a.spec) {
        (Some(name), _) => SweepSpec::preset(name).ok_or_else(|| SimError::InvalidConfig {
            field: "preset",
            reason: format!("unknown preset `{name}`"),
        })?,
        (None, Some(p)) => SweepSpec::load(p)?,
        (None, None) => {
            return Err(SimError::InvalidConfig {
                field: "preset",
                reason: "give --preset or --spec".into(),
            })
        }
    };
    a.overrides.apply(&mut spec.base);
    if let Some(v) = &a.values {
        spec.values = v.clone();
    }
    if let Some(names) = &a.policies {
        spec.policies = names
            .iter()
            .map(|n| {
                PolicyConfig::from_name(n).ok_or_else(|| SimError::InvalidConfig {
                    field: "policies",
                    reason: format!("unknown policy `{n}`"),
                })
            })
            .collect::<Result<_>>()?;
    }
    let start = Instant::now();
    let points = sweep::run_sweep(&spec)?;
    let name = match spec.axis {
        rae_core::Axis::Sigma2 => "sweep_sigma2.csv",
        rae_core::Axis::Epsilon => "sweep_epsilon.csv",
        rae_core::Axis::M => "sweep_m.csv",
    };
    let path = sweep::output_path(a.out.as_deref().or(spec.base.output.as_deref()), name);
    sweep::write_csv(&path, &rows_of(&points), true)?;
    sweep::write_metadata(&path, "sweep", &spec, start.elapsed())?;
    print_summary(&points);
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_oracle(c: OracleCommand) -> Result<()> {
    let start = Instant::now();
    let (text, out, name, params) = match c {
        OracleCommand::Brownian { a, dt, paths, seed, out } => {
            let dt = dt.unwrap_or(1e-4 * a * a);
            let h = brownian_hitting_moments(a, dt, paths, seed)?;
            println!(
                "E[J]/a^2={:.5} E[J^2]/(5a^4/3)={:.5} E[int B^2]/(a^4/6)={:.5}",
                h.e_j / (a * a),
                h.e_j2 / (5.0 * a.powi(4) / 3.0),
                h.e_int / (a.powi(4) / 6.0)
            );
            let params = serde_json::json!({"kind": "brownian", "a": a, "dt": dt, "paths": paths, "seed": seed});
            (sweep::moments_csv("brownian", a, 1.0, Some(dt), &h)?, out, "oracle_brownian.csv", params)
        }
        OracleCommand::Walk { beta, sigma, paths, seed, out } => {
            let h = random_walk_hitting_moments(beta, sigma, paths, seed)?;
            println!(
                "E[J]={:.3} E[J]sigma^2/beta^2={:.5} wald={:.5}",
                h.e_j,
                h.e_j * sigma * sigma / (beta * beta),
                h.e_sj2 / (sigma * sigma * h.e_j)
            );
            let params = serde_json::json!({"kind": "walk", "beta": beta, "sigma": sigma, "paths": paths, "seed": seed});
            (sweep::moments_csv("walk", beta, sigma, None, &h)?, out, "oracle_walk.csv", params)
        }
    };
    let path = sweep::output_path(out.as_deref(), name);
    sweep::write_text(&path, &text)?;
    sweep::write_metadata(&path, "oracle", &params, start.elapsed())?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_calibrate(a: CalibrateArgs) -> Result<()> {
    if !(0.0..1.0).contains(&a.epsilon) {
        return Err(SimError::ErasureProbabilityOne(a.epsilon));
    }
    if a.m == 0 {
        return Err(SimError::InvalidConfig {
            field: "m",
            reason: "must be at least 1".into(),
        });
    }
    let start = Instant::now();
    let cal = calibrate_sat(a.m, a.epsilon, a.seed)?;
    let mut w = String::from("gamma,naaoi\n");
    for (g, v) in &cal.evaluated {
        w.push_str(&format!("{g},{v:.16e}\n"));
    }
    let path = sweep::output_path(a.out.as_deref(), "calibrate_sat.csv");
    sweep::write_text(&path, &w)?;
    let params = serde_json::json!({"m": a.m, "epsilon": a.epsilon, "seed": a.seed, "pilot_slots": cal.pilot_slots});
    sweep::write_metadata(&path, "calibrate-sat", &params, start.elapsed())?;
    println!("gamma={} naaoi={:.5}", cal.gamma, cal.naaoi);
    println!("wrote {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Oracle(c) => cmd_oracle(c),
        Command::CalibrateSat(a) => cmd_calibrate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
