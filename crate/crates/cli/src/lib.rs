//! Command surface of the `peerrep` binary.
//!
//! Every command that writes files first writes `manifest.json` into its
//! output directory, then its CSV and ledger outputs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use peerrep_core::attack::{
    convergence_curve, monte_carlo_attack, AttackScenario, Fraction, WORST_CASE_LIMIT,
};
use peerrep_core::game::{sweep, OracleParams, SweepReport};
use peerrep_core::ledger::Ledger;
use peerrep_core::reputation::{GainParams, DEFAULT_ALPHA};
use peerrep_core::sim::{recovery_experiment, RecoveryConfig, World, WorldConfig};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("invalid config {path}: {source}")]
    Config {
        path: String,
        source: peerrep_core::Error,
    },

    #[error(transparent)]
    Core(#[from] peerrep_core::Error),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("{failed} in-regime game instances lack a unique honest equilibrium")]
    GameCheckFailed { failed: u64 },
}

impl CliError {
    /// 2 for usage and configuration problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config { .. } => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Parses a 64-bit seed written in decimal or as `0x`-prefixed hex.
pub fn parse_seed(text: &str) -> Result<u64, String> {
    let t = text.trim();
    let parsed = match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => t.parse(),
    };
    parsed.map_err(|e| format!("invalid seed `{text}`: {e}"))
}

fn parse_oracle(text: &str) -> Result<OracleParams, String> {
    let (pi, pi_bar) = text
        .split_once(',')
        .ok_or_else(|| format!("expected `pi,pi_bar`, got `{text}`"))?;
    let pi: f64 = pi.trim().parse().map_err(|e| format!("pi: {e}"))?;
    let pi_bar: f64 = pi_bar.trim().parse().map_err(|e| format!("pi_bar: {e}"))?;
    OracleParams::new(pi, pi_bar).map_err(|e| e.to_string())
}

fn parse_probability(text: &str) -> Result<f64, String> {
    let v: f64 = text.trim().parse().map_err(|e| format!("`{text}`: {e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "peerrep",
    version,
    about = "Reputation-based peer review simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a multi-venue world described by a JSON config.
    Simulate(SimulateArgs),
    /// Cohort recovery experiment: mean reputation per fault probability.
    Recovery(RecoveryArgs),
    /// Majority-cluster attack probability against the pool size.
    Clustering(ClusteringArgs),
    /// Check that honest play is the unique pure equilibrium on random games.
    GameCheck(GameCheckArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config's master seed.
    #[arg(long, value_parser = parse_seed)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct RecoveryArgs {
    #[arg(long, value_delimiter = ',', value_parser = parse_probability, default_value = "0,0.1,0.3,0.5,1.0")]
    pub faults: Vec<f64>,
    #[arg(long, default_value_t = 40)]
    pub intervals: u64,
    #[arg(long, default_value_t = 20)]
    pub switch_at: u64,
    #[arg(long, default_value_t = 200)]
    pub cohort: usize,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Detection probabilities as `pi,pi_bar`.
    #[arg(long, value_parser = parse_oracle, default_value = "0.9,0.9")]
    pub oracle: OracleParams,
    /// Pass honest reviews through the oracle as well.
    #[arg(long)]
    pub judge_honest: bool,
    #[arg(long, value_parser = parse_seed, default_value = "0")]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ClusteringArgs {
    #[arg(long, default_value_t = 300)]
    pub n_max: u64,
    #[arg(long, default_value_t = 1)]
    pub step: u64,
    #[arg(long, default_value_t = 5)]
    pub r: u64,
    #[arg(long, default_value_t = 3)]
    pub m: u64,
    #[arg(long, default_value = "1/3")]
    #[serde(serialize_with = "display")]
    pub fraction: Fraction,
    /// Monte Carlo trials per pool size; 0 writes exact values only.
    #[arg(long, default_value_t = 0)]
    pub mc_trials: u64,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long, value_parser = parse_seed, default_value = "0")]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

fn display<T: std::fmt::Display, S: serde::Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

#[derive(Debug, Args)]
pub struct GameCheckArgs {
    #[arg(long, default_value_t = 1000)]
    pub instances: u64,
    #[arg(long, value_delimiter = ',', default_value = "0.05")]
    pub alpha: Vec<f64>,
    /// Imperfect oracle as `pi,pi_bar`; omitted means a perfect oracle.
    #[arg(long, value_parser = parse_oracle)]
    pub oracle: Option<OracleParams>,
    #[arg(long, value_parser = parse_seed, default_value = "0")]
    pub seed: u64,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config_path: Option<String>,
    pub master_seed: u64,
    pub output_dir: String,
    /// SHA-256 of the config file, or of the command's arguments as JSON.
    pub config_digest: String,
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub in_assumption: Option<bool>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn prepare_out(dir: &Path, manifest: &RunManifest) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    fs::write(&path, text).map_err(io_err(&path))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, CliError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    Ok(csv::Writer::from_writer(file))
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(a) => simulate(a, out),
        Command::Recovery(a) => recovery(a, out),
        Command::Clustering(a) => clustering(a, out),
        Command::GameCheck(a) => game_check(a, out),
    }
}

#[derive(Serialize)]
struct IntervalRow {
    interval: u64,
    user_count: usize,
    mean_reputation: f64,
    accepted: usize,
    rejected: usize,
    borderline_accepted: usize,
}

fn simulate(args: SimulateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let config_path = args.config.display().to_string();
    let text = fs::read_to_string(&args.config)
        .map_err(|e| CliError::Usage(format!("cannot read config {config_path}: {e}")))?;
    let mut config = WorldConfig::from_json(&text).map_err(|source| CliError::Config {
        path: config_path.clone(),
        source,
    })?;
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    let in_assumption = config.in_assumption();
    prepare_out(
        &args.out,
        &RunManifest {
            command: "simulate".into(),
            tool_version: TOOL_VERSION.into(),
            config_path: Some(config_path),
            master_seed: config.master_seed,
            output_dir: args.out.display().to_string(),
            config_digest: sha256_hex(text.as_bytes()),
            outputs: vec!["ledger.jsonl".into(), "intervals.csv".into()],
            in_assumption: Some(in_assumption),
        },
    )?;
    if !in_assumption {
        writeln!(
            out,
            "warning: honest fraction {:.4} is below 2/3; out-of-assumption run",
            config.honest_fraction()
        )
        .map_err(io_err(Path::new("stdout")))?;
    }

    let ledger_path = args.out.join("ledger.jsonl");
    let ledger = Ledger::create(&ledger_path).map_err(peerrep_core::Error::from)?;
    let mut world = World::with_ledger(config, ledger)?;
    let reports = world.run()?;

    let csv_path = args.out.join("intervals.csv");
    let mut csv = csv_writer(&csv_path)?;
    for r in &reports {
        csv.serialize(IntervalRow {
            interval: r.interval,
            user_count: r.user_count,
            mean_reputation: r.mean_reputation,
            accepted: r.accepted,
            rejected: r.rejected,
            borderline_accepted: r.borderline_accepted,
        })?;
    }
    csv.flush().map_err(io_err(&csv_path))?;

    let digest = world.snapshot().digest_hex();
    writeln!(
        out,
        "intervals={} events={} mean_reputation={:.6}\ndigest {digest}",
        reports.len(),
        world.ledger().len(),
        world.mean_reputation(),
    )
    .map_err(io_err(Path::new("stdout")))?;
    Ok(())
}

#[derive(Serialize)]
struct RecoveryCsvRow {
    interval: u64,
    fault_probability: f64,
    mean_reputation: f64,
    std_error: f64,
}

fn recovery(args: RecoveryArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let config = RecoveryConfig {
        faults: args.faults.clone(),
        intervals: args.intervals,
        switch_at: args.switch_at,
        cohort_size: args.cohort,
        alpha: args.alpha,
        oracle: args.oracle,
        judge_honest_reviews: args.judge_honest,
        seed: args.seed,
    };
    // Validate before touching the output directory.
    GainParams::permissive(args.alpha).map_err(|e| CliError::Usage(format!("--alpha: {e}")))?;
    if args.cohort == 0 {
        return Err(CliError::Usage("--cohort must be at least 1".into()));
    }
    prepare_out(
        &args.out,
        &RunManifest {
            command: "recovery".into(),
            tool_version: TOOL_VERSION.into(),
            config_path: None,
            master_seed: args.seed,
            output_dir: args.out.display().to_string(),
            config_digest: sha256_hex(&serde_json::to_vec(&args)?),
            outputs: vec!["recovery.csv".into()],
            in_assumption: None,
        },
    )?;
    let rows = recovery_experiment(&config)?;
    let path = args.out.join("recovery.csv");
    let mut csv = csv_writer(&path)?;
    for r in &rows {
        csv.serialize(RecoveryCsvRow {
            interval: r.interval,
            fault_probability: r.fault_probability,
            mean_reputation: r.mean_reputation,
            std_error: r.std_error,
        })?;
    }
    csv.flush().map_err(io_err(&path))?;
    writeln!(out, "cohorts={} rows={}", config.faults.len(), rows.len())
        .map_err(io_err(Path::new("stdout")))?;
    Ok(())
}

#[derive(Serialize)]
struct ClusteringRow {
    n: u64,
    g: u64,
    exact_probability: f64,
    mc_estimate: Option<f64>,
    mc_stderr: Option<f64>,
    limit_17_81: f64,
}

fn clustering(args: ClusteringArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if args.r == 0 || args.m == 0 || args.m > args.r {
        return Err(CliError::Usage("need 1 <= m <= r".into()));
    }
    if args.n_max < args.r {
        return Err(CliError::Usage(format!(
            "--n-max {} is below --r {}",
            args.n_max, args.r
        )));
    }
    if args.step == 0 {
        return Err(CliError::Usage("--step must be at least 1".into()));
    }
    prepare_out(
        &args.out,
        &RunManifest {
            command: "clustering".into(),
            tool_version: TOOL_VERSION.into(),
            config_path: None,
            master_seed: args.seed,
            output_dir: args.out.display().to_string(),
            config_digest: sha256_hex(&serde_json::to_vec(&args)?),
            outputs: vec!["clustering.csv".into()],
            in_assumption: None,
        },
    )?;
    let n_values: Vec<u64> = (args.r..=args.n_max).step_by(args.step as usize).collect();
    let curve = convergence_curve(&n_values, args.fraction, args.r, args.m)?;
    let path = args.out.join("clustering.csv");
    let mut csv = csv_writer(&path)?;
    for point in &curve {
        let mc = (args.mc_trials > 0)
            .then(|| -> Result<_, CliError> {
                let s = AttackScenario::with_majority(point.n, point.g, args.r, args.m)?;
                Ok(monte_carlo_attack(
                    &s,
                    args.mc_trials,
                    args.seed,
                    args.workers,
                ))
            })
            .transpose()?;
        csv.serialize(ClusteringRow {
            n: point.n,
            g: point.g,
            exact_probability: point.probability,
            mc_estimate: mc.map(|e| e.estimate),
            mc_stderr: mc.map(|e| e.std_error),
            limit_17_81: WORST_CASE_LIMIT,
        })?;
    }
    csv.flush().map_err(io_err(&path))?;
    writeln!(out, "points={}", curve.len()).map_err(io_err(Path::new("stdout")))?;
    Ok(())
}

fn describe(report: &SweepReport) -> String {
    let oracle = match report.oracle {
        Some(o) => format!("{},{}", o.pi, o.pi_bar),
        None => "perfect".into(),
    };
    let regime = if report.in_regime {
        "in-regime"
    } else {
        "out-of-regime (assumption violated)"
    };
    format!(
        "alpha={} oracle={oracle} instances={} passed={} failed={} {regime}",
        report.alpha,
        report.instances,
        report.passed,
        report.failed()
    )
}

fn game_check(args: GameCheckArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut params = Vec::with_capacity(args.alpha.len());
    for &alpha in &args.alpha {
        params.push(
            GainParams::permissive(alpha).map_err(|e| CliError::Usage(format!("--alpha: {e}")))?,
        );
    }
    let mut failed = 0;
    for p in params {
        let report = sweep(args.instances, p, args.oracle, args.seed);
        writeln!(out, "{}", describe(&report)).map_err(io_err(Path::new("stdout")))?;
        if report.in_regime {
            failed += report.failed();
        }
    }
    if failed > 0 {
        return Err(CliError::GameCheckFailed { failed });
    }
    Ok(())
}
