//! Batch front end: flags, subcommands and result files.

pub mod config;
pub mod output;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::bounds::{limit_capacities, lower_bound_estimate, upper_bound, BoundInputs};
use crate::experiments::{
    quarter_circle_density, run_point, run_sweep, singular_value_histogram, ExperimentConfig,
};
use crate::linkbudget::{from_db, KFactor};
use crate::Error;
use config::{ConfigError, ConfigSource, Settings};
use output::{
    manifest_path, sha256_file, unix_now, write_csv, write_manifest, BoundsRow, CapacityRow,
    HistogramRow, InputDigest, RunManifest,
};

#[derive(Debug, Parser)]
#[command(name = "molmimo", version, about = "MIMO capacity under molecular absorption and re-radiation")]
pub struct Args {
    /// Config file of `section.key = value` lines.
    #[arg(long, global = true, env = "MOLMIMO_CONFIG")]
    pub config: Option<PathBuf>,
    /// Result CSV; a manifest is written next to it.
    #[arg(long, global = true, env = "MOLMIMO_OUTPUT")]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, env = "MOLMIMO_SEED")]
    pub seed: Option<u64>,
    #[arg(long, global = true, env = "MOLMIMO_TRIALS")]
    pub trials: Option<usize>,
    /// Re-radiation treatment: noise or scattering.
    #[arg(long, global = true, env = "MOLMIMO_MODE")]
    pub mode: Option<String>,
    /// Comma-separated list from BF, CL-MP, OL-MP, SISO.
    #[arg(long, global = true, env = "MOLMIMO_SCHEMES")]
    pub schemes: Option<String>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "MOLMIMO_THREADS")]
    pub threads: Option<usize>,
    /// Carrier frequency in Hz.
    #[arg(long, global = true, env = "MOLMIMO_FREQUENCY")]
    pub frequency: Option<f64>,
    /// Link distance in m.
    #[arg(long, global = true, env = "MOLMIMO_DISTANCE")]
    pub distance: Option<f64>,
    /// Extra `section.key=value` override; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Capacity statistics at the configured operating point.
    Point,
    /// Capacity statistics over the configured sweep.
    Sweep,
    /// Singular-value histogram against the quarter-circle law.
    Svdist,
    /// Analytical upper bound, Monte-Carlo lower bound and limits over a K grid.
    Bounds,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Point => "point",
            Command::Sweep => "sweep",
            Command::Svdist => "svdist",
            Command::Bounds => "bounds",
        }
    }
}

/// Files written by a successful run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub output: PathBuf,
    pub manifest: PathBuf,
    pub rows: usize,
    pub summary: serde_json::Value,
}

/// Merges file, flags and overrides into validated settings.
pub fn load_settings(args: &Args) -> Result<Settings, Error> {
    let mut src = match &args.config {
        Some(path) => ConfigSource::load(path)?,
        None => ConfigSource::new(),
    };
    for pair in &args.overrides {
        src.set_pair(pair)?;
    }
    let flags = [
        ("link.frequency_hz", args.frequency.map(|v| v.to_string())),
        ("link.distance_m", args.distance.map(|v| v.to_string())),
        ("run.seed", args.seed.map(|v| v.to_string())),
        ("run.trials", args.trials.map(|v| v.to_string())),
        ("channel.mode", args.mode.clone()),
        ("run.schemes", args.schemes.clone()),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            src.set(key, &v)?;
        }
    }
    src.resolve()
}

fn bounds_rows(settings: &Settings) -> Result<Vec<BoundsRow>, Error> {
    let b = &settings.bounds;
    let snr_db = b
        .snr_db
        .ok_or_else(|| ConfigError::Validation {
            key: "run.snr_db".into(),
            reason: "required by the bounds command".into(),
        })?;
    let rho = from_db(snr_db);
    let n = settings.n_tx.max(settings.n_rx);
    let (high, none) = limit_capacities(n, rho);
    let grid = crate::experiments::SweepSpec {
        axis: crate::experiments::SweepAxis::Absorption,
        start: b.k_min,
        stop: b.k_max,
        points: b.points,
        spacing: crate::experiments::Spacing::Log,
    };
    grid.values()
        .into_iter()
        .map(|k| {
            let inp = BoundInputs::new(settings.n_tx, settings.n_rx, rho, KFactor::Finite(k))?;
            let lower = lower_bound_estimate(&inp, b.trials, settings.seed, b.scaling)?;
            Ok(BoundsRow {
                k_factor: k,
                k_factor_db: 10.0 * k.log10(),
                n_tx: settings.n_tx,
                n_rx: settings.n_rx,
                snr_db,
                upper_bound: upper_bound(&inp),
                lower_bound: lower.mean,
                lower_bound_se: lower.se,
                limit_high_absorption: high,
                limit_no_absorption: none,
                trials: b.trials,
                seed: settings.seed,
            })
        })
        .collect()
}

fn execute(
    command: Command,
    settings: &Settings,
    out: &Path,
) -> Result<(usize, serde_json::Value), Error> {
    let experiment = || -> Result<&ExperimentConfig, Error> { Ok(settings.experiment()?) };
    match command {
        Command::Point | Command::Sweep => {
            let cfg = experiment()?;
            let stats = if command == Command::Point {
                run_point(cfg)?
            } else {
                if cfg.sweep.is_none() {
                    return Err(ConfigError::Validation {
                        key: "sweep.axis".into(),
                        reason: "required by the sweep command".into(),
                    }
                    .into());
                }
                run_sweep(cfg)?
            };
            let rows: Vec<CapacityRow> = stats.iter().map(CapacityRow::from).collect();
            write_csv(out, &rows)?;
            Ok((rows.len(), json!({ "rows": rows.len() })))
        }
        Command::Svdist => {
            let hist = singular_value_histogram(experiment()?, settings.bins)?;
            let rows: Vec<HistogramRow> = hist
                .density
                .iter()
                .enumerate()
                .map(|(i, &density)| {
                    let (lo, hi) = (hist.edges[i], hist.edges[i + 1]);
                    HistogramRow {
                        bin_lo: lo,
                        bin_hi: hi,
                        density,
                        quarter_circle: quarter_circle_density(0.5 * (lo + hi)),
                    }
                })
                .collect();
            write_csv(out, &rows)?;
            Ok((
                rows.len(),
                json!({ "ks": hist.ks, "samples": hist.samples, "k_factor_db": hist.k_factor_db }),
            ))
        }
        Command::Bounds => {
            let rows = bounds_rows(settings)?;
            write_csv(out, &rows)?;
            Ok((rows.len(), json!({ "rows": rows.len() })))
        }
    }
}

/// Runs one subcommand and writes its CSV and manifest.
pub fn run(args: &Args) -> Result<RunOutcome, Error> {
    let started = unix_now();
    let settings = load_settings(args)?;
    let out = args
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", args.command.name())));
    let mut inputs = Vec::new();
    if let Some(cfg) = &args.config {
        inputs.push(cfg.clone());
    }
    inputs.extend(settings.inputs.iter().cloned());
    let digests = inputs
        .iter()
        .map(|p| {
            Ok(InputDigest {
                path: p.display().to_string(),
                sha256: sha256_file(p)?,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;

    let work = || execute(args.command, &settings, &out);
    let (rows, summary) = match args.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| ConfigError::Validation {
                key: "threads".into(),
                reason: e.to_string(),
            })?
            .install(work)?,
        None => work()?,
    };

    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: args.command.name().to_string(),
        seed: settings.seed,
        started_unix_s: started,
        finished_unix_s: unix_now(),
        config: settings.resolved.clone(),
        inputs: digests,
        output: out.display().to_string(),
        summary: summary.clone(),
    };
    let manifest_file = manifest_path(&out);
    write_manifest(&manifest_file, &manifest)?;
    Ok(RunOutcome {
        output: out,
        manifest: manifest_file,
        rows,
        summary,
    })
}
