use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use kic_core::experiment::{self, Dataset, ExperimentConfig};
use kic_core::{Error, SinrAccounting};

const EXIT_CONFIG: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_CONSISTENCY: u8 = 4;

/// Experiments for iterative known-interference cancellation on full-duplex relay chains.
#[derive(Debug, Parser)]
#[command(name = "kic-lab", version)]
struct Cli {
    /// JSON experiment config; built-in defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides the config's `output_dir`).
    #[arg(long, global = true, env = "KIC_LAB_OUT")]
    out: Option<PathBuf>,

    /// Seed for stochastic commands (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Actual and lower-bound SINR per node, rounds and path-loss exponent.
    SinrSweep {
        /// `per_path` or `coherent`.
        #[arg(long)]
        accounting: Option<SinrAccounting>,
        /// Fail with exit code 4 if any actual SINR falls below its bound.
        #[arg(long)]
        check: bool,
    },
    /// Accumulated delay in slots per node and rounds.
    DelayTable,
    /// Interference bound, feasibility and minimum rounds, plus the chain-length limit.
    BoundsReport,
    /// Slot-by-slot transmissions of the five-node, two-round walk-through.
    ExampleN5,
    /// Sample-level check of the predicted residual power.
    MonteCarlo {
        /// Fail with exit code 4 if any relative error exceeds this value.
        #[arg(long)]
        tolerance: Option<f64>,
    },
}

/// Raised when a computed dataset contradicts an invariant.
#[derive(Debug)]
struct ConsistencyFailure(String);

impl std::fmt::Display for ConsistencyFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConsistencyFailure {}

fn load_config(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => experiment::parse_config(path).map_err(|e| match e {
            Error::Io(io) => Error::Config(vec![format!("{}: {io}", path.display())]),
            other => other,
        })?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let (Some(seed), Some(mc)) = (cli.seed, cfg.monte_carlo.as_mut()) {
        mc.seed = seed;
    }
    Ok(cfg)
}

fn write(dir: &Path, name: &str, ds: &Dataset) -> anyhow::Result<()> {
    let path = dir.join(name);
    ds.write(&path).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {} ({} rows)", path.display(), ds.rows.len());
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let mut cfg = load_config(cli)?;
    let dir = cfg.output_dir.clone();
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;

    match &cli.command {
        Command::SinrSweep { accounting, check } => {
            if let Some(acc) = accounting {
                cfg.accounting = *acc;
            }
            let ds = experiment::run_sinr_sweep(&cfg)?;
            write(&dir, "sinr_sweep.csv", &ds)?;
            if *check {
                let violations: Vec<_> = experiment::sinr_cells(&cfg)?
                    .into_iter()
                    .filter(|c| c.sinr_actual_db.is_some_and(|a| a < c.sinr_lb_db - 1e-9))
                    .map(|c| format!("alpha={} i={} m={}", c.alpha, c.node, c.rounds))
                    .collect();
                if !violations.is_empty() {
                    bail!(ConsistencyFailure(format!(
                        "actual SINR below the lower bound at {}",
                        violations.join(", ")
                    )));
                }
            }
        }
        Command::DelayTable => write(&dir, "delay_table.csv", &experiment::run_delay_table(&cfg)?)?,
        Command::BoundsReport => {
            let out = experiment::run_bounds_report(&cfg)?;
            write(&dir, "bounds_report.csv", &out.nodes)?;
            write(&dir, "chain_length.csv", &out.chain)?;
        }
        Command::ExampleN5 => {
            let trace = experiment::run_example_n5()?;
            let path = dir.join("example_n5_trace.csv");
            std::fs::write(&path, trace.to_csv()).with_context(|| format!("writing {}", path.display()))?;
            println!("wrote {}", path.display());
        }
        Command::MonteCarlo { tolerance } => {
            let ds = experiment::run_monte_carlo_cmd(&cfg, cli.seed)?;
            write(&dir, "monte_carlo.csv", &ds)?;
            if let Some(tol) = tolerance {
                let col = ds.column("rel_err").expect("rel_err column");
                let bad: Vec<_> = ds
                    .rows
                    .iter()
                    .filter(|r| r[col].parse::<f64>().map_or(true, |e| e > *tol))
                    .map(|r| format!("alpha={} i={} m={} rel_err={}", r[0], r[1], r[2], r[col]))
                    .collect();
                if !bad.is_empty() {
                    bail!(ConsistencyFailure(format!(
                        "relative error above {tol}: {}",
                        bad.join(", ")
                    )));
                }
            }
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConsistencyFailure>().is_some() {
        return EXIT_CONSISTENCY;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_) | Error::Parse(_) | Error::NodeOutOfRange { .. }) => EXIT_CONFIG,
        Some(Error::Infeasible { .. }) => EXIT_INFEASIBLE,
        Some(Error::Consistency(_)) => EXIT_CONSISTENCY,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
