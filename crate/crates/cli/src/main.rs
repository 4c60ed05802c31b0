//! `metabayes`: train meta-learners, compare them with Bayes-optimal agents and emit CSV artifacts.

mod commands;
mod config;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use metabayes::Error;

use crate::commands::gittins::FamilyArg;
use crate::commands::sweep::SweepKind;
use crate::config::ExperimentConfig;

#[derive(Parser, Debug)]
#[command(name = "metabayes", version, about)]
struct Cli {
    /// Experiment config (JSON). Fields left out take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `master_seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `runs`.
    #[arg(long, global = true)]
    runs: Option<usize>,
    /// Overrides `out` (for `gittins-table`: the CSV file to write).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Process runs one at a time on a single thread.
    #[arg(long, global = true)]
    strict_determinism: bool,
    /// Print the resolved configuration and exit without computing anything.
    #[arg(long, global = true)]
    dry_run: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train every (task, run) pair; resumes from the latest checkpoint.
    Train,
    /// Evaluate final checkpoints and the Bayes-optimal agents at every T_eval.
    Eval,
    /// Behavioural and structural comparison of initial and final checkpoints.
    Compare,
    /// Within-episode dissimilarities and MDS embedding of all checkpoints.
    Convergence,
    /// Variance explained, simulation scores and state-space panels.
    Structure,
    /// Architecture-width or context-width sweep.
    Sweep {
        #[arg(long, value_enum)]
        kind: SweepKind,
    },
    /// Build a Gittins index table and write it as CSV.
    GittinsTable {
        #[arg(long, value_enum)]
        family: FamilyArg,
        /// Beta prior `ALPHA,BETA` (Bernoulli only).
        #[arg(long, value_delimiter = ',', default_value = "1,1")]
        prior: Vec<f64>,
        #[arg(long, default_value_t = 30)]
        max_pulls: usize,
        #[arg(long, default_value_t = 0.95)]
        discount: f64,
    },
    /// Collect training curves and write trace archives.
    Export,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        e if e.is_numeric() => 3,
        Error::Missing(_) => 4,
        Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => 4,
        _ => 1,
    }
}

fn resolve(cli: &Cli) -> metabayes::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => config::load(p)?,
        None => config::parse("{}")?,
    };
    if let Some(s) = cli.seed {
        cfg.master_seed = s;
    }
    if let Some(r) = cli.runs {
        cfg.runs = r;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> metabayes::Result<()> {
    if let Command::GittinsTable {
        family,
        prior,
        max_pulls,
        discount,
    } = &cli.command
    {
        let out = cli
            .out
            .clone()
            .unwrap_or_else(|| PathBuf::from("gittins.csv"));
        if cli.dry_run {
            println!(
                "{}",
                serde_json::json!({ "family": format!("{family:?}"), "prior": prior, "max_pulls": max_pulls, "discount": discount, "out": out })
            );
            return Ok(());
        }
        return commands::gittins::run(*family, prior, *max_pulls, *discount, &out);
    }
    let cfg = resolve(cli)?;
    let strict = cli.strict_determinism;
    match &cli.command {
        Command::Train => return commands::train::run(&cfg, strict, cli.dry_run),
        Command::Sweep { kind } => return commands::sweep::run(&cfg, *kind, strict, cli.dry_run),
        _ if cli.dry_run => {
            println!("{}", serde_json::to_string_pretty(&cfg)?);
            return Ok(());
        }
        _ => {}
    }
    match &cli.command {
        Command::Eval => commands::eval::run(&cfg, strict),
        Command::Compare => commands::compare::run(&cfg, strict),
        Command::Convergence => commands::convergence::run(&cfg, strict),
        Command::Structure => commands::structure::run(&cfg, strict),
        Command::Export => commands::export::run(&cfg, strict),
        Command::Train | Command::Sweep { .. } | Command::GittinsTable { .. } => {
            unreachable!("handled above")
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
