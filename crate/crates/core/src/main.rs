use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use online_gne::config::ExperimentConfig;
use online_gne::error::Result;
use online_gne::experiment::{cmd_report, cmd_run, cmd_validate, exit_code, summary_table};

#[derive(Parser)]
#[command(version, about = "Online primal-dual learning in games with coupled constraints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of a config and write logs, manifest and report.
    Run {
        config: PathBuf,
        /// Replace the config's seed list with this single seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        horizon: Option<u64>,
        #[arg(long)]
        no_invariant_checks: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute metrics from a run directory without rerunning.
    Report { dir: PathBuf },
    /// Check a config, its schedule and the game's derivatives.
    Validate {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        horizon: Option<u64>,
    },
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            seed,
            horizon,
            no_invariant_checks,
            out,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.apply_overrides(seed, horizon, no_invariant_checks, out);
            let outcome = cmd_run(&cfg, None)?;
            print!("{}", summary_table(&outcome.report));
            println!("wrote {}", outcome.dir.display());
        }
        Command::Report { dir } => print!("{}", summary_table(&cmd_report(&dir)?)),
        Command::Validate { config, seed, horizon } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.apply_overrides(seed, horizon, false, None);
            for check in cmd_validate(&cfg)?.checks {
                println!("ok  {check}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
