use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use squint_cli::experiment::load;
use squint_cli::{describe_plan, run_experiment, Experiment, RunOptions};

/// Beam-squint simulator for lens-antenna-subarray transceivers.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write CSVs plus report.json.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// gain, complexity, power, capacity or all.
        #[arg(long, default_value = "all")]
        experiment: Experiment,
        /// Allow exhaustive search over more than a few hundred thousand tuples.
        #[arg(long)]
        force_exhaustive: bool,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; overrides `output_dir` in the scenario.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a scenario file and print the resolved configuration.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Print the subband plan and the filter-count bound.
    Plan {
        #[arg(long)]
        scenario: PathBuf,
    },
}

fn configure_workers() -> Result<()> {
    if let Ok(v) = std::env::var("SQUINT_WORKERS") {
        let n: usize = v
            .parse()
            .with_context(|| format!("SQUINT_WORKERS must be a positive integer, got {v:?}"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    configure_workers()?;
    match cli.command {
        Command::Run {
            scenario,
            experiment,
            force_exhaustive,
            seed,
            out,
        } => {
            let r = load(&scenario, seed, out)?;
            let dir = r.scenario.output_dir.clone();
            let report = run_experiment(&r, experiment, &RunOptions { force_exhaustive }, &dir)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            for f in &report.files {
                println!("{}", f.display());
            }
        }
        Command::Validate { scenario } => {
            let r = load(&scenario, None, None)?;
            print!("{}", toml::to_string(&r.scenario)?);
        }
        Command::Plan { scenario } => {
            let r = load(&scenario, None, None)?;
            print!("{}", describe_plan(&r));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = serde_json::json!({ "error": format!("{e:#}") });
            eprintln!("{msg}");
            ExitCode::FAILURE
        }
    }
}
