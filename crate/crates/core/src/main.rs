use anyhow::Context;
use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use tensr_core::harness::campaign::{grid, run_campaign, write_csv};
use tensr_core::harness::config::ConfigError;
use tensr_core::harness::{run_scenario, Protocol, Scenario, SimError};

#[derive(Parser)]
#[command(name = "tensr", about = "Most-reliable-path routing simulator for planned-mobility MANETs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write its metrics as JSON.
    Run {
        /// Scenario TOML; built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// `tensr` or `baseline` (alias `olsr`).
        #[arg(long, default_value = "tensr")]
        protocol: Protocol,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the velocity x grouping x protocol grid.
    Campaign {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Trials per cell; the scenario's `trials` when omitted.
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value = "results")]
        out_dir: PathBuf,
    },
    /// Check a config file and exit.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the version.
    Version,
}

fn load(config: Option<&Path>) -> Result<Scenario, ConfigError> {
    match config {
        Some(p) => Scenario::load(p),
        None => Ok(Scenario::default()),
    }
}

fn is_validation(err: &anyhow::Error) -> bool {
    err.chain().any(|e| {
        matches!(e.downcast_ref::<ConfigError>(), Some(ConfigError::Invalid(_)))
            || matches!(e.downcast_ref::<SimError>(), Some(SimError::Config(ConfigError::Invalid(_))))
    })
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run { config, protocol, seed, out } => {
            let mut scenario = load(config.as_deref())?;
            if let Some(seed) = seed {
                scenario.seed = seed;
            }
            let metrics = run_scenario(&scenario, protocol)?;
            let json = serde_json::to_string_pretty(&metrics)?;
            match out {
                Some(path) => {
                    std::fs::write(&path, json + "\n").with_context(|| format!("writing {}", path.display()))?
                }
                None => println!("{json}"),
            }
        }
        Command::Campaign { config, trials, out_dir } => {
            let scenario = load(config.as_deref())?;
            let trials = trials.unwrap_or(scenario.trials);
            if trials == 0 {
                return Err(ConfigError::Invalid(vec!["trials".into()]).into());
            }
            let result = run_campaign(&scenario, &grid(&scenario), trials)?;
            std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
            let csv_path = out_dir.join("campaign.csv");
            write_csv(&result.rows, std::fs::File::create(&csv_path)?)?;
            std::fs::write(out_dir.join("summary.json"), result.summary_json() + "\n")?;
            eprintln!("wrote {} rows to {}", result.rows.len(), csv_path.display());
        }
        Command::Validate { config } => {
            Scenario::load(&config)?;
            println!("ok");
        }
        Command::Version => println!("tensr {}", env!("CARGO_PKG_VERSION")),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if is_validation(&err) {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
