//! `trajopt` command-line entry point.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use trajopt_cli::config::{config_to_string, load_config, Method, RunConfig};
use trajopt_cli::run::run;
use trajopt_core::SCENARIO_NAMES;

#[derive(Parser)]
#[command(name = "trajopt", about = "Trajectory optimization benchmarks", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or both solvers on a configured scenario.
    Solve {
        /// Path to a JSON run config.
        #[arg(long)]
        config: PathBuf,
        /// Override the config's method: scp, osscp, or both.
        #[arg(long)]
        method: Option<String>,
        /// Output directory (overrides the config's out_dir; default "out").
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scenario inspection.
    Scenarios {
        #[command(subcommand)]
        command: ScenariosCommand,
    },
    /// Config-file helpers.
    Config {
        #[command(subcommand)]
        command: ConfigCommand,
    },
}

#[derive(Subcommand)]
enum ScenariosCommand {
    /// List the available scenario names.
    List,
}

#[derive(Subcommand)]
enum ConfigCommand {
    /// Print the default run config for a scenario as JSON.
    PrintDefaults { scenario: String },
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn execute(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Solve {
            config,
            method,
            out,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(method) = method {
                cfg.method = Method::parse(&method)?;
            }
            let out_dir = out
                .or_else(|| cfg.out_dir.clone())
                .unwrap_or_else(|| PathBuf::from("out"));
            let outcome = run(&cfg, &out_dir)?;
            println!("wrote results to {}", out_dir.display());
            if outcome.all_converged {
                Ok(ExitCode::from(0))
            } else {
                Ok(ExitCode::from(2))
            }
        }
        Command::Scenarios {
            command: ScenariosCommand::List,
        } => {
            for name in SCENARIO_NAMES {
                println!("{name}");
            }
            Ok(ExitCode::from(0))
        }
        Command::Config {
            command: ConfigCommand::PrintDefaults { scenario },
        } => {
            anyhow::ensure!(
                SCENARIO_NAMES.contains(&scenario.as_str()),
                "unknown scenario '{scenario}'"
            );
            println!("{}", config_to_string(&RunConfig::defaults_for(&scenario))?);
            Ok(ExitCode::from(0))
        }
    }
}
