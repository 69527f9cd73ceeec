use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use strat_bandit::cli::{self, CliError, RunConfig, ScenarioOptions, EXIT_FAIL, EXIT_PASS};
use strat_bandit::engine::Engine;

/// Strategic multi-armed bandit experiments.
#[derive(Parser)]
#[command(name = "strat-bandit", version)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one JSON configuration.
    Run { config: PathBuf },
    /// Run a named preset.
    Scenario {
        name: String,
        /// Directory for per-run configurations and summaries.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seeds per Monte Carlo estimate.
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        horizon: Option<u64>,
    },
    /// Run a configuration once per entry of its `horizons` list.
    Sweep { config: PathBuf },
    /// List the preset names.
    List,
}

fn dispatch(command: Command) -> Result<i32, CliError> {
    let engine = Engine::from_env();
    match command {
        Command::Run { config } => cli::run(&engine, &RunConfig::load(&config)?),
        Command::Sweep { config } => cli::sweep(&engine, &RunConfig::load(&config)?),
        Command::Scenario { name, out, seeds, horizon } => {
            let report = cli::run_scenario(&engine, &name, &ScenarioOptions { out, seeds, horizon })?;
            for (label, run) in &report.runs {
                eprintln!("{}/{label}: {} ({})", report.name, if run.pass { "pass" } else { "FAIL" }, run.experiment);
            }
            println!("{}", serde_json::to_string_pretty(&report).expect("reports serialize"));
            Ok(if report.pass { EXIT_PASS } else { EXIT_FAIL })
        }
        Command::List => {
            for p in cli::registry() {
                println!("{:<28} {}", p.name, p.description);
            }
            Ok(EXIT_PASS)
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let code = dispatch(args.command).unwrap_or_else(|e| {
        eprintln!("error: {e}");
        e.exit_code()
    });
    ExitCode::from(code as u8)
}
