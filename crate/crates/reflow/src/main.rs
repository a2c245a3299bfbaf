use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use reflow::{run_experiment, ExperimentConfig, RunError, RunOptions};

#[derive(Parser)]
#[command(name = "reflow", version, about = "Monte Carlo stochastic flows with normal reflection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and print its manifest.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// List the coefficient presets.
    Presets,
    /// Check a config without running it.
    Validate { config: PathBuf },
}

fn load(path: &PathBuf) -> Result<ExperimentConfig, RunError> {
    let text = std::fs::read_to_string(path).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
    ExperimentConfig::from_json(&text)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Presets => {
            for (name, desc) in reflow::presets::PRESETS {
                println!("{name}\t{desc}");
            }
            Ok(())
        }
        Command::Validate { config } => load(&config).and_then(|c| c.resolve().map(|_| ())).map(|_| {
            eprintln!("ok");
        }),
        Command::Run { config, out, seed, threads } => {
            if threads == Some(0) {
                Err(RunError::Config("--threads must be at least 1".into()))
            } else {
                load(&config)
                    .and_then(|c| run_experiment(&c, &RunOptions { out_dir: out, seed, threads }))
                    .and_then(|m| m.to_json())
                    .map(|json| print!("{json}"))
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
