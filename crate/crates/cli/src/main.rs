use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sobolev_w2_cli::config::{parse_seed_range, ExperimentConfig, Overrides};
use sobolev_w2_cli::{describe, run, CliError};

#[derive(Parser)]
#[command(name = "sw2", version, about = "Transport distance vs negative Sobolev norm experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every sweep of a TOML experiment config.
    Run {
        config: PathBuf,
        /// Relative slack of the inequality checks.
        #[arg(long)]
        tolerance: Option<f64>,
        /// Seeds `START..END` for every sweep, replacing the config ranges.
        #[arg(long, value_parser = parse_seed_range)]
        seed_range: Option<std::ops::Range<u64>>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Worker threads (1 runs sequentially; default uses all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Print the inequality, hypotheses and knobs of a check.
    Describe { check: String },
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Describe { check } => match describe(&check) {
            Ok(text) => {
                println!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Run {
            config,
            tolerance,
            seed_range,
            out_dir,
            jobs,
        } => {
            let overrides = Overrides {
                tolerance,
                seed_range,
                out_dir,
                jobs,
            };
            let base = config.parent().map(PathBuf::from).unwrap_or_default();
            let plan = match ExperimentConfig::load(&config).and_then(|c| c.validate(&overrides, &base)) {
                Ok(p) => p,
                Err(e) => return fail(e),
            };
            match run(&plan) {
                Ok(summary) => {
                    for f in &summary.failures {
                        eprintln!("FAIL {f}");
                    }
                    println!(
                        "{} reports, {} failing instances; outputs in {}",
                        summary.reports,
                        summary.failures.len(),
                        plan.out_dir.display()
                    );
                    ExitCode::from(summary.exit_code() as u8)
                }
                Err(e) => fail(e),
            }
        }
    }
}
