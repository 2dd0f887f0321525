use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mmw_snr::par::Execution;
use mmw_snr_cli::selfcheck::run_checks;
use mmw_snr_cli::{run_sounder, run_sweep, run_trace, CliError, ExperimentConfig, OUTPUT_DIR_ENV};

#[derive(Parser)]
#[command(version, about = "Millimeter-wave SNR tracking experiments")]
struct Args {
    /// TOML experiment file; built-in defaults when omitted.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `output_dir` and the environment variable.
    #[arg(short, long, global = true)]
    output_dir: Option<PathBuf>,
    /// Run on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// True, raw and filtered SNR traces for the first seed.
    Trace,
    /// Mean estimation error versus target SNR.
    Sweep,
    /// Synthetic sounder recording and blockage extraction.
    Sounder,
    /// Fast invariant checks.
    Selfcheck,
}

fn load(args: &Args) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?.0,
        None => ExperimentConfig::default(),
    };
    if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
        cfg.output_dir = dir.into();
    }
    if let Some(dir) = &args.output_dir {
        cfg.output_dir = dir.clone();
    }
    Ok(cfg)
}

fn run(args: &Args) -> Result<(), CliError> {
    let exec = if args.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    let report = match args.command {
        Command::Trace => run_trace(&load(args)?)?,
        Command::Sweep => run_sweep(&load(args)?, exec)?,
        Command::Sounder => run_sounder(&load(args)?, exec)?,
        Command::Selfcheck => {
            let checks = run_checks();
            let failed = checks.iter().filter(|c| !c.passed).count();
            for c in &checks {
                let status = if c.passed { "PASS" } else { "FAIL" };
                println!("{status} {}: {}", c.name, c.detail);
            }
            return if failed == 0 { Ok(()) } else { Err(CliError::Check(failed)) };
        }
    };
    for f in &report.files {
        println!("{}", report.output_dir.join(f).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mmw-snr: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
