//! `holomera <experiment-kind> --config <path> [--out <dir>] [--seed <n>]`
//!
//! `holomera validate --config <path>` checks a config without running it.
//! `HOLOMERA_THREADS` caps the worker pool.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use holomera::cli::{self, CliError, ExperimentKind};

#[derive(Parser, Debug)]
#[command(name = "holomera", version, about = "Entanglement renormalization and holographic flow experiments")]
struct Args {
    /// scaling-dims, flow, crossover, holo-compare, entropy, mps-export, optimize or validate
    kind: String,
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn fail(e: &CliError) -> ExitCode {
    println!("{}", e.to_json());
    eprintln!("holomera: {e}");
    ExitCode::from(e.exit_code as u8)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => return fail(&CliError::config("$args", e.to_string().trim().to_string())),
    };
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => return fail(&CliError::config("$", format!("cannot read {}: {e}", args.config.display()))),
    };
    if args.kind == "validate" {
        let report = cli::validate(&text, None);
        println!("{}", serde_json::to_string(&report).expect("report serializes"));
        return if report.valid { ExitCode::SUCCESS } else { ExitCode::from(cli::EXIT_CONFIG as u8) };
    }
    let kind: ExperimentKind = match args.kind.parse() {
        Ok(k) => k,
        Err(msg) => return fail(&CliError::config("$kind", msg)),
    };
    match cli::execute(kind, &text, args.out.as_deref(), args.seed) {
        Ok(summary) => {
            println!("{}", serde_json::to_string(&summary).expect("summary serializes"));
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}
