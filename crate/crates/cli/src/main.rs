use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use dmt_cli::run::{run, RunOptions};
use dmt_cli::scenario::{PolicyName, Scenario};
use dmt_cli::CliError;

/// Run a decoherence scenario and write CSV curves and a report.
#[derive(Debug, Parser)]
#[command(name = "dmt", version)]
struct Args {
    /// Scenario file (TOML).
    scenario: PathBuf,
    /// Output directory, overriding `output.dir`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Seed, overriding `run.seed`.
    #[arg(long)]
    seed_override: Option<u64>,
    /// Phase kernel, overriding `run.policy`.
    #[arg(long, value_enum)]
    policy: Option<PolicyName>,
    /// Worker threads; output does not depend on this.
    #[arg(long)]
    threads: Option<usize>,
}

fn execute(args: Args) -> Result<(), CliError> {
    let scenario = Scenario::load(&args.scenario)?;
    let opts = RunOptions { out_dir: args.out_dir, seed_override: args.seed_override, policy: args.policy };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::Config { key: "--threads".into(), message: "must be at least 1".into() });
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Config { key: "--threads".into(), message: e.to_string() })?;
    let out = pool.install(|| run(&scenario, &opts))?;
    for f in &out.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
