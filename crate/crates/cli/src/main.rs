use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use nhqw_cli::{parse_scenario, run_with_threads, write_outputs, CliError};

/// Run a quantum-walk scenario file and write its CSV datasets.
#[derive(Parser)]
#[command(name = "nhqw", version)]
struct Args {
    /// Scenario file (TOML).
    scenario: PathBuf,
    /// Output directory; overrides `output` in the scenario.
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed; overrides `seed` in the scenario.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, env = "NHQW_THREADS")]
    threads: Option<usize>,
}

fn main_inner(args: Args) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.scenario)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.scenario.display())))?;
    let mut scenario = parse_scenario(&text)?;
    if let Some(seed) = args.seed {
        scenario = scenario.with_seed(seed);
    }
    if let Some(out) = args.out {
        scenario = scenario.with_output(out);
    }
    if args.threads == Some(0) {
        return Err(CliError::Config("threads: must be >= 1".into()));
    }
    let outputs = run_with_threads(&scenario, args.threads)?;
    for (path, rows) in write_outputs(&scenario.output, &scenario, outputs)? {
        println!("{} ({rows} rows)", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!(
                "nhqw: {}",
                e.to_string().lines().next().unwrap_or("bad arguments")
            );
            return ExitCode::from(2);
        }
    };
    match main_inner(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nhqw: {}", e.to_string().replace('\n', " "));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
