use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use autoqec::config::{load_file, validate, Experiment};
use autoqec::pool::worker_count;
use autoqec::{run, CliError};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "autoqec", version, about = "Autonomous error correction of spin-oscillator hybrid qubits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config and write a CSV table.
    Run {
        config: PathBuf,
        /// Output file; defaults to `output` in the config, else stdout.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Sweep workers (capped by the environment variable AUTOQEC_WORKERS).
        #[arg(long)]
        workers: Option<usize>,
        /// Set a config key, e.g. `--override noise.kappa_r=2.5`.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Check a config and list every problem found.
    Validate {
        config: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// List the available experiments.
    ListExperiments,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListExperiments => {
            for e in Experiment::ALL {
                println!("{:<18} {}", e.name(), e.summary());
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config, overrides } => {
            let diags = match load_file(&config, &overrides) {
                Ok(c) => validate(&c),
                Err(d) => d,
            };
            if diags.is_empty() {
                println!("{}: ok", config.display());
                ExitCode::SUCCESS
            } else {
                for d in &diags {
                    println!("{d}");
                }
                ExitCode::from(2)
            }
        }
        Command::Run {
            config,
            output,
            workers,
            overrides,
        } => match run_cmd(&config, output, workers, &overrides) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("autoqec: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
    }
}

fn run_cmd(
    path: &std::path::Path,
    output: Option<PathBuf>,
    workers: Option<usize>,
    overrides: &[String],
) -> Result<(), CliError> {
    let config = load_file(path, overrides).map_err(CliError::Config)?;
    if workers == Some(0) {
        return Err(CliError::Config(vec![autoqec::Diagnostic::new("--workers", "must be ≥ 1")]));
    }
    let n = worker_count(workers);
    let table = run(&config, n)?;
    match output.or_else(|| config.output.clone()) {
        Some(p) => {
            let f = File::create(&p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            let mut w = BufWriter::new(f);
            table.write_csv(&mut w)?;
            w.flush()?;
        }
        None => table.write_csv(io::stdout().lock())?,
    }
    if let Some(f) = table.failure {
        return Err(CliError::Numeric(format!("verification failed: {f}")));
    }
    Ok(())
}
