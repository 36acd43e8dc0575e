use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use trotterflow::config::{resolve_seed, ExperimentConfig, SEED_ENV};
use trotterflow::runner::{run, RunStatus};
use trotterflow::table::OutputFormat;

#[derive(Parser)]
#[command(
    name = "trotterflow",
    version,
    about = "Trotter products of quantum stochastic flows"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed and the TROTTERFLOW_SEED variable.
        #[arg(long)]
        seed: Option<u64>,
        /// Output file; stdout when neither this nor the config gives one.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Parse and check a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Validate { config } => match ExperimentConfig::load(&config) {
            Ok(c) => {
                println!("ok {} {}", c.experiment.name(), c.digest().unwrap_or_default());
                0
            }
            Err(e) => {
                eprintln!("error: {e}");
                2
            }
        },
        Command::Run {
            config,
            seed,
            out,
            format,
        } => run_command(&config, seed, out, format),
    };
    ExitCode::from(code as u8)
}

fn run_command(path: &Path, seed: Option<u64>, out: Option<PathBuf>, format: Option<Format>) -> i32 {
    let config = match ExperimentConfig::load(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let env = std::env::var(SEED_ENV).ok();
    let (seed, source) = match resolve_seed(seed, env.as_deref(), config.seed) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let outcome = run(&config, seed, source);
    if outcome.status == RunStatus::ConfigError {
        if let Some(row) = outcome.table.rows().first() {
            eprintln!("error: {:?}", row[1]);
        }
        return 2;
    }
    let format = match format {
        Some(Format::Csv) => OutputFormat::Csv,
        Some(Format::Json) => OutputFormat::Json,
        None => config.format.unwrap_or_default(),
    };
    let written = match out.or(config.output.clone()) {
        Some(path) => outcome.table.emit(format, &path),
        None => outcome.table.render(format).map(|text| print!("{text}")),
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return 3;
    }
    for c in &outcome.checks {
        let mark = if c.passed { "pass" } else { "FAIL" };
        eprintln!("{mark} {} = {:.6e} ({} {:e})", c.name, c.value, c.relation, c.bound);
    }
    outcome.exit_code()
}
