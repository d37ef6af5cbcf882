//! `geoel` command-line interface.
//!
//! Exit status: 0 on success, 1 for user errors (bad input, configuration,
//! missing files), 2 for resource errors (materialization cap, failed writes).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

/// Environment variable naming the default output directory.
pub const CACHE_DIR_ENV: &str = "GEOEL_CACHE_DIR";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    User(String),
    #[error("{0}")]
    Resource(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::User(_) => 1,
            CliError::Resource(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "geoel", version, about = "Geometric embeddings for EL++ knowledge bases")]
struct Cli {
    /// Seed for every random choice (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel scoring and loss evaluation.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Run configuration (`key = value` lines or a JSON object).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct Overrides {
    /// Override one configuration key, e.g. `--set dim=10`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rewrite `.elpp` axioms (or a `.nf` file) into normal form.
    Normalize {
        input: PathBuf,
        output: PathBuf,
    },
    /// Print every entailed subsumption as `A<TAB>B`.
    Classify {
        theory: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Materialize the deductive closure, or answer membership queries.
    Closure {
        theory: PathBuf,
        /// Axiom line to test for membership; may be repeated.
        #[arg(long)]
        query: Vec<String>,
        /// Directory for one `.nf` file per normal form.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Refuse to materialize above this many candidate axioms.
        #[arg(long)]
        cap: Option<u128>,
    },
    /// Train an embedding and write a checkpoint plus a JSON log.
    Train {
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        valid: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Rank held-out axioms with a trained checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        test: Option<PathBuf>,
        /// Report file (JSON); printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-axiom ranks as CSV.
        #[arg(long)]
        ranks: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Draw a batch of negatives and report how many are entailed.
    SampleCheck {
        theory: PathBuf,
        /// Corruptions per axiom.
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Train the two-function toy ontology in 2D under four negative regimes.
    ToyDemo {
        /// `elem`, `elbe`, `box2el` or `all`.
        #[arg(long, default_value = "all")]
        model: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::User("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Resource(e.to_string()))?;
    }
    let base = match &cli.config {
        Some(p) => config::read_config_file(p)?,
        None => serde_json::Map::new(),
    };
    let ctx = commands::Context {
        seed: cli.seed,
        base,
    };
    match cli.command {
        Command::Normalize { input, output } => commands::normalize(&input, &output),
        Command::Classify { theory, output } => commands::classify(&theory, output.as_deref()),
        Command::Closure {
            theory,
            query,
            out_dir,
            cap,
        } => commands::closure(&ctx, &theory, &query, out_dir.as_deref(), cap),
        Command::Train {
            train,
            valid,
            out,
            overrides,
        } => commands::train(&ctx, train, valid, out, &overrides.sets),
        Command::Eval {
            checkpoint,
            train,
            test,
            out,
            ranks,
            overrides,
        } => commands::eval(&ctx, checkpoint, train, test, out.as_deref(), ranks.as_deref(), &overrides.sets),
        Command::SampleCheck {
            theory,
            count,
            overrides,
        } => commands::sample_check(&ctx, &theory, count, &overrides.sets),
        Command::ToyDemo { model, out } => commands::toy_demo(&ctx, &model, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
