//! `referent` — experiment harness over the reference resolution engine.
//!
//! Exit codes: 0 success, 1 scoring/logic failure, 2 input error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use referent_core::resolver::Heuristic;

use commands::Failure;
use config::Overrides;

#[derive(Parser)]
#[command(name = "referent", version, about = "Reference resolution experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Annotated corpus file.
    #[arg(long)]
    corpus: PathBuf,
    /// Lexicon file.
    #[arg(long)]
    lexicon: PathBuf,
    /// key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Selection heuristic override: h1, h2, h3 or h4:<X>.
    #[arg(long, value_parser = parse_heuristic)]
    heuristic: Option<Heuristic>,
    /// Working-memory quota override.
    #[arg(long)]
    quota: Option<usize>,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            heuristic: self.heuristic,
            quota: self.quota,
        }
    }
}

fn parse_heuristic(s: &str) -> Result<Heuristic, String> {
    s.parse().map_err(|e| format!("{e}"))
}

#[derive(Subcommand)]
enum Command {
    /// Resolve a corpus and write the response partition and trace.
    Resolve {
        #[command(flatten)]
        common: CommonArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a response partition file against the corpus key.
    Score {
        /// Annotated corpus file (provides the key).
        #[arg(long)]
        corpus: PathBuf,
        /// Response partition in KEY-line syntax.
        #[arg(long)]
        response: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run h1, h2, h3 (and optional h4 thresholds) with everything else fixed.
    CompareHeuristics {
        #[command(flatten)]
        common: CommonArgs,
        /// Additional h4 threshold(s), repeatable.
        #[arg(long = "h4", value_name = "X")]
        h4: Vec<f64>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score the corpus across a list of working-memory quotas.
    SweepMemory {
        #[command(flatten)]
        common: CommonArgs,
        /// Quotas: comma-separated numbers and a-b ranges, e.g. 2-60.
        #[arg(long)]
        quotas: String,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print corpus characteristics.
    Stats {
        /// Annotated corpus file.
        #[arg(long)]
        corpus: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tune salience parameters by coordinate search.
    Tune {
        #[command(flatten)]
        common: CommonArgs,
        /// Tuning spec file (max_sweeps plus parameter ranges).
        #[arg(long)]
        spec: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Resolve { common, out } => commands::cmd_resolve(
            &common.corpus,
            &common.lexicon,
            common.config.as_deref(),
            &common.overrides(),
            &out,
        ),
        Command::Score {
            corpus,
            response,
            out,
        } => commands::cmd_score(&corpus, &response, out.as_deref()),
        Command::CompareHeuristics { common, h4, out } => commands::cmd_compare_heuristics(
            &common.corpus,
            &common.lexicon,
            common.config.as_deref(),
            &common.overrides(),
            &h4,
            out.as_deref(),
        ),
        Command::SweepMemory {
            common,
            quotas,
            out,
        } => {
            let quotas = commands::parse_quotas(&quotas)?;
            commands::cmd_sweep_memory(
                &common.corpus,
                &common.lexicon,
                common.config.as_deref(),
                &common.overrides(),
                &quotas,
                out.as_deref(),
            )
        }
        Command::Stats { corpus, out } => commands::cmd_stats(&corpus, out.as_deref()),
        Command::Tune { common, spec, out } => commands::cmd_tune(
            &common.corpus,
            &common.lexicon,
            common.config.as_deref(),
            &common.overrides(),
            &spec,
            &out,
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.exit_code() as u8)
        }
    }
}
