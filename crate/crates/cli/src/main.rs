//! `kidseg` command-line tool.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kidseg::phantom::CorruptionSpec;
use kidseg::pipeline::{self, EvalGrid, RunSummary};
use kidseg::{par, Error, ValidationRules};

#[derive(Parser)]
#[command(name = "kidseg", version, about = "Kidney and tumor CT segmentation post-processing")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    /// Worker threads (0 = available parallelism).
    #[arg(long, default_value_t = 0, global = true)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CaseFilter {
    /// Comma-separated case ids to process (default: every case_* directory).
    #[arg(long, value_delimiter = ',')]
    cases: Option<Vec<String>>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate seeded synthetic cases.
    Phantom {
        #[arg(long)]
        output: PathBuf,
        /// Number of cases.
        #[arg(long, default_value_t = 5)]
        cases: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Normalize, mask and crop every case.
    Preprocess {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        filter: CaseFilter,
    },
    /// Derive stand-in model masks from preprocessed labels.
    StubMasks {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Inject no artifacts.
        #[arg(long)]
        clean: bool,
        #[command(flatten)]
        filter: CaseFilter,
    },
    /// Combine model masks and run volumetric validation.
    Segment {
        #[arg(long)]
        masks: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// TOML file overriding validation thresholds.
        #[arg(long)]
        rules: Option<PathBuf>,
        /// Only write the combined labels.
        #[arg(long)]
        skip_validation: bool,
        #[command(flatten)]
        filter: CaseFilter,
    },
    /// Score predictions and write the report CSVs.
    Evaluate {
        /// Segment output directory.
        #[arg(long)]
        input: PathBuf,
        /// Preprocessed cases holding truth labels and transforms.
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Evaluate on the original grid instead of the preprocessed one.
        #[arg(long, requires = "raw")]
        original_grid: bool,
        /// Original cases (needed with --original-grid).
        #[arg(long)]
        raw: Option<PathBuf>,
        #[command(flatten)]
        filter: CaseFilter,
    },
}

fn run(command: Command) -> Result<RunSummary, Error> {
    match command {
        Command::Phantom { output, cases, seed } => pipeline::run_phantom(output, cases, seed),
        Command::Preprocess { input, output, filter } => pipeline::run_preprocess(input, output, filter.cases.as_deref()),
        Command::StubMasks {
            input,
            output,
            seed,
            clean,
            filter,
        } => {
            let corruption = if clean {
                CorruptionSpec::none()
            } else {
                CorruptionSpec::standard()
            };
            pipeline::run_stub_masks(input, output, &corruption, seed, filter.cases.as_deref())
        }
        Command::Segment {
            masks,
            output,
            rules,
            skip_validation,
            filter,
        } => {
            let rules = match rules {
                Some(path) => ValidationRules::load(path).map_err(|e| Error::Config(e.to_string()))?,
                None => ValidationRules::default(),
            };
            pipeline::run_segment(masks, output, &rules, skip_validation, filter.cases.as_deref())
        }
        Command::Evaluate {
            input,
            truth,
            output,
            original_grid,
            raw,
            filter,
        } => {
            let grid = match (original_grid, raw) {
                (true, Some(raw)) => EvalGrid::Original { truth, raw },
                _ => EvalGrid::Preprocessed { truth },
            };
            pipeline::run_evaluate(input, &grid, output, filter.cases.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match par::with_workers(cli.jobs, || run(cli.command)) {
        Ok(summary) => {
            for f in &summary.failed {
                eprintln!("failed: {}: {}", f.case_id, f.message);
            }
            println!("{} case(s) succeeded, {} failed", summary.succeeded.len(), summary.failed.len());
            ExitCode::from(summary.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            let usage = matches!(e, Error::Argument(_) | Error::Config(_) | Error::Spec(_));
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}
