//! `pcc`: train, evaluate, predict, ablate and cost out the
//! single-hop point cloud classifier.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 data error
//! (missing or malformed files, bad model files), 4 numerical failure.
//! `PCC_THREADS` sets the worker thread count.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pcc_core::Error;

#[derive(Parser, Debug)]
#[command(name = "pcc", version, about = "Single-hop point cloud classifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct ConfigArgs {
    /// Starting preset: modelnet40 or scanobjectnn.
    #[arg(long, default_value = "modelnet40")]
    pub preset: String,
    /// `key = value` config file applied on top of the preset.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `key=value` override, applied last. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a model on a manifest and save it.
    Train {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        /// Machine-readable training report (TSV).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Evaluate a saved model on a labeled manifest.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Metrics TSV.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Confusion matrix TSV (rows truth, columns predicted).
        #[arg(long)]
        confusion: Option<PathBuf>,
    },
    /// Per-sample predictions as TSV.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// Labeled manifest; adds label and correct columns.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Point files to classify.
        files: Vec<PathBuf>,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and evaluate over parameter grids.
    Ablate {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        /// Grids to sweep. Repeatable; defaults to regions.
        #[arg(long, value_enum)]
        sweep: Vec<Sweep>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Per-stage FLOP and parameter estimate for one object.
    Flops {
        #[command(flatten)]
        config: ConfigArgs,
        /// Take config, class count and selected size from a saved model.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Points per object; defaults to num_points.
        #[arg(long)]
        points: Option<usize>,
        #[arg(long, default_value_t = 40)]
        classes: usize,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Convert class-folder dumps into point files plus manifests.
    Convert {
        #[arg(long, value_parser = ["xyz", "modelnet-csv"])]
        format: String,
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        dst: PathBuf,
    },
    /// Write a synthetic four-class shape dataset.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        train_per_class: usize,
        #[arg(long, default_value_t = 40)]
        test_per_class: usize,
        #[arg(long, default_value_t = 1024)]
        points: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Print the resolved configuration.
    ShowConfig {
        #[command(flatten)]
        config: ConfigArgs,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    Regions,
    K,
    Aggregators,
    Points,
    All,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::InvalidInput(_) | Error::Parse { .. } | Error::Io { .. } | Error::Model(_) => 3,
        Error::DegenerateSaab { .. } | Error::NumericalRank | Error::DegenerateLabels(_) => 4,
    }
}

fn init_threads() -> pcc_core::Result<()> {
    let Ok(v) = std::env::var("PCC_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("PCC_THREADS must be a positive integer, got '{v}'")))?;
    if n == 0 {
        return Err(Error::Config("PCC_THREADS must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> pcc_core::Result<()> {
    init_threads()?;
    match cli.command {
        Command::Train {
            train,
            model,
            config,
            report,
        } => commands::train(&train, &model, &config, report.as_deref()),
        Command::Eval {
            model,
            test,
            report,
            confusion,
        } => commands::eval(&model, &test, report.as_deref(), confusion.as_deref()),
        Command::Predict {
            model,
            manifest,
            files,
            out,
        } => commands::predict(&model, manifest.as_deref(), &files, out.as_deref()),
        Command::Ablate {
            train,
            test,
            config,
            sweep,
            report,
        } => commands::ablate(&train, &test, &config, &sweep, report.as_deref()),
        Command::Flops {
            config,
            model,
            points,
            classes,
            report,
        } => commands::flops(&config, model.as_deref(), points, classes, report.as_deref()),
        Command::Convert { format, src, dst } => commands::convert(&format, &src, &dst),
        Command::Synth {
            out,
            train_per_class,
            test_per_class,
            points,
            seed,
        } => commands::synth(&out, train_per_class, test_per_class, points, seed),
        Command::ShowConfig { config } => {
            print!("{}", commands::resolve_config(&config)?.to_text());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
