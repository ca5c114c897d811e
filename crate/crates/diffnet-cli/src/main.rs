//! diffnet command line: train, eval, table, render, parse.

mod commands;
mod lock;
mod report;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use diffnet::config::Scale;
use diffnet::data::DatasetId;

#[derive(Parser)]
#[command(
    name = "diffnet",
    about = "Train and evaluate diffractive optical neural network classifiers",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an architecture and write checkpoints, metrics and a report.
    Train {
        /// Experiment config file (TOML); flags below override it.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Architecture notation, e.g. "D([10,10],[1,5,10k])".
        #[arg(long)]
        notation: Option<String>,
        #[arg(long, value_enum)]
        dataset: Option<DatasetArg>,
        /// Comma-separated training seeds, one repetition each.
        #[arg(long, value_delimiter = ',')]
        seed: Option<Vec<u64>>,
        /// Preset scale: desk (small, minutes-to-hours) or paper (full size).
        #[arg(long, value_enum)]
        scale: Option<ScaleArg>,
        /// Output directory for checkpoints and reports.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Dataset root (defaults to $DIFFNET_DATA_DIR, then ./data).
        #[arg(long)]
        data_root: Option<PathBuf>,
        /// Save a checkpoint after every epoch (for ensemble selection).
        #[arg(long)]
        ensemble: bool,
    },
    /// Evaluate checkpoints; directories are searched for per-epoch
    /// candidates and combined with validation-based selection.
    Eval {
        /// Checkpoint files, or directories of candidate checkpoints.
        #[arg(required = true)]
        checkpoints: Vec<PathBuf>,
        /// Run config written next to the checkpoints (auto-detected when
        /// omitted).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        split: SplitArg,
        /// Sum detector intensities of all checkpoints on a common plane.
        #[arg(long)]
        ensemble: bool,
        /// Candidates retained per unit during ensemble selection.
        #[arg(long, default_value_t = 3)]
        top_k: usize,
        #[arg(long)]
        data_root: Option<PathBuf>,
        /// Evaluate only the first N samples of the split.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Summarize finished runs as an accuracy table (mean ± std).
    Table {
        /// Run directories containing report.toml.
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// Write a comma-separated copy alongside stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render one sample: input object, output-plane intensity maps with
    /// detector overlays, and the class-score bar chart.
    Render {
        checkpoint: PathBuf,
        /// Index into the chosen split.
        #[arg(long, default_value_t = 0)]
        sample: usize,
        #[arg(long, default_value = "test")]
        split: SplitArg,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        data_root: Option<PathBuf>,
    },
    /// Parse a notation string and print the architecture it denotes.
    Parse {
        notation: String,
        /// Number of dataset classes to validate against.
        #[arg(long, default_value_t = 10)]
        classes: usize,
    },
}

#[derive(clap::ValueEnum, Clone, Copy)]
enum DatasetArg {
    Mnist,
    Fashion,
    Cifar10,
}

impl From<DatasetArg> for DatasetId {
    fn from(value: DatasetArg) -> Self {
        match value {
            DatasetArg::Mnist => DatasetId::Mnist,
            DatasetArg::Fashion => DatasetId::Fashion,
            DatasetArg::Cifar10 => DatasetId::Cifar10,
        }
    }
}

#[derive(clap::ValueEnum, Clone, Copy)]
enum ScaleArg {
    Paper,
    Desk,
}

impl From<ScaleArg> for Scale {
    fn from(value: ScaleArg) -> Self {
        match value {
            ScaleArg::Paper => Scale::Paper,
            ScaleArg::Desk => Scale::Desk,
        }
    }
}

#[derive(clap::ValueEnum, Clone, Copy, PartialEq, Eq)]
enum SplitArg {
    Train,
    Val,
    Test,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are not errors
            use clap::error::ErrorKind;
            let kind = e.kind();
            let _ = e.print();
            return if matches!(kind, ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    let result = match cli.command {
        Command::Train {
            config,
            notation,
            dataset,
            seed,
            scale,
            out,
            data_root,
            ensemble,
        } => commands::train(commands::TrainArgs {
            config,
            notation,
            dataset: dataset.map(Into::into),
            seeds: seed,
            scale: scale.map(Into::into),
            out,
            data_root,
            save_every_epoch: ensemble,
        }),
        Command::Eval {
            checkpoints,
            config,
            split,
            ensemble,
            top_k,
            data_root,
            limit,
        } => commands::eval(commands::EvalArgs {
            checkpoints,
            config,
            split: split.into(),
            ensemble,
            top_k,
            data_root,
            limit,
        }),
        Command::Table { runs, out } => commands::table(&runs, out.as_deref()),
        Command::Render {
            checkpoint,
            sample,
            split,
            config,
            out,
            data_root,
        } => commands::render(commands::RenderArgs {
            checkpoint,
            sample,
            split: split.into(),
            config,
            out,
            data_root,
        }),
        Command::Parse { notation, classes } => commands::parse(&notation, classes),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

impl From<SplitArg> for commands::Split {
    fn from(value: SplitArg) -> Self {
        match value {
            SplitArg::Train => commands::Split::Train,
            SplitArg::Val => commands::Split::Validation,
            SplitArg::Test => commands::Split::Test,
        }
    }
}
