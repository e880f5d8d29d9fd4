use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use config::{ExperimentConfig, Preset};

/// Learned AP-user assignment for cell-free networks.
#[derive(Parser, Debug)]
#[command(name = "cf-assign", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the training and test datasets.
    GenData(Common),
    /// Train the GNN; writes checkpoints and the metrics CSV.
    Train {
        #[command(flatten)]
        common: Common,
        /// Continue from a checkpoint written at a phase boundary.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Evaluate a trained model on the test set.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Model checkpoint (default: OUT/model.ckpt).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Score exhaustive search, random assignment and GSD on the test set.
    Baseline(Common),
    /// Baselines plus the trained model, one CSV row per method.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Convert a metrics CSV to long-format plot data.
    Viz {
        #[command(flatten)]
        common: Common,
        /// Metrics file (default: OUT/metrics.csv).
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    scenario: Option<Preset>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Assignment budget of the exhaustive search.
    #[arg(long)]
    budget: Option<u64>,
}

impl Common {
    fn resolve(&self) -> anyhow::Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            c.seed = seed;
        }
        if let Some(preset) = self.scenario {
            c.scenario.preset = preset;
        }
        if let Some(out) = &self.out {
            c.out = out.clone();
        }
        if let Some(budget) = self.budget {
            c.baseline.budget = budget;
        }
        c.validate()?;
        Ok(c)
    }
}

const EXIT_USAGE: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let common = match &cli.command {
        Command::GenData(c) | Command::Baseline(c) => c,
        Command::Train { common, .. }
        | Command::Eval { common, .. }
        | Command::Compare { common, .. }
        | Command::Viz { common, .. } => common,
    };
    let config = match common.resolve() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let result = match &cli.command {
        Command::GenData(_) => commands::gen_data(&config),
        Command::Train { resume, .. } => commands::train(&config, resume.as_deref()),
        Command::Eval { checkpoint, .. } => commands::eval(&config, checkpoint.as_deref()),
        Command::Baseline(_) => commands::baseline(&config),
        Command::Compare { checkpoint, .. } => commands::compare(&config, checkpoint.as_deref()),
        Command::Viz { metrics, .. } => commands::viz(&config, metrics.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
