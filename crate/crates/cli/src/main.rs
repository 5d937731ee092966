//! `rep4ex`: data generation, experiment runs and model files.

mod commands;
mod error;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "rep4ex", version, about = "Representation learning for intervention extrapolation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample one training set and write it as CSV with a JSON sidecar.
    GenData {
        #[command(flatten)]
        common: Common,
        /// Include the hidden z, v, u columns.
        #[arg(long)]
        with_hidden: bool,
        #[arg(long, default_value_t = 0)]
        point: usize,
        #[arg(long, default_value_t = 0)]
        rep: usize,
        /// Output CSV; defaults to `<output_dir>/data.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every grid point and repetition of an experiment.
    RunExperiment {
        #[command(flatten)]
        common: Common,
    },
    /// Run the reconstruction-inflation λ heuristic on one grid point.
    ChooseLambda {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        point: usize,
    },
    /// Closed-form and Monte-Carlo tables for the two-SCM counterexample.
    Prop1Demo {
        #[arg(long, env = "REP4EX_SEED")]
        seed: Option<u64>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, default_value = "results")]
        output_dir: PathBuf,
    },
    /// Train the autoencoder on one training set and write it as JSON.
    DumpModel {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        point: usize,
        #[arg(long, default_value_t = 0)]
        rep: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Encode a CSV written by `gen-data` with a saved model.
    EvalModel {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Output CSV of representations; defaults to `<data>.phi.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// JSON config plus flat overrides; flags win over the file.
#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Experiment id; required without --config.
    #[arg(long)]
    experiment: Option<String>,
    #[arg(long, env = "REP4EX_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    /// Epochs for both the autoencoder and the second stage.
    #[arg(long)]
    epochs: Option<usize>,
    /// "auto" or a number.
    #[arg(long)]
    lambda: Option<String>,
    /// Comma-separated method names.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    output_dir: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenData { common, with_hidden, point, rep, out } => commands::gen_data(&common, with_hidden, point, rep, out),
        Command::RunExperiment { common } => commands::run_experiment(&common),
        Command::ChooseLambda { common, point } => commands::choose_lambda(&common, point),
        Command::Prop1Demo { seed, samples, output_dir } => commands::prop1_demo(seed, samples, &output_dir),
        Command::DumpModel { common, point, rep, out } => commands::dump_model(&common, point, rep, &out),
        Command::EvalModel { model, data, out } => commands::eval_model(&model, &data, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
