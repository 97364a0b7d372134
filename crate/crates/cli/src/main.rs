//! `piqflow`: batch entry point for rating studies, quality prediction and
//! capture feedback.

mod commands;
mod config;
mod error;

use std::io::Write;

use clap::error::ErrorKind as ClapKind;
use clap::{Parser, Subcommand};

use commands::{imaging, modeling, study, Report};
use config::FileConfig;
use error::{CliError, CliResult};

#[derive(Parser, Debug)]
#[command(name = "piqflow", version, about = "Perceptual image quality toolkit")]
struct Cli {
    /// Print results and errors as JSON.
    #[arg(long, global = true)]
    json: bool,
    /// Worker threads [default: all cores].
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate ratings, sessions, items and golden references into a store directory.
    Ingest(study::IngestArgs),
    /// Run subject screening and write verdicts.
    Screen(study::ScreenArgs),
    /// Reject outlier ratings and compute per-item statistics.
    Clean(study::CleanArgs),
    /// Consistency, distortion, binarization, histogram and strata analysis.
    Analyze(study::AnalyzeArgs),
    /// Generate a synthetic rating study.
    Simulate(study::SimulateArgs),
    /// Render a synthetic labelled image corpus.
    Synth(modeling::SynthArgs),
    /// Cut random or salient patches from whole images.
    Crop(modeling::CropArgs),
    /// Split items into train, validation and test sets.
    Split(modeling::SplitArgs),
    /// Train a quality and distortion predictor.
    Train(modeling::TrainArgs),
    /// Score a trained model on one part of a split.
    Eval(modeling::EvalArgs),
    /// Predict quality and distortions for one image.
    Predict(imaging::PredictArgs),
    /// Render a tiled quality or distortion map over an image.
    Map(imaging::MapArgs),
    /// Capture feedback for one image.
    Feedback(imaging::FeedbackArgs),
    /// Pick the best frame from a directory of frames.
    SelectFrame(imaging::SelectFrameArgs),
    /// Start the HTTP service.
    Serve(imaging::ServeArgs),
}

fn run(cli: Cli) -> CliResult<Report> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::validation("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::computation(e.to_string()))?;
    }
    let cfg = FileConfig::from_env()?;
    match cli.command {
        Command::Ingest(a) => study::ingest(a),
        Command::Screen(a) => study::screen(a, &cfg),
        Command::Clean(a) => study::clean(a, &cfg),
        Command::Analyze(a) => study::analyze(a, &cfg),
        Command::Simulate(a) => study::simulate(a, &cfg),
        Command::Synth(a) => modeling::synth(a, &cfg),
        Command::Crop(a) => modeling::crop(a, &cfg),
        Command::Split(a) => modeling::split(a, &cfg),
        Command::Train(a) => modeling::train_cmd(a, &cfg),
        Command::Eval(a) => modeling::eval(a, &cfg),
        Command::Predict(a) => imaging::predict(a, &cfg),
        Command::Map(a) => imaging::map(a, &cfg),
        Command::Feedback(a) => imaging::feedback(a, &cfg),
        Command::SelectFrame(a) => imaging::select_frame(a, &cfg),
        Command::Serve(a) => imaging::serve(a, &cfg),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let json = std::env::args().any(|a| a == "--json");
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ClapKind::DisplayHelp | ClapKind::DisplayVersion) => e.exit(),
        Err(e) => {
            if json {
                println!("{}", CliError::validation(e.to_string().trim_end()).to_json());
            } else {
                let _ = e.print();
            }
            std::process::exit(2);
        }
    };
    // A closed stdout (e.g. piped into `head`) is not an error.
    let mut out = std::io::stdout().lock();
    match run(cli) {
        Ok(report) if json => {
            let text = serde_json::to_string_pretty(&report.value).expect("serializable");
            let _ = writeln!(out, "{text}");
        }
        Ok(report) => {
            let _ = writeln!(out, "{}", report.text);
        }
        Err(e) => {
            if json {
                let _ = writeln!(out, "{}", e.to_json());
            } else {
                eprintln!("piqflow: {e}");
            }
            std::process::exit(e.exit_code());
        }
    }
}
