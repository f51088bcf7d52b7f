mod commands;
mod config;

use clap::{Parser, Subcommand};

use tenfos_core::Error;

/// Batch pipeline: CP decomposition of a 4D volume stack, conjugate Bayesian
/// regression of the subject scores on covariates, and simultaneous-band
/// voxel inference.
#[derive(Parser)]
#[command(name = "tenfos", version, about)]
struct Cli {
    /// Flat key=value configuration file; command-line flags win.
    #[arg(long, global = true)]
    config: Option<std::path::PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with ground-truth sidecars.
    Simulate(commands::simulate::Args),
    /// Fit a CP decomposition and persist the model.
    Decompose(commands::decompose::Args),
    /// Choose the CP rank by k-fold cross-validation.
    RankCv(commands::rank_cv::Args),
    /// Decompose, regress, and sample the posterior; persist model and chain.
    Fit(commands::fit::Args),
    /// Contrast maps, SimBaS scores, flags, and clusters from a fitted run.
    Infer(commands::infer::Args),
    /// Summarize the artifacts in an output directory.
    Report(commands::report::Args),
}

fn main() {
    let cli = Cli::parse();
    let cfg = match config::Config::load(cli.config.as_deref()) {
        Ok(cfg) => cfg,
        Err(e) => exit_with(&e),
    };
    let result = match cli.command {
        Command::Simulate(args) => commands::simulate::run(args, &cfg),
        Command::Decompose(args) => commands::decompose::run(args, &cfg),
        Command::RankCv(args) => commands::rank_cv::run(args, &cfg),
        Command::Fit(args) => commands::fit::run(args, &cfg),
        Command::Infer(args) => commands::infer::run(args, &cfg),
        Command::Report(args) => commands::report::run(args, &cfg),
    };
    if let Err(e) = result {
        exit_with(&e);
    }
}

fn exit_with(e: &Error) -> ! {
    eprintln!("error: {e}");
    let mut source = std::error::Error::source(e);
    while let Some(s) = source {
        eprintln!("  caused by: {s}");
        source = s.source();
    }
    std::process::exit(exit_code(e));
}

/// 2 = argument problems, 3 = data/file problems, 4 = numerical failures.
fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) => 2,
        Error::InvalidData(_) | Error::Format { .. } | Error::Ingestion(_) | Error::Io(_) => 3,
        Error::SingularDesign(_) | Error::DegeneratePosterior(_) => 4,
        Error::CvTask { source, .. } => exit_code(source),
    }
}
