use std::path::PathBuf;

use tenfos_core::cp::cp_als;
use tenfos_core::io::write_cp_model;
use tenfos_core::{Error, Result};

use crate::config::Config;

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Input tensor file.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Text file listing one NIfTI volume per subject (alternative input).
    #[arg(long)]
    pub nifti_list: Option<PathBuf>,
    /// CP rank to fit.
    #[arg(long)]
    pub rank: Option<usize>,
    /// Output directory for the model files.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub als: super::AlsFlags,
}

pub fn run(args: Args, cfg: &Config) -> Result<()> {
    let rank = cfg
        .resolve_opt(args.rank, "rank")?
        .ok_or_else(|| Error::invalid_argument("--rank is required for decompose"))?;
    let seed = cfg.resolve(args.seed, "seed", 0)?;
    let als = args.als.resolve(cfg, seed)?;

    let tensor = super::load_input_tensor(args.input.as_deref(), args.nifti_list.as_deref())?;
    let model = cp_als(&tensor, rank, &als)?;
    write_cp_model(&args.out, &model)?;
    println!(
        "rank {} decomposition of {:?}: fit {:.6e} after {} sweeps (converged: {})",
        model.rank,
        tensor.dims(),
        model.fit,
        model.iterations,
        model.converged
    );
    Ok(())
}
