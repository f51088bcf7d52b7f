use std::path::PathBuf;

use tenfos_core::rank::{cv_rank_search, CvConfig};
use tenfos_core::{Error, Result};

use crate::config::Config;

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Input order-4 tensor file.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Text file listing one NIfTI volume per subject (alternative input).
    #[arg(long)]
    pub nifti_list: Option<PathBuf>,
    /// Covariate CSV (subject_id column first).
    #[arg(long)]
    pub covariates: PathBuf,
    /// Optional file listing subject ids in tensor order, one per line.
    #[arg(long)]
    pub subject_order: Option<PathBuf>,
    /// Skip the automatic intercept column.
    #[arg(long)]
    pub no_intercept: bool,
    /// Candidate ranks, e.g. 10,15,20.
    #[arg(long)]
    pub ranks: Option<String>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output CSV path for the rank/error table.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub als: super::AlsFlags,
    #[command(flatten)]
    pub prior: super::PriorFlags,
    #[command(flatten)]
    pub chain: super::ChainFlags,
}

pub fn run(args: Args, cfg: &Config) -> Result<()> {
    let ranks_raw = cfg
        .resolve_opt(args.ranks.clone(), "ranks")?
        .ok_or_else(|| Error::invalid_argument("--ranks is required for rank-cv"))?;
    let ranks = super::parse_usize_list(&ranks_raw, "rank")?;
    let folds = cfg.resolve(args.folds, "folds", 10)?;
    let seed = cfg.resolve(args.seed, "seed", 0)?;
    let intercept = !args.no_intercept;

    let (y4, design, _) = super::load_tensor_and_design(
        args.input.as_deref(),
        args.nifti_list.as_deref(),
        &args.covariates,
        args.subject_order.as_deref(),
        intercept,
    )?;

    let cv = CvConfig {
        folds,
        ranks,
        seed,
        als: args.als.resolve(cfg, 0)?,
        prior: args.prior.resolve(cfg)?,
        chain: args.chain.resolve(cfg, 0)?,
    };
    let result = cv_rank_search(&y4, &design, &cv)?;

    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(&args.out, result.to_csv_string())?;
    println!(
        "cross-validation over ranks {:?} ({} folds): selected rank {}",
        result.ranks, folds, result.selected_rank
    );
    for (ri, rank) in result.ranks.iter().enumerate() {
        println!("  rank {rank}: mean error {:.6e}", result.mean_errors[ri]);
    }
    Ok(())
}
