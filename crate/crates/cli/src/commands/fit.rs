use std::path::PathBuf;

use tenfos_core::basis::build_basis;
use tenfos_core::bayes::run_sampler;
use tenfos_core::cp::cp_als;
use tenfos_core::io::{write_chain, write_cp_model};
use tenfos_core::rank::{cv_rank_search, CvConfig};
use tenfos_core::rng::derive_seed;
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
    /// Fixed CP rank. Exactly one of --rank / --cv must be chosen.
    #[arg(long)]
    pub rank: Option<usize>,
    /// Choose the rank by cross-validation over --ranks first.
    #[arg(long)]
    pub cv: bool,
    /// Candidate ranks for --cv.
    #[arg(long)]
    pub ranks: Option<String>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Output directory for model, chain, and metadata.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub als: super::AlsFlags,
    #[command(flatten)]
    pub prior: super::PriorFlags,
    #[command(flatten)]
    pub chain: super::ChainFlags,
}

pub fn run(args: Args, cfg: &Config) -> Result<()> {
    let seed = cfg.resolve(args.seed, "seed", 0)?;
    let intercept = !args.no_intercept;
    let fixed_rank = cfg.resolve_opt(args.rank, "rank")?;
    if fixed_rank.is_some() == args.cv {
        return Err(Error::invalid_argument(
            "choose exactly one rank source: --rank R or --cv",
        ));
    }

    let (y4, design, covariate_names) = super::load_tensor_and_design(
        args.input.as_deref(),
        args.nifti_list.as_deref(),
        &args.covariates,
        args.subject_order.as_deref(),
        intercept,
    )?;

    std::fs::create_dir_all(&args.out)?;
    let rank = match fixed_rank {
        Some(r) => r,
        None => {
            let ranks_raw = cfg
                .resolve_opt(args.ranks.clone(), "ranks")?
                .ok_or_else(|| Error::invalid_argument("--cv needs --ranks"))?;
            let cv = CvConfig {
                folds: cfg.resolve(args.folds, "folds", 10)?,
                ranks: super::parse_usize_list(&ranks_raw, "rank")?,
                seed: derive_seed(seed, 101),
                als: args.als.resolve(cfg, 0)?,
                prior: args.prior.resolve(cfg)?,
                chain: args.chain.resolve(cfg, 0)?,
            };
            let result = cv_rank_search(&y4, &design, &cv)?;
            std::fs::write(args.out.join("cv.csv"), result.to_csv_string())?;
            println!("cross-validation selected rank {}", result.selected_rank);
            result.selected_rank
        }
    };

    let als = args.als.resolve(cfg, derive_seed(seed, 1))?;
    let model = cp_als(&y4, rank, &als)?;
    println!(
        "rank {rank} decomposition: fit {:.6e} after {} sweeps (converged: {})",
        model.fit, model.iterations, model.converged
    );

    let basis = build_basis(&model)?;
    let prior = args.prior.resolve(cfg)?.materialize(design.ncols(), rank)?;
    let chain_cfg = args.chain.resolve(cfg, derive_seed(seed, 2))?;
    let chain = run_sampler(&model.factors[3], &design, &prior, &chain_cfg)?;
    println!(
        "posterior chain: {} retained draws of a {}x{} coefficient matrix",
        chain.len(),
        design.ncols(),
        rank
    );

    write_cp_model(&args.out, &model)?;
    write_chain(&args.out, &chain)?;
    let meta = format!(
        "rank={rank}\nsubjects={}\ncovariates={}\nvoxels={}\nseed={seed}\nintercept={intercept}\n",
        design.nrows(),
        covariate_names.join("|"),
        basis.n_voxels(),
    );
    std::fs::write(args.out.join("fit.meta.txt"), meta)?;
    Ok(())
}
