use std::path::PathBuf;

use tenfos_core::io::{write_covariates, write_matrix, write_tensor};
use tenfos_core::rng::derive_seed;
use tenfos_core::synth::{generate, Covariate, SynthSpec};
use tenfos_core::tensor::{DenseTensor, Mat};
use tenfos_core::{Error, Result};

use crate::config::Config;

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Output directory for the dataset and truth sidecars.
    #[arg(long)]
    pub out: PathBuf,
    /// Spatial dimensions, e.g. 12,10,8.
    #[arg(long)]
    pub dims: Option<String>,
    #[arg(long)]
    pub subjects: Option<usize>,
    /// True generating rank.
    #[arg(long)]
    pub rank: Option<usize>,
    /// Number of Bernoulli(1/2) covariate columns after the intercept.
    #[arg(long)]
    pub binary: Option<usize>,
    /// Number of standard-normal covariate columns after the intercept.
    #[arg(long)]
    pub continuous: Option<usize>,
    /// Order-2 tensor file holding the true p x R coefficients; random
    /// N(0, gamma_sd^2) entries when omitted.
    #[arg(long)]
    pub coef_file: Option<PathBuf>,
    #[arg(long)]
    pub coef_sd: Option<f64>,
    #[arg(long)]
    pub noise_subject_sd: Option<f64>,
    #[arg(long)]
    pub noise_voxel_sd: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn run(args: Args, cfg: &Config) -> Result<()> {
    let dims_raw = cfg.resolve(args.dims, "dims", "12,10,8".to_string())?;
    let spatial_dims = super::parse_dims3(&dims_raw)?;
    let n_subjects = cfg.resolve(args.subjects, "subjects", 20)?;
    let rank = cfg.resolve(args.rank, "rank", 3)?;
    let n_binary = cfg.resolve(args.binary, "binary", 1)?;
    let n_continuous = cfg.resolve(args.continuous, "continuous", 0)?;
    let coef_sd = cfg.resolve(args.coef_sd, "coef_sd", 1.0)?;
    let noise_subject_sd = cfg.resolve(args.noise_subject_sd, "noise_subject_sd", 0.05)?;
    let noise_voxel_sd = cfg.resolve(args.noise_voxel_sd, "noise_voxel_sd", 0.01)?;
    let seed = cfg.resolve(args.seed, "seed", 0)?;

    let mut covariates = vec![Covariate::Binary; n_binary];
    covariates.extend(vec![Covariate::Continuous; n_continuous]);
    let p = 1 + covariates.len();

    let coef_true = match &args.coef_file {
        Some(path) => {
            let m = tenfos_core::io::read_matrix(path)?;
            if m.nrows() != p || m.ncols() != rank {
                return Err(Error::invalid_argument(format!(
                    "coefficient file is {}x{}, expected {p}x{rank}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            m
        }
        None => tenfos_core::synth::random_coef(p, rank, coef_sd, derive_seed(seed, 7)),
    };

    let spec = SynthSpec {
        spatial_dims,
        n_subjects,
        rank,
        covariates,
        coef_true,
        noise_subject_sd,
        noise_voxel_sd,
        seed,
    };
    let data = generate(&spec)?;

    std::fs::create_dir_all(&args.out)?;
    write_tensor(&args.out.join("y4.tnsr"), &data.y4)?;

    let ids: Vec<String> = (1..=n_subjects).map(|i| format!("s{i:04}")).collect();
    let names: Vec<String> = (0..n_binary)
        .map(|i| format!("bin{}", i + 1))
        .chain((0..n_continuous).map(|i| format!("cont{}", i + 1)))
        .collect();
    // Drop the intercept column: the covariate file stores covariates only.
    let cov_data = Mat::from_fn(n_subjects, p - 1, |i, j| data.design[(i, j + 1)]);
    write_covariates(&args.out.join("covariates.csv"), &ids, &names, &cov_data)?;

    let truth = args.out.join("truth");
    std::fs::create_dir_all(&truth)?;
    write_matrix(&truth.join("coef.tnsr"), &data.truth.coef)?;
    write_matrix(&truth.join("scores.tnsr"), &data.truth.scores)?;
    write_matrix(&truth.join("loading.tnsr"), &data.truth.loading)?;
    write_tensor(
        &truth.join("lambda.tnsr"),
        &DenseTensor::new(vec![rank], data.truth.lambda.clone())?,
    )?;
    for (k, f) in data.truth.factors.iter().enumerate() {
        write_matrix(&truth.join(format!("factor{}.tnsr", k + 1)), f)?;
    }

    println!(
        "simulated {}x{}x{}x{} dataset (rank {rank}, p {p}) into {}",
        spatial_dims[0],
        spatial_dims[1],
        spatial_dims[2],
        n_subjects,
        args.out.display()
    );
    Ok(())
}
