use std::path::PathBuf;

use tenfos_core::basis::build_basis;
use tenfos_core::io::{read_chain_samples, read_cp_model};
use tenfos_core::simbas::{
    clusters_to_csv, contrast_moments, extract_clusters, simbas_masked, Connectivity, ContrastSpec,
    ContrastStream,
};
use tenfos_core::{Error, Result};

use crate::config::Config;

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Directory produced by `fit` (model + chain files).
    #[arg(long)]
    pub fit: PathBuf,
    /// Contrast weights over the design columns, e.g. 1,0 for the intercept.
    #[arg(long)]
    pub contrast: String,
    /// Label used in messages and metadata.
    #[arg(long)]
    pub name: Option<String>,
    /// Familywise significance level.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Keep only clusters with at least this many voxels.
    #[arg(long)]
    pub min_cluster_size: Option<usize>,
    /// Voxel neighborhood: 6 or 26.
    #[arg(long)]
    pub connectivity: Option<usize>,
    /// Optional order-3 mask tensor (nonzero = analyze this voxel).
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Output directory for maps and the cluster report.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: Args, cfg: &Config) -> Result<()> {
    let alpha = cfg.resolve(args.alpha, "alpha", 0.01)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid_argument("alpha must lie in (0, 1)"));
    }
    let min_cluster_size = cfg.resolve(args.min_cluster_size, "min_cluster_size", 125)?;
    let connectivity =
        Connectivity::from_count(cfg.resolve(args.connectivity, "connectivity", 6)?)?;
    let name = args.name.unwrap_or_else(|| "contrast".to_string());

    let model = read_cp_model(&args.fit)?;
    if model.order() != 4 {
        return Err(Error::invalid_data(format!(
            "fitted model has order {}, expected 4",
            model.order()
        )));
    }
    let basis = build_basis(&model)?;
    let samples = read_chain_samples(&args.fit)?;

    let weights = super::parse_f64_list(&args.contrast, "contrast weight")?;
    let contrast = ContrastSpec::new(weights, name.clone())?;
    let stream = ContrastStream::from_samples(&samples, &basis, &contrast)?;

    let mask = match &args.mask {
        Some(path) => Some(super::read_mask(path, basis.spatial_dims)?),
        None => None,
    };

    let (mean_map, std_map) = contrast_moments(&stream)?;
    let result = simbas_masked(&mean_map, &std_map, &stream, mask.as_deref(), alpha)?;
    let clusters = extract_clusters(
        &result.flags,
        basis.spatial_dims,
        &result.mean_map,
        min_cluster_size,
        connectivity,
    )?;

    std::fs::create_dir_all(&args.out)?;
    let dims = basis.spatial_dims;
    super::write_voxel_map(&args.out.join("mean_map.tnsr"), &result.mean_map, dims)?;
    super::write_voxel_map(&args.out.join("std_map.tnsr"), &result.std_map, dims)?;
    super::write_voxel_map(&args.out.join("psimbas.tnsr"), &result.psimbas, dims)?;
    super::write_flag_volume(&args.out.join("flags.tnsr"), &result.flags, dims)?;
    let zq =
        tenfos_core::DenseTensor::new(vec![result.z_quantiles.len()], result.z_quantiles.clone())?;
    tenfos_core::io::write_tensor(&args.out.join("z_stats.tnsr"), &zq)?;
    std::fs::write(args.out.join("clusters.csv"), clusters_to_csv(&clusters))?;

    let meta = format!(
        "contrast={name}\nweights={}\nalpha={alpha}\nmin_cluster_size={min_cluster_size}\n\
         connectivity={}\nflagged={}\nclusters={}\n",
        args.contrast,
        match connectivity {
            Connectivity::Six => 6,
            Connectivity::TwentySix => 26,
        },
        result.n_flagged(),
        clusters.len()
    );
    std::fs::write(args.out.join("infer.meta.txt"), meta)?;

    println!(
        "contrast '{name}': {} voxels flagged at alpha {alpha}, {} clusters of >= {min_cluster_size} voxels",
        result.n_flagged(),
        clusters.len()
    );
    for (id, c) in clusters.iter().enumerate() {
        println!(
            "  cluster {}: {} voxels, peak {:.4e} at ({}, {}, {})",
            id + 1,
            c.size,
            c.peak_value,
            c.peak_voxel[0],
            c.peak_voxel[1],
            c.peak_voxel[2]
        );
    }
    Ok(())
}
