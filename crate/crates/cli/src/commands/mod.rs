pub mod decompose;
pub mod fit;
pub mod infer;
pub mod rank_cv;
pub mod report;
pub mod simulate;

use std::path::Path;

use tenfos_core::bayes::ChainConfig;
use tenfos_core::cp::{AlsConfig, InitMethod};
use tenfos_core::rank::PriorConfig;
use tenfos_core::{DenseTensor, Error, Result};

use crate::config::Config;

/// Comma-separated positive integers, e.g. `--ranks 10,15,20`.
pub fn parse_usize_list(raw: &str, what: &str) -> Result<Vec<usize>> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::invalid_argument(format!("bad {what} entry '{s}'")))
        })
        .collect()
}

pub fn parse_f64_list(raw: &str, what: &str) -> Result<Vec<f64>> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::invalid_argument(format!("bad {what} entry '{s}'")))
        })
        .collect()
}

pub fn parse_dims3(raw: &str) -> Result<[usize; 3]> {
    let v = parse_usize_list(raw, "dimension")?;
    if v.len() != 3 {
        return Err(Error::invalid_argument(format!(
            "expected three spatial dimensions, got {}",
            v.len()
        )));
    }
    Ok([v[0], v[1], v[2]])
}

/// ALS flags shared by decompose / rank-cv / fit.
#[derive(clap::Args, Debug, Clone)]
pub struct AlsFlags {
    /// Maximum ALS sweeps.
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Relative-fit-change stopping tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Factor initialization: hosvd or random.
    #[arg(long)]
    pub init: Option<String>,
}

impl AlsFlags {
    pub fn resolve(&self, cfg: &Config, seed: u64) -> Result<AlsConfig> {
        let init_raw = cfg.resolve(self.init.clone(), "init", "hosvd".to_string())?;
        let init = match init_raw.as_str() {
            "hosvd" => InitMethod::Hosvd,
            "random" => InitMethod::RandomUniform,
            other => {
                return Err(Error::invalid_argument(format!(
                    "init must be 'hosvd' or 'random', got '{other}'"
                )))
            }
        };
        Ok(AlsConfig {
            max_iters: cfg.resolve(self.max_iters, "max_iters", 500)?,
            tol: cfg.resolve(self.tol, "tol", 1e-8)?,
            init,
            seed,
        })
    }
}

/// Prior hyperparameter flags.
#[derive(clap::Args, Debug, Clone)]
pub struct PriorFlags {
    /// Row-precision scale: L0 = l0_scale * I.
    #[arg(long)]
    pub l0_scale: Option<f64>,
    /// Inverse Wishart scale: V0 = v0_scale * I.
    #[arg(long)]
    pub v0_scale: Option<f64>,
    /// Degrees of freedom above R: nu0 = R + nu0_extra.
    #[arg(long)]
    pub nu0_extra: Option<f64>,
}

impl PriorFlags {
    pub fn resolve(&self, cfg: &Config) -> Result<PriorConfig> {
        let d = PriorConfig::default();
        Ok(PriorConfig {
            l0_scale: cfg.resolve(self.l0_scale, "l0_scale", d.l0_scale)?,
            v0_scale: cfg.resolve(self.v0_scale, "v0_scale", d.v0_scale)?,
            nu0_extra: cfg.resolve(self.nu0_extra, "nu0_extra", d.nu0_extra)?,
        })
    }
}

/// Chain-length flags.
#[derive(clap::Args, Debug, Clone)]
pub struct ChainFlags {
    /// Total iterations including burn-in.
    #[arg(long)]
    pub n_total: Option<usize>,
    /// Iterations discarded from the front.
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Keep every thin-th retained iteration.
    #[arg(long)]
    pub thin: Option<usize>,
}

impl ChainFlags {
    pub fn resolve(&self, cfg: &Config, seed: u64) -> Result<ChainConfig> {
        let d = ChainConfig::default();
        Ok(ChainConfig {
            n_total: cfg.resolve(self.n_total, "n_total", d.n_total)?,
            burn_in: cfg.resolve(self.burn_in, "burn_in", d.burn_in)?,
            thin: cfg.resolve(self.thin, "thin", d.thin)?,
            seed,
        })
    }
}

/// Read a boolean volume from an order-3 tensor file (nonzero = true).
pub fn read_mask(path: &Path, spatial_dims: [usize; 3]) -> Result<Vec<bool>> {
    let t = tenfos_core::io::read_tensor(path)?;
    if t.dims() != spatial_dims {
        return Err(Error::invalid_argument(format!(
            "mask dims {:?} do not match volume dims {:?}",
            t.dims(),
            spatial_dims
        )));
    }
    Ok(t.values().iter().map(|&v| v != 0.0).collect())
}

/// Write a boolean volume as a 0/1 order-3 tensor file.
pub fn write_flag_volume(path: &Path, flags: &[bool], dims: [usize; 3]) -> Result<()> {
    let values: Vec<f64> = flags.iter().map(|&f| if f { 1.0 } else { 0.0 }).collect();
    let t = DenseTensor::new(dims.to_vec(), values)?;
    tenfos_core::io::write_tensor(path, &t)
}

/// Reshape a voxel vector into an order-3 tensor file.
pub fn write_voxel_map(path: &Path, map: &[f64], dims: [usize; 3]) -> Result<()> {
    let t = DenseTensor::new(dims.to_vec(), map.to_vec())?;
    tenfos_core::io::write_tensor(path, &t)
}

/// Read the response tensor from either a tensor file or a NIfTI list
/// (a text file naming one volume per subject, stacked along mode 4).
pub fn load_input_tensor(input: Option<&Path>, nifti_list: Option<&Path>) -> Result<DenseTensor> {
    match (input, nifti_list) {
        (Some(path), None) => tenfos_core::io::read_tensor(path),
        (None, Some(list)) => stack_nifti_list(list),
        (Some(_), Some(_)) => Err(Error::invalid_argument(
            "give either --input or --nifti-list, not both",
        )),
        (None, None) => Err(Error::invalid_argument(
            "an input is required: --input <tensor> or --nifti-list <file>",
        )),
    }
}

fn stack_nifti_list(list: &Path) -> Result<DenseTensor> {
    let base = list.parent().unwrap_or(Path::new("."));
    let text = std::fs::read_to_string(list)?;
    let entries: Vec<&str> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect();
    if entries.is_empty() {
        return Err(Error::invalid_data(format!(
            "NIfTI list {} names no volumes",
            list.display()
        )));
    }
    let mut dims: Option<[usize; 3]> = None;
    let mut values = Vec::new();
    for entry in &entries {
        let mut path = std::path::PathBuf::from(entry);
        if path.is_relative() {
            path = base.join(path);
        }
        let vol = tenfos_core::io::read_nifti1(&path)?;
        let vdims = [
            vol.volume.dims()[0],
            vol.volume.dims()[1],
            vol.volume.dims()[2],
        ];
        match dims {
            None => dims = Some(vdims),
            Some(d) if d != vdims => {
                return Err(Error::invalid_data(format!(
                    "{} has dims {vdims:?} but earlier volumes have {d:?}",
                    path.display()
                )));
            }
            Some(_) => {}
        }
        values.extend_from_slice(vol.volume.values());
    }
    let d = dims.expect("at least one volume");
    DenseTensor::new(vec![d[0], d[1], d[2], entries.len()], values)
}

/// Load the order-4 response tensor and a matching design matrix.
pub fn load_tensor_and_design(
    input: Option<&Path>,
    nifti_list: Option<&Path>,
    covariates: &Path,
    subject_order: Option<&Path>,
    intercept: bool,
) -> Result<(DenseTensor, nalgebra::DMatrix<f64>, Vec<String>)> {
    let y4 = load_input_tensor(input, nifti_list)?;
    if y4.order() != 4 {
        return Err(Error::invalid_data(format!(
            "input holds an order-{} tensor; the pipeline needs order 4",
            y4.order()
        )));
    }
    let n = y4.dims()[3];
    let mut table = tenfos_core::io::read_covariates(covariates)?;
    if let Some(order_path) = subject_order {
        let text = std::fs::read_to_string(order_path)?;
        let order: Vec<String> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .collect();
        table = table.reorder(&order)?;
    }
    if table.n_subjects() != n {
        return Err(Error::Ingestion(format!(
            "covariate file has {} subjects but the tensor has {n}",
            table.n_subjects()
        )));
    }
    let names = {
        let mut names = vec![];
        if intercept {
            names.push("intercept".to_string());
        }
        names.extend(table.names.iter().cloned());
        names
    };
    Ok((y4, table.design_matrix(intercept), names))
}
