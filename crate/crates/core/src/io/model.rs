//! Persistence for fitted CP models and posterior sample chains.
//!
//! A model is a directory of tensor files plus a `model.meta.txt` key=value
//! sidecar; a chain is a pair of order-3 tensor files (`(M', p, R)`
//! coefficients, `(M', R, R)` covariances) plus its own meta file. Both are
//! re-readable by these functions, so the expensive stages (decomposition,
//! sampling) decouple from inference.

use std::collections::HashMap;
use std::path::Path;

use crate::bayes::McmcChain;
use crate::cp::CpModel;
use crate::error::{Error, Result};
use crate::io::tensor_file::{read_matrix, read_tensor, write_matrix, write_tensor};
use crate::tensor::DenseTensor;

pub fn write_cp_model(dir: &Path, model: &CpModel) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let lambda = DenseTensor::new(vec![model.rank], model.lambda.clone())?;
    write_tensor(&dir.join("model.lambda.tnsr"), &lambda)?;
    for (k, f) in model.factors.iter().enumerate() {
        write_matrix(&dir.join(format!("model.factor{}.tnsr", k + 1)), f)?;
    }
    let meta = format!(
        "rank={}\norder={}\nfit={:.16e}\niterations={}\nconverged={}\n",
        model.rank,
        model.order(),
        model.fit,
        model.iterations,
        model.converged
    );
    std::fs::write(dir.join("model.meta.txt"), meta)?;
    Ok(())
}

pub fn read_cp_model(dir: &Path) -> Result<CpModel> {
    let meta = parse_meta(&dir.join("model.meta.txt"))?;
    let rank: usize = meta_get(&meta, "rank")?;
    let order: usize = meta_get(&meta, "order")?;
    let fit: f64 = meta_get(&meta, "fit")?;
    let iterations: usize = meta_get(&meta, "iterations")?;
    let converged: bool = meta_get(&meta, "converged")?;

    let lambda_t = read_tensor(&dir.join("model.lambda.tnsr"))?;
    if lambda_t.order() != 1 || lambda_t.len() != rank {
        return Err(Error::invalid_data(format!(
            "lambda file does not hold {rank} weights"
        )));
    }
    let mut factors = Vec::with_capacity(order);
    for k in 0..order {
        let f = read_matrix(&dir.join(format!("model.factor{}.tnsr", k + 1)))?;
        if f.ncols() != rank {
            return Err(Error::invalid_data(format!(
                "factor {} has {} columns, expected {rank}",
                k + 1,
                f.ncols()
            )));
        }
        factors.push(f);
    }
    Ok(CpModel {
        rank,
        lambda: lambda_t.into_values(),
        factors,
        fit,
        iterations,
        converged,
        fit_trace: Vec::new(),
    })
}

pub fn write_chain(dir: &Path, chain: &McmcChain) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_tensor(&dir.join("chain.coef.tnsr"), &chain.coef_tensor())?;
    write_tensor(&dir.join("chain.sigma.tnsr"), &chain.sigma_tensor())?;
    let meta = format!(
        "n_total={}\nburn_in={}\nthin={}\nseed={}\nretained={}\n",
        chain.n_total,
        chain.burn_in,
        chain.thin,
        chain.seed,
        chain.len()
    );
    std::fs::write(dir.join("chain.meta.txt"), meta)?;
    Ok(())
}

/// Load the coefficient draws back from a chain directory.
pub fn read_chain_samples(dir: &Path) -> Result<Vec<crate::tensor::Mat>> {
    let t = read_tensor(&dir.join("chain.coef.tnsr"))?;
    McmcChain::coef_from_tensor(&t)
}

fn parse_meta(path: &Path) -> Result<HashMap<String, String>> {
    let text = std::fs::read_to_string(path)?;
    let mut map = HashMap::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::invalid_data(format!("{}:{}: expected key=value", path.display(), ln + 1))
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn meta_get<T: std::str::FromStr>(meta: &HashMap<String, String>, key: &str) -> Result<T> {
    let raw = meta
        .get(key)
        .ok_or_else(|| Error::invalid_data(format!("meta file missing key '{key}'")))?;
    raw.parse()
        .map_err(|_| Error::invalid_data(format!("meta key '{key}' has bad value '{raw}'")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::{run_sampler, ChainConfig, PriorSpec};
    use crate::cp::{cp_als, AlsConfig};
    use crate::rng::seeded_rng;
    use crate::tensor::Mat;
    use rand::Rng as _;
    use tempfile::tempdir;

    #[test]
    fn model_round_trip() {
        let mut rng = seeded_rng(3);
        let values: Vec<f64> = (0..4 * 3 * 2 * 5)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let t = DenseTensor::new(vec![4, 3, 2, 5], values).unwrap();
        let model = cp_als(
            &t,
            2,
            &AlsConfig {
                max_iters: 30,
                ..AlsConfig::default()
            },
        )
        .unwrap();

        let dir = tempdir().unwrap();
        write_cp_model(dir.path(), &model).unwrap();
        let back = read_cp_model(dir.path()).unwrap();
        assert_eq!(back.rank, model.rank);
        assert_eq!(back.lambda, model.lambda);
        assert_eq!(back.iterations, model.iterations);
        assert_eq!(back.converged, model.converged);
        assert_eq!(back.fit.to_bits(), model.fit.to_bits());
        for (a, b) in back.factors.iter().zip(&model.factors) {
            assert_eq!(a.as_slice(), b.as_slice());
        }
    }

    #[test]
    fn chain_round_trip() {
        let z = Mat::from_column_slice(4, 1, &[1.0, 1.0, 1.0, 1.0]);
        let g = Mat::from_fn(4, 2, |i, j| (i + j) as f64 * 0.25);
        let prior = PriorSpec::weakly_informative(1, 2);
        let chain = run_sampler(
            &g,
            &z,
            &prior,
            &ChainConfig {
                n_total: 12,
                burn_in: 2,
                thin: 2,
                seed: 9,
            },
        )
        .unwrap();

        let dir = tempdir().unwrap();
        write_chain(dir.path(), &chain).unwrap();
        let back = read_chain_samples(dir.path()).unwrap();
        assert_eq!(back.len(), chain.len());
        for (a, b) in back.iter().zip(&chain.coef_samples) {
            assert_eq!(a.as_slice(), b.as_slice());
        }
    }

    #[test]
    fn missing_meta_key_is_invalid_data() {
        let dir = tempdir().unwrap();
        std::fs::write(dir.path().join("model.meta.txt"), "rank=2\n").unwrap();
        assert!(matches!(
            read_cp_model(dir.path()),
            Err(Error::InvalidData(_))
        ));
    }
}
