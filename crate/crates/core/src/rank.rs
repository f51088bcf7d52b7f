//! CP rank selection by k-fold cross-validation over subjects.
//!
//! For every (fold, rank) pair: fit CP on the training subjects only, run
//! the exact posterior sampler on the training scores, predict held-out
//! scores from the posterior-mean coefficients, reconstruct the held-out
//! subtensor, and record the relative Frobenius error. Ranks are compared on
//! the mean error across folds; ties break toward the smaller rank.
//!
//! Pairs run in parallel with per-task derived seeds and indexed result
//! slots, so the outcome is independent of thread count and scheduling.

use rayon::prelude::*;

use crate::bayes::{run_sampler, ChainConfig, PriorSpec};
use crate::cp::{cp_als, AlsConfig};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded_rng};
use crate::tensor::{frobenius_distance, frobenius_norm, reconstruct_cp, DenseTensor, Mat};

/// Prior hyperparameters parametrized by shape, so one config serves every
/// candidate rank.
#[derive(Debug, Clone, Copy)]
pub struct PriorConfig {
    /// Row precision is `l0_scale * I_p`.
    pub l0_scale: f64,
    /// Inverse Wishart scale is `v0_scale * I_R`.
    pub v0_scale: f64,
    /// Degrees of freedom are `R + nu0_extra`.
    pub nu0_extra: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            l0_scale: 1e-6,
            v0_scale: 1.0,
            nu0_extra: 2.0,
        }
    }
}

impl PriorConfig {
    pub fn materialize(&self, p: usize, r: usize) -> Result<PriorSpec> {
        PriorSpec::new(
            Mat::zeros(p, r),
            Mat::identity(p, p) * self.l0_scale,
            Mat::identity(r, r) * self.v0_scale,
            r as f64 + self.nu0_extra,
        )
    }
}

/// Cross-validation settings.
#[derive(Debug, Clone)]
pub struct CvConfig {
    pub folds: usize,
    /// Candidate ranks, ascending.
    pub ranks: Vec<usize>,
    pub seed: u64,
    pub als: AlsConfig,
    pub prior: PriorConfig,
    /// Chain length settings; the per-task seed is derived internally.
    pub chain: ChainConfig,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            folds: 10,
            ranks: Vec::new(),
            seed: 0,
            als: AlsConfig::default(),
            prior: PriorConfig::default(),
            chain: ChainConfig::default(),
        }
    }
}

/// Cross-validation outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub ranks: Vec<usize>,
    /// `fold_errors[fold][rank_index]`, relative Frobenius errors.
    pub fold_errors: Vec<Vec<f64>>,
    /// Mean error per rank, same order as `ranks`.
    pub mean_errors: Vec<f64>,
    /// Argmin of the means; ties break toward the smaller rank.
    pub selected_rank: usize,
}

impl CvResult {
    /// `rank,mean_error,fold_1,...,fold_k` rows, floats with 17 significant
    /// digits.
    pub fn to_csv_string(&self) -> String {
        let folds = self.fold_errors.len();
        let mut out = String::from("rank,mean_error");
        for f in 1..=folds {
            out.push_str(&format!(",fold_{f}"));
        }
        out.push('\n');
        for (ri, &rank) in self.ranks.iter().enumerate() {
            out.push_str(&format!("{rank},{:.16e}", self.mean_errors[ri]));
            for fe in &self.fold_errors {
                out.push_str(&format!(",{:.16e}", fe[ri]));
            }
            out.push('\n');
        }
        out
    }
}

/// Partition `0..n` into `folds` near-equal test sets by seeded shuffle.
///
/// Returns `(train, test)` index pairs, both sorted ascending; test sets are
/// pairwise disjoint and cover `0..n`, with sizes differing by at most one.
pub fn kfold_split(n: usize, folds: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if folds < 2 {
        return Err(Error::invalid_argument("need at least 2 folds"));
    }
    if folds > n {
        return Err(Error::invalid_argument(format!(
            "folds ({folds}) cannot exceed subject count ({n})"
        )));
    }
    use rand::seq::SliceRandom;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seeded_rng(seed));

    let base = n / folds;
    let extra = n % folds;
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let size = base + usize::from(f < extra);
        let mut test: Vec<usize> = perm[start..start + size].to_vec();
        test.sort_unstable();
        let mut train: Vec<usize> = perm[..start]
            .iter()
            .chain(&perm[start + size..])
            .copied()
            .collect();
        train.sort_unstable();
        out.push((train, test));
        start += size;
    }
    Ok(out)
}

/// Search the rank grid by k-fold cross-validation.
pub fn cv_rank_search(y4: &DenseTensor, z: &Mat, cfg: &CvConfig) -> Result<CvResult> {
    if y4.order() != 4 {
        return Err(Error::invalid_argument(format!(
            "cross-validation needs an order-4 tensor, got order {}",
            y4.order()
        )));
    }
    let n = y4.dims()[3];
    if z.nrows() != n {
        return Err(Error::invalid_argument(format!(
            "design has {} rows but tensor has {n} subjects",
            z.nrows()
        )));
    }
    if cfg.ranks.is_empty() {
        return Err(Error::invalid_argument("rank grid is empty"));
    }
    if cfg.ranks.iter().any(|&r| r < 1) {
        return Err(Error::invalid_argument("ranks must be at least 1"));
    }
    if cfg.ranks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid_argument("ranks must be strictly ascending"));
    }

    let splits = kfold_split(n, cfg.folds, derive_seed(cfg.seed, 1))?;
    let n_ranks = cfg.ranks.len();
    let p = z.ncols();

    let tasks: Vec<(usize, usize)> = (0..cfg.folds)
        .flat_map(|f| (0..n_ranks).map(move |r| (f, r)))
        .collect();

    let errors: Vec<f64> = tasks
        .par_iter()
        .map(|&(fold, rank_idx)| {
            let rank = cfg.ranks[rank_idx];
            cv_task(y4, z, cfg, &splits[fold], p, rank, fold, rank_idx).map_err(|e| Error::CvTask {
                fold,
                rank,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;

    let mut fold_errors = vec![vec![0.0; n_ranks]; cfg.folds];
    for (t, &(fold, rank_idx)) in tasks.iter().enumerate() {
        fold_errors[fold][rank_idx] = errors[t];
    }
    let mean_errors: Vec<f64> = (0..n_ranks)
        .map(|r| fold_errors.iter().map(|fe| fe[r]).sum::<f64>() / cfg.folds as f64)
        .collect();

    let mut best = 0;
    for r in 1..n_ranks {
        if mean_errors[r] < mean_errors[best] {
            best = r;
        }
    }

    Ok(CvResult {
        ranks: cfg.ranks.clone(),
        fold_errors,
        mean_errors,
        selected_rank: cfg.ranks[best],
    })
}

#[allow(clippy::too_many_arguments)]
fn cv_task(
    y4: &DenseTensor,
    z: &Mat,
    cfg: &CvConfig,
    split: &(Vec<usize>, Vec<usize>),
    p: usize,
    rank: usize,
    fold: usize,
    rank_idx: usize,
) -> Result<f64> {
    let (train, test) = split;
    let task = (fold * cfg.ranks.len() + rank_idx) as u64;
    let task_seed = derive_seed(cfg.seed, 2 + task);

    let y_train = y4.select_along_mode(3, train)?;
    let y_test = y4.select_along_mode(3, test)?;
    let z_train = select_rows(z, train);
    let z_test = select_rows(z, test);

    let als = AlsConfig {
        seed: derive_seed(task_seed, 1),
        ..cfg.als
    };
    let model = cp_als(&y_train, rank, &als)?;

    let prior = cfg.prior.materialize(p, rank)?;
    let chain_cfg = ChainConfig {
        seed: derive_seed(task_seed, 2),
        ..cfg.chain
    };
    let chain = run_sampler(&model.factors[3], &z_train, &prior, &chain_cfg)?;
    let coef_hat = chain.coef_mean();

    let scores_test = &z_test * &coef_hat;
    let y_hat = reconstruct_cp(
        &model.lambda,
        &[
            &model.factors[0],
            &model.factors[1],
            &model.factors[2],
            &scores_test,
        ],
    )?;

    let denom = frobenius_norm(&y_test);
    if denom == 0.0 {
        return Err(Error::invalid_data("held-out subtensor has zero norm"));
    }
    Ok(frobenius_distance(&y_test, &y_hat)? / denom)
}

fn select_rows(m: &Mat, rows: &[usize]) -> Mat {
    Mat::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, Covariate, SynthSpec};

    #[test]
    fn kfold_partitions_exactly() {
        let splits = kfold_split(10, 10, 3).unwrap();
        assert_eq!(splits.len(), 10);
        for (train, test) in &splits {
            assert_eq!(test.len(), 1);
            assert_eq!(train.len(), 9);
        }

        let splits = kfold_split(100, 10, 3).unwrap();
        let mut seen = [false; 100];
        for (train, test) in &splits {
            assert_eq!(test.len(), 10);
            assert_eq!(train.len(), 90);
            for &t in test {
                assert!(!seen[t], "index {t} in two test sets");
                seen[t] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn kfold_near_equal_sizes() {
        let splits = kfold_split(11, 3, 1).unwrap();
        let sizes: Vec<usize> = splits.iter().map(|(_, t)| t.len()).collect();
        assert_eq!(sizes.iter().sum::<usize>(), 11);
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn kfold_deterministic_and_seed_sensitive() {
        let a = kfold_split(30, 5, 7).unwrap();
        let b = kfold_split(30, 5, 7).unwrap();
        assert_eq!(a, b);
        let others: Vec<_> = (1..=5).map(|s| kfold_split(30, 5, s).unwrap()).collect();
        assert!(
            others.iter().any(|o| o != &a),
            "five different seeds all produced the same split"
        );
    }

    #[test]
    fn kfold_rejects_bad_counts() {
        assert!(kfold_split(5, 6, 0).is_err());
        assert!(kfold_split(5, 1, 0).is_err());
    }

    fn strong_signal_spec(seed: u64) -> SynthSpec {
        SynthSpec {
            spatial_dims: [8, 7, 6],
            n_subjects: 20,
            rank: 3,
            covariates: vec![Covariate::Binary],
            coef_true: Mat::from_row_slice(2, 3, &[1.2, -0.8, 0.9, 0.7, 0.5, -0.6]),
            noise_subject_sd: 0.02,
            noise_voxel_sd: 0.01,
            seed,
        }
    }

    #[test]
    fn known_rank_elbow() {
        let data = generate(&strong_signal_spec(11)).unwrap();
        let cfg = CvConfig {
            folds: 5,
            ranks: vec![1, 2, 3, 4, 5],
            seed: 21,
            chain: ChainConfig {
                n_total: 600,
                burn_in: 100,
                thin: 1,
                seed: 0,
            },
            ..CvConfig::default()
        };
        let result = cv_rank_search(&data.y4, &data.design, &cfg).unwrap();
        assert!(
            result.mean_errors[2] < result.mean_errors[1],
            "no drop from rank 2 to 3: {:?}",
            result.mean_errors
        );
        assert!(
            [3usize, 4, 5].contains(&result.selected_rank),
            "selected {}",
            result.selected_rank
        );
        for fe in result.fold_errors.iter().flatten() {
            assert!(fe.is_finite() && *fe >= 0.0);
        }
        // Reported means really are the fold averages.
        for (ri, m) in result.mean_errors.iter().enumerate() {
            let avg: f64 =
                result.fold_errors.iter().map(|fe| fe[ri]).sum::<f64>() / cfg.folds as f64;
            assert!((m - avg).abs() < 1e-12);
        }
    }

    #[test]
    fn singleton_grid_selects_that_rank() {
        let data = generate(&strong_signal_spec(13)).unwrap();
        let cfg = CvConfig {
            folds: 4,
            ranks: vec![2],
            seed: 5,
            chain: ChainConfig {
                n_total: 200,
                burn_in: 50,
                thin: 1,
                seed: 0,
            },
            ..CvConfig::default()
        };
        let result = cv_rank_search(&data.y4, &data.design, &cfg).unwrap();
        assert_eq!(result.selected_rank, 2);
    }

    #[test]
    fn constant_subjects_give_fold_exchangeable_errors() {
        // No covariates, no noise: every subject is the same map, so every
        // fold sees identical data. With a tight scale prior the Monte Carlo
        // wobble is driven below the comparison tolerance.
        let spec = SynthSpec {
            spatial_dims: [6, 5, 4],
            n_subjects: 20,
            rank: 2,
            covariates: vec![],
            coef_true: Mat::from_row_slice(1, 2, &[0.8, -0.5]),
            noise_subject_sd: 0.0,
            noise_voxel_sd: 0.0,
            seed: 404,
        };
        let data = generate(&spec).unwrap();
        let cfg = CvConfig {
            folds: 5,
            ranks: vec![2],
            seed: 8,
            als: AlsConfig {
                tol: 1e-13,
                ..AlsConfig::default()
            },
            prior: PriorConfig {
                l0_scale: 1e-12,
                v0_scale: 1e-12,
                ..PriorConfig::default()
            },
            chain: ChainConfig {
                n_total: 300,
                burn_in: 100,
                thin: 1,
                seed: 0,
            },
        };
        let result = cv_rank_search(&data.y4, &data.design, &cfg).unwrap();
        let errs: Vec<f64> = result.fold_errors.iter().map(|fe| fe[0]).collect();
        let spread = errs.iter().cloned().fold(f64::MIN, f64::max)
            - errs.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 1e-6, "fold errors not exchangeable: {errs:?}");
        // And each is essentially the CP fit error (zero here).
        for e in &errs {
            assert!(*e < 1e-6, "error {e} should be near the CP fit error");
        }
    }

    #[test]
    fn cv_is_deterministic() {
        let data = generate(&strong_signal_spec(17)).unwrap();
        let cfg = CvConfig {
            folds: 3,
            ranks: vec![2, 3],
            seed: 31,
            chain: ChainConfig {
                n_total: 150,
                burn_in: 50,
                thin: 1,
                seed: 0,
            },
            ..CvConfig::default()
        };
        let a = cv_rank_search(&data.y4, &data.design, &cfg).unwrap();
        let b = cv_rank_search(&data.y4, &data.design, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn task_failures_identify_fold_and_rank() {
        let data = generate(&strong_signal_spec(19)).unwrap();
        // Chain settings that retain zero samples make every task fail.
        let cfg = CvConfig {
            folds: 3,
            ranks: vec![2],
            seed: 1,
            chain: ChainConfig {
                n_total: 10,
                burn_in: 5,
                thin: 50,
                seed: 0,
            },
            ..CvConfig::default()
        };
        match cv_rank_search(&data.y4, &data.design, &cfg) {
            Err(Error::CvTask { fold, rank, .. }) => {
                assert!(fold < 3);
                assert_eq!(rank, 2);
            }
            other => panic!("expected a fold/rank-identifying error, got {other:?}"),
        }
    }

    #[test]
    fn csv_table_shape() {
        let result = CvResult {
            ranks: vec![2, 3],
            fold_errors: vec![vec![0.5, 0.25], vec![0.75, 0.5]],
            mean_errors: vec![0.625, 0.375],
            selected_rank: 3,
        };
        let csv = result.to_csv_string();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "rank,mean_error,fold_1,fold_2");
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[0], "2");
        assert_eq!(row.len(), 4);
        assert!((row[1].parse::<f64>().unwrap() - 0.625).abs() < 1e-15);
    }
}
