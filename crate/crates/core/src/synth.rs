//! Ground-truth synthetic datasets.
//!
//! Generation composes the model the rest of the crate estimates: random
//! unit-norm spatial factors and weights define a loading matrix `L_true`,
//! subject scores follow `G = Z C* + noise`, and the voxel data are
//! `Y_(4) = G L_true + noise`, folded back to a 4D tensor. Everything is
//! returned, so tests can compare estimates against the exact truth.

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::basis::loading_from_parts;
use crate::cp::{log_uniform_weights, random_unit_factors};
use crate::error::{Error, Result};
use crate::rng::seeded_rng;
use crate::tensor::{fold, DenseTensor, Mat};

/// Covariate column recipe; the design always gets a leading intercept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Covariate {
    /// Bernoulli(1/2) zero/one column.
    Binary,
    /// Standard normal column.
    Continuous,
}

/// Everything needed to generate one dataset.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub spatial_dims: [usize; 3],
    pub n_subjects: usize,
    pub rank: usize,
    /// Covariates after the intercept; the design is `N x (1 + len)`.
    pub covariates: Vec<Covariate>,
    /// True basis-space coefficients, `(1 + covariates) x rank`.
    pub coef_true: Mat,
    /// Noise added to the subject scores (basis space).
    pub noise_subject_sd: f64,
    /// Noise added voxelwise.
    pub noise_voxel_sd: f64,
    pub seed: u64,
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        if self.spatial_dims.contains(&0) || self.n_subjects == 0 || self.rank == 0 {
            return Err(Error::invalid_argument(
                "spatial dims, subject count, and rank must be positive",
            ));
        }
        let p = 1 + self.covariates.len();
        if self.coef_true.nrows() != p || self.coef_true.ncols() != self.rank {
            return Err(Error::invalid_argument(format!(
                "true coefficients must be {p}x{}, got {}x{}",
                self.rank,
                self.coef_true.nrows(),
                self.coef_true.ncols()
            )));
        }
        if self.noise_subject_sd < 0.0 || self.noise_voxel_sd < 0.0 {
            return Err(Error::invalid_argument("noise sds must be nonnegative"));
        }
        Ok(())
    }
}

/// The generating quantities, kept for oracle comparisons.
#[derive(Debug, Clone)]
pub struct SynthTruth {
    pub factors: [Mat; 3],
    pub lambda: Vec<f64>,
    pub coef: Mat,
    /// Noisy subject scores actually used to build the data, `N x R`.
    pub scores: Mat,
    /// True loading matrix `R x Nv`.
    pub loading: Mat,
}

/// One generated dataset.
#[derive(Debug, Clone)]
pub struct SynthData {
    pub y4: DenseTensor,
    /// Design matrix with intercept, `N x p`.
    pub design: Mat,
    pub truth: SynthTruth,
}

/// Random `p x r` coefficient matrix with i.i.d. `N(0, sd^2)` entries, for
/// simulations that do not pin the truth explicitly.
pub fn random_coef(p: usize, r: usize, sd: f64, seed: u64) -> Mat {
    let mut rng = seeded_rng(seed);
    Mat::from_fn(p, r, |_, _| sd * rng.sample::<f64, _>(StandardNormal))
}

/// Generate a dataset according to `spec`. Pure function of the spec,
/// including its seed.
pub fn generate(spec: &SynthSpec) -> Result<SynthData> {
    spec.validate()?;
    let mut rng = seeded_rng(spec.seed);
    let [p1, p2, p3] = spec.spatial_dims;
    let n = spec.n_subjects;
    let r = spec.rank;

    let factors = random_unit_factors(&[p1, p2, p3], r, &mut rng);
    let lambda = log_uniform_weights(r, 1.0, 10.0, &mut rng);
    let loading = loading_from_parts(&lambda, &factors[0], &factors[1], &factors[2])?;

    let p = 1 + spec.covariates.len();
    let mut design = Mat::zeros(n, p);
    design.column_mut(0).fill(1.0);
    for (c, cov) in spec.covariates.iter().enumerate() {
        for i in 0..n {
            design[(i, c + 1)] = match cov {
                Covariate::Binary => {
                    if rng.random_range(0.0..1.0) < 0.5 {
                        0.0
                    } else {
                        1.0
                    }
                }
                Covariate::Continuous => rng.sample(StandardNormal),
            };
        }
    }

    let mut scores = &design * &spec.coef_true;
    if spec.noise_subject_sd > 0.0 {
        for v in scores.iter_mut() {
            *v += spec.noise_subject_sd * rng.sample::<f64, _>(StandardNormal);
        }
    }

    let mut unfolded = &scores * &loading;
    if spec.noise_voxel_sd > 0.0 {
        for v in unfolded.iter_mut() {
            *v += spec.noise_voxel_sd * rng.sample::<f64, _>(StandardNormal);
        }
    }

    let y4 = fold(&unfolded, 3, &[p1, p2, p3, n])?;
    Ok(SynthData {
        y4,
        design,
        truth: SynthTruth {
            factors: [factors[0].clone(), factors[1].clone(), factors[2].clone()],
            lambda,
            coef: spec.coef_true.clone(),
            scores,
            loading,
        },
    })
}
