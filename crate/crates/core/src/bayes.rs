//! Exact conjugate Bayesian inference for the basis-space regression
//! `G = Z C* + E*`, with a Matrix Normal prior on the coefficient matrix and
//! an Inverse Wishart prior on the error covariance.
//!
//! The joint posterior factorizes exactly:
//!
//! ```text
//! Sigma | G, Z        ~ InverseWishart(V_n, nu_n)
//! C*    | G, Z, Sigma ~ MatrixNormal(g_n, L_n^{-1}, Sigma)
//! ```
//!
//! so each "Gibbs" iteration is an independent exact draw from the joint
//! posterior; there is no Markov dependence and no mixing concern. Burn-in
//! and thinning are kept purely for interface uniformity.

use rand::Rng as _;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{asymmetry, cholesky, sym_condition, sym_min_eigenvector, symmetrize};
use crate::rng::{derive_seed, seeded_rng, Rng};
use crate::tensor::{DenseTensor, Mat};

/// Condition-number threshold above which the posterior row precision is
/// treated as numerically singular.
const MAX_CONDITION: f64 = 1e12;

/// Prior for the conjugate model.
#[derive(Debug, Clone)]
pub struct PriorSpec {
    /// Prior mean of the coefficient matrix, `p x R`.
    pub mean: Mat,
    /// Prior row precision `L_0`, `p x p`, symmetric positive-semidefinite.
    pub row_precision: Mat,
    /// Inverse Wishart scale `V_0`, `R x R`, symmetric positive-definite.
    pub scale: Mat,
    /// Inverse Wishart degrees of freedom, `> R - 1`.
    pub dof: f64,
}

impl PriorSpec {
    pub fn new(mean: Mat, row_precision: Mat, scale: Mat, dof: f64) -> Result<Self> {
        let (p, r) = (mean.nrows(), mean.ncols());
        if row_precision.nrows() != p || row_precision.ncols() != p {
            return Err(Error::invalid_argument(format!(
                "row precision must be {p}x{p}, got {}x{}",
                row_precision.nrows(),
                row_precision.ncols()
            )));
        }
        if scale.nrows() != r || scale.ncols() != r {
            return Err(Error::invalid_argument(format!(
                "scale must be {r}x{r}, got {}x{}",
                scale.nrows(),
                scale.ncols()
            )));
        }
        let tol = |m: &Mat| 1e-12 * m.abs().max().max(1.0);
        if asymmetry(&row_precision) > tol(&row_precision) {
            return Err(Error::invalid_argument("row precision is not symmetric"));
        }
        if asymmetry(&scale) > tol(&scale) {
            return Err(Error::invalid_argument("scale is not symmetric"));
        }
        if dof <= r as f64 - 1.0 {
            return Err(Error::invalid_argument(format!(
                "degrees of freedom must exceed R - 1 = {}, got {dof}",
                r as f64 - 1.0
            )));
        }
        cholesky(&scale, "prior scale")?;
        Ok(PriorSpec {
            mean,
            row_precision,
            scale,
            dof,
        })
    }

    /// Weakly informative default: zero mean, near-flat row precision
    /// `1e-6 I`, identity scale, and `R + 2` degrees of freedom (so the
    /// prior covariance mean exists).
    pub fn weakly_informative(p: usize, r: usize) -> Self {
        PriorSpec {
            mean: Mat::zeros(p, r),
            row_precision: Mat::identity(p, p) * 1e-6,
            scale: Mat::identity(r, r),
            dof: r as f64 + 2.0,
        }
    }

    pub fn coef_rows(&self) -> usize {
        self.mean.nrows()
    }

    pub fn coef_cols(&self) -> usize {
        self.mean.ncols()
    }
}

/// Conjugate posterior hyperparameters.
#[derive(Debug, Clone)]
pub struct PosteriorParams {
    /// Posterior coefficient mean `g_n`, `p x R`.
    pub mean: Mat,
    /// Posterior row precision `L_n = Z^T Z + L_0`, `p x p`.
    pub row_precision: Mat,
    /// Posterior Inverse Wishart scale `V_n`, `R x R`.
    pub scale: Mat,
    /// Posterior degrees of freedom `nu_n = nu_0 + N`.
    pub dof: f64,
}

/// Exact posterior update.
///
/// `L_n = Z^T Z + L_0`; `g_n = L_n^{-1}(Z^T G + L_0 g_0)`;
/// `nu_n = nu_0 + N`;
/// `V_n = V_0 + (G - Z g_n)^T (G - Z g_n) + (g_n - g_0)^T L_0 (g_n - g_0)`.
pub fn compute_posterior_params(g: &Mat, z: &Mat, prior: &PriorSpec) -> Result<PosteriorParams> {
    let n = g.nrows();
    let (p, r) = (prior.coef_rows(), prior.coef_cols());
    if z.nrows() != n {
        return Err(Error::invalid_argument(format!(
            "response has {n} rows but design has {}",
            z.nrows()
        )));
    }
    if n < 1 {
        return Err(Error::invalid_argument("need at least one observation"));
    }
    if z.ncols() != p {
        return Err(Error::invalid_argument(format!(
            "design has {} columns but prior mean has {p} rows",
            z.ncols()
        )));
    }
    if g.ncols() != r {
        return Err(Error::invalid_argument(format!(
            "response has {} columns but prior mean has {r}",
            g.ncols()
        )));
    }

    let row_precision = symmetrize(&(z.tr_mul(z) + &prior.row_precision));
    let cond = sym_condition(&row_precision);
    if !cond.is_finite() || cond > MAX_CONDITION {
        let combo = describe_combination(&sym_min_eigenvector(&row_precision));
        return Err(Error::SingularDesign(format!(
            "posterior row precision has condition {cond:.3e}; \
             near-null covariate combination: {combo}"
        )));
    }

    let chol = cholesky(&row_precision, "posterior row precision")?;
    let rhs = z.tr_mul(g) + &prior.row_precision * &prior.mean;
    let mean = chol.solve(&rhs);

    let resid = g - z * &mean;
    let shift = &mean - &prior.mean;
    let scale = symmetrize(
        &(&prior.scale + resid.tr_mul(&resid) + shift.tr_mul(&(&prior.row_precision * &shift))),
    );

    Ok(PosteriorParams {
        mean,
        row_precision,
        scale,
        dof: prior.dof + n as f64,
    })
}

fn describe_combination(v: &[f64]) -> String {
    let terms: Vec<String> = v
        .iter()
        .enumerate()
        .filter(|(_, c)| c.abs() > 1e-6)
        .map(|(i, c)| format!("{c:+.3}*x{i}"))
        .collect();
    if terms.is_empty() {
        "(numerically zero)".to_string()
    } else {
        terms.join(" ")
    }
}

/// One draw from `InverseWishart(V, nu)` with mean `V / (nu - R - 1)` for
/// `nu > R + 1`.
///
/// Uses the Bartlett factor `A` of a `Wishart(I, nu)` draw: with
/// `V = L L^T`, the matrix `M = L A^{-T}` gives `Sigma = M M^T`, whose
/// inverse is the Bartlett-constructed `Wishart(V^{-1}, nu)` draw. No
/// explicit inversion is performed.
pub fn sample_inverse_wishart(v: &Mat, nu: f64, rng: &mut Rng) -> Result<Mat> {
    let r = v.nrows();
    if v.ncols() != r {
        return Err(Error::invalid_argument("scale matrix must be square"));
    }
    if nu <= r as f64 - 1.0 {
        return Err(Error::invalid_argument(format!(
            "degrees of freedom must exceed R - 1 = {}, got {nu}",
            r as f64 - 1.0
        )));
    }
    let l = cholesky(v, "inverse Wishart scale")?.l();

    let mut bartlett = Mat::zeros(r, r);
    for i in 0..r {
        for j in 0..i {
            bartlett[(i, j)] = rng.sample(StandardNormal);
        }
        let chi = ChiSquared::new(nu - i as f64)
            .map_err(|e| Error::invalid_argument(format!("chi-squared dof: {e}")))?;
        bartlett[(i, i)] = chi.sample(rng).sqrt();
    }

    // M^T = A^{-1} L^T  (triangular solve), Sigma = M M^T = (M^T)^T (M^T).
    let mt = bartlett
        .solve_lower_triangular(&l.transpose())
        .ok_or_else(|| Error::invalid_argument("degenerate Bartlett factor"))?;
    Ok(symmetrize(&(mt.tr_mul(&mt))))
}

/// One draw from the matrix normal `MN(mean, row_cov, col_cov)`:
/// `mean + chol(row_cov) X chol(col_cov)^T` with `X` i.i.d. standard normal.
/// The covariance of the vectorized draw is `col_cov (x) row_cov`.
pub fn sample_matrix_normal(
    mean: &Mat,
    row_cov: &Mat,
    col_cov: &Mat,
    rng: &mut Rng,
) -> Result<Mat> {
    let row_chol = cholesky(row_cov, "row covariance")?.l();
    let col_chol = cholesky(col_cov, "column covariance")?.l();
    Ok(sample_matrix_normal_prechol(
        mean, &row_chol, &col_chol, rng,
    ))
}

fn sample_matrix_normal_prechol(mean: &Mat, row_chol: &Mat, col_chol: &Mat, rng: &mut Rng) -> Mat {
    let (p, r) = (mean.nrows(), mean.ncols());
    let mut xi = Mat::zeros(p, r);
    for j in 0..r {
        for i in 0..p {
            xi[(i, j)] = rng.sample(StandardNormal);
        }
    }
    mean + row_chol * xi * col_chol.transpose()
}

/// Chain-length settings for the exact posterior sampler.
#[derive(Debug, Clone, Copy)]
pub struct ChainConfig {
    pub n_total: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            n_total: 2000,
            burn_in: 500,
            thin: 1,
            seed: 0,
        }
    }
}

/// Retained posterior draws of the coefficient matrix and error covariance.
#[derive(Debug, Clone)]
pub struct McmcChain {
    /// Retained coefficient draws, each `p x R`.
    pub coef_samples: Vec<Mat>,
    /// Retained error covariance draws, each `R x R` SPD.
    pub sigma_samples: Vec<Mat>,
    pub n_total: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
}

impl McmcChain {
    /// Number of retained samples, `floor((n_total - burn_in) / thin)`.
    pub fn len(&self) -> usize {
        self.coef_samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coef_samples.is_empty()
    }

    /// Posterior mean of the coefficient matrix across retained samples.
    pub fn coef_mean(&self) -> Mat {
        let mut acc = Mat::zeros(self.coef_samples[0].nrows(), self.coef_samples[0].ncols());
        for s in &self.coef_samples {
            acc += s;
        }
        acc / self.coef_samples.len() as f64
    }

    /// Pack the coefficient draws into an order-3 tensor `(M', p, R)`.
    pub fn coef_tensor(&self) -> DenseTensor {
        stack_to_tensor(&self.coef_samples)
    }

    /// Pack the covariance draws into an order-3 tensor `(M', R, R)`.
    pub fn sigma_tensor(&self) -> DenseTensor {
        stack_to_tensor(&self.sigma_samples)
    }

    /// Rebuild the coefficient stream from a persisted `(M', p, R)` tensor.
    pub fn coef_from_tensor(t: &DenseTensor) -> Result<Vec<Mat>> {
        unstack_from_tensor(t)
    }
}

fn stack_to_tensor(mats: &[Mat]) -> DenseTensor {
    let m = mats.len();
    let (p, r) = (mats[0].nrows(), mats[0].ncols());
    let mut values = vec![0.0; m * p * r];
    for (s, mat) in mats.iter().enumerate() {
        for j in 0..r {
            for i in 0..p {
                values[s + m * (i + p * j)] = mat[(i, j)];
            }
        }
    }
    DenseTensor::new(vec![m, p, r], values).expect("consistent stack dims")
}

fn unstack_from_tensor(t: &DenseTensor) -> Result<Vec<Mat>> {
    if t.order() != 3 {
        return Err(Error::invalid_argument(format!(
            "expected an order-3 sample stack, got order {}",
            t.order()
        )));
    }
    let (m, p, r) = (t.dims()[0], t.dims()[1], t.dims()[2]);
    let values = t.values();
    let mut out = Vec::with_capacity(m);
    for s in 0..m {
        out.push(Mat::from_fn(p, r, |i, j| values[s + m * (i + p * j)]));
    }
    Ok(out)
}

/// Draw an exact posterior sample chain for `G = Z C* + E*`.
///
/// Each retained iteration draws `Sigma ~ IW(V_n, nu_n)` and then
/// `C* ~ MN(g_n, L_n^{-1}, Sigma)`; the output is a pure function of the
/// inputs and the seed.
pub fn run_sampler(g: &Mat, z: &Mat, prior: &PriorSpec, cfg: &ChainConfig) -> Result<McmcChain> {
    if cfg.n_total <= cfg.burn_in {
        return Err(Error::invalid_argument(format!(
            "n_total ({}) must exceed burn_in ({})",
            cfg.n_total, cfg.burn_in
        )));
    }
    if cfg.thin < 1 {
        return Err(Error::invalid_argument("thin must be at least 1"));
    }
    let retained = (cfg.n_total - cfg.burn_in) / cfg.thin;
    if retained == 0 {
        return Err(Error::invalid_argument(
            "chain settings retain no samples (thin exceeds n_total - burn_in)",
        ));
    }

    let post = compute_posterior_params(g, z, prior)?;
    let row_cov = symmetrize(&cholesky(&post.row_precision, "posterior row precision")?.inverse());
    let row_chol = cholesky(&row_cov, "posterior row covariance")?.l();

    let mut rng = seeded_rng(cfg.seed);
    let mut coef_samples = Vec::with_capacity(retained);
    let mut sigma_samples = Vec::with_capacity(retained);
    for i in 0..cfg.n_total {
        let sigma = sample_inverse_wishart(&post.scale, post.dof, &mut rng)?;
        let col_chol = cholesky(&sigma, "drawn error covariance")?.l();
        let coef = sample_matrix_normal_prechol(&post.mean, &row_chol, &col_chol, &mut rng);
        if i >= cfg.burn_in && (i - cfg.burn_in + 1).is_multiple_of(cfg.thin) {
            coef_samples.push(coef);
            sigma_samples.push(sigma);
        }
    }
    debug_assert_eq!(coef_samples.len(), retained);

    Ok(McmcChain {
        coef_samples,
        sigma_samples,
        n_total: cfg.n_total,
        burn_in: cfg.burn_in,
        thin: cfg.thin,
        seed: cfg.seed,
    })
}

/// Child seeds for parallel chains or folds.
pub fn chain_seed(parent: u64, stream: u64) -> u64 {
    derive_seed(parent, stream)
}
