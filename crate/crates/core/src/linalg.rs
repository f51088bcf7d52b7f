//! Small dense linear algebra helpers shared across modules.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};
use crate::tensor::Mat;

/// Relative singular-value cutoff used by every pseudoinverse in the crate.
pub const PINV_RTOL: f64 = 1e-12;

/// Moore-Penrose pseudoinverse via SVD.
///
/// Singular values below `rtol * sigma_max` are treated as zero, which keeps
/// rank-deficient inputs (collinear CP components, duplicated factors) from
/// blowing up.
pub fn pinv(m: &Mat, rtol: f64) -> Result<Mat> {
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd requested u");
    let v_t = svd.v_t.as_ref().expect("svd requested v_t");
    let smax = svd.singular_values.max();
    let cut = rtol * smax;

    // pinv = V * Sigma^+ * U^T, assembled as (Sigma^+ U^T) first.
    let k = svd.singular_values.len();
    let mut sinv_ut = DMatrix::zeros(k, u.nrows());
    for i in 0..k {
        let s = svd.singular_values[i];
        if s > cut && s > 0.0 {
            let inv = 1.0 / s;
            for j in 0..u.nrows() {
                sinv_ut[(i, j)] = inv * u[(j, i)];
            }
        }
    }
    Ok(v_t.transpose() * sinv_ut)
}

/// Largest/smallest singular value ratio of a symmetric matrix, computed from
/// its eigenvalues. Returns `f64::INFINITY` when the smallest magnitude is 0.
pub fn sym_condition(m: &Mat) -> f64 {
    let eig = m.clone().symmetric_eigen();
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for &v in eig.eigenvalues.iter() {
        let a = v.abs();
        lo = lo.min(a);
        hi = hi.max(a);
    }
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Eigenvector of the smallest eigenvalue of a symmetric matrix. Used to name
/// the near-null covariate combination in singular-design errors.
pub fn sym_min_eigenvector(m: &Mat) -> Vec<f64> {
    let eig = m.clone().symmetric_eigen();
    let mut min_i = 0;
    for i in 1..eig.eigenvalues.len() {
        if eig.eigenvalues[i].abs() < eig.eigenvalues[min_i].abs() {
            min_i = i;
        }
    }
    eig.eigenvectors.column(min_i).iter().copied().collect()
}

/// Cholesky factorization that reports failure as `InvalidArgument` naming
/// the matrix role.
pub fn cholesky(m: &Mat, role: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m.clone()).ok_or_else(|| {
        Error::invalid_argument(format!(
            "{role} is not symmetric positive-definite (Cholesky failed)"
        ))
    })
}

/// Force exact symmetry: (m + m^T) / 2.
pub fn symmetrize(m: &Mat) -> Mat {
    let mut out = m.clone();
    for i in 0..m.nrows() {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Max absolute deviation from symmetry, |m - m^T|_max.
pub fn asymmetry(m: &Mat) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..i {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;
    use rand::Rng as _;

    #[test]
    fn pinv_of_invertible_is_inverse() {
        let m = Mat::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let p = pinv(&m, PINV_RTOL).unwrap();
        let id = &m * &p;
        assert!((id - Mat::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn pinv_satisfies_penrose_conditions_on_rank_deficient_input() {
        let mut rng = seeded_rng(5);
        // 4x3 of rank 2: third column is the sum of the first two.
        let mut m = Mat::from_fn(4, 3, |_, _| rng.random_range(-1.0..1.0));
        let c2 = m.column(0) + m.column(1);
        m.set_column(2, &c2);
        let p = pinv(&m, PINV_RTOL).unwrap();
        assert!((&m * &p * &m - &m).norm() < 1e-10);
        assert!((&p * &m * &p - &p).norm() < 1e-10);
        assert!(asymmetry(&(&m * &p)) < 1e-10);
        assert!(asymmetry(&(&p * &m)) < 1e-10);
    }

    #[test]
    fn condition_of_identity_is_one() {
        let id = Mat::identity(3, 3);
        assert!((sym_condition(&id) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn min_eigenvector_finds_null_direction() {
        // Rank-1 matrix vv^T with v = (1,1)/sqrt(2): null space is (1,-1).
        let m = Mat::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        let v = sym_min_eigenvector(&m);
        assert!((v[0] + v[1]).abs() < 1e-12);
    }
}
