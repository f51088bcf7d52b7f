//! Loading matrix and projector linking voxel space and basis space.
//!
//! For a fitted order-4 model with spatial factors `A1, A2, A3` and weights
//! `lambda`, the loading matrix is `L = diag(lambda) * kr([A3, A2, A1])^T`
//! (R x Nv), and the projector `P` (Nv x R) is its Moore-Penrose
//! pseudoinverse. With the weights absorbed into `L`, the subject-mode
//! factor `G` equals the fourth factor matrix exactly, and the mode-4
//! unfolding of the data satisfies `Y ~= G * L` up to the CP fit error.

use crate::cp::CpModel;
use crate::error::{Error, Result};
use crate::linalg::{pinv, PINV_RTOL};
use crate::tensor::{khatri_rao, Mat};

/// Spatial loading matrix and projector for one fitted model.
#[derive(Debug, Clone)]
pub struct BasisMaps {
    /// `R x Nv` loading matrix, weights absorbed.
    pub loading: Mat,
    /// `Nv x R` Moore-Penrose pseudoinverse of the loading matrix.
    pub projector: Mat,
    pub spatial_dims: [usize; 3],
    pub rank: usize,
}

impl BasisMaps {
    pub fn n_voxels(&self) -> usize {
        self.spatial_dims.iter().product()
    }
}

/// Build the loading/projector pair from an order-4 CP model whose first
/// three modes are spatial and whose fourth mode indexes subjects.
pub fn build_basis(model: &CpModel) -> Result<BasisMaps> {
    if model.order() != 4 {
        return Err(Error::invalid_argument(format!(
            "basis construction needs an order-4 model, got order {}",
            model.order()
        )));
    }
    let spatial_dims = [
        model.factors[0].nrows(),
        model.factors[1].nrows(),
        model.factors[2].nrows(),
    ];
    let loading = loading_from_parts(
        &model.lambda,
        &model.factors[0],
        &model.factors[1],
        &model.factors[2],
    )?;
    let projector = pinv(&loading, PINV_RTOL)?;
    Ok(BasisMaps {
        loading,
        projector,
        spatial_dims,
        rank: model.rank,
    })
}

/// `diag(lambda) * kr([A3, A2, A1])^T` without touching the subject factor.
pub fn loading_from_parts(lambda: &[f64], a1: &Mat, a2: &Mat, a3: &Mat) -> Result<Mat> {
    let kr = khatri_rao(&[a3, a2, a1])?;
    let mut loading = kr.transpose();
    for (r, &l) in lambda.iter().enumerate() {
        loading.row_mut(r).scale_mut(l);
    }
    Ok(loading)
}

/// Project voxel-space rows into basis space: `Y * P` (`N x Nv -> N x R`).
pub fn project(y: &Mat, basis: &BasisMaps) -> Result<Mat> {
    if y.ncols() != basis.n_voxels() {
        return Err(Error::invalid_argument(format!(
            "projection expects {} columns, got {}",
            basis.n_voxels(),
            y.ncols()
        )));
    }
    Ok(y * &basis.projector)
}

/// Map basis-space coefficients back to voxel space: `C* * L`
/// (`p x R -> p x Nv`). Each output row reshapes to an order-3 voxel map by
/// the tensor linearization.
pub fn backproject(coeff_star: &Mat, basis: &BasisMaps) -> Result<Mat> {
    if coeff_star.ncols() != basis.rank {
        return Err(Error::invalid_argument(format!(
            "backprojection expects {} columns, got {}",
            basis.rank,
            coeff_star.ncols()
        )));
    }
    Ok(coeff_star * &basis.loading)
}
