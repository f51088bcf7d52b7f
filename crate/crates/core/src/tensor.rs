//! Dense tensors and the multilinear primitives everything else builds on.
//!
//! Values are linearized first-index-fastest: element `(i_0, ..., i_{K-1})`
//! (zero-based) lives at `i_0 + I_0*(i_1 + I_1*(i_2 + ...))`. For an order-2
//! tensor this is exactly column-major storage, so conversions to and from
//! [`Mat`] are copies with no reordering.
//!
//! Matricization follows the Kolda convention: the mode-`n` unfolding
//! `X_(n)` has `I_n` rows, and its column index enumerates the remaining
//! modes with the lowest remaining mode varying fastest. The Khatri-Rao
//! product is defined so that `kr([A3, A2, A1])` lines up with the columns of
//! a mode-4 unfolding: within each column the index of the *last* listed
//! factor varies fastest.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Dense dynamically-sized real matrix, column-major.
pub type Mat = DMatrix<f64>;

/// A dense order-K tensor of `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    values: Vec<f64>,
}

impl DenseTensor {
    /// Build a tensor from its dimension vector and first-index-fastest
    /// linearized values.
    pub fn new(dims: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::invalid_argument("tensor order must be at least 1"));
        }
        if dims.contains(&0) {
            return Err(Error::invalid_argument(format!(
                "every dimension must be positive, got {dims:?}"
            )));
        }
        let total = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::invalid_argument("dimension product overflows usize"))?;
        if values.len() != total {
            return Err(Error::invalid_argument(format!(
                "value count {} does not match dimension product {}",
                values.len(),
                total
            )));
        }
        Ok(DenseTensor { dims, values })
    }

    /// All-zero tensor of the given dimensions.
    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        let total = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::invalid_argument("dimension product overflows usize"))?;
        DenseTensor::new(dims, vec![0.0; total])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Tensor order K (number of modes).
    pub fn order(&self) -> usize {
        self.dims.len()
    }

    /// Total number of entries.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Linear offset of a zero-based multi-index.
    pub fn linear_index(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.dims.len());
        let mut offset = 0;
        let mut stride = 1;
        for (i, (&ix, &dim)) in index.iter().zip(&self.dims).enumerate() {
            debug_assert!(ix < dim, "index {ix} out of range for mode {i} (dim {dim})");
            offset += ix * stride;
            stride *= dim;
        }
        offset
    }

    /// Element at a zero-based multi-index.
    pub fn get(&self, index: &[usize]) -> f64 {
        self.values[self.linear_index(index)]
    }

    pub fn set(&mut self, index: &[usize], value: f64) {
        let i = self.linear_index(index);
        self.values[i] = value;
    }

    /// True when every entry is finite.
    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Interpret an order-2 tensor as a matrix (same layout, no reordering).
    pub fn to_matrix(&self) -> Result<Mat> {
        if self.order() != 2 {
            return Err(Error::invalid_argument(format!(
                "expected an order-2 tensor, got order {}",
                self.order()
            )));
        }
        Ok(Mat::from_column_slice(
            self.dims[0],
            self.dims[1],
            &self.values,
        ))
    }

    /// Wrap a matrix as an order-2 tensor (same layout, no reordering).
    pub fn from_matrix(m: &Mat) -> Self {
        DenseTensor {
            dims: vec![m.nrows(), m.ncols()],
            values: m.as_slice().to_vec(),
        }
    }

    /// Restrict one mode to the given (zero-based) indices, in order.
    ///
    /// Used to slice subjects out of the fourth mode for cross-validation.
    pub fn select_along_mode(&self, mode: usize, indices: &[usize]) -> Result<Self> {
        let k = self.order();
        if mode >= k {
            return Err(Error::invalid_argument(format!(
                "mode {mode} out of range for an order-{k} tensor"
            )));
        }
        if indices.is_empty() {
            return Err(Error::invalid_argument("index selection must be nonempty"));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.dims[mode]) {
            return Err(Error::invalid_argument(format!(
                "index {bad} out of range for mode {mode} (dim {})",
                self.dims[mode]
            )));
        }

        let left: usize = self.dims[..mode].iter().product();
        let right: usize = self.dims[mode + 1..].iter().product();
        let dim_m = self.dims[mode];

        let mut dims = self.dims.clone();
        dims[mode] = indices.len();
        let mut values = Vec::with_capacity(left * indices.len() * right);
        for r in 0..right {
            for &sel in indices {
                let start = left * (sel + dim_m * r);
                values.extend_from_slice(&self.values[start..start + left]);
            }
        }
        DenseTensor::new(dims, values)
    }
}

/// Mode-`mode` matricization (zero-based mode).
///
/// Returns the `I_mode x prod(other dims)` unfolding; the column index runs
/// over the remaining modes with the lowest remaining mode varying fastest,
/// so for a `p1 x p2 x p3 x N` tensor, `matricize(t, 3)` is `N x (p1 p2 p3)`
/// with voxel linear index `j = i1 + p1*i2 + p1*p2*i3`.
pub fn matricize(t: &DenseTensor, mode: usize) -> Result<Mat> {
    let k = t.order();
    if mode >= k {
        return Err(Error::invalid_argument(format!(
            "mode {mode} out of range for an order-{k} tensor"
        )));
    }
    let left: usize = t.dims[..mode].iter().product();
    let right: usize = t.dims[mode + 1..].iter().product();
    let dim_m = t.dims[mode];

    let mut out = Mat::zeros(dim_m, left * right);
    for r in 0..right {
        for m in 0..dim_m {
            let src = left * (m + dim_m * r);
            for l in 0..left {
                out[(m, l + left * r)] = t.values[src + l];
            }
        }
    }
    Ok(out)
}

/// Inverse of [`matricize`]: reassemble a tensor of shape `dims` from its
/// mode-`mode` unfolding. Exact round trip, bit for bit.
pub fn fold(m: &Mat, mode: usize, dims: &[usize]) -> Result<DenseTensor> {
    let k = dims.len();
    if k == 0 {
        return Err(Error::invalid_argument("dimension vector must be nonempty"));
    }
    if mode >= k {
        return Err(Error::invalid_argument(format!(
            "mode {mode} out of range for an order-{k} tensor"
        )));
    }
    let left: usize = dims[..mode].iter().product();
    let right: usize = dims[mode + 1..].iter().product();
    let dim_m = dims[mode];
    if m.nrows() != dim_m || m.ncols() != left * right {
        return Err(Error::invalid_argument(format!(
            "matrix {}x{} does not match mode-{mode} unfolding of {dims:?} ({}x{})",
            m.nrows(),
            m.ncols(),
            dim_m,
            left * right
        )));
    }

    let mut t = DenseTensor::zeros(dims.to_vec())?;
    for r in 0..right {
        for mi in 0..dim_m {
            let dst = left * (mi + dim_m * r);
            for l in 0..left {
                t.values[dst + l] = m[(mi, l + left * r)];
            }
        }
    }
    Ok(t)
}

/// Khatri-Rao (columnwise Kronecker) product of the given matrices.
///
/// All inputs must share a column count R. Column `r` of the result is the
/// Kronecker product of the r-th columns in list order, with the index of the
/// *last* listed matrix varying fastest. `kr([A3, A2, A1])` therefore matches
/// the column enumeration of a mode-4 unfolding.
pub fn khatri_rao(matrices: &[&Mat]) -> Result<Mat> {
    let Some(first) = matrices.first() else {
        return Err(Error::invalid_argument(
            "Khatri-Rao product needs at least one matrix",
        ));
    };
    let r = first.ncols();
    if let Some(bad) = matrices.iter().find(|m| m.ncols() != r) {
        return Err(Error::invalid_argument(format!(
            "Khatri-Rao column counts differ: expected {r}, got {}",
            bad.ncols()
        )));
    }

    let total: usize = matrices.iter().map(|m| m.nrows()).product();
    let mut acc = Mat::repeat(1, r, 1.0);
    for m in matrices {
        let rows_acc = acc.nrows();
        let rows_m = m.nrows();
        let mut next = Mat::zeros(rows_acc * rows_m, r);
        for c in 0..r {
            for ia in 0..rows_acc {
                let a = acc[(ia, c)];
                for im in 0..rows_m {
                    next[(ia * rows_m + im, c)] = a * m[(im, c)];
                }
            }
        }
        acc = next;
    }
    debug_assert_eq!(acc.nrows(), total);
    Ok(acc)
}

/// Evaluate a CP model `sum_r lambda_r f1[:,r] o f2[:,r] o ... o fK[:,r]`
/// as a dense tensor. Factor `k` must have `I_k` rows; all factors share the
/// column count `R = lambda.len()`.
pub fn reconstruct_cp(lambda: &[f64], factors: &[&Mat]) -> Result<DenseTensor> {
    if factors.is_empty() {
        return Err(Error::invalid_argument("need at least one factor matrix"));
    }
    let r = lambda.len();
    if let Some(bad) = factors.iter().position(|f| f.ncols() != r) {
        return Err(Error::invalid_argument(format!(
            "factor {bad} has {} columns but lambda has length {r}",
            factors[bad].ncols()
        )));
    }
    let dims: Vec<usize> = factors.iter().map(|f| f.nrows()).collect();

    // Mode-0 unfolding of the result is F0 * diag(lambda) * kr(rest)^T, and
    // its column-major storage is exactly the tensor's linearization.
    let mut scaled = (*factors[0]).clone();
    for (c, &l) in lambda.iter().enumerate() {
        scaled.column_mut(c).scale_mut(l);
    }
    let rest: Vec<&Mat> = factors[1..].iter().rev().copied().collect();
    let unfolded = if rest.is_empty() {
        // Order-1 model: row sums of the scaled factor.
        Mat::from_fn(dims[0], 1, |i, _| scaled.row(i).sum())
    } else {
        let kr = khatri_rao(&rest)?;
        &scaled * kr.transpose()
    };
    DenseTensor::new(dims, unfolded.as_slice().to_vec())
}

/// Frobenius norm: square root of the sum of squared entries.
pub fn frobenius_norm(t: &DenseTensor) -> f64 {
    t.values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Frobenius norm of the difference of two same-shaped tensors.
pub fn frobenius_distance(a: &DenseTensor, b: &DenseTensor) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::invalid_argument(format!(
            "shape mismatch: {:?} vs {:?}",
            a.dims(),
            b.dims()
        )));
    }
    Ok(a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}
