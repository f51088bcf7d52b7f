//! Population-level analysis of stacks of 3D volumes via a CP tensor basis.
//!
//! The pipeline: fit a rank-R CP decomposition of a `p1 x p2 x p3 x N`
//! response tensor ([`cp::cp_als`]), turn the spatial factors into a loading
//! matrix / projector pair ([`basis::build_basis`]), regress the subject-mode
//! factor on covariates with an exact conjugate Matrix Normal-Inverse Wishart
//! model ([`bayes`]), and flag significant voxels with simultaneous credible
//! bands plus cluster extraction ([`simbas`]). Rank selection by k-fold
//! cross-validation lives in [`rank`], synthetic ground-truth generation in
//! [`synth`], and file formats in [`io`].

pub mod basis;
pub mod bayes;
pub mod cp;
pub mod error;
pub mod io;
pub mod linalg;
pub mod rank;
pub mod rng;
pub mod simbas;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{DenseTensor, Mat};
