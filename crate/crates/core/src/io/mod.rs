//! File formats: the binary tensor container, covariate CSVs, a minimal
//! NIfTI-1 reader, and fitted-model / chain persistence.

pub mod covariates;
pub mod model;
pub mod nifti;
pub mod tensor_file;

pub use covariates::{read_covariates, write_covariates, CovariateTable};
pub use model::{read_chain_samples, read_cp_model, write_chain, write_cp_model};
pub use nifti::{read_nifti1, NiftiVolume};
pub use tensor_file::{read_matrix, read_tensor, write_matrix, write_tensor};
