//! Dense linear algebra and Gaussian distribution calculus.
//!
//! Everything here is sized for desk scale (matrix side ≤ 64), so storage
//! is plain row-major `Vec<f64>` and factorizations are unblocked Cholesky.
//! All operations are pure functions of their inputs.

mod gaussian;
mod matrix;
mod structure;

pub use gaussian::{kl_diag_gaussian, kl_full_gaussian, DiagGaussian, FullGaussian};
pub use matrix::{DenseMatrix, DenseVector};
pub use structure::{
    kron_identity_feature, matrix_determinant_lemma, sherman_morrison_update, unvec_row_major,
    vec_row_major,
};
