use super::matrix::{DenseMatrix, DenseVector};
use crate::{Error, Result};

/// Row-major vectorization: `[[1,2],[3,4]] → [1,2,3,4]`.
///
/// This ordering pairs with [`kron_identity_feature`] so that
/// `vec(W)ᵀ · η̃ = (W·η)ᵀ` holds exactly.
pub fn vec_row_major(w: &DenseMatrix) -> DenseVector {
    DenseVector::from_vec(w.as_slice().to_vec())
}

/// Inverse of [`vec_row_major`] for a known shape.
pub fn unvec_row_major(v: &DenseVector, rows: usize, cols: usize) -> Result<DenseMatrix> {
    if v.len() != rows * cols {
        return Err(Error::DimensionMismatch {
            expected: rows * cols,
            got: v.len(),
            what: "unvec_row_major",
        });
    }
    Ok(DenseMatrix::from_vec(rows, cols, v.as_slice().to_vec()))
}

/// Block-diagonal feature expansion `I_c ⊗ η` (a `cd × c` matrix with `η`
/// repeated down the diagonal blocks).
pub fn kron_identity_feature(eta: &DenseVector, c: usize) -> DenseMatrix {
    assert!(c >= 1, "c must be at least 1");
    let d = eta.len();
    let mut m = DenseMatrix::zeros(c * d, c);
    for block in 0..c {
        for i in 0..d {
            m[(block * d + i, block)] = eta[i];
        }
    }
    m
}

/// Rank-one inverse update: given `Λ⁻¹`, return `(Λ + η·ηᵀ)⁻¹`.
pub fn sherman_morrison_update(lambda_inv: &DenseMatrix, eta: &DenseVector) -> DenseMatrix {
    let u = lambda_inv.matvec(eta);
    let denom = 1.0 + eta.dot(&u);
    let correction = u.outer(&u).scaled(1.0 / denom);
    lambda_inv.sub(&correction)
}

/// `log det(Λ + η·ηᵀ) − log det(Λ) = log(1 + ηᵀ·Λ⁻¹·η)`.
pub fn matrix_determinant_lemma(lambda: &DenseMatrix, eta: &DenseVector) -> Result<f64> {
    let x = lambda.solve_pd(eta)?;
    Ok((1.0 + eta.dot(&x)).ln())
}
