use super::matrix::{DenseMatrix, DenseVector};
use crate::{Error, Result};

/// Diagonal-covariance Gaussian: a mean and one variance per dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagGaussian {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl DiagGaussian {
    pub fn new(mean: Vec<f64>, var: Vec<f64>) -> Result<Self> {
        if mean.len() != var.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                got: var.len(),
                what: "DiagGaussian mean/var",
            });
        }
        for &v in &var {
            if !(v > 0.0) {
                return Err(Error::NonPositive { what: "DiagGaussian variance", value: v });
            }
        }
        Ok(Self { mean, var })
    }

    pub fn standard(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], var: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Log density at `x`.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
                what: "log_density point",
            });
        }
        let mut acc = 0.0;
        for i in 0..self.dim() {
            let d = x[i] - self.mean[i];
            acc += -0.5 * (2.0 * std::f64::consts::PI * self.var[i]).ln()
                - 0.5 * d * d / self.var[i];
        }
        Ok(acc)
    }
}

/// Full-covariance Gaussian.
#[derive(Debug, Clone)]
pub struct FullGaussian {
    pub mean: DenseVector,
    pub cov: DenseMatrix,
}

impl FullGaussian {
    pub fn new(mean: DenseVector, cov: DenseMatrix) -> Result<Self> {
        if cov.rows() != mean.len() || cov.cols() != mean.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                got: cov.rows(),
                what: "FullGaussian mean/cov",
            });
        }
        if !cov.is_symmetric(1e-10) {
            return Err(Error::InvalidParameter {
                what: "FullGaussian covariance",
                detail: "not symmetric within 1e-10".into(),
            });
        }
        // Positive-definiteness check; the factor is discarded.
        cov.cholesky().map_err(|_| Error::SingularMatrix { what: "FullGaussian covariance" })?;
        Ok(Self { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Differential entropy in nats.
    pub fn entropy(&self) -> Result<f64> {
        let k = self.dim() as f64;
        Ok(0.5 * (k * (1.0 + (2.0 * std::f64::consts::PI).ln()) + self.cov.logdet_pd()?))
    }
}

/// Closed-form KL divergence between diagonal Gaussians, `KL(p ‖ q)`.
pub fn kl_diag_gaussian(p: &DiagGaussian, q: &DiagGaussian) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: q.dim(),
            what: "kl_diag_gaussian",
        });
    }
    let mut acc = 0.0;
    for i in 0..p.dim() {
        let (mp, vp) = (p.mean[i], p.var[i]);
        let (mq, vq) = (q.mean[i], q.var[i]);
        if !(vp > 0.0) {
            return Err(Error::NonPositive { what: "p variance", value: vp });
        }
        if !(vq > 0.0) {
            return Err(Error::NonPositive { what: "q variance", value: vq });
        }
        let d = mp - mq;
        acc += 0.5 * (vp / vq + d * d / vq - 1.0 - (vp / vq).ln());
    }
    // Clamp the tiny negative round-off that identical inputs can produce.
    Ok(acc.max(0.0))
}

/// Closed-form KL divergence between full-covariance Gaussians, `KL(p ‖ q)`.
pub fn kl_full_gaussian(p: &FullGaussian, q: &FullGaussian) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: q.dim(),
            what: "kl_full_gaussian",
        });
    }
    let k = p.dim();
    let q_inv = q.cov.inverse_pd().map_err(|_| Error::SingularMatrix { what: "kl q covariance" })?;
    // tr(Σq⁻¹ Σp)
    let prod = q_inv.matmul(&p.cov);
    let mut trace = 0.0;
    for i in 0..k {
        trace += prod[(i, i)];
    }
    let diff = q.mean.sub(&p.mean);
    let maha = q_inv.quad_form(&diff);
    let logdet_ratio = q.cov.logdet_pd()? - p.cov.logdet_pd()?;
    Ok((0.5 * (trace + maha - k as f64 + logdet_ratio)).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag1(m: f64, v: f64) -> DiagGaussian {
        DiagGaussian::new(vec![m], vec![v]).unwrap()
    }

    #[test]
    fn kl_identical_is_zero() {
        let p = DiagGaussian::standard(3);
        assert_eq!(kl_diag_gaussian(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn kl_mean_shift() {
        // KL(N(1,1) ‖ N(0,1)) = 1/2, cross-checked by quadrature in
        // tests/quadrature_oracle.rs.
        let v = kl_diag_gaussian(&diag1(1.0, 1.0), &diag1(0.0, 1.0)).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn kl_variance_inflation() {
        // KL(N(0,4) ‖ N(0,1)) = (4 − 1 − ln 4)/2 = 0.806852819...
        let v = kl_diag_gaussian(&diag1(0.0, 4.0), &diag1(0.0, 1.0)).unwrap();
        assert!((v - 0.80685281944005469).abs() < 1e-12);
    }

    #[test]
    fn kl_rejects_dimension_mismatch() {
        let p = DiagGaussian::standard(2);
        let q = DiagGaussian::standard(3);
        assert!(matches!(
            kl_diag_gaussian(&p, &q),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn diag_gaussian_rejects_nonpositive_variance() {
        assert!(matches!(
            DiagGaussian::new(vec![0.0], vec![0.0]),
            Err(Error::NonPositive { .. })
        ));
    }

    #[test]
    fn kl_full_identical_is_zero() {
        let g = FullGaussian::new(DenseVector::zeros(2), DenseMatrix::identity(2)).unwrap();
        assert_eq!(kl_full_gaussian(&g, &g).unwrap(), 0.0);
    }

    #[test]
    fn kl_full_one_dimensional_case() {
        // 1-D, means 0, vars 2 vs 1: (2 − 1 − ln 2)/2 = 0.153426...
        let p = FullGaussian::new(
            DenseVector::zeros(1),
            DenseMatrix::from_rows(&[vec![2.0]]),
        )
        .unwrap();
        let q = FullGaussian::new(DenseVector::zeros(1), DenseMatrix::identity(1)).unwrap();
        let v = kl_full_gaussian(&p, &q).unwrap();
        assert!((v - 0.15342640972002733).abs() < 1e-12);
    }

    #[test]
    fn kl_full_isotropic_additivity() {
        // 2-D isotropic case is twice the 1-D value.
        let p2 = FullGaussian::new(
            DenseVector::zeros(2),
            DenseMatrix::identity(2).scaled(2.0),
        )
        .unwrap();
        let q2 = FullGaussian::new(DenseVector::zeros(2), DenseMatrix::identity(2)).unwrap();
        let v2 = kl_full_gaussian(&p2, &q2).unwrap();
        assert!((v2 - 2.0 * 0.15342640972002733).abs() < 1e-12);
    }

    #[test]
    fn kl_full_rejects_singular() {
        let cov = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert!(FullGaussian::new(DenseVector::zeros(2), cov).is_err());
    }

    #[test]
    fn full_gaussian_rejects_asymmetry() {
        let cov = DenseMatrix::from_rows(&[vec![1.0, 0.5], vec![0.2, 1.0]]);
        assert!(FullGaussian::new(DenseVector::zeros(2), cov).is_err());
    }
}
