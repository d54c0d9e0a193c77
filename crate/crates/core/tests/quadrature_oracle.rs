//! Independent quadrature oracle for the closed-form Gaussian KL values.
//!
//! The densities are integrated directly with composite Simpson's rule;
//! no code path from the closed forms is reused.

use cermic::numerics::{kl_diag_gaussian, kl_full_gaussian, DenseMatrix, DenseVector};
use cermic::numerics::{DiagGaussian, FullGaussian};

/// Composite Simpson integration of `f` over [a, b].
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    assert!(n % 2 == 0);
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let x = a + i as f64 * h;
        acc += f(x) * if i % 2 == 0 { 2.0 } else { 4.0 };
    }
    acc * h / 3.0
}

fn normal_log_pdf(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (x - mean) * (x - mean) / var - 0.5 * (2.0 * std::f64::consts::PI * var).ln()
}

/// KL(p ‖ q) between 1-D Gaussians by direct integration of p·ln(p/q),
/// evaluated through log densities so deep tails underflow to zero instead
/// of dividing by zero.
fn kl_by_quadrature(mp: f64, vp: f64, mq: f64, vq: f64) -> f64 {
    let f = move |x: f64| {
        let lp = normal_log_pdf(x, mp, vp);
        let lq = normal_log_pdf(x, mq, vq);
        let p = lp.exp();
        if p == 0.0 {
            0.0
        } else {
            p * (lp - lq)
        }
    };
    let spread = vp.sqrt().max(vq.sqrt());
    simpson(&f, mp - 40.0 * spread, mp + 40.0 * spread, 80_000)
}

#[test]
fn mean_shift_kl_matches_quadrature() {
    let closed = kl_diag_gaussian(
        &DiagGaussian::new(vec![1.0], vec![1.0]).unwrap(),
        &DiagGaussian::standard(1),
    )
    .unwrap();
    let quad = kl_by_quadrature(1.0, 1.0, 0.0, 1.0);
    assert!((closed - 0.5).abs() < 1e-12);
    assert!((closed - quad).abs() < 1e-5, "closed {closed} quad {quad}");
}

#[test]
fn variance_inflation_kl_matches_quadrature() {
    let closed = kl_diag_gaussian(
        &DiagGaussian::new(vec![0.0], vec![4.0]).unwrap(),
        &DiagGaussian::standard(1),
    )
    .unwrap();
    let quad = kl_by_quadrature(0.0, 4.0, 0.0, 1.0);
    assert!((closed - 0.80685281944005469).abs() < 1e-12);
    assert!((closed - quad).abs() < 1e-5, "closed {closed} quad {quad}");
}

#[test]
fn full_gaussian_one_dim_matches_quadrature() {
    let p = FullGaussian::new(DenseVector::zeros(1), DenseMatrix::from_rows(&[vec![2.0]]))
        .unwrap();
    let q = FullGaussian::new(DenseVector::zeros(1), DenseMatrix::identity(1)).unwrap();
    let closed = kl_full_gaussian(&p, &q).unwrap();
    let quad = kl_by_quadrature(0.0, 2.0, 0.0, 1.0);
    assert!((closed - quad).abs() < 1e-5, "closed {closed} quad {quad}");
}

#[test]
fn random_one_dim_cases_match_quadrature() {
    use rand::Rng;
    let mut r = cermic::rng::stream(23, "quadrature", 0);
    for _ in 0..25 {
        let (mp, vp) = (r.gen_range(-2.0..2.0), r.gen_range(0.2..4.0));
        let (mq, vq) = (r.gen_range(-2.0..2.0), r.gen_range(0.2..4.0));
        let closed = kl_diag_gaussian(
            &DiagGaussian::new(vec![mp], vec![vp]).unwrap(),
            &DiagGaussian::new(vec![mq], vec![vq]).unwrap(),
        )
        .unwrap();
        let quad = kl_by_quadrature(mp, vp, mq, vq);
        assert!((closed - quad).abs() < 1e-5, "closed {closed} quad {quad}");
    }
}

#[test]
fn diag_and_full_routes_agree_on_diagonal_inputs() {
    use rand::Rng;
    let mut r = cermic::rng::stream(23, "quadrature", 1);
    for _ in 0..50 {
        let d = r.gen_range(1..=5usize);
        let mp: Vec<f64> = (0..d).map(|_| r.gen_range(-2.0..2.0)).collect();
        let vp: Vec<f64> = (0..d).map(|_| r.gen_range(0.2..3.0)).collect();
        let mq: Vec<f64> = (0..d).map(|_| r.gen_range(-2.0..2.0)).collect();
        let vq: Vec<f64> = (0..d).map(|_| r.gen_range(0.2..3.0)).collect();
        let diag = kl_diag_gaussian(
            &DiagGaussian::new(mp.clone(), vp.clone()).unwrap(),
            &DiagGaussian::new(mq.clone(), vq.clone()).unwrap(),
        )
        .unwrap();
        let mut cov_p = DenseMatrix::zeros(d, d);
        let mut cov_q = DenseMatrix::zeros(d, d);
        for i in 0..d {
            cov_p[(i, i)] = vp[i];
            cov_q[(i, i)] = vq[i];
        }
        let full = kl_full_gaussian(
            &FullGaussian::new(DenseVector::from_vec(mp), cov_p).unwrap(),
            &FullGaussian::new(DenseVector::from_vec(mq), cov_q).unwrap(),
        )
        .unwrap();
        assert!((diag - full).abs() < 1e-10, "diag {diag} vs full {full}");
    }
}
