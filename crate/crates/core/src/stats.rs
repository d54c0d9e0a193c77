//! Order statistics and the rank test used by the exploration comparison.

/// Median of a sample (average of the middle two for even lengths).
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// (first quartile, third quartile) by the nearest-rank method.
pub fn iqr_bounds(values: &[f64]) -> (f64, f64) {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |p: f64| -> f64 {
        let ix = ((v.len() as f64 * p).ceil() as usize).clamp(1, v.len());
        v[ix - 1]
    };
    (q(0.25), q(0.75))
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

/// Standard normal CDF via the Abramowitz–Stegun erf approximation.
pub fn normal_cdf(z: f64) -> f64 {
    let x = z / std::f64::consts::SQRT_2;
    0.5 * (1.0 + erf(x))
}

fn erf(x: f64) -> f64 {
    // Max absolute error ~1.5e-7; plenty for p-value thresholds.
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let y = 1.0
        - (((((1.061405429 * t - 1.453152027) * t) + 1.421413741) * t - 0.284496736) * t
            + 0.254829592)
            * t
            * (-x * x).exp();
    sign * y
}

/// One-sided Mann–Whitney U test of `H1: a tends smaller than b`, normal
/// approximation with tie correction and continuity correction. Returns
/// the p-value.
pub fn mann_whitney_less(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let m = b.len();
    assert!(n > 0 && m > 0);
    // Pool and rank with average ranks for ties.
    let mut pooled: Vec<(f64, usize)> = a
        .iter()
        .map(|&v| (v, 0usize))
        .chain(b.iter().map(|&v| (v, 1usize)))
        .collect();
    pooled.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let total = n + m;
    let mut ranks = vec![0.0; total];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < total {
        let mut j = i;
        while j + 1 < total && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for r in ranks.iter_mut().take(j + 1).skip(i) {
            *r = avg_rank;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let rank_sum_a: f64 = pooled
        .iter()
        .zip(&ranks)
        .filter(|((_, group), _)| *group == 0)
        .map(|(_, r)| r)
        .sum();
    let u_a = rank_sum_a - (n * (n + 1)) as f64 / 2.0;
    let mean_u = (n * m) as f64 / 2.0;
    let nm = (n * m) as f64;
    let nt = total as f64;
    let var_u = nm / 12.0 * ((nt + 1.0) - tie_term / (nt * (nt - 1.0)));
    if var_u <= 0.0 {
        // All values tied: no evidence either way.
        return 0.5;
    }
    let z = (u_a - mean_u + 0.5) / var_u.sqrt();
    normal_cdf(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_and_iqr() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        let (q1, q3) = iqr_bounds(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(q1, 1.0);
        assert_eq!(q3, 3.0);
    }

    #[test]
    fn normal_cdf_reference_points() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-7);
        assert!((normal_cdf(1.959964) - 0.975).abs() < 1e-4);
        assert!((normal_cdf(-1.644854) - 0.05).abs() < 1e-4);
    }

    #[test]
    fn mann_whitney_detects_clear_separation() {
        let a: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..20).map(|i| 100.0 + i as f64).collect();
        let p = mann_whitney_less(&a, &b);
        assert!(p < 1e-6, "p = {p}");
        // Reversed direction has no evidence.
        let p_rev = mann_whitney_less(&b, &a);
        assert!(p_rev > 0.99);
    }

    #[test]
    fn mann_whitney_handles_ties() {
        let a = vec![1.0; 10];
        let b = vec![1.0; 10];
        let p = mann_whitney_less(&a, &b);
        assert!((p - 0.5).abs() < 0.2);
    }

    #[test]
    fn mann_whitney_censored_mixture() {
        // Typical first-success data: one group mostly censored at 300.
        let a = vec![12.0, 25.0, 40.0, 33.0, 300.0, 18.0, 22.0, 51.0, 300.0, 47.0];
        let b = vec![300.0; 10];
        let p = mann_whitney_less(&a, &b);
        assert!(p < 0.05, "p = {p}");
    }
}
