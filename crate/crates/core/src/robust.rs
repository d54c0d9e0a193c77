//! Log-ratio statistic calculus and the distributionally robust
//! chance-constraint machinery.
//!
//! The statistic is `Ψ = log p(x)/q(x)` with `p` a diagonal-Gaussian encoder
//! output and `q` the standard normal. Its first two moments have closed
//! forms, the moment ambiguity set turns the chance constraint into a
//! second-order-cone condition via Cantelli's inequality, and two-point
//! distributions attain the bound — which makes them exact test oracles.

use crate::numerics::DiagGaussian;
use crate::{Error, Result};
use rand::Rng;

/// First two moments of the Ψ statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiStats {
    pub mu: f64,
    pub sigma2: f64,
    /// True when the values are expressed in running-normalized units.
    pub normalized: bool,
}

/// Moment-ambiguity parameters and the two constraint levels.
#[derive(Debug, Clone, Copy)]
pub struct AmbiguityParams {
    pub gamma1: f64,
    pub gamma2: f64,
    pub epsilon: f64,
    pub c_upper: f64,
    pub c_lower: f64,
}

impl AmbiguityParams {
    pub fn new(gamma1: f64, gamma2: f64, epsilon: f64, c_upper: f64, c_lower: f64) -> Result<Self> {
        if !(gamma1 > 0.0) {
            return Err(Error::NonPositive { what: "gamma1", value: gamma1 });
        }
        if !(gamma2 > gamma1.max(1.0)) {
            return Err(Error::InvalidParameter {
                what: "gamma2",
                detail: format!("need gamma2 > max(gamma1, 1), got {gamma2}"),
            });
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidParameter {
                what: "epsilon",
                detail: format!("need epsilon in (0,1), got {epsilon}"),
            });
        }
        if !(c_lower < c_upper) {
            return Err(Error::InvalidParameter {
                what: "constraint levels",
                detail: format!("need c_lower < c_upper, got {c_lower} vs {c_upper}"),
            });
        }
        Ok(Self { gamma1, gamma2, epsilon, c_upper, c_lower })
    }

    /// Defaults used throughout the lab: γ1 = 1, γ2 = 2, ε = 0.2 and the
    /// normalized-unit levels c̄ = 1, c̲ = −1.
    pub fn lab_default() -> Self {
        Self { gamma1: 1.0, gamma2: 2.0, epsilon: 0.2, c_upper: 1.0, c_lower: -1.0 }
    }
}

/// Discrete distribution on two points; attains Cantelli's bound.
#[derive(Debug, Clone, Copy)]
pub struct TwoPointDistribution {
    pub v1: f64,
    pub v2: f64,
    /// Mass on `v1`; the rest sits on `v2`.
    pub p: f64,
}

impl TwoPointDistribution {
    pub fn new(v1: f64, v2: f64, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter {
                what: "two-point mass",
                detail: format!("p = {p} outside [0,1]"),
            });
        }
        Ok(Self { v1, v2, p })
    }

    pub fn mean(&self) -> f64 {
        self.p * self.v1 + (1.0 - self.p) * self.v2
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.p * (self.v1 - m).powi(2) + (1.0 - self.p) * (self.v2 - m).powi(2)
    }

    /// Exact `P(X ≤ t)`.
    pub fn prob_le(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        if self.v1 <= t {
            acc += self.p;
        }
        if self.v2 <= t {
            acc += 1.0 - self.p;
        }
        acc
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        if rng.gen::<f64>() < self.p {
            self.v1
        } else {
            self.v2
        }
    }
}

/// Evaluates `Ψ(x) = log p(x) − log q(x)` with `q` the standard normal.
pub fn psi_sample(x: &[f64], encoder: &DiagGaussian) -> Result<f64> {
    if x.len() != encoder.dim() {
        return Err(Error::DimensionMismatch {
            expected: encoder.dim(),
            got: x.len(),
            what: "psi_sample point",
        });
    }
    let mut acc = 0.0;
    for i in 0..x.len() {
        let (m, v) = (encoder.mean[i], encoder.var[i]);
        if !(v > 0.0) {
            return Err(Error::NonPositive { what: "encoder variance", value: v });
        }
        let d = x[i] - m;
        acc += -0.5 * v.ln() - 0.5 * d * d / v + 0.5 * x[i] * x[i];
    }
    Ok(acc)
}

/// Closed-form moments of Ψ under `x ~ p`.
///
/// With `x = μ + σz` per dimension, `Ψ_i = −ln σ²/2 + μ²/2 + μσz +
/// (σ²−1)z²/2`, so the mean is the KL divergence to the standard normal and
/// the variance is `μ²σ² + (σ²−1)²/2` summed over dimensions.
pub fn psi_moments(encoder: &DiagGaussian) -> PsiStats {
    let mut mu = 0.0;
    let mut sigma2 = 0.0;
    for i in 0..encoder.dim() {
        let (m, v) = (encoder.mean[i], encoder.var[i]);
        mu += 0.5 * (v + m * m - 1.0 - v.ln());
        sigma2 += m * m * v + 0.5 * (v - 1.0) * (v - 1.0);
    }
    PsiStats { mu, sigma2, normalized: false }
}

/// The piecewise constant β of the tractable second-order-cone form.
pub fn beta_from(params: &AmbiguityParams) -> f64 {
    let AmbiguityParams { gamma1, gamma2, epsilon, .. } = *params;
    if epsilon >= gamma1 / gamma2 {
        gamma1.sqrt() + ((1.0 - epsilon) / epsilon * (gamma2 - gamma1)).sqrt()
    } else {
        (gamma2 / epsilon).sqrt()
    }
}

/// Upper-tail exploit loss: `max(0, μ_cal + β√Σ − c̄)`.
pub fn exploit_loss_ub(mu_cal: f64, sigma2: f64, beta: f64, c_upper: f64) -> f64 {
    (mu_cal + beta * sigma2.max(0.0).sqrt() - c_upper).max(0.0)
}

/// Lower-tail exploit loss: `max(0, −μ_cal + β√Σ − c̲)`.
pub fn exploit_loss_lb(mu_cal: f64, sigma2: f64, beta: f64, c_lower: f64) -> f64 {
    (-mu_cal + beta * sigma2.max(0.0).sqrt() - c_lower).max(0.0)
}

/// Result of the worst-case probability evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WorstCaseProb {
    Feasible(f64),
    /// The deviation budget exceeds the slack `b`; no distribution in the
    /// set keeps the constraint satisfiable.
    Infeasible,
}

/// Three-branch closed form of `inf P(Ψ ≤ c̄)` over the moment ambiguity
/// set, expressed through `b = c̄ − μ_cal` and the base variance Σ.
pub fn worst_case_prob(b: f64, sigma2: f64, gamma1: f64, gamma2: f64) -> WorstCaseProb {
    assert!(sigma2 > 0.0, "worst_case_prob needs sigma2 > 0");
    let t = b / sigma2.sqrt();
    let s1 = gamma1.sqrt();
    if t < s1 {
        WorstCaseProb::Infeasible
    } else if t <= gamma2 / s1 {
        let r = (gamma2 - gamma1).sqrt() / (t - s1);
        WorstCaseProb::Feasible(1.0 / (r * r + 1.0))
    } else {
        WorstCaseProb::Feasible((t * t - gamma2) / (t * t))
    }
}

/// Two-point distribution over Ψ that attains (up to a `delta` offset that
/// keeps the high atom strictly above c̄) the worst-case probability at the
/// moment-set extreme. Returns the distribution together with its exact
/// `P(Ψ ≤ c̄)`.
pub fn cantelli_extreme_two_point(
    mu_cal: f64,
    sigma2: f64,
    gamma1: f64,
    gamma2: f64,
    c_upper: f64,
    delta: f64,
) -> Result<(TwoPointDistribution, f64)> {
    let b = c_upper - mu_cal;
    let t = b / sigma2.sqrt();
    let s1 = gamma1.sqrt();
    if t < s1 {
        return Err(Error::InvalidParameter {
            what: "cantelli extreme",
            detail: "infeasible regime".into(),
        });
    }
    let dist = if t <= gamma2 / s1 {
        // Mean at the ellipse boundary, variance filling the second-moment
        // budget; atoms per Cantelli's attaining construction.
        let mu1 = s1 * sigma2.sqrt();
        let var1 = (gamma2 - gamma1) * sigma2;
        let lam = b - mu1 + delta;
        let q = var1 / (var1 + lam * lam);
        let v_hi = mu_cal + mu1 + lam;
        let v_lo = mu_cal + mu1 - var1 / lam;
        TwoPointDistribution::new(v_hi, v_lo, q)?
    } else {
        // Markov-style extreme: atom at c̄ + delta, rest at the center.
        let hi = b + delta;
        let p = gamma2 * sigma2 / (hi * hi);
        TwoPointDistribution::new(mu_cal + hi, mu_cal, p)?
    };
    let prob = dist.prob_le(c_upper);
    Ok((dist, prob))
}

/// Streaming z-score normalizer with exponential moving moments.
#[derive(Debug, Clone)]
pub struct PsiNormalizer {
    momentum: f64,
    var_floor: f64,
    m1: f64,
    m2: f64,
    weight: f64,
}

impl PsiNormalizer {
    pub fn new(momentum: f64, var_floor: f64) -> Self {
        Self { momentum, var_floor, m1: 0.0, m2: 0.0, weight: 0.0 }
    }

    pub fn lab_default() -> Self {
        Self::new(0.99, 1e-6)
    }

    /// Updates the running moments with `psi`, then returns its z-score.
    pub fn normalize(&mut self, psi: f64) -> f64 {
        self.update(psi);
        (psi - self.mean()) / self.std()
    }

    pub fn update(&mut self, psi: f64) {
        self.m1 = self.momentum * self.m1 + (1.0 - self.momentum) * psi;
        self.m2 = self.momentum * self.m2 + (1.0 - self.momentum) * psi * psi;
        self.weight = self.momentum * self.weight + (1.0 - self.momentum);
    }

    /// Bias-corrected running mean.
    pub fn mean(&self) -> f64 {
        if self.weight == 0.0 {
            0.0
        } else {
            self.m1 / self.weight
        }
    }

    /// Bias-corrected running variance, floored.
    pub fn variance(&self) -> f64 {
        if self.weight == 0.0 {
            return 1.0;
        }
        let m = self.mean();
        (self.m2 / self.weight - m * m).max(self.var_floor)
    }

    pub fn std(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Normalizes externally computed moments into the running frame.
    pub fn normalize_stats(&self, stats: &PsiStats) -> PsiStats {
        PsiStats {
            mu: (stats.mu - self.mean()) / self.std(),
            sigma2: stats.sigma2 / self.variance(),
            normalized: true,
        }
    }
}
