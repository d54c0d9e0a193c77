//! Contrastive mutual-information surrogates and the calibrated mean.
//!
//! A bilinear critic scores a context against a candidate set; softmax over
//! the set yields the contrastive objective. The lower surrogate plus
//! `log N` under-estimates mutual information for any critic; the upper
//! surrogate is validated empirically against an exact discrete oracle.
//! The calibrated mean adds a bias-free residual `g(γ·f)` to the raw Ψ
//! mean, so an unreliable context (γ = 0) reverts to raw curiosity exactly.

use crate::nn::{log_softmax, softmax, Mlp};
use crate::numerics::DenseMatrix;
use crate::{Error, Result};
use rand::Rng;

/// One contrastive item: a context, its positive candidate, and the
/// negatives it is scored against.
#[derive(Debug, Clone)]
pub struct NcePair {
    pub context: Vec<f64>,
    pub positive: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

/// Bilinear critic; scores are softmax-normalized over each candidate set.
#[derive(Debug, Clone)]
pub struct BilinearCritic {
    pub weight: DenseMatrix, // context_dim × candidate_dim
}

impl BilinearCritic {
    pub fn new(context_dim: usize, candidate_dim: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let mut w = DenseMatrix::zeros(context_dim, candidate_dim);
        for i in 0..context_dim {
            for j in 0..candidate_dim {
                w[(i, j)] = rng.gen_range(-scale..scale);
            }
        }
        Self { weight: w }
    }

    pub fn zeros(context_dim: usize, candidate_dim: usize) -> Self {
        Self { weight: DenseMatrix::zeros(context_dim, candidate_dim) }
    }

    fn logit(&self, context: &[f64], candidate: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.weight.rows() {
            let row = self.weight.row(i);
            let zi = context[i];
            for j in 0..self.weight.cols() {
                acc += zi * row[j] * candidate[j];
            }
        }
        acc
    }

    fn logits(&self, pair: &NcePair) -> Vec<f64> {
        let mut l = Vec::with_capacity(1 + pair.negatives.len());
        l.push(self.logit(&pair.context, &pair.positive));
        for n in &pair.negatives {
            l.push(self.logit(&pair.context, n));
        }
        l
    }

    /// Softmax-normalized scores over `{positive} ∪ negatives`; the
    /// positive's score comes first.
    pub fn scores(&self, pair: &NcePair) -> Vec<f64> {
        softmax(&self.logits(pair))
    }

    /// Analytic gradient of the contrastive objective with respect to the
    /// bilinear weight, averaged over the batch.
    pub fn nce_gradient(&self, batch: &[NcePair]) -> Result<(f64, DenseMatrix)> {
        let obj = infonce_lower(batch, self)?;
        let mut grad = DenseMatrix::zeros(self.weight.rows(), self.weight.cols());
        for pair in batch {
            let probs = self.scores(pair);
            let candidates: Vec<&Vec<f64>> =
                std::iter::once(&pair.positive).chain(pair.negatives.iter()).collect();
            for (k, cand) in candidates.iter().enumerate() {
                let coeff = (if k == 0 { 1.0 } else { 0.0 }) - probs[k];
                for i in 0..self.weight.rows() {
                    for j in 0..self.weight.cols() {
                        grad[(i, j)] += coeff * pair.context[i] * cand[j];
                    }
                }
            }
        }
        Ok((obj, grad.scaled(1.0 / batch.len() as f64)))
    }

    /// One gradient-ascent step on the contrastive objective over `batch`.
    pub fn train_step(&mut self, batch: &[NcePair], lr: f64) -> Result<f64> {
        let (obj, grad) = self.nce_gradient(batch)?;
        self.weight = self.weight.add(&grad.scaled(lr));
        Ok(obj)
    }
}

fn check_batch(batch: &[NcePair]) -> Result<usize> {
    let Some(first) = batch.first() else {
        return Err(Error::InvalidParameter { what: "nce batch", detail: "empty".into() });
    };
    let n = first.negatives.len();
    if n < 1 {
        return Err(Error::InvalidParameter {
            what: "nce negatives",
            detail: "need at least one negative per pair".into(),
        });
    }
    for p in batch {
        if p.negatives.len() != n {
            return Err(Error::InvalidParameter {
                what: "nce batch",
                detail: "inconsistent negative counts".into(),
            });
        }
    }
    Ok(n)
}

/// Empirical contrastive objective: mean log softmax score of the positive
/// over its candidate set. Always ≤ 0.
pub fn infonce_lower(batch: &[NcePair], critic: &BilinearCritic) -> Result<f64> {
    check_batch(batch)?;
    let mut acc = 0.0;
    for pair in batch {
        acc += log_softmax(&critic.logits(pair))[0];
    }
    Ok(acc / batch.len() as f64)
}

/// Mutual-information lower estimate: objective plus `log N`.
pub fn mi_lower_estimate(batch: &[NcePair], critic: &BilinearCritic) -> Result<f64> {
    let n = check_batch(batch)?;
    Ok(infonce_lower(batch, critic)? + (n as f64).ln())
}

/// Reversed-score upper estimate built from the complement scores
/// `1 − c` of the softmax-normalized critic.
pub fn infonce_upper(batch: &[NcePair], critic: &BilinearCritic) -> Result<f64> {
    let n = check_batch(batch)?;
    let mut acc = 0.0;
    for pair in batch {
        let c = critic.scores(pair);
        let u: Vec<f64> = c.iter().map(|ci| 1.0 - ci).collect();
        let lse_neg = {
            let m = u[1..].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            m + u[1..].iter().map(|v| (v - m).exp()).sum::<f64>().ln()
        };
        acc += u[0] - lse_neg;
    }
    Ok((n as f64).ln() - acc / batch.len() as f64)
}

/// Probability table over a finite `(Z, F)` alphabet.
#[derive(Debug, Clone)]
pub struct DiscreteJoint {
    pub table: DenseMatrix, // |Z| × |F|
}

impl DiscreteJoint {
    pub fn new(table: DenseMatrix) -> Result<Self> {
        let mut total = 0.0;
        for v in table.as_slice() {
            if *v < 0.0 {
                return Err(Error::InvalidParameter {
                    what: "joint table",
                    detail: format!("negative entry {v}"),
                });
            }
            total += v;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter {
                what: "joint table",
                detail: format!("total mass {total} != 1"),
            });
        }
        Ok(Self { table })
    }

    pub fn n_z(&self) -> usize {
        self.table.rows()
    }

    pub fn n_f(&self) -> usize {
        self.table.cols()
    }

    pub fn marginal_z(&self) -> Vec<f64> {
        (0..self.n_z()).map(|z| (0..self.n_f()).map(|f| self.table[(z, f)]).sum()).collect()
    }

    pub fn marginal_f(&self) -> Vec<f64> {
        (0..self.n_f()).map(|f| (0..self.n_z()).map(|z| self.table[(z, f)]).sum()).collect()
    }

    pub fn sample(&self, rng: &mut impl Rng) -> (usize, usize) {
        let mut u: f64 = rng.gen();
        for z in 0..self.n_z() {
            for f in 0..self.n_f() {
                u -= self.table[(z, f)];
                if u < 0.0 {
                    return (z, f);
                }
            }
        }
        (self.n_z() - 1, self.n_f() - 1)
    }
}

/// Exact mutual information of a discrete joint by full enumeration.
pub fn exact_mi_discrete(joint: &DiscreteJoint) -> Result<f64> {
    let pz = joint.marginal_z();
    let pf = joint.marginal_f();
    let mut mi = 0.0;
    for z in 0..joint.n_z() {
        for f in 0..joint.n_f() {
            let p = joint.table[(z, f)];
            if p > 0.0 {
                mi += p * (p / (pz[z] * pf[f])).ln();
            }
        }
    }
    Ok(mi.max(0.0))
}

fn onehot(i: usize, n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

/// Exact expectations of the two contrastive objectives on a discrete
/// joint, with negatives drawn i.i.d. from the `F` marginal. Enumerates
/// every (z, f⁺) pair and every multiset of `n_negatives` negatives with
/// its multinomial weight — no sampling error.
pub fn exact_infonce_expectations(
    joint: &DiscreteJoint,
    critic: &BilinearCritic,
    n_negatives: usize,
) -> Result<(f64, f64)> {
    let pf = joint.marginal_f();
    let nf = joint.n_f();
    // Enumerate compositions of n_negatives over nf symbols.
    let mut compositions: Vec<Vec<usize>> = Vec::new();
    fn rec(left: usize, slot: usize, nf: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if slot == nf - 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for k in 0..=left {
            cur.push(k);
            rec(left - k, slot + 1, nf, cur, out);
            cur.pop();
        }
    }
    rec(n_negatives, 0, nf, &mut Vec::new(), &mut compositions);

    let ln_fact = |k: usize| -> f64 { (1..=k).map(|i| (i as f64).ln()).sum() };
    let mut lower = 0.0;
    let mut upper_term = 0.0;
    for z in 0..joint.n_z() {
        for fpos in 0..joint.n_f() {
            let p_pair = joint.table[(z, fpos)];
            if p_pair == 0.0 {
                continue;
            }
            for comp in &compositions {
                // Multinomial weight of this negative multiset.
                let mut ln_w = ln_fact(n_negatives);
                let mut valid = true;
                for (sym, &count) in comp.iter().enumerate() {
                    if count > 0 {
                        if pf[sym] == 0.0 {
                            valid = false;
                            break;
                        }
                        ln_w += count as f64 * pf[sym].ln() - ln_fact(count);
                    }
                }
                if !valid {
                    continue;
                }
                let w = p_pair * ln_w.exp();
                let mut negatives = Vec::with_capacity(n_negatives);
                for (sym, &count) in comp.iter().enumerate() {
                    for _ in 0..count {
                        negatives.push(onehot(sym, nf));
                    }
                }
                let pair = NcePair {
                    context: onehot(z, joint.n_z()),
                    positive: onehot(fpos, nf),
                    negatives,
                };
                let c = critic.scores(&pair);
                lower += w * c[0].max(1e-300).ln();
                let u: Vec<f64> = c.iter().map(|ci| 1.0 - ci).collect();
                let lse_neg = {
                    let m = u[1..].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    m + u[1..].iter().map(|v| (v - m).exp()).sum::<f64>().ln()
                };
                upper_term += w * (u[0] - lse_neg);
            }
        }
    }
    let upper = (n_negatives as f64).ln() - upper_term;
    Ok((lower, upper))
}

/// Which side of the sandwich an estimate feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MiBound {
    Lower,
    Upper,
}

/// Task-adaptive consistency factor: clamped contrastive MI surrogate of
/// (previous reward ⊕ previous context) against the current context.
pub fn gamma_factor(
    batch: &[NcePair],
    critic: &BilinearCritic,
    bound: MiBound,
    gamma_max: f64,
) -> Result<f64> {
    let raw = match bound {
        MiBound::Lower => mi_lower_estimate(batch, critic)?,
        MiBound::Upper => infonce_upper(batch, critic)?,
    };
    Ok(raw.clamp(0.0, gamma_max))
}

/// Bias-free residual calibration of the Ψ mean.
#[derive(Debug, Clone)]
pub struct CalibrationNet {
    pub g: Mlp, // bias-free: g(0) = 0 structurally
}

#[derive(Debug, Clone)]
pub struct CalibrationCache {
    mlp: crate::nn::MlpCache,
    gamma: f64,
}

impl CalibrationNet {
    pub fn new(feature_dim: usize, hidden: usize, scale: f64, rng: &mut impl Rng) -> Self {
        Self { g: Mlp::new(&[feature_dim, hidden, 1], false, scale, rng) }
    }

    /// `μ_cal = μ_Ψ + g(γ·f)`.
    pub fn calibrated_mean(
        &self,
        gamma: f64,
        feature: &[f64],
        mu_psi: f64,
    ) -> Result<(f64, CalibrationCache)> {
        if feature.len() != self.g.in_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.g.in_dim(),
                got: feature.len(),
                what: "calibration feature",
            });
        }
        let scaled: Vec<f64> = feature.iter().map(|f| gamma * f).collect();
        let (out, mlp) = self.g.forward(&scaled);
        Ok((mu_psi + out[0], CalibrationCache { mlp, gamma }))
    }

    /// Backward pass: accumulates parameter gradients, returns
    /// (d_loss/d_feature, d_loss/d_mu_psi).
    pub fn backward(
        &self,
        cache: &CalibrationCache,
        d_mu_cal: f64,
        grad: &mut CalibrationNet,
    ) -> (Vec<f64>, f64) {
        let d_scaled = self.g.backward(&cache.mlp, &[d_mu_cal], &mut grad.g);
        let d_feature = d_scaled.iter().map(|d| d * cache.gamma).collect();
        (d_feature, d_mu_cal)
    }

    pub fn zeros_like(&self) -> CalibrationNet {
        CalibrationNet { g: self.g.zeros_like() }
    }
}

/// Noise-perturbed negatives around the current context feature.
#[derive(Debug, Clone)]
pub struct NegativeSamples {
    pub vectors: Vec<Vec<f64>>,
    /// Set when `noise_scale` is zero: every negative equals the positive,
    /// which collapses the contrast.
    pub degenerate: bool,
}

pub fn negative_sampler(
    f_now: &[f64],
    count: usize,
    noise_scale: f64,
    rng: &mut impl Rng,
) -> NegativeSamples {
    assert!(count >= 1, "need at least one negative");
    let vectors = (0..count)
        .map(|_| {
            f_now
                .iter()
                .map(|v| v + noise_scale * crate::rng::standard_normal(rng))
                .collect()
        })
        .collect();
    NegativeSamples { vectors, degenerate: noise_scale == 0.0 }
}
