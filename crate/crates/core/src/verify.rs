//! Verification suites: the numerical certifications the CLI exposes and
//! the acceptance tests consume.

use crate::calibration::{
    exact_infonce_expectations, exact_mi_discrete, BilinearCritic, DiscreteJoint, NcePair,
};
use crate::csvio::{fmt_precise, CsvTable};
use crate::linear_mdp::{default_theorem1_generator, verify_theorem1, PosteriorState};
use crate::memory::{IntentionGraph, MessagePassing, RecurrentMemory};
use crate::model::{CermicModel, ContextInput, ModelConfig, ModelTransition};
use crate::numerics::{DenseMatrix, DenseVector, DiagGaussian};
use crate::robust::{
    beta_from, cantelli_extreme_two_point, exploit_loss_ub, psi_moments, AmbiguityParams,
    TwoPointDistribution, WorstCaseProb,
};
use crate::{calibration::CalibrationNet, rng, Result};
use rand::Rng;

/// Outcome of one verification suite.
#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub name: String,
    pub passed: bool,
    pub details: String,
    pub csv: Option<CsvTable>,
}

pub const SUITE_NAMES: [&str; 4] = ["theorem1", "appendix_b", "appendix_c", "gradients"];

/// Runs one named suite (or every suite for "all").
pub fn run_suites(filter: &str, seed: u64) -> Result<Vec<SuiteOutcome>> {
    let mut out = Vec::new();
    let all = filter == "all";
    if all || filter == "theorem1" {
        out.push(theorem1_suite(seed)?);
        out.push(kronecker_kl_suite(seed)?);
    }
    if all || filter == "appendix_b" {
        out.push(appendix_b_suite(seed)?);
    }
    if all || filter == "appendix_c" {
        out.push(appendix_c_suite(seed)?);
    }
    if all || filter == "gradients" {
        out.push(gradients_suite(seed)?);
    }
    if out.is_empty() {
        return Err(crate::Error::InvalidParameter {
            what: "suite",
            detail: format!("unknown suite '{filter}' (expected one of {SUITE_NAMES:?} or all)"),
        });
    }
    Ok(out)
}

/// Sandwich certification over 1000 randomized instances.
pub fn theorem1_suite(seed: u64) -> Result<SuiteOutcome> {
    let report = verify_theorem1(default_theorem1_generator(seed), 1000, 1e-9)?;
    let passed = report.violations == 0 && report.instances.len() == 1000;
    let mut csv = CsvTable::new("instance_id,q,r_exact,r_ucb,lower_slack,upper_slack");
    for line in report.csv().lines().skip(1) {
        csv.push(line.to_string());
    }
    Ok(SuiteOutcome {
        name: "theorem1".into(),
        passed,
        details: format!(
            "{} instances, {} violations, {} rejected (tolerance {:.0e})",
            report.instances.len(),
            report.violations,
            report.rejected,
            report.tolerance
        ),
        csv: Some(csv),
    })
}

/// Closed-form information gain vs the dense cd-dimensional entropy route,
/// 500 random instances.
pub fn kronecker_kl_suite(seed: u64) -> Result<SuiteOutcome> {
    let mut csv = CsvTable::new("instance_id,d,c,q,closed_form,dense,delta");
    let mut worst: f64 = 0.0;
    for idx in 0..500usize {
        let mut r = rng::stream(seed, "kron-kl", idx as u64);
        let d = r.gen_range(1..=8usize);
        let c = r.gen_range(1..=4usize);
        let lambda = r.gen_range(0.2..2.0);
        let mut post = PosteriorState::new(d, c, lambda)?;
        for _ in 0..r.gen_range(0..=20usize) {
            post.update(&crate::linear_mdp::LinearTransition {
                eta: DenseVector::from_vec((0..d).map(|_| r.gen_range(-1.0..1.0)).collect()),
                next: DenseVector::from_vec((0..c).map(|_| r.gen_range(-1.0..1.0)).collect()),
            })?;
        }
        let probe = DenseVector::from_vec((0..d).map(|_| r.gen_range(-1.0..1.0)).collect());
        let fast = post.kl_posterior_update(&probe);
        let dense = post.kl_posterior_update_dense(&probe)?;
        let delta = (fast - dense).abs();
        worst = worst.max(delta);
        csv.push(format!(
            "{idx},{d},{c},{},{},{},{}",
            fmt_precise(post.q_value(&probe)),
            fmt_precise(fast),
            fmt_precise(dense),
            fmt_precise(delta)
        ));
    }
    Ok(SuiteOutcome {
        name: "kronecker_kl".into(),
        passed: worst < 1e-8,
        details: format!("500 instances, worst |closed − dense| = {worst:.3e}"),
        csv: Some(csv),
    })
}

/// β hand values, Monte-Carlo chance-constraint soundness, and two-point
/// tightness.
pub fn appendix_b_suite(seed: u64) -> Result<SuiteOutcome> {
    let mut csv = CsvTable::new("branch,input,value,oracle,delta");
    let mut passed = true;
    let mut details = Vec::new();

    // (a) Hand-computed β values on both branches.
    let cases = [
        (1.0, 2.0, 0.5, 2.0),
        (1.0, 2.0, 0.25, 8.0f64.sqrt()),
    ];
    for (g1, g2, eps, expected) in cases {
        let p = AmbiguityParams::new(g1, g2, eps, 1.0, -1.0)?;
        let beta = beta_from(&p);
        let ok = (beta - expected).abs() < 1e-12;
        passed &= ok;
        csv.push(format!(
            "beta,\"g1={g1} g2={g2} eps={eps}\",{},{},{}",
            fmt_precise(beta),
            fmt_precise(expected),
            fmt_precise((beta - expected).abs())
        ));
    }

    // (b) Soundness: feasible SOC point ⇒ worst-member tail ≤ ε, by
    // simulation over Gaussian and two-point members of the ambiguity set.
    let params = AmbiguityParams::lab_default();
    let beta = beta_from(&params);
    let draws = 1_000_000usize;
    let mut max_excess: f64 = f64::NEG_INFINITY;
    let mut checked = 0usize;
    let mut idx = 0u64;
    while checked < 50 {
        let mut r = rng::stream(seed, "cantelli-sound", idx);
        idx += 1;
        // Sample a base (μ_cal, Σ) that satisfies the SOC with slack, then a
        // member of its moment set.
        let sigma2: f64 = r.gen_range(0.005..0.05);
        let mu_cal = r.gen_range(-0.5..(params.c_upper - beta * sigma2.sqrt()));
        if exploit_loss_ub(mu_cal, sigma2, beta, params.c_upper) > 0.0 {
            continue;
        }
        checked += 1;
        let mean_dev = r.gen_range(-1.0..1.0) * (params.gamma1 * sigma2).sqrt();
        let var_budget = params.gamma2 * sigma2 - mean_dev * mean_dev;
        let member_var = r.gen_range(0.0..var_budget.max(1e-12));
        let tail = if r.gen_bool(0.5) {
            // Gaussian member.
            let mut hits = 0usize;
            for _ in 0..draws {
                let x = mu_cal + mean_dev + member_var.sqrt() * rng::standard_normal(&mut r);
                if x > params.c_upper {
                    hits += 1;
                }
            }
            hits as f64 / draws as f64
        } else {
            // Symmetric two-point member: mean μ+dev, variance member_var.
            let spread = member_var.sqrt();
            let dist = TwoPointDistribution::new(
                mu_cal + mean_dev + spread,
                mu_cal + mean_dev - spread,
                0.5,
            )?;
            1.0 - dist.prob_le(params.c_upper)
        };
        let band = 4.0 * (params.epsilon * (1.0 - params.epsilon) / draws as f64).sqrt();
        let excess = tail - params.epsilon - band;
        max_excess = max_excess.max(excess);
        csv.push(format!(
            "soundness,\"mu={mu_cal:.4} sig2={sigma2:.4}\",{},{},{}",
            fmt_precise(tail),
            fmt_precise(params.epsilon),
            fmt_precise(excess)
        ));
    }
    passed &= max_excess <= 0.0;
    details.push(format!("soundness max excess over ε+4σ: {max_excess:.3e}"));

    // (c) Tightness: the extreme two-point member attains the worst-case
    // probability within 1e-6, on both feasible branches.
    let mut worst_gap: f64 = 0.0;
    for idx in 0..30u64 {
        let mut r = rng::stream(seed, "cantelli-tight", idx);
        let sigma2: f64 = r.gen_range(0.05..1.0);
        let t = if idx % 2 == 0 {
            r.gen_range(params.gamma1.sqrt() * 1.05..params.gamma2 / params.gamma1.sqrt())
        } else {
            r.gen_range(params.gamma2 / params.gamma1.sqrt() * 1.05..8.0)
        };
        let b = t * sigma2.sqrt();
        let mu_cal = params.c_upper - b;
        let expected = match crate::robust::worst_case_prob(b, sigma2, params.gamma1, params.gamma2)
        {
            WorstCaseProb::Feasible(p) => p,
            WorstCaseProb::Infeasible => continue,
        };
        let (_, prob) = cantelli_extreme_two_point(
            mu_cal,
            sigma2,
            params.gamma1,
            params.gamma2,
            params.c_upper,
            1e-9,
        )?;
        let gap = (prob - expected).abs();
        worst_gap = worst_gap.max(gap);
        csv.push(format!(
            "tightness,\"t={t:.4} sig2={sigma2:.4}\",{},{},{}",
            fmt_precise(prob),
            fmt_precise(expected),
            fmt_precise(gap)
        ));
    }
    passed &= worst_gap < 1e-6;
    details.push(format!("tightness worst gap: {worst_gap:.3e}"));

    Ok(SuiteOutcome {
        name: "appendix_b".into(),
        passed,
        details: details.join("; "),
        csv: Some(csv),
    })
}

/// Contrastive bound ordering against the exact discrete oracle on a
/// 20-joint family, evaluated by full enumeration after critic training.
pub fn appendix_c_suite(seed: u64) -> Result<SuiteOutcome> {
    let mut csv = CsvTable::new("joint_id,symbols,mi,lower_estimate,upper_estimate,lower_ok,upper_ok");
    let mut passed = true;
    let n_negatives = 8;
    for idx in 0..20u64 {
        let mut r = rng::stream(seed, "appendix-c", idx);
        let k = if idx % 2 == 0 { 2 } else { 4 };
        // Random joint with occasional strong diagonal correlation.
        let mut table = DenseMatrix::zeros(k, k);
        let mut total = 0.0;
        for i in 0..k {
            for j in 0..k {
                let boost = if i == j && idx % 3 != 0 { 4.0 } else { 1.0 };
                let v = r.gen_range(0.01..1.0) * boost;
                table[(i, j)] = v;
                total += v;
            }
        }
        for v in table.as_mut_slice() {
            *v /= total;
        }
        let joint = DiscreteJoint::new(table)?;
        let mi = exact_mi_discrete(&joint)?;
        let critic = train_discrete_critic(&joint, n_negatives, 400, seed ^ idx);
        let (lower_obj, upper) = exact_infonce_expectations(&joint, &critic, n_negatives)?;
        let lower_est = lower_obj + (n_negatives as f64).ln();
        let lower_ok = lower_est <= mi + 1e-9;
        let upper_ok = upper >= mi - 1e-9;
        passed &= lower_ok && upper_ok;
        csv.push(format!(
            "{idx},{k},{},{},{},{},{}",
            fmt_precise(mi),
            fmt_precise(lower_est),
            fmt_precise(upper),
            lower_ok,
            upper_ok
        ));
    }
    Ok(SuiteOutcome {
        name: "appendix_c".into(),
        passed,
        details: "20 enumerable joints, exact-expectation bound ordering".into(),
        csv: Some(csv),
    })
}

fn train_discrete_critic(
    joint: &DiscreteJoint,
    n_negatives: usize,
    steps: usize,
    seed: u64,
) -> BilinearCritic {
    let mut r = rng::stream(seed, "appendix-c-critic", 0);
    let mut critic = BilinearCritic::new(joint.n_z(), joint.n_f(), 0.1, &mut r);
    let pf = joint.marginal_f();
    let onehot = |i: usize, n: usize| {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        v
    };
    for _ in 0..steps {
        let batch: Vec<NcePair> = (0..32)
            .map(|_| {
                let (z, f) = joint.sample(&mut r);
                let negatives = (0..n_negatives)
                    .map(|_| {
                        let mut u: f64 = r.gen();
                        let mut sym = joint.n_f() - 1;
                        for (k, p) in pf.iter().enumerate() {
                            u -= p;
                            if u < 0.0 {
                                sym = k;
                                break;
                            }
                        }
                        onehot(sym, joint.n_f())
                    })
                    .collect();
                NcePair {
                    context: onehot(z, joint.n_z()),
                    positive: onehot(f, joint.n_f()),
                    negatives,
                }
            })
            .collect();
        critic.train_step(&batch, 0.5).expect("trainable batch");
    }
    critic
}

/// Finite-difference certification: 100 randomized instances per module
/// family, relative error ≤ 1e-4.
pub fn gradients_suite(seed: u64) -> Result<SuiteOutcome> {
    let mut csv = CsvTable::new("family,instance,rel_err");
    let mut worst: f64 = 0.0;
    let mut passed = true;

    // cermic_core: full objective through every parameter group, graph and
    // recurrent context nets alternating.
    for idx in 0..100u64 {
        let err = total_loss_fd_instance(seed, idx, idx % 2 == 0)?;
        worst = worst.max(err);
        passed &= err <= 1e-4;
        csv.push(format!("cermic_core,{idx},{}", fmt_precise(err)));
    }

    // mi_calibration: calibrated mean and the contrastive critic gradient.
    for idx in 0..100u64 {
        let err = calibration_fd_instance(seed, idx)?;
        worst = worst.max(err);
        passed &= err <= 1e-4;
        csv.push(format!("mi_calibration,{idx},{}", fmt_precise(err)));
    }

    // intention_memory: message passing and the recurrent cell readout.
    for idx in 0..100u64 {
        let err = memory_fd_instance(seed, idx)?;
        worst = worst.max(err);
        passed &= err <= 1e-4;
        csv.push(format!("intention_memory,{idx},{}", fmt_precise(err)));
    }

    Ok(SuiteOutcome {
        name: "gradients".into(),
        passed,
        details: format!("300 instances, worst rel err {worst:.3e}"),
        csv: Some(csv),
    })
}

fn small_model_config() -> ModelConfig {
    ModelConfig {
        obs_dim: 5,
        n_actions: 3,
        d_state: 4,
        d_latent: 3,
        d_node: 4,
        d_feature: 4,
        hidden: 6,
        k_samples: 2,
        tau_m: 0.9,
        lr: 1e-3,
        grad_clip: 5.0,
    }
}

fn random_graph(d_node: usize, r: &mut impl Rng) -> IntentionGraph {
    let n = r.gen_range(1..=3usize);
    let nodes: Vec<(usize, Vec<f64>)> =
        (0..n).map(|k| (k, (0..d_node).map(|_| r.gen_range(-1.0..1.0)).collect())).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let dx: f64 = r.gen_range(-2.0..2.0);
                let dy: f64 = r.gen_range(-2.0..2.0);
                edges.push((i, j, vec![dx, dy, dx.abs() + dy.abs(), 1.0]));
            }
        }
    }
    IntentionGraph { nodes, edges, step: 1 }
}

fn total_loss_fd_instance(seed: u64, idx: u64, graph: bool) -> Result<f64> {
    let mut r = rng::stream(seed, "fd-core", idx);
    let cfg = small_model_config();
    let model = CermicModel::new(cfg, graph, &mut r);
    let batch: Vec<ModelTransition> = (0..2)
        .map(|_| {
            let context = if graph {
                ContextInput::Graph(random_graph(cfg.d_node, &mut r))
            } else {
                ContextInput::Recurrent {
                    hidden: (0..cfg.d_feature).map(|_| r.gen_range(-0.5..0.5)).collect(),
                    input: (0..cfg.d_node).map(|_| r.gen_range(-1.0..1.0)).collect(),
                }
            };
            ModelTransition {
                obs: (0..cfg.obs_dim).map(|_| r.gen_range(-1.0..1.0)).collect(),
                action: r.gen_range(0..cfg.n_actions),
                obs_next: (0..cfg.obs_dim).map(|_| r.gen_range(-1.0..1.0)).collect(),
                reward_prev: 0.0,
                context,
                explore_noise: (0..cfg.k_samples * cfg.d_latent)
                    .map(|_| rng::standard_normal(&mut r))
                    .collect(),
            }
        })
        .collect();
    let gamma_low = r.gen_range(0.0..2.0);
    let gamma_up = r.gen_range(0.0..2.0);
    let beta = r.gen_range(1.0..3.0);
    // √Σ is ill-conditioned for finite differences near zero, so pick the
    // normalizer variance to keep every transition's normalized Σ away
    // from it (running normalization puts real batches in this regime).
    let min_sigma2 = batch
        .iter()
        .map(|t| {
            let g = model.latent_gaussian(&t.obs, t.action).unwrap();
            crate::robust::psi_moments(&g).sigma2
        })
        .fold(f64::INFINITY, f64::min);
    let norm_var = (min_sigma2 / 0.25).clamp(1e-4, 2.0);
    // Place the constraint levels a safe margin from every hinge kink so
    // the finite differences probe smooth regions; alternate which hinge
    // branch each instance exercises.
    let terms = model.hinge_terms(&batch, gamma_low, gamma_up, beta, 0.1, norm_var)?;
    let ub_vals: Vec<f64> = terms.iter().map(|t| t.0).collect();
    let lb_vals: Vec<f64> = terms.iter().map(|t| t.1).collect();
    let min = |v: &[f64]| v.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let c_up = if idx % 2 == 0 { min(&ub_vals) - 0.3 } else { max(&ub_vals) + 0.3 };
    let c_lo = if idx % 3 == 0 { max(&lb_vals) + 0.3 } else { min(&lb_vals) - 0.3 };
    let args = (gamma_low, gamma_up, beta, c_up, c_lo, 0.1, norm_var, true, 0.3);
    let mut flat0 = Vec::new();
    model.write_grad_params(&mut flat0);
    let mut eval = |p: &[f64]| {
        let mut m = model.clone();
        m.read_grad_params(p);
        m.total_loss(&batch, args.0, args.1, args.2, args.3, args.4, args.5, args.6, args.7, args.8)
            .unwrap()
            .0
            .total
    };
    let (_, grads) = model.total_loss(
        &batch, args.0, args.1, args.2, args.3, args.4, args.5, args.6, args.7, args.8,
    )?;
    let mut analytic = Vec::new();
    CermicModel::write_grads_flat(&grads, &mut analytic);
    // Two probe widths: the wide one owns the round-off floor, the narrow
    // one owns high-curvature regions. A wrong gradient fails both.
    let probes: Vec<Vec<f64>> = [1e-3, 1e-4, 1e-5]
        .iter()
        .map(|&eps| crate::nn::fd_gradient(&mut eval, &flat0, eps))
        .collect();
    Ok(crate::nn::max_rel_err_multi_width(&analytic, &probes))
}

fn calibration_fd_instance(seed: u64, idx: u64) -> Result<f64> {
    let mut r = rng::stream(seed, "fd-calibration", idx);
    // Calibrated-mean parameters.
    let net = CalibrationNet::new(3, 4, 1.0, &mut r);
    let gamma = r.gen_range(0.0..3.0);
    let f: Vec<f64> = (0..3).map(|_| r.gen_range(-1.0..1.0)).collect();
    let mut flat0 = Vec::new();
    net.g.write_flat(&mut flat0);
    let mut eval = |p: &[f64]| {
        let mut n = net.clone();
        n.g.read_flat(p);
        n.calibrated_mean(gamma, &f, 0.3).unwrap().0
    };
    let fd = crate::nn::fd_gradient(&mut eval, &flat0, 1e-5);
    let (_, cache) = net.calibrated_mean(gamma, &f, 0.3)?;
    let mut grad = net.zeros_like();
    net.backward(&cache, 1.0, &mut grad);
    let mut analytic = Vec::new();
    grad.g.write_flat(&mut analytic);
    let err_net = crate::nn::max_rel_err(&analytic, &fd);

    // Contrastive critic gradient.
    let critic = BilinearCritic::new(2, 2, 0.5, &mut r);
    let batch: Vec<NcePair> = (0..4)
        .map(|_| NcePair {
            context: (0..2).map(|_| r.gen_range(-1.0..1.0)).collect(),
            positive: (0..2).map(|_| r.gen_range(-1.0..1.0)).collect(),
            negatives: (0..3)
                .map(|_| (0..2).map(|_| r.gen_range(-1.0..1.0)).collect())
                .collect(),
        })
        .collect();
    let w0 = critic.weight.as_slice().to_vec();
    let mut eval_c = |p: &[f64]| {
        let mut c = critic.clone();
        c.weight.as_mut_slice().copy_from_slice(p);
        crate::calibration::infonce_lower(&batch, &c).unwrap()
    };
    let fd_c = crate::nn::fd_gradient(&mut eval_c, &w0, 1e-5);
    let (_, grad_c) = critic.nce_gradient(&batch)?;
    let err_critic = crate::nn::max_rel_err(grad_c.as_slice(), &fd_c);
    Ok(err_net.max(err_critic))
}

fn memory_fd_instance(seed: u64, idx: u64) -> Result<f64> {
    let mut r = rng::stream(seed, "fd-memory", idx);
    // Message passing.
    let mp = MessagePassing::new(3, 4, 2, &mut r);
    let g = random_graph(3, &mut r);
    let proj: Vec<f64> = (0..4).map(|_| r.gen_range(-1.0..1.0)).collect();
    let mut flat0 = Vec::new();
    mp.write_flat(&mut flat0);
    let mut eval = |p: &[f64]| {
        let mut m = mp.clone();
        m.read_flat(p);
        let (f, _) = m.context_feature(&g).unwrap();
        f.iter().zip(&proj).map(|(a, b)| a * b).sum::<f64>()
    };
    let fd = crate::nn::fd_gradient(&mut eval, &flat0, 1e-5);
    let (_, cache) = mp.context_feature(&g)?;
    let mut grad = mp.zeros_like();
    mp.backward(&g, &cache, &proj, &mut grad);
    let mut analytic = Vec::new();
    grad.write_flat(&mut analytic);
    let err_mp = crate::nn::max_rel_err(&analytic, &fd);

    // Recurrent readout.
    let mem = RecurrentMemory::new(3, 4, 2, &mut r);
    let hidden: Vec<f64> = (0..4).map(|_| r.gen_range(-0.5..0.5)).collect();
    let input: Vec<f64> = (0..3).map(|_| r.gen_range(-1.0..1.0)).collect();
    let proj2: Vec<f64> = (0..2).map(|_| r.gen_range(-1.0..1.0)).collect();
    let mut flat1 = Vec::new();
    mem.write_flat(&mut flat1);
    let mut eval2 = |p: &[f64]| {
        let mut m = mem.clone();
        m.read_flat(p);
        let (f, _, _) = m.feature(&hidden, &input);
        f.iter().zip(&proj2).map(|(a, b)| a * b).sum::<f64>()
    };
    let fd2 = crate::nn::fd_gradient(&mut eval2, &flat1, 1e-5);
    let (_, _, cache2) = mem.feature(&hidden, &input);
    let mut grad2 = mem.zeros_like();
    mem.backward(&cache2, &proj2, &mut grad2);
    let mut analytic2 = Vec::new();
    grad2.write_flat(&mut analytic2);
    let err_rec = crate::nn::max_rel_err(&analytic2, &fd2);
    Ok(err_mp.max(err_rec))
}

/// Monotone-decay spot check used by tests: Ψ-moment sanity on the closed
/// forms against simple encoders.
pub fn psi_closed_form_sanity() -> Result<f64> {
    let enc = DiagGaussian::new(vec![0.5], vec![2.0])?;
    let s = psi_moments(&enc);
    Ok((s.mu - 0.278426409720027).abs().max((s.sigma2 - 1.0).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theorem1_suite_is_clean() {
        let outcome = theorem1_suite(17).unwrap();
        assert!(outcome.passed, "{}", outcome.details);
        assert_eq!(outcome.csv.as_ref().unwrap().rows.len(), 1000);
    }

    #[test]
    fn kronecker_suite_is_clean() {
        let outcome = kronecker_kl_suite(17).unwrap();
        assert!(outcome.passed, "{}", outcome.details);
    }

    #[test]
    fn unknown_suite_is_an_error() {
        assert!(run_suites("nonsense", 1).is_err());
    }

    #[test]
    fn psi_sanity() {
        assert!(psi_closed_form_sanity().unwrap() < 1e-12);
    }
}
