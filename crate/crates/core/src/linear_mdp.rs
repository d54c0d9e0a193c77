//! Exact linear-MDP instantiation of the curiosity reward.
//!
//! A Bayesian posterior over the `c × d` transition matrix has covariance
//! `I_c ⊗ Λ⁻¹`, so the information gain of one more transition collapses to
//! `(c/2)·log(1 + ηᵀΛ⁻¹η)` — the same quadratic form that drives the
//! LSVI-UCB bonus. This module maintains that posterior incrementally,
//! evaluates both reward routes (Kronecker closed form and dense
//! cd-dimensional entropy change), and certifies the sandwich between the
//! square-root reward and the UCB bonus over randomized instances.

use crate::numerics::{
    kron_identity_feature, sherman_morrison_update, vec_row_major, DenseMatrix, DenseVector,
    FullGaussian,
};
use crate::{Error, Result};
use rand::Rng;

/// The log-inequality `x/2 ≤ log(1+x)` underpinning the sandwich holds only
/// up to this root; instances beyond it are rejected, not failed.
pub const Q_VALIDITY_LIMIT: f64 = 2.512;

/// One transition in embedding space.
#[derive(Debug, Clone)]
pub struct LinearTransition {
    pub eta: DenseVector,
    pub next: DenseVector,
}

/// Gaussian posterior over the transition matrix, maintained incrementally.
#[derive(Debug, Clone)]
pub struct PosteriorState {
    gram: DenseMatrix,
    gram_inv: DenseMatrix,
    /// Σ s'·ηᵀ, the regression right-hand side.
    target_outer: DenseMatrix,
    /// Ridge mean ω = target_outer · Λ⁻¹ (c × d).
    mean: DenseMatrix,
    lambda: f64,
    d: usize,
    c: usize,
    m: usize,
    since_resolve: usize,
}

/// Re-solve the inverse from scratch this often to bound drift from the
/// incremental rank-one updates.
const RESOLVE_EVERY: usize = 256;

impl PosteriorState {
    pub fn new(d: usize, c: usize, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::NonPositive { what: "lambda", value: lambda });
        }
        Ok(Self {
            gram: DenseMatrix::identity(d).scaled(lambda),
            gram_inv: DenseMatrix::identity(d).scaled(1.0 / lambda),
            target_outer: DenseMatrix::zeros(c, d),
            mean: DenseMatrix::zeros(c, d),
            lambda,
            d,
            c,
            m: 0,
            since_resolve: 0,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.d
    }

    pub fn next_dim(&self) -> usize {
        self.c
    }

    pub fn count(&self) -> usize {
        self.m
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn gram(&self) -> &DenseMatrix {
        &self.gram
    }

    pub fn gram_inv(&self) -> &DenseMatrix {
        &self.gram_inv
    }

    pub fn mean(&self) -> &DenseMatrix {
        &self.mean
    }

    /// Rank-one posterior update with one observed transition.
    pub fn update(&mut self, t: &LinearTransition) -> Result<()> {
        if t.eta.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: t.eta.len(),
                what: "posterior update eta",
            });
        }
        if t.next.len() != self.c {
            return Err(Error::DimensionMismatch {
                expected: self.c,
                got: t.next.len(),
                what: "posterior update next state",
            });
        }
        self.gram = self.gram.add(&t.eta.outer(&t.eta));
        self.target_outer = self.target_outer.add(&t.next.outer(&t.eta));
        self.since_resolve += 1;
        if self.since_resolve >= RESOLVE_EVERY {
            self.gram_inv = self.gram.inverse_pd()?;
            self.since_resolve = 0;
        } else {
            self.gram_inv = sherman_morrison_update(&self.gram_inv, &t.eta);
        }
        self.mean = self.target_outer.matmul(&self.gram_inv);
        self.m += 1;
        Ok(())
    }

    /// Epistemic quadratic form `q = ηᵀΛ⁻¹η`.
    pub fn q_value(&self, eta: &DenseVector) -> f64 {
        self.gram_inv.quad_form(eta)
    }

    /// Information gain of observing one more transition at `η`:
    /// `(c/2)·log(1 + ηᵀΛ⁻¹η)`.
    pub fn kl_posterior_update(&self, eta: &DenseVector) -> f64 {
        (self.c as f64 / 2.0) * self.q_value(eta).ln_1p()
    }

    /// Exact intrinsic reward: square root of the information gain.
    pub fn intrinsic_reward_exact(&self, eta: &DenseVector) -> f64 {
        self.kl_posterior_update(eta).max(0.0).sqrt()
    }

    /// LSVI-UCB optimism bonus `ζ·√(ηᵀΛ⁻¹η)`.
    pub fn ucb_bonus(&self, eta: &DenseVector, zeta: f64) -> f64 {
        assert!(zeta > 0.0, "zeta must be positive");
        zeta * self.q_value(eta).max(0.0).sqrt()
    }

    /// The posterior over the vectorized transition matrix as an explicit
    /// `cd`-dimensional Gaussian (row-major vec pairing with `I_c ⊗ η`).
    pub fn full_posterior(&self) -> Result<FullGaussian> {
        let big = self.kron_gram();
        let cov = big.inverse_pd()?;
        FullGaussian::new(vec_row_major(&self.mean), cov)
    }

    fn kron_gram(&self) -> DenseMatrix {
        let n = self.c * self.d;
        let mut big = DenseMatrix::zeros(n, n);
        for b in 0..self.c {
            for i in 0..self.d {
                for j in 0..self.d {
                    big[(b * self.d + i, b * self.d + j)] = self.gram[(i, j)];
                }
            }
        }
        big
    }

    /// Dense-route information gain: build both `cd`-dimensional posteriors
    /// explicitly and take the differential-entropy difference. Independent
    /// of the Kronecker shortcut — the expanded feature `I_c ⊗ η` produces
    /// the updated precision, and log-determinants come from dense Cholesky.
    pub fn kl_posterior_update_dense(&self, eta: &DenseVector) -> Result<f64> {
        let before = self.full_posterior()?;
        let expanded = kron_identity_feature(eta, self.c);
        // Λ̃ + η̃·η̃ᵀ, accumulated column by column.
        let mut after_precision = self.kron_gram();
        for col in 0..self.c {
            let mut v = DenseVector::zeros(self.c * self.d);
            for row in 0..self.c * self.d {
                v[row] = expanded[(row, col)];
            }
            after_precision = after_precision.add(&v.outer(&v));
        }
        let after = FullGaussian::new(vec_row_major(&self.mean), after_precision.inverse_pd()?)?;
        Ok(before.entropy()? - after.entropy()?)
    }

    /// Batch ridge solution recomputed from scratch; test oracle for the
    /// incremental mean.
    pub fn batch_ridge(
        d: usize,
        c: usize,
        lambda: f64,
        transitions: &[LinearTransition],
    ) -> Result<DenseMatrix> {
        let mut gram = DenseMatrix::identity(d).scaled(lambda);
        let mut rhs = DenseMatrix::zeros(c, d);
        for t in transitions {
            gram = gram.add(&t.eta.outer(&t.eta));
            rhs = rhs.add(&t.next.outer(&t.eta));
        }
        Ok(rhs.matmul(&gram.inverse_pd()?))
    }
}

/// One verified instance of the reward/bonus sandwich.
#[derive(Debug, Clone)]
pub struct Theorem1Instance {
    pub id: usize,
    pub q: f64,
    pub r_exact: f64,
    pub r_ucb: f64,
    pub lower_slack: f64,
    pub upper_slack: f64,
    pub violated: bool,
}

/// Outcome of a verification sweep.
#[derive(Debug, Clone)]
pub struct Theorem1Report {
    pub instances: Vec<Theorem1Instance>,
    pub violations: usize,
    /// Instances whose probe fell outside the log-inequality's validity
    /// range; excluded from the sandwich check and reported separately.
    pub rejected: usize,
    pub tolerance: f64,
}

impl Theorem1Report {
    pub fn csv(&self) -> String {
        let mut out = String::from("instance_id,q,r_exact,r_ucb,lower_slack,upper_slack\n");
        for inst in &self.instances {
            out.push_str(&format!(
                "{},{:.12},{:.12},{:.12},{:.12},{:.12}\n",
                inst.id, inst.q, inst.r_exact, inst.r_ucb, inst.lower_slack, inst.upper_slack
            ));
        }
        out
    }
}

/// Instance description produced by a generator.
#[derive(Debug, Clone)]
pub struct Theorem1Setup {
    pub d: usize,
    pub c: usize,
    pub lambda: f64,
    pub zeta: f64,
    pub updates: Vec<LinearTransition>,
    pub probe: DenseVector,
}

/// Checks `ρ·r_ucb ≤ r_exact ≤ √2·ρ·r_ucb`, `ρ = (1/ζ)√(c/4)`, over `n`
/// generated instances.
pub fn verify_theorem1(
    mut gen: impl FnMut(usize) -> Theorem1Setup,
    n: usize,
    tolerance: f64,
) -> Result<Theorem1Report> {
    let mut instances = Vec::with_capacity(n);
    let mut violations = 0;
    let mut rejected = 0;
    for id in 0..n {
        let setup = gen(id);
        let mut post = PosteriorState::new(setup.d, setup.c, setup.lambda)?;
        for t in &setup.updates {
            post.update(t)?;
        }
        let q = post.q_value(&setup.probe);
        if q > Q_VALIDITY_LIMIT {
            rejected += 1;
            continue;
        }
        let r_exact = post.intrinsic_reward_exact(&setup.probe);
        let r_ucb = post.ucb_bonus(&setup.probe, setup.zeta);
        let rho = (1.0 / setup.zeta) * (setup.c as f64 / 4.0).sqrt();
        let lower_slack = r_exact - rho * r_ucb;
        let upper_slack = 2.0f64.sqrt() * rho * r_ucb - r_exact;
        let violated = lower_slack < -tolerance || upper_slack < -tolerance;
        if violated {
            violations += 1;
        }
        instances.push(Theorem1Instance {
            id,
            q,
            r_exact,
            r_ucb,
            lower_slack,
            upper_slack,
            violated,
        });
    }
    Ok(Theorem1Report { instances, violations, rejected, tolerance })
}

/// Default randomized generator: `d ≤ 8`, `c ≤ 4`, up to 50 posterior
/// updates, and `λ ≥ ‖probe‖²` so the probe's quadratic form stays ≤ 1.
pub fn default_theorem1_generator(seed: u64) -> impl FnMut(usize) -> Theorem1Setup {
    move |idx| {
        let mut r = crate::rng::stream(seed, "theorem1", idx as u64);
        let d = r.gen_range(1..=8usize);
        let c = r.gen_range(1..=4usize);
        let zeta = r.gen_range(0.25..4.0);
        let probe =
            DenseVector::from_vec((0..d).map(|_| r.gen_range(-1.0..1.0)).collect());
        let lambda = (probe.dot(&probe) * r.gen_range(1.0..3.0)).max(0.05);
        let n_updates = r.gen_range(0..=50usize);
        let updates = (0..n_updates)
            .map(|_| LinearTransition {
                eta: DenseVector::from_vec((0..d).map(|_| r.gen_range(-1.0..1.0)).collect()),
                next: DenseVector::from_vec((0..c).map(|_| r.gen_range(-1.0..1.0)).collect()),
            })
            .collect();
        Theorem1Setup { d, c, lambda, zeta, updates, probe }
    }
}

/// Abstract episodic environment with a fixed feature map, the surface the
/// LSVI-UCB baseline learns against.
pub trait LinearEpisodeEnv {
    fn feature_dim(&self) -> usize;
    fn n_actions(&self) -> usize;
    /// Features of the current state paired with `action`.
    fn features(&self, action: usize) -> DenseVector;
    /// Returns (reward, terminal). `terminal` means the environment truly
    /// ended; plain horizon truncation is handled by the caller and still
    /// bootstraps, so discounted fixed points are not contaminated.
    fn step(&mut self, action: usize) -> (f64, bool);
    fn reset(&mut self);
    fn horizon(&self) -> usize;
}

/// Learned policy: ridge weights plus the shared Gram state.
#[derive(Debug, Clone)]
pub struct LsviPolicy {
    pub weights: DenseVector,
    pub posterior: PosteriorState,
    pub zeta: f64,
}

impl LsviPolicy {
    pub fn q_value(&self, eta: &DenseVector) -> f64 {
        self.weights.dot(eta) + self.posterior.ucb_bonus(eta, self.zeta)
    }

    pub fn greedy<E: LinearEpisodeEnv>(&self, env: &E) -> usize {
        let mut best = 0;
        let mut best_q = f64::NEG_INFINITY;
        for a in 0..env.n_actions() {
            let q = self.q_value(&env.features(a));
            if q > best_q {
                best_q = q;
                best = a;
            }
        }
        best
    }
}

/// Per-episode diagnostics from the learner.
#[derive(Debug, Clone)]
pub struct LsviTrace {
    pub episode_returns: Vec<f64>,
    /// Bonus at each probe feature after every episode.
    pub probe_bonuses: Vec<Vec<f64>>,
}

/// Regularized least-squares value iteration with an optimistic bonus.
pub fn lsvi_ucb_learner<E: LinearEpisodeEnv>(
    env: &mut E,
    episodes: usize,
    zeta: f64,
    lambda: f64,
    discount: f64,
    probes: &[DenseVector],
) -> Result<(LsviPolicy, LsviTrace)> {
    let d = env.feature_dim();
    let mut posterior = PosteriorState::new(d, 1, lambda)?;
    let mut weights = DenseVector::zeros(d);
    // Replay: (eta, reward, next-state features per action, done).
    let mut replay: Vec<(DenseVector, f64, Vec<DenseVector>, bool)> = Vec::new();
    let mut trace = LsviTrace { episode_returns: Vec::new(), probe_bonuses: Vec::new() };

    for _ in 0..episodes {
        env.reset();
        let mut ep_return = 0.0;
        for _ in 0..env.horizon() {
            let policy =
                LsviPolicy { weights: weights.clone(), posterior: posterior.clone(), zeta };
            let action = policy.greedy(env);
            let eta = env.features(action);
            let (reward, terminal) = env.step(action);
            ep_return += reward;
            let next_feats: Vec<DenseVector> =
                (0..env.n_actions()).map(|a| env.features(a)).collect();
            posterior.update(&LinearTransition {
                eta: eta.clone(),
                next: DenseVector::from_vec(vec![reward]),
            })?;
            replay.push((eta, reward, next_feats, terminal));
            if terminal {
                break;
            }
        }
        // A few fitted sweeps with the previous solution as the target.
        for _ in 0..3 {
            let mut rhs = DenseVector::zeros(d);
            for (eta, reward, next_feats, done) in &replay {
                let target = if *done {
                    *reward
                } else {
                    let max_next = next_feats
                        .iter()
                        .map(|f| weights.dot(f))
                        .fold(f64::NEG_INFINITY, f64::max);
                    reward + discount * max_next
                };
                rhs = rhs.add(&eta.scaled(target));
            }
            weights = posterior.gram().solve_pd(&rhs)?;
        }
        trace.episode_returns.push(ep_return);
        trace
            .probe_bonuses
            .push(probes.iter().map(|p| posterior.ucb_bonus(p, zeta)).collect());
    }
    Ok((LsviPolicy { weights, posterior, zeta }, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn vecd(v: &[f64]) -> DenseVector {
        DenseVector::from_vec(v.to_vec())
    }

    #[test]
    fn posterior_scalar_update() {
        let mut post = PosteriorState::new(1, 1, 1.0).unwrap();
        post.update(&LinearTransition { eta: vecd(&[1.0]), next: vecd(&[0.5]) }).unwrap();
        assert!((post.gram()[(0, 0)] - 2.0).abs() < 1e-14);
        assert_eq!(post.count(), 1);
    }

    #[test]
    fn posterior_zero_eta_leaves_gram() {
        let mut post = PosteriorState::new(2, 1, 1.5).unwrap();
        let before = post.gram().clone();
        post.update(&LinearTransition { eta: vecd(&[0.0, 0.0]), next: vecd(&[1.0]) }).unwrap();
        assert!(post.gram().max_abs_diff(&before) < 1e-15);
    }

    #[test]
    fn posterior_rejects_dimension_mismatch() {
        let mut post = PosteriorState::new(2, 1, 1.0).unwrap();
        let t = LinearTransition { eta: vecd(&[1.0]), next: vecd(&[1.0]) };
        assert!(post.update(&t).is_err());
    }

    #[test]
    fn posterior_mean_matches_batch_ridge() {
        let mut r = rng::stream(6, "lmdp-test", 0);
        use rand::Rng;
        let (d, c, lambda) = (4, 3, 0.7);
        let mut post = PosteriorState::new(d, c, lambda).unwrap();
        let mut transitions = Vec::new();
        for _ in 0..300 {
            let t = LinearTransition {
                eta: vecd(&(0..d).map(|_| r.gen_range(-1.0..1.0)).collect::<Vec<_>>()),
                next: vecd(&(0..c).map(|_| r.gen_range(-1.0..1.0)).collect::<Vec<_>>()),
            };
            post.update(&t).unwrap();
            transitions.push(t);
        }
        let batch = PosteriorState::batch_ridge(d, c, lambda, &transitions).unwrap();
        assert!(post.mean().max_abs_diff(&batch) < 1e-8);
        // Gram inverse stays an inverse.
        let prod = post.gram().matmul(post.gram_inv());
        assert!(prod.max_abs_diff(&DenseMatrix::identity(d)) < 1e-8);
    }

    #[test]
    fn gram_is_order_free() {
        let mut r = rng::stream(6, "lmdp-test", 1);
        use rand::Rng;
        let d = 3;
        let ts: Vec<LinearTransition> = (0..20)
            .map(|_| LinearTransition {
                eta: vecd(&(0..d).map(|_| r.gen_range(-1.0..1.0)).collect::<Vec<_>>()),
                next: vecd(&[0.0]),
            })
            .collect();
        let mut fwd = PosteriorState::new(d, 1, 1.0).unwrap();
        let mut rev = PosteriorState::new(d, 1, 1.0).unwrap();
        for t in &ts {
            fwd.update(t).unwrap();
        }
        for t in ts.iter().rev() {
            rev.update(t).unwrap();
        }
        assert!(fwd.gram().max_abs_diff(rev.gram()) < 1e-12);
    }

    #[test]
    fn intrinsic_reward_base_case() {
        // d=1, c=2, λ=1, no data, unit probe: q = 1, r = √(log 2).
        let post = PosteriorState::new(1, 2, 1.0).unwrap();
        let probe = vecd(&[1.0]);
        assert!((post.q_value(&probe) - 1.0).abs() < 1e-14);
        let r = post.intrinsic_reward_exact(&probe);
        assert!((r - std::f64::consts::LN_2.sqrt()).abs() < 1e-12);
        assert!((r - 0.8325546111576977).abs() < 1e-12);
    }

    #[test]
    fn intrinsic_reward_zero_eta() {
        let post = PosteriorState::new(3, 2, 1.0).unwrap();
        assert_eq!(post.intrinsic_reward_exact(&DenseVector::zeros(3)), 0.0);
    }

    #[test]
    fn repeated_insertion_decays_reward() {
        let mut post = PosteriorState::new(1, 2, 1.0).unwrap();
        let probe = vecd(&[1.0]);
        let mut last = post.intrinsic_reward_exact(&probe);
        for m in 1..=20 {
            post.update(&LinearTransition { eta: probe.clone(), next: vecd(&[0.0, 0.0]) })
                .unwrap();
            let q = post.q_value(&probe);
            assert!((q - 1.0 / (1.0 + m as f64)).abs() < 1e-10);
            let r = post.intrinsic_reward_exact(&probe);
            assert!(r < last);
            last = r;
        }
    }

    #[test]
    fn ucb_bonus_values() {
        let post = PosteriorState::new(1, 1, 1.0).unwrap();
        let probe = vecd(&[1.0]);
        assert!((post.ucb_bonus(&probe, 1.0) - 1.0).abs() < 1e-14);
        assert!((post.ucb_bonus(&probe, 2.0) - 2.0).abs() < 1e-14);
        assert_eq!(post.ucb_bonus(&DenseVector::zeros(1), 1.0), 0.0);
    }

    #[test]
    fn kl_update_values_and_linearity_in_c() {
        let post2 = PosteriorState::new(1, 2, 1.0).unwrap();
        let post4 = PosteriorState::new(1, 4, 1.0).unwrap();
        let probe = vecd(&[1.0]);
        let k2 = post2.kl_posterior_update(&probe);
        let k4 = post4.kl_posterior_update(&probe);
        assert!((k2 - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((k4 - 2.0 * k2).abs() < 1e-12);
        assert_eq!(post2.kl_posterior_update(&DenseVector::zeros(1)), 0.0);
    }

    #[test]
    fn kl_update_matches_dense_route() {
        let mut r = rng::stream(6, "lmdp-test", 2);
        use rand::Rng;
        for _ in 0..30 {
            let d = r.gen_range(1..=6usize);
            let c = r.gen_range(1..=4usize);
            let mut post = PosteriorState::new(d, c, r.gen_range(0.2..2.0)).unwrap();
            for _ in 0..r.gen_range(0..10usize) {
                post.update(&LinearTransition {
                    eta: vecd(&(0..d).map(|_| r.gen_range(-1.0..1.0)).collect::<Vec<_>>()),
                    next: vecd(&(0..c).map(|_| r.gen_range(-1.0..1.0)).collect::<Vec<_>>()),
                })
                .unwrap();
            }
            let probe = vecd(&(0..d).map(|_| r.gen_range(-1.0..1.0)).collect::<Vec<_>>());
            let fast = post.kl_posterior_update(&probe);
            let dense = post.kl_posterior_update_dense(&probe).unwrap();
            assert!((fast - dense).abs() < 1e-8, "fast {fast} dense {dense}");
        }
    }

    #[test]
    fn theorem1_base_instance() {
        let report = verify_theorem1(
            |_| Theorem1Setup {
                d: 1,
                c: 2,
                lambda: 1.0,
                zeta: 1.0,
                updates: vec![],
                probe: vecd(&[1.0]),
            },
            1,
            1e-9,
        )
        .unwrap();
        assert_eq!(report.violations, 0);
        let inst = &report.instances[0];
        // Bounds 0.70711 ≤ 0.83255 ≤ 1.0 at ρ = √(1/2).
        assert!((inst.r_exact - 0.8325546111576977).abs() < 1e-9);
        assert!((inst.lower_slack - (0.8325546111576977 - 0.7071067811865476)).abs() < 1e-9);
        assert!((inst.upper_slack - (1.0 - 0.8325546111576977)).abs() < 1e-9);
    }

    #[test]
    fn theorem1_zero_probe() {
        let report = verify_theorem1(
            |_| Theorem1Setup {
                d: 2,
                c: 2,
                lambda: 1.0,
                zeta: 1.0,
                updates: vec![],
                probe: DenseVector::zeros(2),
            },
            1,
            1e-9,
        )
        .unwrap();
        assert_eq!(report.violations, 0);
        assert_eq!(report.instances[0].r_exact, 0.0);
        assert_eq!(report.instances[0].r_ucb, 0.0);
    }

    #[test]
    fn theorem1_rejects_out_of_range_q() {
        // λ far below ‖η‖² drives q above the validity limit.
        let report = verify_theorem1(
            |_| Theorem1Setup {
                d: 1,
                c: 1,
                lambda: 0.1,
                zeta: 1.0,
                updates: vec![],
                probe: vecd(&[1.0]),
            },
            1,
            1e-9,
        )
        .unwrap();
        assert_eq!(report.rejected, 1);
        assert!(report.instances.is_empty());
    }

    #[test]
    fn theorem1_random_sweep_clean() {
        let report = verify_theorem1(default_theorem1_generator(11), 200, 1e-9).unwrap();
        assert_eq!(report.violations, 0);
        assert_eq!(report.rejected, 0);
    }

    #[test]
    fn monotone_decay_under_arbitrary_updates() {
        let mut r = rng::stream(6, "lmdp-test", 3);
        use rand::Rng;
        for _ in 0..20 {
            let d = r.gen_range(1..=6usize);
            let mut post = PosteriorState::new(d, 3, 1.0).unwrap();
            let probe = vecd(&(0..d).map(|_| r.gen_range(-1.0..1.0)).collect::<Vec<_>>());
            let mut last = post.intrinsic_reward_exact(&probe);
            for _ in 0..40 {
                post.update(&LinearTransition {
                    eta: vecd(&(0..d).map(|_| r.gen_range(-1.0..1.0)).collect::<Vec<_>>()),
                    next: vecd(&(0..3).map(|_| r.gen_range(-1.0..1.0)).collect::<Vec<_>>()),
                })
                .unwrap();
                let now = post.intrinsic_reward_exact(&probe);
                assert!(now <= last + 1e-12);
                last = now;
            }
        }
    }

    /// Deterministic two-state chain used as the learner's oracle MDP.
    struct Chain {
        state: usize,
        t: usize,
        horizon: usize,
        reward_on_one: bool,
    }

    impl Chain {
        fn new(reward_on_one: bool) -> Self {
            Self { state: 0, t: 0, horizon: 8, reward_on_one }
        }
    }

    impl LinearEpisodeEnv for Chain {
        fn feature_dim(&self) -> usize {
            4
        }
        fn n_actions(&self) -> usize {
            2
        }
        fn features(&self, action: usize) -> DenseVector {
            let mut f = vec![0.0; 4];
            f[self.state * 2 + action] = 1.0;
            DenseVector::from_vec(f)
        }
        fn step(&mut self, action: usize) -> (f64, bool) {
            let reward =
                if self.reward_on_one && self.state == 1 { 1.0 } else { 0.0 };
            // action 1 moves toward state 1, action 0 stays / returns to 0.
            self.state = if action == 1 { 1 } else { 0 };
            self.t += 1;
            (reward, false)
        }
        fn reset(&mut self) {
            self.state = 0;
            self.t = 0;
        }
        fn horizon(&self) -> usize {
            self.horizon
        }
    }

    /// Infinite-horizon value iteration for the chain.
    fn chain_q_star(discount: f64) -> [[f64; 2]; 2] {
        let mut q = [[0.0f64; 2]; 2];
        for _ in 0..10_000 {
            let mut next = q;
            for s in 0..2 {
                for a in 0..2 {
                    let r = if s == 1 { 1.0 } else { 0.0 };
                    let s2 = if a == 1 { 1 } else { 0 };
                    next[s][a] = r + discount * q[s2].iter().cloned().fold(f64::MIN, f64::max);
                }
            }
            q = next;
        }
        q
    }

    #[test]
    fn lsvi_learns_chain_q_values() {
        let mut env = Chain::new(true);
        let discount = 0.5;
        let (policy, _) =
            lsvi_ucb_learner(&mut env, 500, 1.0, 0.1, discount, &[]).unwrap();
        let q_star = chain_q_star(discount);
        for s in 0..2 {
            for a in 0..2 {
                let mut f = vec![0.0; 4];
                f[s * 2 + a] = 1.0;
                let eta = DenseVector::from_vec(f);
                let learned = policy.weights.dot(&eta);
                assert!(
                    (learned - q_star[s][a]).abs() < 0.05,
                    "Q({s},{a}) learned {learned} vs {}",
                    q_star[s][a]
                );
            }
        }
    }

    #[test]
    fn lsvi_zero_reward_shrinks_weights() {
        let mut env = Chain::new(false);
        let (policy, _) = lsvi_ucb_learner(&mut env, 100, 1.0, 1.0, 0.9, &[]).unwrap();
        assert!(policy.weights.norm() < 1e-6);
    }

    #[test]
    fn lsvi_probe_bonus_non_increasing() {
        let mut env = Chain::new(true);
        let probes: Vec<DenseVector> = (0..4)
            .map(|i| {
                let mut f = vec![0.0; 4];
                f[i] = 1.0;
                DenseVector::from_vec(f)
            })
            .collect();
        let (_, trace) = lsvi_ucb_learner(&mut env, 50, 1.0, 1.0, 0.9, &probes).unwrap();
        for p in 0..4 {
            for e in 1..trace.probe_bonuses.len() {
                assert!(trace.probe_bonuses[e][p] <= trace.probe_bonuses[e - 1][p] + 1e-12);
            }
        }
    }
}
