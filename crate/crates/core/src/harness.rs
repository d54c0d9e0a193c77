//! End-to-end training loop: parallel episode collection, intrinsic-reward
//! injection, policy updates, curiosity updates, baselines, ablations, and
//! metric logging.
//!
//! Every run is a pure function of (config, seed). Subsystems draw from
//! independent named streams, so turning the intrinsic scale to zero leaves
//! the policy trajectory bit-for-bit equal to the plain baseline's.

use crate::calibration::{
    gamma_factor, negative_sampler, BilinearCritic, MiBound, NcePair,
};
use crate::config::{LabConfig, MemoryType, Variant};
use crate::csvio::{fmt, CsvTable};
use crate::gridworld::{GridWorld, Observation, N_ACTIONS};
use crate::linear_mdp::{LinearTransition, PosteriorState};
use crate::memory::{MemoryModule, MemoryQueue, PretrainExample};
use crate::model::{
    combine_rewards, CermicModel, ContextInput, ContextNet, ModelConfig, ModelTransition,
};
use crate::numerics::DenseVector;
use crate::robust::{beta_from, psi_sample, PsiNormalizer};
use crate::{rng, stats, Result};
use rand::Rng;

/// One fully specified training run.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub lab: LabConfig,
    pub seed: u64,
    /// Ablation switch for the exploit hinge pair.
    pub exploit_enabled: bool,
    /// Pretrained intention-memory parameters, when available.
    pub pretrained_memory: Option<Vec<(String, Vec<f64>)>>,
    /// Record every (step, agent, position, action, reward) row.
    pub collect_trace: bool,
}

impl RunSpec {
    pub fn new(lab: LabConfig, seed: u64) -> Self {
        Self { lab, seed, exploit_enabled: true, pretrained_memory: None, collect_trace: false }
    }
}

/// One trace row, when trace collection is on.
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub episode: usize,
    pub step: usize,
    pub agent: usize,
    pub x: usize,
    pub y: usize,
    pub action: usize,
    pub reward: f64,
}

pub const TRACE_HEADER: &str = "episode,step,agent,x,y,action,reward";

pub fn trace_csv(rows: &[TraceRow]) -> CsvTable {
    let mut t = CsvTable::new(TRACE_HEADER);
    for r in rows {
        t.push(format!(
            "{},{},{},{},{},{},{}",
            r.episode,
            r.step,
            r.agent,
            r.x,
            r.y,
            r.action,
            fmt(r.reward)
        ));
    }
    t
}

/// One metrics row per (seed, episode).
#[derive(Debug, Clone)]
pub struct MetricsRow {
    pub seed: u64,
    pub episode: usize,
    pub ret: f64,
    /// Episode index of the run's first success, −1 while unknown.
    pub first_success: i64,
    pub mean_r_int: f64,
    pub loss_explore: f64,
    pub loss_ub: f64,
    pub loss_lb: f64,
    pub gamma_mean: f64,
    /// Deterministic work units (agent-steps); stands in for wall time so
    /// identical runs produce identical bytes.
    pub wall_ms: u64,
}

/// Append-only log of one run.
#[derive(Debug, Clone)]
pub struct MetricsLog {
    pub rows: Vec<MetricsRow>,
    pub first_success: Option<usize>,
    /// FNV digest over (episode, step, agent, position, action, reward).
    pub trajectory_digest: u64,
    /// Per-episode exact intrinsic reward at pinned probes (linear agent).
    pub probe_rewards: Vec<Vec<f64>>,
    pub variant: Variant,
    pub trace: Vec<TraceRow>,
}

pub const METRICS_HEADER: &str =
    "seed,episode,return,first_success,mean_r_int,loss_explore,loss_ub,loss_lb,gamma_mean,wall_ms";

impl MetricsLog {
    pub fn csv(&self) -> CsvTable {
        let mut t = CsvTable::new(METRICS_HEADER);
        for r in &self.rows {
            t.push(format!(
                "{},{},{},{},{},{},{},{},{},{}",
                r.seed,
                r.episode,
                fmt(r.ret),
                r.first_success,
                fmt(r.mean_r_int),
                fmt(r.loss_explore),
                fmt(r.loss_ub),
                fmt(r.loss_lb),
                fmt(r.gamma_mean),
                r.wall_ms
            ));
        }
        t
    }

    /// First-success episode with censoring at the episode budget.
    pub fn first_success_censored(&self, episodes: usize) -> f64 {
        self.first_success.map_or(episodes as f64, |e| e as f64)
    }

    /// Mean return over the final fifth of the run.
    pub fn final_return(&self) -> f64 {
        let n = self.rows.len();
        if n == 0 {
            return 0.0;
        }
        let tail = (n / 5).max(1);
        stats::mean(&self.rows[n - tail..].iter().map(|r| r.ret).collect::<Vec<_>>())
    }
}

/// Decay diagnostics from a completed run.
#[derive(Debug, Clone)]
pub struct DecayReport {
    /// Exact non-increase of pinned-probe rewards (linear agents only).
    pub monotone: Option<bool>,
    pub violations: usize,
    pub probe_count: usize,
    /// Episode-window means of the logged intrinsic reward (reported for
    /// deep runs without asserting monotonicity).
    pub window_trend: Vec<f64>,
}

/// Monotonicity report over probe rewards plus the windowed trend.
pub fn intrinsic_decay_probe(log: &MetricsLog) -> DecayReport {
    let mut violations = 0;
    let probe_count = log.probe_rewards.first().map_or(0, |p| p.len());
    for e in 1..log.probe_rewards.len() {
        for p in 0..probe_count {
            if log.probe_rewards[e][p] > log.probe_rewards[e - 1][p] + 1e-12 {
                violations += 1;
            }
        }
    }
    let monotone = if log.probe_rewards.is_empty() { None } else { Some(violations == 0) };
    let window = (log.rows.len() / 10).max(1);
    let window_trend = log
        .rows
        .chunks(window)
        .map(|c| stats::mean(&c.iter().map(|r| r.mean_r_int).collect::<Vec<_>>()))
        .collect();
    DecayReport { monotone, violations, probe_count, window_trend }
}

// ---------------------------------------------------------------------------
// Per-agent learners.
// ---------------------------------------------------------------------------

/// Linear Q over the world's smooth position features, one weight block
/// per action. Generalization across positions is what lets decayed
/// novelty in visited regions tilt the value surface toward the frontier.
struct LinearQ {
    w: DenseVector,
}

impl LinearQ {
    fn new(dim: usize) -> Self {
        Self { w: DenseVector::zeros(dim) }
    }

    fn q(&self, world: &GridWorld, pos: (usize, usize), a: usize) -> f64 {
        self.w.dot(&world.feature_map(pos, a))
    }

    fn greedy(&self, world: &GridWorld, pos: (usize, usize)) -> usize {
        let mut best = 0;
        let mut best_q = f64::NEG_INFINITY;
        for a in 0..N_ACTIONS {
            let q = self.q(world, pos, a);
            if q > best_q {
                best_q = q;
                best = a;
            }
        }
        best
    }

    fn max_q(&self, world: &GridWorld, pos: (usize, usize)) -> f64 {
        (0..N_ACTIONS).map(|a| self.q(world, pos, a)).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// One-step TD sweep. Iterating the episode in reverse lets end-of-episode
/// value reach the start in a single pass.
fn policy_update(
    table: &mut LinearQ,
    world: &GridWorld,
    batch: &[(usize, (usize, usize), usize, (usize, usize), f64, bool)],
    q_lr: f64,
    discount: f64,
) {
    for &(_, pos, action, next_pos, reward, terminal) in batch.iter().rev() {
        let target =
            if terminal { reward } else { reward + discount * table.max_q(world, next_pos) };
        let feat = world.feature_map(pos, action);
        let delta = target - table.w.dot(&feat);
        table.w = table.w.add(&feat.scaled(q_lr * delta));
    }
}

/// Everything one curious agent carries.
struct CermicAgent {
    model: CermicModel,
    memory: MemoryModule,
    critic: BilinearCritic,
    queue: MemoryQueue,
    rec_hidden: Vec<f64>,
    normalizer: PsiNormalizer,
    feature_scale: PsiNormalizer,
    f_prev: Vec<f64>,
}

impl CermicAgent {
    fn new(spec: &RunSpec, agent: usize, world: &GridWorld) -> Result<Self> {
        let lab = &spec.lab;
        let cfg = ModelConfig {
            obs_dim: lab.gridworld.obs_len(),
            n_actions: N_ACTIONS,
            d_state: lab.model.d_state,
            d_latent: lab.model.d_latent,
            d_node: lab.memory.d_node,
            d_feature: lab.memory.d_feature,
            hidden: lab.model.hidden,
            k_samples: lab.model.k_samples,
            tau_m: lab.model.tau_m,
            lr: lab.model.lr,
            grad_clip: lab.model.grad_clip,
        };
        let graph = lab.memory.memory_type == MemoryType::Graph;
        let mut init = rng::stream(spec.seed, "model-init", agent as u64);
        let model = CermicModel::new(cfg, graph, &mut init);
        let mut mem_init = rng::stream(spec.seed, "memory-init", agent as u64);
        let mut memory = MemoryModule::new(
            lab.gridworld.obs_len(),
            lab.gridworld.n_agents,
            lab.memory.d_node,
            2 + N_ACTIONS,
            lab.model.hidden,
            lab.memory.tau_det,
            &mut mem_init,
        );
        if let Some(groups) = &spec.pretrained_memory {
            memory.load_checkpoint_groups(groups)?;
        }
        let mut critic_init = rng::stream(spec.seed, "critic-init", agent as u64);
        let critic = BilinearCritic::new(
            1 + lab.memory.d_feature,
            lab.memory.d_feature,
            0.1,
            &mut critic_init,
        );
        let _ = world;
        Ok(Self {
            model,
            memory,
            critic,
            queue: MemoryQueue::new(lab.memory.queue_capacity),
            rec_hidden: vec![0.0; lab.memory.d_feature],
            normalizer: PsiNormalizer::new(lab.robust.momentum, lab.robust.var_floor),
            feature_scale: PsiNormalizer::new(lab.robust.momentum, lab.robust.var_floor),
            f_prev: vec![0.0; lab.memory.d_feature],
        })
    }

    fn reset_episode(&mut self, lab: &LabConfig) {
        self.queue = MemoryQueue::new(lab.memory.queue_capacity);
        self.rec_hidden.iter_mut().for_each(|h| *h = 0.0);
        self.f_prev.iter_mut().for_each(|f| *f = 0.0);
    }

    /// Advances the intention memory on the current observation; returns
    /// the context feature and the loss-side context input.
    fn observe_context(
        &mut self,
        lab: &LabConfig,
        obs: &Observation,
        offsets: &[Option<(f64, f64)>],
        agent: usize,
    ) -> Result<(Vec<f64>, ContextInput)> {
        match lab.memory.memory_type {
            MemoryType::Graph => {
                let det = self.memory.detect_agents(&obs.data)?;
                let graph =
                    self.memory.update_graph(&mut self.queue, &obs.data, &det, offsets, agent);
                if !self.queue.has_advanced() {
                    return Ok((vec![0.0; lab.memory.d_feature], ContextInput::None));
                }
                let f = self.model.context_feature(&ContextInput::Graph(graph.clone()))?;
                Ok((f, ContextInput::Graph(graph)))
            }
            MemoryType::Recurrent => {
                let input = self.memory.fresh_node(&obs.data, agent);
                let hidden_before = self.rec_hidden.clone();
                let (f, h_new) = match &self.model.context {
                    ContextNet::Recurrent(mem) => {
                        let (f, h, _) = mem.feature(&hidden_before, &input);
                        (f, h)
                    }
                    _ => unreachable!("recurrent memory type carries a recurrent net"),
                };
                self.rec_hidden = h_new;
                Ok((f, ContextInput::Recurrent { hidden: hidden_before, input }))
            }
        }
    }
}

// ---------------------------------------------------------------------------
// The run loop.
// ---------------------------------------------------------------------------

const PROBE_CELLS: [(usize, usize); 4] = [(0, 0), (4, 4), (8, 8), (2, 6)];

fn fnv_mix(h: &mut u64, v: u64) {
    const PRIME: u64 = 0x100000001b3;
    *h = (*h ^ v).wrapping_mul(PRIME);
}

/// Executes the full loop: act, store, reward, policy update, curiosity
/// update, one metrics row per episode.
pub fn run_training(spec: &RunSpec) -> Result<MetricsLog> {
    let lab = &spec.lab;
    lab.validate()?;
    let world = GridWorld::new(lab.gridworld.clone())?;
    let n_agents = lab.gridworld.n_agents;
    let episodes = lab.training.episodes;
    let variant = lab.training.variant;
    let beta = beta_from(&lab.robust.ambiguity()?);

    // Policy state.
    let mut q_tables: Vec<LinearQ> =
        (0..n_agents).map(|_| LinearQ::new(world.feature_dim())).collect();
    let mut policy_streams: Vec<_> =
        (0..n_agents).map(|a| rng::stream(spec.seed, "policy", a as u64)).collect();

    // LSVI state.
    let feature_dim = world.feature_dim();
    let mut lsvi_posts: Vec<PosteriorState> = (0..n_agents)
        .map(|_| PosteriorState::new(feature_dim, 1, lab.lsvi.lambda))
        .collect::<Result<_>>()?;
    let mut lsvi_weights: Vec<DenseVector> =
        (0..n_agents).map(|_| DenseVector::zeros(feature_dim)).collect();
    let mut lsvi_replay: Vec<Vec<(DenseVector, f64, Vec<DenseVector>, bool)>> =
        (0..n_agents).map(|_| Vec::new()).collect();

    // Curiosity state.
    let is_cermic = matches!(variant, Variant::CermicQ | Variant::CermicNoCalibration);
    let mut agents: Vec<CermicAgent> = if is_cermic {
        (0..n_agents).map(|a| CermicAgent::new(spec, a, &world)).collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let mut noise_streams: Vec<_> =
        (0..n_agents).map(|a| rng::stream(spec.seed, "explore-noise", a as u64)).collect();
    let mut negative_streams: Vec<_> =
        (0..n_agents).map(|a| rng::stream(spec.seed, "negatives", a as u64)).collect();
    let mut minibatch_streams: Vec<_> =
        (0..n_agents).map(|a| rng::stream(spec.seed, "minibatch", a as u64)).collect();

    let mut log = MetricsLog {
        rows: Vec::with_capacity(episodes),
        first_success: None,
        trajectory_digest: 0xcbf29ce484222325,
        probe_rewards: Vec::new(),
        variant,
        trace: Vec::new(),
    };

    for episode in 0..episodes {
        let decay_span = lab.training.eps_decay_episodes.max(1);
        let frac = (episode as f64 / decay_span as f64).min(1.0);
        let eps = lab.training.eps_init + (lab.training.eps_final - lab.training.eps_init) * frac;

        let (mut state, mut observations) =
            world.reset(rng::stream(spec.seed, "episode", episode as u64).gen())?;
        for a in agents.iter_mut() {
            a.reset_episode(lab);
        }

        let mut ep_return = 0.0;
        let mut r_prev = 0.0;
        let mut steps = 0usize;
        let mut intrinsic_sum = 0.0;
        let mut intrinsic_count = 0usize;
        // Per-agent collections for the updates.
        let mut td_batches: Vec<Vec<(usize, (usize, usize), usize, (usize, usize), f64, bool)>> =
            vec![Vec::new(); n_agents];
        let mut model_batches: Vec<Vec<ModelTransition>> = vec![Vec::new(); n_agents];
        let mut nce_raw: Vec<Vec<(Vec<f64>, Vec<f64>)>> = vec![Vec::new(); n_agents];

        loop {
            // Context pass (curious agents) on the pre-step observations.
            let mut contexts: Vec<Option<(Vec<f64>, ContextInput)>> = vec![None; n_agents];
            if is_cermic {
                for a in 0..n_agents {
                    let offsets = world.oracle_labels(&state, a).offsets;
                    let (f, ctx) =
                        agents[a].observe_context(lab, &observations[a], &offsets, a)?;
                    // Contrastive pair against the previous step's context.
                    if !matches!(ctx, ContextInput::None) {
                        let mut z = vec![r_prev];
                        z.extend(agents[a].f_prev.iter().cloned());
                        nce_raw[a].push((z, f.clone()));
                    }
                    for v in &f {
                        agents[a].feature_scale.update(*v);
                    }
                    contexts[a] = Some((f, ctx));
                }
            }

            // Action selection.
            let mut joint = vec![0usize; n_agents];
            for a in 0..n_agents {
                joint[a] = match variant {
                    Variant::LsviUcb => {
                        let mut best = 0;
                        let mut best_q = f64::NEG_INFINITY;
                        for act in 0..N_ACTIONS {
                            let eta = world.feature_map(state.positions[a], act);
                            let q = lsvi_weights[a].dot(&eta)
                                + lsvi_posts[a].ucb_bonus(&eta, lab.lsvi.zeta);
                            if q > best_q {
                                best_q = q;
                                best = act;
                            }
                        }
                        best
                    }
                    _ => {
                        let u: f64 = policy_streams[a].gen();
                        if u < eps {
                            policy_streams[a].gen_range(0..N_ACTIONS)
                        } else {
                            q_tables[a].greedy(&world, state.positions[a])
                        }
                    }
                };
            }

            let positions_before = state.positions.clone();
            let (next_state, outcome) = world.step(&state, &joint)?;
            ep_return += outcome.reward;
            steps += 1;

            for a in 0..n_agents {
                if spec.collect_trace {
                    log.trace.push(TraceRow {
                        episode,
                        step: steps,
                        agent: a,
                        x: next_state.positions[a].0,
                        y: next_state.positions[a].1,
                        action: joint[a],
                        reward: outcome.reward,
                    });
                }
                fnv_mix(&mut log.trajectory_digest, episode as u64);
                fnv_mix(&mut log.trajectory_digest, steps as u64);
                fnv_mix(&mut log.trajectory_digest, a as u64);
                fnv_mix(
                    &mut log.trajectory_digest,
                    (next_state.positions[a].0 * 1000 + next_state.positions[a].1) as u64,
                );
                fnv_mix(&mut log.trajectory_digest, joint[a] as u64);
                fnv_mix(&mut log.trajectory_digest, outcome.reward.to_bits());
            }

            // Intrinsic rewards and experience storage.
            for a in 0..n_agents {
                let r_int = match variant {
                    Variant::CermicQ | Variant::CermicNoCalibration => {
                        agents[a].model.intrinsic_reward_approx(&observations[a].data, joint[a])?
                    }
                    Variant::LsviUcb => {
                        let eta = world.feature_map(positions_before[a], joint[a]);
                        lsvi_posts[a].intrinsic_reward_exact(&eta)
                    }
                    Variant::EpsilonGreedyQ => 0.0,
                };
                intrinsic_sum += r_int;
                intrinsic_count += 1;

                match variant {
                    Variant::LsviUcb => {
                        let eta = world.feature_map(positions_before[a], joint[a]);
                        lsvi_posts[a].update(&LinearTransition {
                            eta: eta.clone(),
                            next: DenseVector::from_vec(vec![outcome.reward]),
                        })?;
                        let next_feats = (0..N_ACTIONS)
                            .map(|act| world.feature_map(next_state.positions[a], act))
                            .collect();
                        lsvi_replay[a].push((eta, outcome.reward, next_feats, outcome.success));
                    }
                    _ => {
                        let shaped = combine_rewards(
                            outcome.reward,
                            r_int,
                            if variant == Variant::EpsilonGreedyQ {
                                0.0
                            } else {
                                lab.model.intrinsic_scale
                            },
                        );
                        td_batches[a].push((
                            a,
                            positions_before[a],
                            joint[a],
                            next_state.positions[a],
                            shaped,
                            outcome.success,
                        ));
                    }
                }

                if is_cermic {
                    let (f_now, ctx) = contexts[a].take().expect("context computed above");
                    let k = lab.model.k_samples * lab.model.d_latent;
                    let noise: Vec<f64> =
                        (0..k).map(|_| rng::standard_normal(&mut noise_streams[a])).collect();
                    model_batches[a].push(ModelTransition {
                        obs: observations[a].data.clone(),
                        action: joint[a],
                        obs_next: outcome.observations[a].data.clone(),
                        reward_prev: r_prev,
                        context: ctx,
                        explore_noise: noise,
                    });
                    agents[a].f_prev = f_now;
                }
            }

            r_prev = outcome.reward;
            state = next_state;
            observations = outcome.observations;
            if outcome.done {
                break;
            }
        }

        // Policy updates (Algorithm line order: actor first, then the
        // curiosity module).
        match variant {
            Variant::LsviUcb => {
                for a in 0..n_agents {
                    for _ in 0..3 {
                        let mut rhs = DenseVector::zeros(feature_dim);
                        for (eta, reward, next_feats, terminal) in &lsvi_replay[a] {
                            let target = if *terminal {
                                *reward
                            } else {
                                let m = next_feats
                                    .iter()
                                    .map(|f| lsvi_weights[a].dot(f))
                                    .fold(f64::NEG_INFINITY, f64::max);
                                reward + lab.training.discount * m
                            };
                            rhs = rhs.add(&eta.scaled(target));
                        }
                        lsvi_weights[a] = lsvi_posts[a].gram().solve_pd(&rhs)?;
                    }
                }
            }
            _ => {
                for a in 0..n_agents {
                    policy_update(
                        &mut q_tables[a],
                        &world,
                        &td_batches[a],
                        lab.training.q_lr,
                        lab.training.discount,
                    );
                }
            }
        }

        // Curiosity updates.
        let mut loss_explore = 0.0;
        let mut loss_ub = 0.0;
        let mut loss_lb = 0.0;
        let mut gamma_mean = 0.0;
        if is_cermic {
            for a in 0..n_agents {
                let batch = &model_batches[a];
                if batch.is_empty() {
                    continue;
                }
                // Realized Ψ stream feeds the normalizer.
                for t in batch {
                    let g = agents[a].model.latent_gaussian(&t.obs, t.action)?;
                    let x: Vec<f64> = (0..g.dim())
                        .map(|i| g.mean[i] + g.var[i].sqrt() * t.explore_noise[i])
                        .collect();
                    let psi = psi_sample(&x, &g)?;
                    agents[a].normalizer.update(psi);
                }

                let (gamma_low, gamma_up) = if variant == Variant::CermicQ
                    && !nce_raw[a].is_empty()
                {
                    let noise_scale =
                        lab.calibration.noise_scale * agents[a].feature_scale.std();
                    let pairs: Vec<NcePair> = nce_raw[a]
                        .iter()
                        .map(|(z, f)| NcePair {
                            context: z.clone(),
                            positive: f.clone(),
                            negatives: negative_sampler(
                                f,
                                lab.calibration.negatives,
                                noise_scale,
                                &mut negative_streams[a],
                            )
                            .vectors,
                        })
                        .collect();
                    let lo = gamma_factor(
                        &pairs,
                        &agents[a].critic,
                        MiBound::Lower,
                        lab.calibration.gamma_max,
                    )?;
                    let up = gamma_factor(
                        &pairs,
                        &agents[a].critic,
                        MiBound::Upper,
                        lab.calibration.gamma_max,
                    )?;
                    agents[a].critic.train_step(&pairs, lab.model.lr)?;
                    (lo, up)
                } else {
                    (0.0, 0.0)
                };
                gamma_mean += gamma_low / n_agents as f64;

                let exploit = spec.exploit_enabled && variant == Variant::CermicQ;
                // Several minibatch iterations per collection round.
                let iters = lab.model.updates_per_episode.max(1);
                let mut last = crate::model::LossBreakdown::default();
                for it in 0..iters {
                    let mini: Vec<ModelTransition> = if batch.len() <= lab.model.minibatch {
                        batch.clone()
                    } else {
                        (0..lab.model.minibatch)
                            .map(|_| {
                                batch[minibatch_streams[a].gen_range(0..batch.len())].clone()
                            })
                            .collect()
                    };
                    let (loss, grads) = agents[a].model.total_loss(
                        &mini,
                        gamma_low,
                        gamma_up,
                        beta,
                        lab.robust.c_upper,
                        lab.robust.c_lower,
                        agents[a].normalizer.mean(),
                        agents[a].normalizer.variance(),
                        exploit,
                        lab.model.alpha,
                    )?;
                    agents[a].model.apply_grads(&grads);
                    if it + 1 == iters {
                        last = loss;
                    }
                }
                loss_explore += last.explore / n_agents as f64;
                loss_ub += last.exploit_ub / n_agents as f64;
                loss_lb += last.exploit_lb / n_agents as f64;
            }
        }

        // Linear-agent probes.
        if variant == Variant::LsviUcb {
            let probes: Vec<f64> = PROBE_CELLS
                .iter()
                .map(|&cell| {
                    let eta = world.feature_map(cell, N_ACTIONS - 1);
                    lsvi_posts[0].intrinsic_reward_exact(&eta)
                })
                .collect();
            log.probe_rewards.push(probes);
        }

        if state.succeeded && log.first_success.is_none() {
            log.first_success = Some(episode);
        }
        log.rows.push(MetricsRow {
            seed: spec.seed,
            episode,
            ret: ep_return,
            first_success: log.first_success.map_or(-1, |e| e as i64),
            mean_r_int: if intrinsic_count > 0 {
                intrinsic_sum / intrinsic_count as f64
            } else {
                0.0
            },
            loss_explore,
            loss_ub,
            loss_lb,
            gamma_mean,
            wall_ms: (steps * n_agents) as u64,
        });
    }

    Ok(log)
}

// ---------------------------------------------------------------------------
// Pretraining corpus.
// ---------------------------------------------------------------------------

/// Random-walk rollouts labeled by the simulator oracle.
pub fn make_pretrain_corpus(lab: &LabConfig, seed: u64, size: usize) -> Result<Vec<PretrainExample>> {
    let world = GridWorld::new(lab.gridworld.clone())?;
    let mut corpus = Vec::with_capacity(size);
    let mut r = rng::stream(seed, "pretrain-corpus", 0);
    let mut episode = 0u64;
    'outer: loop {
        let (mut state, mut obs) = world.reset(rng::stream(seed, "pretrain-episode", episode).gen())?;
        episode += 1;
        loop {
            for a in 0..lab.gridworld.n_agents {
                let labels = world.oracle_labels(&state, a);
                corpus.push(PretrainExample {
                    obs: obs[a].data.clone(),
                    presence: labels.presence,
                    latents: labels.latents,
                    offsets: labels.offsets,
                });
                if corpus.len() >= size {
                    break 'outer;
                }
            }
            let joint: Vec<usize> =
                (0..lab.gridworld.n_agents).map(|_| r.gen_range(0..N_ACTIONS)).collect();
            let (next, out) = world.step(&state, &joint)?;
            state = next;
            obs = out.observations;
            if out.done {
                break;
            }
        }
    }
    Ok(corpus)
}

// ---------------------------------------------------------------------------
// Experiments and ablations.
// ---------------------------------------------------------------------------

/// Bounded worker-pool map that preserves input order.
pub fn parallel_map<T, U, F>(items: Vec<T>, jobs: usize, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync,
{
    let jobs = jobs.max(1);
    let n = items.len();
    let slots: Vec<std::sync::Mutex<Option<U>>> =
        (0..n).map(|_| std::sync::Mutex::new(None)).collect();
    let work: std::sync::Mutex<Vec<(usize, T)>> =
        std::sync::Mutex::new(items.into_iter().enumerate().rev().collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(n.max(1)) {
            scope.spawn(|| loop {
                let next = work.lock().unwrap().pop();
                match next {
                    Some((ix, item)) => {
                        *slots[ix].lock().unwrap() = Some(f(item));
                    }
                    None => break,
                }
            });
        }
    });
    slots.into_iter().map(|s| s.into_inner().unwrap().expect("worker filled slot")).collect()
}

/// Runs one variant across seeds; returns the logs in seed order.
pub fn run_seeds(lab: &LabConfig, variant: Variant, seeds: &[u64], jobs: usize) -> Result<Vec<MetricsLog>> {
    let specs: Vec<RunSpec> = seeds
        .iter()
        .map(|&s| {
            let mut cfg = lab.clone();
            cfg.training.variant = variant;
            RunSpec::new(cfg, s)
        })
        .collect();
    parallel_map(specs, jobs, |spec| run_training(&spec)).into_iter().collect()
}

/// One row of the ablation table.
#[derive(Debug, Clone)]
pub struct AblationRow {
    pub name: String,
    pub mean_final_return: f64,
    pub std_final_return: f64,
    pub mean_first_success: f64,
    pub seeds: usize,
}

/// The loss/coverage/memory ablation grid.
pub fn ablation_suite(lab: &LabConfig, seeds: &[u64], jobs: usize) -> Result<Vec<AblationRow>> {
    let mut variants: Vec<(String, LabConfig, bool)> = Vec::new();
    let full = {
        let mut c = lab.clone();
        c.training.variant = Variant::CermicQ;
        c
    };
    variants.push(("full".into(), full.clone(), true));
    let mut no_explore = full.clone();
    no_explore.model.alpha = 0.0;
    variants.push(("no_explore".into(), no_explore, true));
    variants.push(("no_exploit".into(), full.clone(), false));
    for alpha in [1.0, 0.5] {
        let mut c = full.clone();
        c.model.alpha = alpha;
        variants.push((format!("alpha_{alpha}"), c, true));
    }
    let mut recurrent = full.clone();
    recurrent.memory.memory_type = MemoryType::Recurrent;
    variants.push(("memory_recurrent".into(), recurrent, true));

    let mut rows = Vec::new();
    for (name, cfg, exploit) in variants {
        let specs: Vec<RunSpec> = seeds
            .iter()
            .map(|&s| {
                let mut spec = RunSpec::new(cfg.clone(), s);
                spec.exploit_enabled = exploit;
                spec
            })
            .collect();
        let logs: Result<Vec<MetricsLog>> =
            parallel_map(specs, jobs, |spec| run_training(&spec)).into_iter().collect();
        let logs = logs?;
        let finals: Vec<f64> = logs.iter().map(|l| l.final_return()).collect();
        let firsts: Vec<f64> =
            logs.iter().map(|l| l.first_success_censored(cfg.training.episodes)).collect();
        rows.push(AblationRow {
            name,
            mean_final_return: stats::mean(&finals),
            std_final_return: stats::std_dev(&finals),
            mean_first_success: stats::mean(&firsts),
            seeds: seeds.len(),
        });
    }
    Ok(rows)
}

pub fn ablation_csv(rows: &[AblationRow]) -> CsvTable {
    let mut t = CsvTable::new("name,mean_final_return,std_final_return,mean_first_success,seeds");
    for r in rows {
        t.push(format!(
            "{},{},{},{},{}",
            r.name,
            fmt(r.mean_final_return),
            fmt(r.std_final_return),
            fmt(r.mean_first_success),
            r.seeds
        ));
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_lab() -> LabConfig {
        let mut lab = LabConfig::lab_default();
        lab.training.episodes = 6;
        lab.gridworld.episode_horizon = 12;
        lab
    }

    #[test]
    fn same_seed_same_log() {
        let lab = small_lab();
        let spec = RunSpec::new(
            {
                let mut c = lab.clone();
                c.training.variant = Variant::CermicQ;
                c
            },
            7,
        );
        let a = run_training(&spec).unwrap();
        let b = run_training(&spec).unwrap();
        assert_eq!(a.trajectory_digest, b.trajectory_digest);
        assert_eq!(a.csv().to_string(), b.csv().to_string());
    }

    #[test]
    fn zero_scale_cermic_matches_baseline_bitwise() {
        let lab = small_lab();
        let mut cermic_cfg = lab.clone();
        cermic_cfg.training.variant = Variant::CermicQ;
        cermic_cfg.model.intrinsic_scale = 0.0;
        let cermic_log = run_training(&RunSpec::new(cermic_cfg, 11)).unwrap();
        let mut base_cfg = lab.clone();
        base_cfg.training.variant = Variant::EpsilonGreedyQ;
        let base_log = run_training(&RunSpec::new(base_cfg, 11)).unwrap();
        assert_eq!(cermic_log.trajectory_digest, base_log.trajectory_digest);
        // Returns match exactly; loss columns differ by design.
        for (a, b) in cermic_log.rows.iter().zip(&base_log.rows) {
            assert_eq!(a.ret, b.ret);
            assert_eq!(a.first_success, b.first_success);
        }
    }

    #[test]
    fn reward_accounting_is_extrinsic_only() {
        let mut lab = small_lab();
        lab.training.variant = Variant::CermicQ;
        let log = run_training(&RunSpec::new(lab.clone(), 3)).unwrap();
        for row in &log.rows {
            assert!(row.ret == 0.0 || row.ret == lab.gridworld.success_reward);
            // Intrinsic means are logged but never pollute the return.
            assert!(row.mean_r_int.is_finite());
        }
    }

    #[test]
    fn lsvi_probes_non_increasing() {
        let mut lab = small_lab();
        lab.training.variant = Variant::LsviUcb;
        lab.training.episodes = 10;
        let log = run_training(&RunSpec::new(lab, 5)).unwrap();
        let report = intrinsic_decay_probe(&log);
        assert_eq!(report.monotone, Some(true));
        assert_eq!(report.violations, 0);
        assert_eq!(report.probe_count, PROBE_CELLS.len());
    }

    #[test]
    fn decay_probe_empty_for_untrained() {
        let log = MetricsLog {
            rows: vec![],
            first_success: None,
            trajectory_digest: 0,
            probe_rewards: vec![],
            variant: Variant::EpsilonGreedyQ,
            trace: vec![],
        };
        let report = intrinsic_decay_probe(&log);
        assert_eq!(report.monotone, None);
        assert!(report.window_trend.is_empty());
    }

    #[test]
    fn corpus_generation_is_deterministic_and_sized() {
        let lab = small_lab();
        let a = make_pretrain_corpus(&lab, 9, 100).unwrap();
        let b = make_pretrain_corpus(&lab, 9, 100).unwrap();
        assert_eq!(a.len(), 100);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.obs, y.obs);
            assert_eq!(x.presence, y.presence);
        }
    }

    #[test]
    fn parallel_map_preserves_order() {
        let out = parallel_map((0..100).collect::<Vec<_>>(), 4, |x| x * 2);
        assert_eq!(out, (0..100).map(|x| x * 2).collect::<Vec<_>>());
    }

    #[test]
    fn recurrent_variant_runs() {
        let mut lab = small_lab();
        lab.training.variant = Variant::CermicQ;
        lab.memory.memory_type = MemoryType::Recurrent;
        lab.training.episodes = 3;
        let log = run_training(&RunSpec::new(lab, 2)).unwrap();
        assert_eq!(log.rows.len(), 3);
    }

    #[test]
    fn no_calibration_variant_runs_with_explore_only_losses() {
        let mut lab = small_lab();
        lab.training.variant = Variant::CermicNoCalibration;
        lab.training.episodes = 3;
        let log = run_training(&RunSpec::new(lab, 2)).unwrap();
        for row in &log.rows {
            assert_eq!(row.loss_ub, 0.0);
            assert_eq!(row.loss_lb, 0.0);
            assert_eq!(row.gamma_mean, 0.0);
        }
    }
}
