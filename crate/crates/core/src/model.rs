//! The composed curiosity model.
//!
//! Observation encoders (online + momentum target), a Gaussian latent head
//! over state-action pairs, a next-embedding decoder, the context-calibrated
//! exploit hinges, and the reparameterized explore likelihood. One backward
//! pass produces analytic gradients for every trainable group; finite
//! differences certify them.

use crate::calibration::CalibrationNet;
use crate::memory::{IntentionGraph, MessagePassing, RecurrentMemory};
use crate::nn::{GaussianHead, GaussianHeadCache, Mlp};
use crate::numerics::{kl_diag_gaussian, DiagGaussian};
use crate::robust::psi_moments;
use crate::{Error, Result};
use rand::Rng;

/// Which encoder of the pair to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncoderKind {
    Online,
    Momentum,
}

/// Online/momentum observation encoder pair.
#[derive(Debug, Clone)]
pub struct EncoderPair {
    pub online: Mlp,
    pub momentum: Mlp,
    pub tau_m: f64,
}

impl EncoderPair {
    pub fn new(obs_dim: usize, hidden: usize, d_state: usize, tau_m: f64, rng: &mut impl Rng) -> Self {
        let online = Mlp::new(&[obs_dim, hidden, d_state], true, 1.0, rng);
        let momentum = online.clone();
        Self { online, momentum, tau_m }
    }

    pub fn encode(&self, obs: &[f64], which: EncoderKind) -> Vec<f64> {
        match which {
            EncoderKind::Online => self.online.forward(obs).0,
            EncoderKind::Momentum => self.momentum.forward(obs).0,
        }
    }

    /// `θ^m ← τ_m·θ^m + (1−τ_m)·θ`, elementwise.
    pub fn momentum_update(&mut self) {
        let mut online_flat = Vec::new();
        self.online.write_flat(&mut online_flat);
        let mut mom_flat = Vec::new();
        self.momentum.write_flat(&mut mom_flat);
        for (m, o) in mom_flat.iter_mut().zip(&online_flat) {
            *m = self.tau_m * *m + (1.0 - self.tau_m) * o;
        }
        self.momentum.read_flat(&mom_flat);
    }
}

/// Context source attached to a transition. Node features and hidden states
/// are rollout data; only the message-passing / recurrent parameters are
/// differentiated through.
#[derive(Debug, Clone)]
pub enum ContextInput {
    /// Cold start: the context feature is the zero vector.
    None,
    Graph(IntentionGraph),
    Recurrent { hidden: Vec<f64>, input: Vec<f64> },
}

/// The universal experience record the model trains on.
#[derive(Debug, Clone)]
pub struct ModelTransition {
    pub obs: Vec<f64>,
    pub action: usize,
    pub obs_next: Vec<f64>,
    /// Extrinsic reward received at the previous step (context for γ).
    pub reward_prev: f64,
    pub context: ContextInput,
    /// Frozen reparameterization noise, `k_samples × d_latent`, row-major.
    pub explore_noise: Vec<f64>,
}

/// Either context network, matching the configured memory type.
#[derive(Debug, Clone)]
pub enum ContextNet {
    Graph(MessagePassing),
    Recurrent(RecurrentMemory),
}

/// Scalar knobs of the model.
#[derive(Debug, Clone, Copy)]
pub struct ModelConfig {
    pub obs_dim: usize,
    pub n_actions: usize,
    pub d_state: usize,
    pub d_latent: usize,
    /// Node-embedding dimension of the intention graphs fed to the model.
    pub d_node: usize,
    pub d_feature: usize,
    pub hidden: usize,
    pub k_samples: usize,
    pub tau_m: f64,
    pub lr: f64,
    pub grad_clip: f64,
}

impl ModelConfig {
    pub fn desk_default(obs_dim: usize, n_actions: usize) -> Self {
        Self {
            obs_dim,
            n_actions,
            d_state: 16,
            d_latent: 8,
            d_node: 16,
            d_feature: 16,
            hidden: 32,
            k_samples: 8,
            tau_m: 0.99,
            lr: 1e-3,
            grad_clip: 5.0,
        }
    }
}

/// Loss components of one update.
#[derive(Debug, Clone, Copy, Default)]
pub struct LossBreakdown {
    pub total: f64,
    pub exploit_ub: f64,
    pub exploit_lb: f64,
    pub explore: f64,
}

/// Gradients for every trainable group.
#[derive(Debug, Clone)]
pub struct CermicGrads {
    pub encoder: Mlp,
    pub latent: GaussianHead,
    pub decoder: GaussianHead,
    pub calibration: CalibrationNet,
    pub context: ContextNet,
}

/// The full curiosity model.
#[derive(Debug, Clone)]
pub struct CermicModel {
    pub cfg: ModelConfig,
    pub encoders: EncoderPair,
    /// (s ⊕ action one-hot) → Gaussian over the latent.
    pub latent: GaussianHead,
    /// latent → Gaussian over the next state embedding.
    pub decoder: GaussianHead,
    pub calibration: CalibrationNet,
    pub context: ContextNet,
}

impl CermicModel {
    pub fn new(cfg: ModelConfig, graph_memory: bool, rng: &mut impl Rng) -> Self {
        let encoders = EncoderPair::new(cfg.obs_dim, cfg.hidden, cfg.d_state, cfg.tau_m, rng);
        let latent =
            GaussianHead::new(cfg.d_state + cfg.n_actions, cfg.hidden, cfg.d_latent, 1.5, rng);
        let decoder = GaussianHead::new(cfg.d_latent, cfg.hidden, cfg.d_state, 1.0, rng);
        let calibration = CalibrationNet::new(cfg.d_feature, cfg.hidden / 2, 0.5, rng);
        let context = if graph_memory {
            ContextNet::Graph(MessagePassing::new(cfg.d_node, cfg.d_feature, 2, rng))
        } else {
            ContextNet::Recurrent(RecurrentMemory::new(
                cfg.d_node,
                cfg.d_feature,
                cfg.d_feature,
                rng,
            ))
        };
        Self { cfg, encoders, latent, decoder, calibration, context }
    }

    pub fn encode_obs(&self, obs: &[f64], which: EncoderKind) -> Result<Vec<f64>> {
        if obs.len() != self.cfg.obs_dim {
            return Err(Error::DimensionMismatch {
                expected: self.cfg.obs_dim,
                got: obs.len(),
                what: "encode_obs",
            });
        }
        Ok(self.encoders.encode(obs, which))
    }

    fn latent_input(&self, s: &[f64], action: usize) -> Vec<f64> {
        let mut input = s.to_vec();
        let mut onehot = vec![0.0; self.cfg.n_actions];
        onehot[action] = 1.0;
        input.extend(onehot);
        input
    }

    /// The latent Gaussian `g_φ(x | s, a)` for an observation-action pair.
    pub fn latent_gaussian(&self, obs: &[f64], action: usize) -> Result<DiagGaussian> {
        let s = self.encode_obs(obs, EncoderKind::Online)?;
        let (mean, var, _) = self.latent.forward(&self.latent_input(&s, action));
        DiagGaussian::new(mean, var)
    }

    /// Deployable intrinsic reward: √KL(g_φ(x|s,a) ‖ N(0, I)).
    pub fn intrinsic_reward_approx(&self, obs: &[f64], action: usize) -> Result<f64> {
        let g = self.latent_gaussian(obs, action)?;
        let q = DiagGaussian::standard(g.dim());
        Ok(kl_diag_gaussian(&g, &q)?.sqrt())
    }

    /// Next-embedding prediction error of the mean path; the uncalibrated
    /// novelty signal the no-calibration baseline runs on.
    pub fn prediction_error(&self, obs: &[f64], action: usize, obs_next: &[f64]) -> Result<f64> {
        let s = self.encode_obs(obs, EncoderKind::Online)?;
        let target = self.encode_obs(obs_next, EncoderKind::Momentum)?;
        let (mean_x, _, _) = self.latent.forward(&self.latent_input(&s, action));
        let (mean_next, _, _) = self.decoder.forward(&mean_x);
        let sq: f64 =
            mean_next.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum();
        Ok((sq / target.len() as f64).sqrt())
    }

    /// Context feature for a stored context input (no gradients).
    pub fn context_feature(&self, context: &ContextInput) -> Result<Vec<f64>> {
        match (context, &self.context) {
            (ContextInput::None, _) => Ok(vec![0.0; self.cfg.d_feature]),
            (ContextInput::Graph(g), ContextNet::Graph(mp)) => {
                Ok(mp.context_feature(g)?.0)
            }
            (ContextInput::Recurrent { hidden, input }, ContextNet::Recurrent(mem)) => {
                Ok(mem.feature(hidden, input).0)
            }
            _ => Err(Error::InvalidParameter {
                what: "context input",
                detail: "memory type mismatch".into(),
            }),
        }
    }

    pub fn zero_grads(&self) -> CermicGrads {
        CermicGrads {
            encoder: self.encoders.online.zeros_like(),
            latent: self.latent.zeros_like(),
            decoder: self.decoder.zeros_like(),
            calibration: self.calibration.zeros_like(),
            context: match &self.context {
                ContextNet::Graph(mp) => ContextNet::Graph(mp.zeros_like()),
                ContextNet::Recurrent(m) => ContextNet::Recurrent(m.zeros_like()),
            },
        }
    }

    /// Monte-Carlo explore objective `E[log p_φ(s_{t+1} | x_t)]` for one
    /// batch, without gradients.
    pub fn explore_loss(&self, batch: &[ModelTransition]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::InvalidParameter { what: "batch", detail: "empty".into() });
        }
        let mut acc = 0.0;
        for t in batch {
            acc += self.explore_terms(t)?.0;
        }
        Ok(acc / batch.len() as f64)
    }

    fn explore_terms(&self, t: &ModelTransition) -> Result<(f64, ())> {
        let s = self.encode_obs(&t.obs, EncoderKind::Online)?;
        let target = self.encode_obs(&t.obs_next, EncoderKind::Momentum)?;
        let (mean_x, var_x, _) = self.latent.forward(&self.latent_input(&s, t.action));
        let k = self.cfg.k_samples;
        let dx = self.cfg.d_latent;
        let mut acc = 0.0;
        for ki in 0..k {
            let x: Vec<f64> = (0..dx)
                .map(|i| mean_x[i] + var_x[i].sqrt() * t.explore_noise[ki * dx + i])
                .collect();
            let (mean_s, var_s, _) = self.decoder.forward(&x);
            acc += gaussian_log_density(&target, &mean_s, &var_s);
        }
        Ok((acc / k as f64, ()))
    }

    /// Per-transition hinge pre-activation terms before the constraint
    /// levels are subtracted: `(μ_cal_low + β√Σn, −μ_cal_up + β√Σn)`.
    /// Useful for diagnostics and for placing constraint levels away from
    /// the hinge kinks when certifying gradients.
    pub fn hinge_terms(
        &self,
        batch: &[ModelTransition],
        gamma_low: f64,
        gamma_up: f64,
        beta: f64,
        norm_mean: f64,
        norm_var: f64,
    ) -> Result<Vec<(f64, f64)>> {
        let norm_std = norm_var.sqrt();
        let mut out = Vec::with_capacity(batch.len());
        for t in batch {
            let s = self.encode_obs(&t.obs, EncoderKind::Online)?;
            let (mean_x, var_x, _) = self.latent.forward(&self.latent_input(&s, t.action));
            let stats = psi_moments(&DiagGaussian { mean: mean_x, var: var_x });
            let mu_n = (stats.mu - norm_mean) / norm_std;
            let sig_n = stats.sigma2 / norm_var;
            let (feature, _) = self.context_forward(&t.context)?;
            let (mu_low, _) = self.calibration.calibrated_mean(gamma_low, &feature, mu_n)?;
            let (mu_up, _) = self.calibration.calibrated_mean(gamma_up, &feature, mu_n)?;
            let sqrt_sig = sig_n.max(0.0).sqrt();
            out.push((mu_low + beta * sqrt_sig, -mu_up + beta * sqrt_sig));
        }
        Ok(out)
    }

    /// Full objective with analytic gradients.
    ///
    /// `L = mean(hinge_ub) + mean(hinge_lb) − α·mean(explore)`, with the
    /// hinges fed by running-normalized Ψ moments and the two γ-calibrated
    /// means. γ values, normalizer state, and β are inputs, so for fixed
    /// values the whole map is a deterministic function of the parameters.
    #[allow(clippy::too_many_arguments)]
    pub fn total_loss(
        &self,
        batch: &[ModelTransition],
        gamma_low: f64,
        gamma_up: f64,
        beta: f64,
        c_upper: f64,
        c_lower: f64,
        norm_mean: f64,
        norm_var: f64,
        exploit_enabled: bool,
        alpha: f64,
    ) -> Result<(LossBreakdown, CermicGrads)> {
        if batch.is_empty() {
            return Err(Error::InvalidParameter { what: "batch", detail: "empty".into() });
        }
        let n = batch.len() as f64;
        let norm_std = norm_var.sqrt();
        let mut grads = self.zero_grads();
        let mut out = LossBreakdown::default();

        for t in batch {
            // Forward: observation encoder.
            let (s, enc_cache) = self.encoders.online.forward(&t.obs);
            let target = self.encoders.momentum.forward(&t.obs_next).0;
            let latent_in = self.latent_input(&s, t.action);
            let (mean_x, var_x, lat_cache) = self.latent.forward(&latent_in);

            // Ψ moments and their normalization.
            let stats = psi_moments(&DiagGaussian { mean: mean_x.clone(), var: var_x.clone() });
            let mu_n = (stats.mu - norm_mean) / norm_std;
            let sig_n = stats.sigma2 / norm_var;

            // Context feature with its backprop closure.
            let (feature, ctx_back) = self.context_forward(&t.context)?;

            // Calibrated means for both hinge sides.
            let (mu_cal_low, cal_cache_low) =
                self.calibration.calibrated_mean(gamma_low, &feature, mu_n)?;
            let (mu_cal_up, cal_cache_up) =
                self.calibration.calibrated_mean(gamma_up, &feature, mu_n)?;

            let sqrt_sig = sig_n.max(0.0).sqrt();
            let pre_ub = mu_cal_low + beta * sqrt_sig - c_upper;
            let pre_lb = -mu_cal_up + beta * sqrt_sig - c_lower;
            let hinge_ub = pre_ub.max(0.0);
            let hinge_lb = pre_lb.max(0.0);

            // Explore term with frozen noise.
            let k = self.cfg.k_samples;
            let dx = self.cfg.d_latent;
            let mut explore_acc = 0.0;
            let mut dec_caches: Vec<(Vec<f64>, Vec<f64>, GaussianHeadCache, Vec<f64>)> =
                Vec::with_capacity(k);
            for ki in 0..k {
                let x: Vec<f64> = (0..dx)
                    .map(|i| mean_x[i] + var_x[i].sqrt() * t.explore_noise[ki * dx + i])
                    .collect();
                let (mean_s, var_s, cache) = self.decoder.forward(&x);
                explore_acc += gaussian_log_density(&target, &mean_s, &var_s);
                dec_caches.push((mean_s, var_s, cache, x));
            }
            let explore = explore_acc / k as f64;

            let w_exploit = if exploit_enabled { 1.0 } else { 0.0 };
            out.exploit_ub += w_exploit * hinge_ub / n;
            out.exploit_lb += w_exploit * hinge_lb / n;
            out.explore += explore / n;

            // ---- Backward ----
            let mut d_mu_n = 0.0;
            let mut d_sig_n = 0.0;
            let mut d_feature = vec![0.0; feature.len()];
            if exploit_enabled {
                if pre_ub > 0.0 {
                    let (df, dmu) = self.calibration.backward(
                        &cal_cache_low,
                        1.0 / n,
                        &mut grads.calibration,
                    );
                    for (a, b) in d_feature.iter_mut().zip(&df) {
                        *a += b;
                    }
                    d_mu_n += dmu;
                    if sqrt_sig > 1e-12 {
                        d_sig_n += (1.0 / n) * beta / (2.0 * sqrt_sig);
                    }
                }
                if pre_lb > 0.0 {
                    let (df, dmu) = self.calibration.backward(
                        &cal_cache_up,
                        -1.0 / n,
                        &mut grads.calibration,
                    );
                    for (a, b) in d_feature.iter_mut().zip(&df) {
                        *a += b;
                    }
                    d_mu_n += dmu;
                    if sqrt_sig > 1e-12 {
                        d_sig_n += (1.0 / n) * beta / (2.0 * sqrt_sig);
                    }
                }
            }
            ctx_back(self, &mut grads, &d_feature);

            // Normalization is affine in the raw moments.
            let d_mu_psi = d_mu_n / norm_std;
            let d_sig_psi = d_sig_n / norm_var;

            // Ψ-moment partials toward the latent Gaussian.
            let mut d_mean_x = vec![0.0; dx];
            let mut d_var_x = vec![0.0; dx];
            for i in 0..dx {
                let (m, v) = (mean_x[i], var_x[i]);
                d_mean_x[i] += d_mu_psi * m + d_sig_psi * 2.0 * m * v;
                d_var_x[i] += d_mu_psi * 0.5 * (1.0 - 1.0 / v) + d_sig_psi * (m * m + (v - 1.0));
            }

            // Explore gradients: −α·(1/(n·k)) per sample.
            let w_exp = -alpha / (n * k as f64);
            for ki in 0..k {
                let (mean_s, var_s, cache, x) = &dec_caches[ki];
                let mut d_mean_s = vec![0.0; mean_s.len()];
                let mut d_var_s = vec![0.0; var_s.len()];
                for i in 0..mean_s.len() {
                    let diff = target[i] - mean_s[i];
                    d_mean_s[i] = w_exp * diff / var_s[i];
                    d_var_s[i] = w_exp * (-0.5 / var_s[i] + diff * diff / (2.0 * var_s[i] * var_s[i]));
                }
                let d_x = self.decoder.backward(cache, &d_mean_s, &d_var_s, &mut grads.decoder);
                for i in 0..dx {
                    d_mean_x[i] += d_x[i];
                    // x = μ + √v·z ⇒ ∂x/∂v = z / (2√v).
                    let z = t.explore_noise[ki * dx + i];
                    d_var_x[i] += d_x[i] * z / (2.0 * var_x[i].sqrt());
                }
                let _ = x;
            }

            // Latent head, then the observation encoder.
            let d_latent_in =
                self.latent.backward(&lat_cache, &d_mean_x, &d_var_x, &mut grads.latent);
            let d_s = &d_latent_in[..self.cfg.d_state];
            self.encoders.online.backward(&enc_cache, d_s, &mut grads.encoder);
        }

        out.total = out.exploit_ub + out.exploit_lb - alpha * out.explore;
        Ok((out, grads))
    }

    /// Context forward returning the feature and a backward closure.
    #[allow(clippy::type_complexity)]
    fn context_forward<'a>(
        &self,
        context: &'a ContextInput,
    ) -> Result<(Vec<f64>, Box<dyn Fn(&CermicModel, &mut CermicGrads, &[f64]) + 'a>)> {
        match (context, &self.context) {
            (ContextInput::None, _) => {
                Ok((vec![0.0; self.cfg.d_feature], Box::new(|_, _, _| {})))
            }
            (ContextInput::Graph(g), ContextNet::Graph(mp)) => {
                let (f, cache) = mp.context_feature(g)?;
                Ok((
                    f,
                    Box::new(move |model: &CermicModel, grads: &mut CermicGrads, d_f: &[f64]| {
                        if d_f.iter().all(|v| *v == 0.0) {
                            return;
                        }
                        if let (ContextNet::Graph(mp), ContextNet::Graph(gmp)) =
                            (&model.context, &mut grads.context)
                        {
                            mp.backward(g, &cache, d_f, gmp);
                        }
                    }),
                ))
            }
            (ContextInput::Recurrent { hidden, input }, ContextNet::Recurrent(mem)) => {
                let (f, _, cache) = mem.feature(hidden, input);
                Ok((
                    f,
                    Box::new(move |model: &CermicModel, grads: &mut CermicGrads, d_f: &[f64]| {
                        if d_f.iter().all(|v| *v == 0.0) {
                            return;
                        }
                        if let (ContextNet::Recurrent(mem), ContextNet::Recurrent(gm)) =
                            (&model.context, &mut grads.context)
                        {
                            mem.backward(&cache, d_f, gm);
                        }
                    }),
                ))
            }
            _ => Err(Error::InvalidParameter {
                what: "context input",
                detail: "memory type mismatch".into(),
            }),
        }
    }

    /// Applies one clipped SGD step and refreshes the momentum encoder.
    pub fn apply_grads(&mut self, grads: &CermicGrads) {
        let mut sq = grads.encoder.grad_sq_norm()
            + grads.latent.net.grad_sq_norm()
            + grads.decoder.net.grad_sq_norm()
            + grads.calibration.g.grad_sq_norm();
        sq += match &grads.context {
            ContextNet::Graph(mp) => mp.grad_sq_norm(),
            ContextNet::Recurrent(m) => {
                m.cell.wr.grad_sq_norm()
                    + m.cell.wz.grad_sq_norm()
                    + m.cell.wn.grad_sq_norm()
                    + m.readout.as_slice().iter().map(|x| x * x).sum::<f64>()
            }
        };
        let norm = sq.sqrt();
        let scale = if norm > self.cfg.grad_clip { self.cfg.grad_clip / norm } else { 1.0 };
        let lr = self.cfg.lr * scale;

        self.encoders.online.sgd_step(&grads.encoder, lr);
        self.latent.net.sgd_step(&grads.latent.net, lr);
        self.decoder.net.sgd_step(&grads.decoder.net, lr);
        self.calibration.g.sgd_step(&grads.calibration.g, lr);
        match (&mut self.context, &grads.context) {
            (ContextNet::Graph(mp), ContextNet::Graph(g)) => mp.sgd_step(g, lr),
            (ContextNet::Recurrent(m), ContextNet::Recurrent(g)) => {
                m.cell.wr.sgd_step(&g.cell.wr, lr);
                m.cell.wz.sgd_step(&g.cell.wz, lr);
                m.cell.wn.sgd_step(&g.cell.wn, lr);
                for (w, gw) in
                    m.readout.as_mut_slice().iter_mut().zip(g.readout.as_slice())
                {
                    *w -= lr * gw;
                }
            }
            _ => {}
        }
        self.encoders.momentum_update();
    }

    /// Flat view of every gradient-bearing parameter group, in a fixed
    /// order (grads use the same order). The momentum encoder is excluded:
    /// it is state, not a trainable parameter.
    pub fn write_grad_params(&self, out: &mut Vec<f64>) {
        self.encoders.online.write_flat(out);
        self.latent.net.write_flat(out);
        self.decoder.net.write_flat(out);
        self.calibration.g.write_flat(out);
        match &self.context {
            ContextNet::Graph(mp) => mp.write_flat(out),
            ContextNet::Recurrent(m) => m.write_flat(out),
        }
    }

    pub fn read_grad_params(&mut self, src: &[f64]) -> usize {
        let mut k = self.encoders.online.read_flat(src);
        k += self.latent.net.read_flat(&src[k..]);
        k += self.decoder.net.read_flat(&src[k..]);
        k += self.calibration.g.read_flat(&src[k..]);
        k += match &mut self.context {
            ContextNet::Graph(mp) => mp.read_flat(&src[k..]),
            ContextNet::Recurrent(m) => m.read_flat(&src[k..]),
        };
        k
    }

    pub fn write_grads_flat(grads: &CermicGrads, out: &mut Vec<f64>) {
        grads.encoder.write_flat(out);
        grads.latent.net.write_flat(out);
        grads.decoder.net.write_flat(out);
        grads.calibration.g.write_flat(out);
        match &grads.context {
            ContextNet::Graph(mp) => mp.write_flat(out),
            ContextNet::Recurrent(m) => m.write_flat(out),
        }
    }

    /// Every parameter group including the momentum encoder, for
    /// checkpointing.
    pub fn checkpoint_groups(&self) -> Vec<(String, Vec<f64>)> {
        let mut groups = Vec::new();
        let mut push = |name: &str, f: &dyn Fn(&mut Vec<f64>)| {
            let mut v = Vec::new();
            f(&mut v);
            groups.push((name.to_string(), v));
        };
        push("encoder_online", &|v| self.encoders.online.write_flat(v));
        push("encoder_momentum", &|v| self.encoders.momentum.write_flat(v));
        push("latent", &|v| self.latent.net.write_flat(v));
        push("decoder", &|v| self.decoder.net.write_flat(v));
        push("calibration", &|v| self.calibration.g.write_flat(v));
        match &self.context {
            ContextNet::Graph(mp) => push("context_graph", &|v| mp.write_flat(v)),
            ContextNet::Recurrent(m) => push("context_recurrent", &|v| m.write_flat(v)),
        }
        groups
    }

    pub fn load_checkpoint_groups(&mut self, groups: &[(String, Vec<f64>)]) -> Result<()> {
        for (name, data) in groups {
            let read = match name.as_str() {
                "encoder_online" => self.encoders.online.read_flat(data),
                "encoder_momentum" => self.encoders.momentum.read_flat(data),
                "latent" => self.latent.net.read_flat(data),
                "decoder" => self.decoder.net.read_flat(data),
                "calibration" => self.calibration.g.read_flat(data),
                "context_graph" => match &mut self.context {
                    ContextNet::Graph(mp) => mp.read_flat(data),
                    _ => {
                        return Err(Error::InvalidParameter {
                            what: "checkpoint",
                            detail: "graph context in checkpoint, recurrent model".into(),
                        })
                    }
                },
                "context_recurrent" => match &mut self.context {
                    ContextNet::Recurrent(m) => m.read_flat(data),
                    _ => {
                        return Err(Error::InvalidParameter {
                            what: "checkpoint",
                            detail: "recurrent context in checkpoint, graph model".into(),
                        })
                    }
                },
                other => {
                    return Err(Error::InvalidParameter {
                        what: "checkpoint",
                        detail: format!("unknown group {other}"),
                    })
                }
            };
            if read != data.len() {
                return Err(Error::DimensionMismatch {
                    expected: data.len(),
                    got: read,
                    what: "checkpoint group length",
                });
            }
        }
        Ok(())
    }
}

/// Diagonal Gaussian log density.
fn gaussian_log_density(x: &[f64], mean: &[f64], var: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..x.len() {
        let d = x[i] - mean[i];
        acc += -0.5 * (2.0 * std::f64::consts::PI * var[i]).ln() - 0.5 * d * d / var[i];
    }
    acc
}

/// `r_e + scale·r_i`.
pub fn combine_rewards(r_extrinsic: f64, r_intrinsic: f64, scale: f64) -> f64 {
    assert!(scale >= 0.0, "intrinsic scale must be nonnegative");
    r_extrinsic + scale * r_intrinsic
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn tiny_config() -> ModelConfig {
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

    fn random_transition(cfg: &ModelConfig, graph: bool, r: &mut impl Rng) -> ModelTransition {
        let context = if graph {
            let nodes: Vec<(usize, Vec<f64>)> = (0..2)
                .map(|k| (k, (0..cfg.d_node).map(|_| r.gen_range(-1.0..1.0)).collect()))
                .collect();
            let edges = vec![
                (0, 1, vec![1.0, -1.0, 2.0, 1.0]),
                (1, 0, vec![-1.0, 1.0, 2.0, 1.0]),
            ];
            ContextInput::Graph(IntentionGraph { nodes, edges, step: 1 })
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
                .map(|_| rng::standard_normal(r))
                .collect(),
        }
    }

    #[test]
    fn encode_is_deterministic_and_momentum_tracks() {
        let mut r = rng::stream(9, "model-test", 0);
        let cfg = tiny_config();
        let mut model = CermicModel::new(cfg, true, &mut r);
        let obs = vec![0.1, -0.4, 0.9, 0.0, 0.3];
        let a = model.encode_obs(&obs, EncoderKind::Online).unwrap();
        let b = model.encode_obs(&obs, EncoderKind::Online).unwrap();
        assert_eq!(a, b);
        // Fresh pair starts identical.
        let m = model.encode_obs(&obs, EncoderKind::Momentum).unwrap();
        assert_eq!(a, m);
        // Perturb the online encoder, then τ_m = 1 keeps the target frozen.
        model.encoders.online.weights[0][(0, 0)] += 1.0;
        model.encoders.tau_m = 1.0;
        let before = model.encode_obs(&obs, EncoderKind::Momentum).unwrap();
        model.encoders.momentum_update();
        assert_eq!(before, model.encode_obs(&obs, EncoderKind::Momentum).unwrap());
        // τ_m = 0 copies the online encoder outright.
        model.encoders.tau_m = 0.0;
        model.encoders.momentum_update();
        let online = model.encode_obs(&obs, EncoderKind::Online).unwrap();
        let momentum = model.encode_obs(&obs, EncoderKind::Momentum).unwrap();
        assert_eq!(online, momentum);
    }

    #[test]
    fn momentum_scalar_probe() {
        // θ^m = 0, θ = 1, τ = 0.9 → 0.1, then geometric approach to θ.
        let mut r = rng::stream(9, "model-test", 1);
        let mut pair = EncoderPair::new(2, 3, 2, 0.9, &mut r);
        let mut flat = Vec::new();
        pair.online.write_flat(&mut flat);
        let ones = vec![1.0; flat.len()];
        pair.online.read_flat(&ones);
        let zeros = vec![0.0; flat.len()];
        pair.momentum.read_flat(&zeros);
        pair.momentum_update();
        let mut mom = Vec::new();
        pair.momentum.write_flat(&mut mom);
        for v in &mom {
            assert!((v - 0.1).abs() < 1e-12);
        }
        for step in 1..60 {
            pair.momentum_update();
            let expected = 1.0 - 0.9f64.powi(step + 1);
            let mut now = Vec::new();
            pair.momentum.write_flat(&mut now);
            assert!((now[0] - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn explore_loss_at_exact_prediction() {
        // A decoder that reproduces the target with unit variance scores
        // −(d/2)·log(2π).
        let mut r = rng::stream(9, "model-test", 2);
        let cfg = tiny_config();
        let mut model = CermicModel::new(cfg, true, &mut r);
        // Zero the latent + decoder nets: mean 0, tanh(0) squash → var 1.
        let zero = |net: &mut Mlp| {
            let mut flat = Vec::new();
            net.write_flat(&mut flat);
            net.read_flat(&vec![0.0; flat.len()]);
        };
        zero(&mut model.latent.net);
        zero(&mut model.decoder.net);
        zero(&mut model.encoders.online);
        zero(&mut model.encoders.momentum);
        // Both encoders now emit 0, decoder emits N(0, 1) — exact prediction.
        let t = ModelTransition {
            obs: vec![0.0; 5],
            action: 0,
            obs_next: vec![0.0; 5],
            reward_prev: 0.0,
            context: ContextInput::None,
            explore_noise: vec![0.0; 2 * 3],
        };
        let loss = model.explore_loss(&[t]).unwrap();
        let per_dim = -0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((loss - 4.0 * per_dim).abs() < 1e-12);
        assert!((per_dim - (-0.9189385332046727)).abs() < 1e-12);
    }

    #[test]
    fn explore_loss_invariant_under_duplication() {
        let mut r = rng::stream(9, "model-test", 3);
        let cfg = tiny_config();
        let model = CermicModel::new(cfg, true, &mut r);
        let t = random_transition(&cfg, true, &mut r);
        let single = model.explore_loss(&[t.clone()]).unwrap();
        let double = model.explore_loss(&[t.clone(), t]).unwrap();
        assert!((single - double).abs() < 1e-12);
    }

    #[test]
    fn intrinsic_reward_standard_output_is_zero() {
        let mut r = rng::stream(9, "model-test", 4);
        let cfg = tiny_config();
        let mut model = CermicModel::new(cfg, true, &mut r);
        let zero = |net: &mut Mlp| {
            let mut flat = Vec::new();
            net.write_flat(&mut flat);
            net.read_flat(&vec![0.0; flat.len()]);
        };
        zero(&mut model.latent.net);
        let obs = vec![0.2, -0.1, 0.4, 0.0, 0.9];
        assert_eq!(model.intrinsic_reward_approx(&obs, 1).unwrap(), 0.0);
    }

    #[test]
    fn intrinsic_reward_hand_value() {
        // 1-D latent forced to N(1, 1): reward √(1/2).
        let mut r = rng::stream(9, "model-test", 5);
        let cfg = ModelConfig { d_latent: 1, ..tiny_config() };
        let mut model = CermicModel::new(cfg, true, &mut r);
        let zero = |net: &mut Mlp| {
            let mut flat = Vec::new();
            net.write_flat(&mut flat);
            net.read_flat(&vec![0.0; flat.len()]);
        };
        zero(&mut model.latent.net);
        // Mean output bias = 1 (first output of the final layer).
        model.latent.net.biases[1][0] = 1.0;
        let obs = vec![0.0; 5];
        let reward = model.intrinsic_reward_approx(&obs, 0).unwrap();
        assert!((reward - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn intrinsic_reward_ignores_decoder() {
        let mut r = rng::stream(9, "model-test", 6);
        let cfg = tiny_config();
        let mut model = CermicModel::new(cfg, true, &mut r);
        let obs = vec![0.3, 0.1, -0.2, 0.5, 0.0];
        let before = model.intrinsic_reward_approx(&obs, 2).unwrap();
        for w in model.decoder.net.weights.iter_mut() {
            for v in w.as_mut_slice() {
                *v += 0.37;
            }
        }
        let after = model.intrinsic_reward_approx(&obs, 2).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn combine_rewards_cases() {
        assert_eq!(combine_rewards(1.0, 0.5, 0.0), 1.0);
        assert_eq!(combine_rewards(0.0, 0.5, 1.0), 0.5);
        let base = combine_rewards(0.2, 0.4, 1.0);
        let doubled = combine_rewards(0.2, 0.4, 2.0);
        assert!((doubled - 0.2 - 2.0 * 0.4).abs() < 1e-15);
        assert!(doubled > base);
    }

    #[test]
    fn alpha_zero_reduces_to_exploit_terms() {
        let mut r = rng::stream(9, "model-test", 7);
        let cfg = tiny_config();
        let model = CermicModel::new(cfg, true, &mut r);
        let batch: Vec<ModelTransition> =
            (0..3).map(|_| random_transition(&cfg, true, &mut r)).collect();
        let (loss, _) = model
            .total_loss(&batch, 0.5, 1.0, 2.0, 1.0, -1.0, 0.0, 1.0, true, 0.0)
            .unwrap();
        assert!((loss.total - (loss.exploit_ub + loss.exploit_lb)).abs() < 1e-12);
    }

    #[test]
    fn inactive_hinges_leave_explore_only() {
        let mut r = rng::stream(9, "model-test", 8);
        let cfg = tiny_config();
        let model = CermicModel::new(cfg, true, &mut r);
        let batch: Vec<ModelTransition> =
            (0..3).map(|_| random_transition(&cfg, true, &mut r)).collect();
        // Push both constraint levels far out so the hinges cannot fire
        // (the lower hinge needs a large positive level to go quiet).
        let (loss, _) = model
            .total_loss(&batch, 0.5, 1.0, 2.0, 2e6, 1e6, 0.0, 1.0, true, 0.3)
            .unwrap();
        assert_eq!(loss.exploit_ub, 0.0);
        assert_eq!(loss.exploit_lb, 0.0);
        assert!((loss.total - (-0.3 * loss.explore)).abs() < 1e-12);
    }

    fn fd_total_loss_check(graph: bool, seed: u64) {
        let mut r = rng::stream(9, "model-test", seed);
        let cfg = tiny_config();
        let model = CermicModel::new(cfg, graph, &mut r);
        let batch: Vec<ModelTransition> =
            (0..3).map(|_| random_transition(&cfg, graph, &mut r)).collect();
        // Keep normalized Σ away from the √ singularity and the constraint
        // levels a safe margin from the hinge kinks.
        let min_sigma2 = batch
            .iter()
            .map(|t| {
                let g = model.latent_gaussian(&t.obs, t.action).unwrap();
                crate::robust::psi_moments(&g).sigma2
            })
            .fold(f64::INFINITY, f64::min);
        let norm_var = (min_sigma2 / 0.25).clamp(1e-4, 2.0);
        let terms = model.hinge_terms(&batch, 0.7, 1.3, 2.0, 0.1, norm_var).unwrap();
        let c_up = terms.iter().map(|t| t.0).fold(f64::INFINITY, f64::min) - 0.3;
        let c_lo = terms.iter().map(|t| t.1).fold(f64::INFINITY, f64::min) - 0.3;
        let args = (0.7, 1.3, 2.0, c_up, c_lo, 0.1, norm_var, true, 0.3);
        let mut flat0 = Vec::new();
        model.write_grad_params(&mut flat0);
        let mut eval = |p: &[f64]| {
            let mut m = model.clone();
            m.read_grad_params(p);
            let (loss, _) = m
                .total_loss(
                    &batch, args.0, args.1, args.2, args.3, args.4, args.5, args.6, args.7,
                    args.8,
                )
                .unwrap();
            loss.total
        };
        let (_, grads) = model
            .total_loss(
                &batch, args.0, args.1, args.2, args.3, args.4, args.5, args.6, args.7, args.8,
            )
            .unwrap();
        let mut analytic = Vec::new();
        CermicModel::write_grads_flat(&grads, &mut analytic);
        // Two probe widths: 1e-4 owns the round-off floor, 1e-5 owns the
        // high-curvature variance-squash regions.
        let probes: Vec<Vec<f64>> = [1e-3, 1e-4, 1e-5]
            .iter()
            .map(|&eps| crate::nn::fd_gradient(&mut eval, &flat0, eps))
            .collect();
        let err = crate::nn::max_rel_err_multi_width(&analytic, &probes);
        assert!(err < 1e-4, "graph={graph}: rel err {err}");
    }

    #[test]
    fn total_loss_gradient_matches_fd_graph_memory() {
        fd_total_loss_check(true, 10);
    }

    #[test]
    fn total_loss_gradient_matches_fd_recurrent_memory() {
        fd_total_loss_check(false, 11);
    }

    #[test]
    fn variance_bounds_hold_for_arbitrary_parameters() {
        let mut r = rng::stream(9, "model-test", 12);
        let cfg = tiny_config();
        let mut model = CermicModel::new(cfg, true, &mut r);
        for w in model.latent.net.weights.iter_mut() {
            for v in w.as_mut_slice() {
                *v = r.gen_range(-1e5..1e5);
            }
        }
        let g = model.latent_gaussian(&[3.0, -2.0, 8.0, 0.5, -9.0], 2).unwrap();
        for v in g.var {
            assert!((1e-4..=1e4).contains(&v));
        }
    }

    #[test]
    fn checkpoint_groups_roundtrip() {
        let mut r = rng::stream(9, "model-test", 13);
        let cfg = tiny_config();
        let model = CermicModel::new(cfg, true, &mut r);
        let groups = model.checkpoint_groups();
        let mut other = CermicModel::new(cfg, true, &mut r);
        other.load_checkpoint_groups(&groups).unwrap();
        let obs = vec![0.1, 0.2, 0.3, 0.4, 0.5];
        assert_eq!(
            model.encode_obs(&obs, EncoderKind::Online).unwrap(),
            other.encode_obs(&obs, EncoderKind::Online).unwrap()
        );
        assert_eq!(
            model.intrinsic_reward_approx(&obs, 1).unwrap(),
            other.intrinsic_reward_approx(&obs, 1).unwrap()
        );
    }
}
