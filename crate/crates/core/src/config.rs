//! The single JSON configuration document.
//!
//! One section per subsystem; unknown keys are a hard error so sweep typos
//! fail before any episode runs.

use crate::gridworld::GridConfig;
use crate::robust::AmbiguityParams;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabConfig {
    pub seed: u64,
    pub gridworld: GridConfig,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub robust: RobustSection,
    #[serde(default)]
    pub calibration: CalibrationSection,
    #[serde(default)]
    pub memory: MemorySection,
    #[serde(default)]
    pub training: TrainingSection,
    #[serde(default)]
    pub pretrain: PretrainSection,
    #[serde(default)]
    pub lsvi: LsviSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub d_state: usize,
    pub d_latent: usize,
    pub hidden: usize,
    pub k_samples: usize,
    pub tau_m: f64,
    pub alpha: f64,
    pub lr: f64,
    pub grad_clip: f64,
    pub intrinsic_scale: f64,
    /// Gradient-descent iterations per episode update.
    pub updates_per_episode: usize,
    /// Transitions per iteration, sampled from the episode.
    pub minibatch: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            d_state: 16,
            d_latent: 8,
            hidden: 32,
            k_samples: 4,
            tau_m: 0.99,
            alpha: 0.2,
            lr: 1e-3,
            grad_clip: 5.0,
            intrinsic_scale: 0.0002,
            updates_per_episode: 8,
            minibatch: 16,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobustSection {
    pub gamma1: f64,
    pub gamma2: f64,
    pub epsilon: f64,
    pub c_upper: f64,
    pub c_lower: f64,
    pub momentum: f64,
    pub var_floor: f64,
}

impl Default for RobustSection {
    fn default() -> Self {
        Self {
            gamma1: 1.0,
            gamma2: 2.0,
            epsilon: 0.2,
            c_upper: 1.0,
            c_lower: -1.0,
            momentum: 0.99,
            var_floor: 1e-6,
        }
    }
}

impl RobustSection {
    pub fn ambiguity(&self) -> Result<AmbiguityParams> {
        AmbiguityParams::new(self.gamma1, self.gamma2, self.epsilon, self.c_upper, self.c_lower)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationSection {
    pub negatives: usize,
    pub noise_scale: f64,
    pub gamma_max: f64,
}

impl Default for CalibrationSection {
    fn default() -> Self {
        Self { negatives: 16, noise_scale: 0.5, gamma_max: 5.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MemorySection {
    pub d_node: usize,
    pub d_feature: usize,
    pub mp_layers: usize,
    pub queue_capacity: usize,
    pub tau_det: f64,
    pub memory_type: MemoryType,
}

impl Default for MemorySection {
    fn default() -> Self {
        Self {
            d_node: 16,
            d_feature: 16,
            mp_layers: 2,
            queue_capacity: 8,
            tau_det: 0.5,
            memory_type: MemoryType::Graph,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryType {
    Graph,
    Recurrent,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSection {
    pub episodes: usize,
    pub variant: Variant,
    /// Seeds for multi-seed experiments; the root `seed` drives single runs.
    pub seeds: Vec<u64>,
    pub discount: f64,
    pub q_lr: f64,
    pub eps_init: f64,
    pub eps_final: f64,
    /// Episodes over which ε anneals linearly before holding at the floor.
    pub eps_decay_episodes: usize,
}

impl Default for TrainingSection {
    fn default() -> Self {
        Self {
            episodes: 300,
            variant: Variant::CermicQ,
            seeds: (0..20).collect(),
            discount: 0.99,
            q_lr: 0.3,
            eps_init: 0.8,
            eps_final: 0.01,
            eps_decay_episodes: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    EpsilonGreedyQ,
    LsviUcb,
    CermicQ,
    CermicNoCalibration,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::EpsilonGreedyQ => "epsilon_greedy_q",
            Variant::LsviUcb => "lsvi_ucb",
            Variant::CermicQ => "cermic_q",
            Variant::CermicNoCalibration => "cermic_no_calibration",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PretrainSection {
    pub corpus_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub holdout_frac: f64,
}

impl Default for PretrainSection {
    fn default() -> Self {
        Self { corpus_size: 5000, epochs: 8, lr: 0.05, holdout_frac: 0.2 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LsviSection {
    pub zeta: f64,
    pub lambda: f64,
}

impl Default for LsviSection {
    fn default() -> Self {
        Self { zeta: 1.0, lambda: 1.0 }
    }
}

impl LabConfig {
    pub fn lab_default() -> Self {
        Self {
            seed: 1,
            gridworld: GridConfig::lab_default(),
            model: ModelSection::default(),
            robust: RobustSection::default(),
            calibration: CalibrationSection::default(),
            memory: MemorySection::default(),
            training: TrainingSection::default(),
            pretrain: PretrainSection::default(),
            lsvi: LsviSection::default(),
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let cfg: LabConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.gridworld.validate()?;
        self.robust.ambiguity()?;
        if self.training.episodes < 1 {
            return Err(Error::Config("episodes must be at least 1".into()));
        }
        if self.gridworld.episode_horizon < 1 {
            return Err(Error::Config("episode_horizon must be at least 1".into()));
        }
        for (name, v) in [
            ("model.lr", self.model.lr),
            ("model.tau_m", self.model.tau_m),
            ("training.q_lr", self.training.q_lr),
            ("pretrain.lr", self.pretrain.lr),
            ("lsvi.zeta", self.lsvi.zeta),
            ("lsvi.lambda", self.lsvi.lambda),
        ] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.model.tau_m <= 1.0) {
            return Err(Error::Config("model.tau_m must lie in (0, 1]".into()));
        }
        if self.model.intrinsic_scale < 0.0 {
            return Err(Error::Config("intrinsic_scale must be nonnegative".into()));
        }
        if self.calibration.negatives < 1 {
            return Err(Error::Config("calibration.negatives must be at least 1".into()));
        }
        if self.memory.queue_capacity < 1 || self.memory.mp_layers < 1 {
            return Err(Error::Config("memory dims must be at least 1".into()));
        }
        if self.training.seeds.is_empty() {
            return Err(Error::Config("training.seeds must not be empty".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
