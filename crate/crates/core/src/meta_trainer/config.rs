use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::neural_core::{A2cWeights, ArchitectureConfig, ClipMode, HeadKind};
use crate::task_env::encoding::input_dim;
use crate::task_env::{TaskKind, TaskSpec};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub run_id: String,
    pub task: TaskSpec,
    pub arch: ArchitectureConfig,
    /// Budget in environment steps, summed over all episodes of all batches.
    pub total_steps: u64,
    pub batch_size: usize,
    pub learning_rate: f64,
    #[serde(default)]
    pub lr_schedule: LrSchedule,
    pub unroll: usize,
    #[serde(default)]
    pub a2c: A2cWeights,
    #[serde(default = "default_clip")]
    pub clip: f64,
    #[serde(default = "default_clip_mode")]
    pub clip_mode: ClipMode,
    /// Geometrically spaced checkpoints in addition to the initial one.
    #[serde(default = "default_checkpoints")]
    pub checkpoints: usize,
    /// Held-out episodes used for the dissimilarity column of the training curve.
    #[serde(default = "default_curve_episodes")]
    pub curve_episodes: usize,
    pub master_seed: u64,
}

/// Learning rate as a function of training progress.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    #[default]
    Constant,
    /// Decays linearly from `learning_rate` at the first batch towards 0 after the last.
    Linear,
}

fn default_clip() -> f64 {
    1.0
}

fn default_clip_mode() -> ClipMode {
    ClipMode::ElementWise
}

fn default_checkpoints() -> usize {
    30
}

fn default_curve_episodes() -> usize {
    100
}

impl TrainConfig {
    /// Supervised log-loss training: N = 32, batch 128, unroll 20, learning rate 1e-4, 1e7 steps.
    pub fn prediction(task: TaskSpec, master_seed: u64) -> Self {
        let arch = ArchitectureConfig::lstm(32, input_dim(&task), HeadKind::for_task(&task));
        Self {
            run_id: format!("{}-s{master_seed}", task.id),
            arch,
            total_steps: 10_000_000,
            batch_size: 128,
            learning_rate: 1e-4,
            lr_schedule: LrSchedule::Constant,
            unroll: 20,
            a2c: A2cWeights::default(),
            clip: 1.0,
            clip_mode: ClipMode::ElementWise,
            checkpoints: 30,
            curve_episodes: 100,
            master_seed,
            task,
        }
    }

    /// Actor-critic training: N = 256, batch 16, unroll 5, learning rate 2.5e-5, 2e6 steps.
    pub fn bandit(task: TaskSpec, master_seed: u64) -> Self {
        let arch = ArchitectureConfig::lstm(256, input_dim(&task), HeadKind::ActionLogitsPlusValue);
        Self {
            run_id: format!("{}-s{master_seed}", task.id),
            arch,
            total_steps: 2_000_000,
            batch_size: 16,
            learning_rate: 2.5e-5,
            lr_schedule: LrSchedule::Constant,
            unroll: 5,
            a2c: A2cWeights::default(),
            clip: 1.0,
            clip_mode: ClipMode::ElementWise,
            checkpoints: 30,
            curve_episodes: 100,
            master_seed,
            task,
        }
    }

    pub fn for_task(task: TaskSpec, master_seed: u64) -> Self {
        match task.kind {
            TaskKind::Prediction => Self::prediction(task, master_seed),
            TaskKind::Bandit => Self::bandit(task, master_seed),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.task.validate()?;
        self.arch.validate()?;
        if self.arch.input_dim != input_dim(&self.task) {
            return Err(Error::config(format!(
                "arch.input_dim {} does not match task input dimension {}",
                self.arch.input_dim,
                input_dim(&self.task)
            )));
        }
        if self.arch.head != HeadKind::for_task(&self.task) {
            return Err(Error::config(format!(
                "arch.head {:?} does not match task {}",
                self.arch.head, self.task.id
            )));
        }
        if self.total_steps == 0 || self.batch_size == 0 || self.unroll == 0 {
            return Err(Error::config(
                "total_steps, batch_size and unroll must be positive",
            ));
        }
        if !(self.learning_rate > 0.0 && self.clip > 0.0) {
            return Err(Error::config("learning_rate and clip must be positive"));
        }
        if !(self.a2c.entropy >= 0.0 && self.a2c.value >= 0.0) {
            return Err(Error::config("loss weights must be non-negative"));
        }
        if self.run_id.is_empty() || self.run_id.contains(['/', '\\']) {
            return Err(Error::config(
                "run_id must be a non-empty file-name component",
            ));
        }
        Ok(())
    }

    /// Learning rate used for the update of batch `batch` (0-based).
    pub fn learning_rate_at(&self, batch: u64) -> f64 {
        match self.lr_schedule {
            LrSchedule::Constant => self.learning_rate,
            LrSchedule::Linear => {
                let total = self.total_batches();
                self.learning_rate * (total - batch.min(total - 1)) as f64 / total as f64
            }
        }
    }

    /// Environment steps consumed by one batch of episodes.
    pub fn steps_per_batch(&self) -> u64 {
        (self.batch_size * self.task.horizon) as u64
    }

    pub fn total_batches(&self) -> u64 {
        self.total_steps.div_ceil(self.steps_per_batch())
    }

    /// Batch indices after which a checkpoint is written: 0 (initial) plus
    /// `checkpoints` geometrically spaced batch counts ending at the last batch.
    pub fn checkpoint_batches(&self) -> Vec<u64> {
        let last = self.total_batches();
        let mut out = vec![0];
        let k = self.checkpoints.max(1);
        for i in 1..=k {
            let b = (last as f64).powf(i as f64 / k as f64).round() as u64;
            let b = b.clamp(1, last);
            if *out.last().expect("non-empty") < b {
                out.push(b);
            }
        }
        if *out.last().expect("non-empty") != last {
            out.push(last);
        }
        out
    }

    /// Hex SHA-256 of the canonical JSON config.
    pub fn digest(&self) -> String {
        let json = serde_json::to_value(self)
            .expect("config serializes")
            .to_string();
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
