//! Meta-training: supervised log-loss training on prediction tasks and on-policy
//! actor-critic training on bandits, with checkpoints, curves and evaluation.

mod checkpoint;
mod config;
mod curve;
mod eval;
mod train;

pub use checkpoint::{checkpoint_path, curve_path, list_checkpoints, Checkpoint};
pub use config::{LrSchedule, TrainConfig};
pub use curve::{edge_median, CurvePoint, TrainingCurve};
pub use eval::{evaluate, metrics_of, EvalMetrics};
pub use train::{
    batch_episode_seed, curve_seed, reduced_memory_config, train, train_bandit, train_prediction,
    train_reduced_memory, TrainOptions, TrainOutcome,
};
