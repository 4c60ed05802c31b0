//! Task distributions, input encodings, the agent interface and episode rollouts.

mod agent;
pub mod archive;
pub mod encoding;
mod rollout;
mod spec;
pub mod suite;

pub use agent::{Agent, Decision};
pub use rollout::{episode_seeds, pull_from_input, replay, rollout, Trace};
pub use spec::{
    best_expected_reward, sample_task, step_bandit, step_prediction, validate_params, Family,
    ObservationModel, Pull, TaskKind, TaskParams, TaskSpec,
};
