//! Memory-based meta-learners and their Bayes-optimal counterparts.
//!
//! The crate is organised around one abstraction: every agent is a
//! deterministic state machine `s_t = g(x_t, s_{t-1})` whose output is read
//! from the post-transition state. The Bayes-optimal agents keep conjugate
//! sufficient statistics as their state, the meta-learners keep an LSTM cell
//! and hidden vector. Everything else (training, behavioural and structural
//! comparison) is expressed in terms of [`task_env::Trace`]s produced by that
//! interface.
//!
//! Modules:
//! - [`task_env`]: the fourteen task distributions, input encodings, rollouts, trace archives.
//! - [`bayes_agent`]: conjugate updates, posterior predictives, Gittins indices, exact bandit DP.
//! - [`neural_core`]: dense/LSTM kernels with hand-written BPTT, Adam, clipping, checkpoints.
//! - [`meta_trainer`]: supervised and actor-critic meta-training, evaluation, reduced-memory baselines.
//! - [`analysis`]: dissimilarities, JS/MDS convergence, PCA, learned simulation maps.

pub mod analysis;
pub mod bayes_agent;
pub mod error;
pub mod meta_trainer;
pub mod neural_core;
pub mod seeding;
pub mod task_env;

pub use error::{Error, Result};
