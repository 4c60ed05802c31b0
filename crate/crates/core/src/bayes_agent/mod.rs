//! Bayes-optimal predictors and bandit players.

pub mod agents;
pub mod exact;
pub mod gittins;
mod predictive;
mod stats;

pub use agents::{
    argmax_low, bayes_optimal_action, predictive_to_vec, BanditBeliefState, BanditPolicy,
    BayesPredictor, ExactDpBandit, GittinsBandit,
};
pub use exact::{policy_value, QTable};
pub use gittins::{gittins_index_bernoulli, gittins_index_gaussian, GittinsConfig};
pub use predictive::{OutOfSupport, PredictiveDistribution};
pub use stats::SufficientStats;
