//! The fourteen task distributions.

use super::{Family, TaskKind, TaskSpec};
use crate::{Error, Result};

pub const DEFAULT_HORIZON: usize = 20;
pub const DEFAULT_DISCOUNT: f64 = 0.95;

fn task(id: &str, kind: TaskKind, family: Family, prior: &[f64], tau: Option<f64>) -> TaskSpec {
    TaskSpec {
        id: id.to_string(),
        kind,
        family,
        prior_params: prior.to_vec(),
        known_precision: tau,
        horizon: DEFAULT_HORIZON,
        discount: DEFAULT_DISCOUNT,
    }
}

/// All tasks in a fixed order: ten prediction tasks followed by four bandits.
pub fn all_tasks() -> Vec<TaskSpec> {
    use Family::*;
    use TaskKind::*;
    vec![
        task(
            "pred-bernoulli-beta-1-1",
            Prediction,
            Bernoulli,
            &[1.0, 1.0],
            None,
        ),
        task(
            "pred-bernoulli-beta-0.5-0.5",
            Prediction,
            Bernoulli,
            &[0.5, 0.5],
            None,
        ),
        task(
            "pred-bernoulli-beta-1-5",
            Prediction,
            Bernoulli,
            &[1.0, 5.0],
            None,
        ),
        task(
            "pred-categorical-dirichlet-1-1-1",
            Prediction,
            Categorical3,
            &[1.0, 1.0, 1.0],
            None,
        ),
        task(
            "pred-categorical-dirichlet-1-1-0.1",
            Prediction,
            Categorical3,
            &[1.0, 1.0, 0.1],
            None,
        ),
        task(
            "pred-categorical-dirichlet-0.5-0.5-0.5",
            Prediction,
            Categorical3,
            &[0.5, 0.5, 0.5],
            None,
        ),
        task(
            "pred-exponential-gamma-1-0.5",
            Prediction,
            Exponential,
            &[1.0, 0.5],
            None,
        ),
        task(
            "pred-exponential-gamma-5-1",
            Prediction,
            Exponential,
            &[5.0, 1.0],
            None,
        ),
        // Gaussian priors are (mean, precision).
        task(
            "pred-gaussian-normal-0-1",
            Prediction,
            Gaussian,
            &[0.0, 1.0],
            Some(1.0),
        ),
        task(
            "pred-gaussian-normal-1-1",
            Prediction,
            Gaussian,
            &[1.0, 1.0],
            Some(5.0),
        ),
        task(
            "bandit-bernoulli-beta-1-1",
            Bandit,
            Bernoulli,
            &[1.0, 1.0, 1.0, 1.0],
            None,
        ),
        task(
            "bandit-bernoulli-beta-2-1-1-2",
            Bandit,
            Bernoulli,
            &[2.0, 1.0, 1.0, 2.0],
            None,
        ),
        task(
            "bandit-gaussian-normal-0-1",
            Bandit,
            Gaussian,
            &[0.0, 1.0, 0.0, 1.0],
            Some(1.0),
        ),
        // Normal(0, 0.1) is stated as a variance: precision 10.
        task(
            "bandit-gaussian-normal-0-0.1",
            Bandit,
            Gaussian,
            &[0.0, 10.0, 0.0, 10.0],
            Some(1.0),
        ),
    ]
}

pub fn task_by_id(id: &str) -> Result<TaskSpec> {
    all_tasks()
        .into_iter()
        .find(|t| t.id == id)
        .ok_or_else(|| Error::config(format!("unknown task id {id:?}")))
}
