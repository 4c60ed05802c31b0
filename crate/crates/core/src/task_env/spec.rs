use rand::Rng;
use rand_distr::{Beta, Distribution, Exp, Gamma, Normal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Prediction,
    Bandit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Bernoulli,
    Categorical3,
    Exponential,
    Gaussian,
}

impl Family {
    /// Number of prior hyperparameters for one parameter (or one arm).
    pub fn prior_len(self) -> usize {
        match self {
            Family::Categorical3 => 3,
            _ => 2,
        }
    }

    /// Dimension of the minimal sufficient statistic of one parameter (or one arm).
    pub fn stats_dim(self) -> usize {
        self.prior_len()
    }
}

/// One of the task distributions: prior over task parameters plus protocol constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: String,
    pub kind: TaskKind,
    pub family: Family,
    /// Prediction: the prior's hyperparameters. Bandit: arm 1's followed by arm 2's.
    /// Gaussian priors are given as (mean, precision); Gamma as (shape, rate).
    pub prior_params: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known_precision: Option<f64>,
    pub horizon: usize,
    pub discount: f64,
}

/// Parameters of one sampled task: θ, θ⃗, λ or µ; one value per arm for bandits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskParams {
    pub values: Vec<f64>,
}

impl TaskSpec {
    pub fn n_arms(&self) -> usize {
        match self.kind {
            TaskKind::Prediction => 1,
            TaskKind::Bandit => 2,
        }
    }

    /// Prior hyperparameters of parameter `arm` (0 for prediction tasks).
    pub fn arm_prior(&self, arm: usize) -> &[f64] {
        let k = self.family.prior_len();
        &self.prior_params[arm * k..(arm + 1) * k]
    }

    /// Dimension of the Bayes-optimal agent's state, also the number of
    /// principal components retained in structural analysis.
    pub fn stats_dim(&self) -> usize {
        self.family.stats_dim() * self.n_arms()
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::config(format!("task {}: {m}", self.id)));
        if self.horizon == 0 {
            return err("horizon must be positive".into());
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return err(format!("discount {} outside (0, 1]", self.discount));
        }
        if self.prior_params.len() != self.family.prior_len() * self.n_arms() {
            return err(format!(
                "expected {} prior hyperparameters, got {}",
                self.family.prior_len() * self.n_arms(),
                self.prior_params.len()
            ));
        }
        if self.kind == TaskKind::Bandit
            && !matches!(self.family, Family::Bernoulli | Family::Gaussian)
        {
            return err(format!("{:?} bandits are not supported", self.family));
        }
        for arm in 0..self.n_arms() {
            let p = self.arm_prior(arm);
            let ok = match self.family {
                Family::Gaussian => p[0].is_finite() && p[1] > 0.0 && p[1].is_finite(),
                _ => p.iter().all(|&a| a > 0.0 && a.is_finite()),
            };
            if !ok {
                return err(format!("invalid hyperparameters {p:?}"));
            }
        }
        match (self.family, self.known_precision) {
            (Family::Gaussian, Some(t)) if t > 0.0 && t.is_finite() => {}
            (Family::Gaussian, _) => {
                return err("gaussian tasks need a positive known precision".into())
            }
            _ => {}
        }
        Ok(())
    }

    /// Observation / reward distribution of one parameter value.
    pub fn observation_model(&self, theta: f64) -> ObservationModel {
        match self.family {
            Family::Bernoulli => ObservationModel::Bernoulli(theta),
            Family::Exponential => ObservationModel::Exponential(theta),
            Family::Gaussian => ObservationModel::Gaussian {
                mean: theta,
                precision: self.known_precision.unwrap_or(1.0),
            },
            Family::Categorical3 => unreachable!("categorical parameters are vectors"),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum ObservationModel {
    Bernoulli(f64),
    Exponential(f64),
    Gaussian { mean: f64, precision: f64 },
}

impl ObservationModel {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ObservationModel::Bernoulli(p) => f64::from(u8::from(rng.random::<f64>() < p)),
            ObservationModel::Exponential(rate) => {
                Exp::new(rate).expect("positive rate").sample(rng)
            }
            ObservationModel::Gaussian { mean, precision } => {
                Normal::new(mean, precision.recip().sqrt())
                    .expect("positive precision")
                    .sample(rng)
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ObservationModel::Bernoulli(p) => p,
            ObservationModel::Exponential(rate) => rate.recip(),
            ObservationModel::Gaussian { mean, .. } => mean,
        }
    }
}

fn sample_beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> Result<f64> {
    Ok(Beta::new(a, b)
        .map_err(|e| Error::config(format!("Beta({a}, {b}): {e}")))?
        .sample(rng))
}

fn sample_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    Ok(Gamma::new(shape, rate.recip())
        .map_err(|e| Error::config(format!("Gamma({shape}, {rate}): {e}")))?
        .sample(rng))
}

/// Draws task parameters from the task prior.
pub fn sample_task<R: Rng + ?Sized>(spec: &TaskSpec, rng: &mut R) -> Result<TaskParams> {
    spec.validate()?;
    let mut values = Vec::new();
    for arm in 0..spec.n_arms() {
        let p = spec.arm_prior(arm);
        match spec.family {
            Family::Bernoulli => values.push(sample_beta(p[0], p[1], rng)?),
            Family::Exponential => values.push(sample_gamma(p[0], p[1], rng)?),
            Family::Gaussian => values.push(
                Normal::new(p[0], p[1].recip().sqrt())
                    .map_err(|e| Error::config(e.to_string()))?
                    .sample(rng),
            ),
            Family::Categorical3 => {
                // Dirichlet via normalised gammas; small concentrations can
                // underflow every gamma draw, hence the retry.
                loop {
                    let g: Vec<f64> = p
                        .iter()
                        .map(|&a| sample_gamma(a, 1.0, rng))
                        .collect::<Result<_>>()?;
                    let s: f64 = g.iter().sum();
                    if s > 0.0 && s.is_finite() {
                        let mut th: Vec<f64> = g.iter().map(|x| x / s).collect();
                        let rest: f64 = th[0] + th[1];
                        th[2] = (1.0 - rest).max(0.0);
                        values.extend(th);
                        break;
                    }
                }
            }
        }
    }
    Ok(TaskParams { values })
}

/// One observation of a prediction task.
pub fn step_prediction<R: Rng + ?Sized>(
    spec: &TaskSpec,
    params: &TaskParams,
    rng: &mut R,
) -> Result<f64> {
    if spec.kind != TaskKind::Prediction {
        return Err(Error::argument("step_prediction on a bandit task"));
    }
    validate_params(spec, params)?;
    Ok(match spec.family {
        Family::Categorical3 => {
            let th = &params.values;
            let u: f64 = rng.random();
            if u < th[0] {
                0.0
            } else if u < th[0] + th[1] {
                1.0
            } else {
                2.0
            }
        }
        _ => spec.observation_model(params.values[0]).sample(rng),
    })
}

/// Reward of one pull together with its expectation under the true parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pull {
    pub reward: f64,
    pub expected_reward: f64,
}

/// Pulls arm `action` (0-based). Randomness comes from that arm's own stream.
pub fn step_bandit<R: Rng + ?Sized>(
    spec: &TaskSpec,
    params: &TaskParams,
    action: usize,
    rng: &mut R,
) -> Result<Pull> {
    if spec.kind != TaskKind::Bandit {
        return Err(Error::argument("step_bandit on a prediction task"));
    }
    if action >= 2 {
        return Err(Error::argument(format!(
            "arm index {action} out of range (two arms)"
        )));
    }
    validate_params(spec, params)?;
    let model = spec.observation_model(params.values[action]);
    Ok(Pull {
        reward: model.sample(rng),
        expected_reward: model.mean(),
    })
}

/// Expected reward of the best arm.
pub fn best_expected_reward(spec: &TaskSpec, params: &TaskParams) -> f64 {
    (0..spec.n_arms())
        .map(|a| spec.observation_model(params.values[a]).mean())
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn validate_params(spec: &TaskSpec, params: &TaskParams) -> Result<()> {
    let v = &params.values;
    let expected = match spec.family {
        Family::Categorical3 => 3,
        _ => spec.n_arms(),
    };
    if v.len() != expected {
        return Err(Error::argument(format!(
            "expected {expected} task parameters, got {}",
            v.len()
        )));
    }
    let ok = match spec.family {
        Family::Bernoulli => v.iter().all(|&p| (0.0..=1.0).contains(&p)),
        Family::Categorical3 => {
            v.iter().all(|&p| (0.0..=1.0).contains(&p))
                && (v.iter().sum::<f64>() - 1.0).abs() < 1e-9
        }
        Family::Exponential => v.iter().all(|&l| l > 0.0 && l.is_finite()),
        Family::Gaussian => v.iter().all(|m| m.is_finite()),
    };
    if ok {
        Ok(())
    } else {
        Err(Error::argument(format!(
            "task parameters {v:?} invalid for {:?}",
            spec.family
        )))
    }
}
