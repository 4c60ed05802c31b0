//! Bayes-optimal agents behind the shared [`Agent`] interface.

use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::exact::{Counts, QTable};
use super::gittins::{
    bernoulli_table_cached, gaussian_table_cached, gittins_index_bernoulli, BernoulliGittinsTable,
    GaussianGittinsTable, GittinsConfig,
};
use super::{PredictiveDistribution, SufficientStats};
use crate::task_env::encoding::{decode_input, Experience};
use crate::task_env::{Agent, Decision, Family, TaskKind, TaskSpec};
use crate::{Error, Result};

/// Hyperparameters that must stay positive are clamped to this when a state is implanted.
pub const MIN_HYPERPARAMETER: f64 = 1e-6;

/// Conjugate Bayes-optimal predictor: state = sufficient statistics, output = predictive parameters.
#[derive(Clone, Debug)]
pub struct BayesPredictor {
    spec: TaskSpec,
    prior: SufficientStats,
}

impl BayesPredictor {
    pub fn new(spec: &TaskSpec) -> Result<Self> {
        if spec.kind != TaskKind::Prediction {
            return Err(Error::config(format!(
                "{} is not a prediction task",
                spec.id
            )));
        }
        spec.validate()?;
        let prior =
            SufficientStats::from_prior(spec.family, &spec.prior_params, spec.known_precision)?;
        Ok(Self {
            spec: spec.clone(),
            prior,
        })
    }

    pub fn prior(&self) -> SufficientStats {
        self.prior
    }

    pub fn stats(&self, state: &[f64]) -> Result<SufficientStats> {
        self.prior.with_vec_clamped(state, MIN_HYPERPARAMETER)
    }
}

pub fn predictive_to_vec(d: &PredictiveDistribution) -> Vec<f64> {
    match *d {
        PredictiveDistribution::Bernoulli { p } => vec![p],
        PredictiveDistribution::Categorical { p } => p.to_vec(),
        PredictiveDistribution::Normal { mean, variance } => vec![mean, variance],
        PredictiveDistribution::Lomax { alpha, beta } => vec![alpha, beta],
    }
}

impl Agent for BayesPredictor {
    fn state_dim(&self) -> usize {
        self.prior.dim()
    }

    fn initial_state(&self) -> Vec<f64> {
        self.prior.to_vec()
    }

    fn transition(&self, input: &[f64], state: &[f64]) -> Result<Vec<f64>> {
        let stats = self.stats(state)?;
        Ok(match decode_input(&self.spec, input)? {
            Experience::Observation(x) => stats.update(x)?.to_vec(),
            _ => state.to_vec(),
        })
    }

    fn output(&self, state: &[f64]) -> Result<Vec<f64>> {
        Ok(predictive_to_vec(
            &self.stats(state)?.posterior_predictive(),
        ))
    }

    fn decode(&self, y: &[f64]) -> Result<Decision> {
        let need = match self.spec.family {
            Family::Bernoulli => 1,
            Family::Categorical3 => 3,
            Family::Gaussian | Family::Exponential => 2,
        };
        if y.len() != need {
            return Err(Error::contract(format!(
                "predictor output of length {} (expects {need})",
                y.len()
            )));
        }
        Ok(Decision::Predict(match self.spec.family {
            Family::Bernoulli => PredictiveDistribution::Bernoulli { p: y[0] },
            Family::Categorical3 => PredictiveDistribution::Categorical {
                p: [y[0], y[1], y[2]],
            },
            Family::Gaussian => PredictiveDistribution::Normal {
                mean: y[0],
                variance: y[1],
            },
            Family::Exponential => PredictiveDistribution::Lomax {
                alpha: y[0],
                beta: y[1],
            },
        }))
    }
}

/// Per-arm posteriors plus the step count.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BanditBeliefState {
    pub arms: [SufficientStats; 2],
    pub t: usize,
}

impl BanditBeliefState {
    pub fn prior(spec: &TaskSpec) -> Result<Self> {
        if spec.kind != TaskKind::Bandit {
            return Err(Error::config(format!("{} is not a bandit task", spec.id)));
        }
        let arm =
            |a| SufficientStats::from_prior(spec.family, spec.arm_prior(a), spec.known_precision);
        Ok(Self {
            arms: [arm(0)?, arm(1)?],
            t: 0,
        })
    }

    pub fn update(&self, arm: usize, reward: f64) -> Result<Self> {
        if arm > 1 {
            return Err(Error::argument(format!("arm {arm} out of range")));
        }
        let mut next = *self;
        next.arms[arm] = self.arms[arm].update(reward)?;
        next.t += 1;
        Ok(next)
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.arms[0].to_vec();
        v.extend(self.arms[1].to_vec());
        v
    }

    /// Count offsets from the Bernoulli priors, when they are integral.
    pub fn counts(&self, priors: &[[f64; 2]; 2]) -> Option<Counts> {
        let mut c = [0u32; 4];
        for a in 0..2 {
            let SufficientStats::Bernoulli { alpha, beta } = self.arms[a] else {
                return None;
            };
            for (k, v) in [alpha - priors[a][0], beta - priors[a][1]]
                .into_iter()
                .enumerate()
            {
                let r = v.round();
                if (v - r).abs() > 1e-9 || r < 0.0 {
                    return None;
                }
                c[2 * a + k] = r as u32;
            }
        }
        Some(c)
    }
}

/// Argmax with ties broken towards the lower arm.
pub fn argmax_low(v: [f64; 2]) -> usize {
    usize::from(v[1] > v[0])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BanditPolicy {
    Gittins,
    ExactDp,
}

enum IndexSource {
    Bernoulli {
        tables: [BernoulliGittinsTable; 2],
        cfg: GittinsConfig,
        memo: Mutex<HashMap<(u64, u64), f64>>,
    },
    Gaussian {
        table: GaussianGittinsTable,
    },
}

/// Stationary Gittins-index bandit player. State = per-arm sufficient statistics, output = per-arm indices.
pub struct GittinsBandit {
    spec: TaskSpec,
    prior: BanditBeliefState,
    source: IndexSource,
}

impl GittinsBandit {
    pub fn new(spec: &TaskSpec) -> Result<Self> {
        Self::with_config(spec, &GittinsConfig::with_discount(spec.discount))
    }

    pub fn with_config(spec: &TaskSpec, cfg: &GittinsConfig) -> Result<Self> {
        spec.validate()?;
        let prior = BanditBeliefState::prior(spec)?;
        let cache = super::gittins::cache_dir();
        let source = match spec.family {
            Family::Bernoulli => {
                // tables reach one step past the horizon so generalization runs stay in range
                let pulls = spec.horizon.max(30);
                let pr = |a: usize| (spec.arm_prior(a)[0], spec.arm_prior(a)[1]);
                let t0 = bernoulli_table_cached(cache.as_deref(), pr(0), pulls, cfg)?;
                let t1 = if pr(1) == pr(0) {
                    t0.clone()
                } else {
                    bernoulli_table_cached(cache.as_deref(), pr(1), pulls, cfg)?
                };
                IndexSource::Bernoulli {
                    tables: [t0, t1],
                    cfg: cfg.clone(),
                    memo: Mutex::new(HashMap::new()),
                }
            }
            Family::Gaussian => IndexSource::Gaussian {
                table: gaussian_table_cached(cache.as_deref(), cfg)?,
            },
            other => {
                return Err(Error::config(format!(
                    "no Gittins policy for {other:?} bandits"
                )))
            }
        };
        Ok(Self {
            spec: spec.clone(),
            prior,
            source,
        })
    }

    pub fn spec(&self) -> &TaskSpec {
        &self.spec
    }

    pub fn belief(&self, state: &[f64]) -> Result<BanditBeliefState> {
        let k = self.spec.family.stats_dim();
        if state.len() != 2 * k {
            return Err(Error::contract(format!(
                "bandit state of length {}",
                state.len()
            )));
        }
        Ok(BanditBeliefState {
            arms: [
                self.prior.arms[0].with_vec_clamped(&state[..k], MIN_HYPERPARAMETER)?,
                self.prior.arms[1].with_vec_clamped(&state[k..], MIN_HYPERPARAMETER)?,
            ],
            t: 0,
        })
    }

    pub fn index(&self, arm: usize, stats: &SufficientStats) -> Result<f64> {
        match (&self.source, *stats) {
            (
                IndexSource::Bernoulli { tables, cfg, memo },
                SufficientStats::Bernoulli { alpha, beta },
            ) => {
                if let Some(v) = tables[arm].lookup(alpha, beta) {
                    return Ok(v);
                }
                let key = (alpha.to_bits(), beta.to_bits());
                if let Some(&v) = memo.lock().expect("memo lock").get(&key) {
                    return Ok(v);
                }
                let v = gittins_index_bernoulli(alpha, beta, cfg)?;
                memo.lock().expect("memo lock").insert(key, v);
                Ok(v)
            }
            (
                IndexSource::Gaussian { table },
                SufficientStats::Gaussian {
                    mean,
                    precision,
                    tau,
                },
            ) => {
                // implanted states may leave the tabulated range; clamp to its ends
                let lo = table.n_eff[0];
                let hi = *table.n_eff.last().expect("non-empty table");
                let n = (precision / tau).clamp(lo, hi);
                Ok(mean + table.standardized_index(n)? / precision.sqrt())
            }
            _ => Err(Error::contract(
                "arm statistics do not match the index table",
            )),
        }
    }

    pub fn indices(&self, belief: &BanditBeliefState) -> Result<[f64; 2]> {
        Ok([
            self.index(0, &belief.arms[0])?,
            self.index(1, &belief.arms[1])?,
        ])
    }
}

fn bandit_transition(
    spec: &TaskSpec,
    belief: BanditBeliefState,
    input: &[f64],
) -> Result<BanditBeliefState> {
    match decode_input(spec, input)? {
        Experience::Pull { action, reward } => belief.update(action, reward),
        _ => Ok(belief),
    }
}

fn one_hot_decision(y: &[f64]) -> Result<Decision> {
    if y.len() != 2 {
        return Err(Error::contract(format!(
            "bandit output of length {}",
            y.len()
        )));
    }
    let a = argmax_low([y[0], y[1]]);
    let mut probs = [0.0; 2];
    probs[a] = 1.0;
    Ok(Decision::Act { probs })
}

impl Agent for GittinsBandit {
    fn state_dim(&self) -> usize {
        2 * self.spec.family.stats_dim()
    }

    fn initial_state(&self) -> Vec<f64> {
        self.prior.to_vec()
    }

    fn transition(&self, input: &[f64], state: &[f64]) -> Result<Vec<f64>> {
        Ok(bandit_transition(&self.spec, self.belief(state)?, input)?.to_vec())
    }

    fn output(&self, state: &[f64]) -> Result<Vec<f64>> {
        Ok(self.indices(&self.belief(state)?)?.to_vec())
    }

    fn decode(&self, y: &[f64]) -> Result<Decision> {
        one_hot_decision(y)
    }
}

/// Finite-horizon optimal Bernoulli bandit player; output = Q-values. A verification oracle.
pub struct ExactDpBandit {
    spec: TaskSpec,
    prior: BanditBeliefState,
    table: QTable,
}

impl ExactDpBandit {
    pub fn new(spec: &TaskSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec: spec.clone(),
            prior: BanditBeliefState::prior(spec)?,
            table: QTable::build(spec)?,
        })
    }

    pub fn table(&self) -> &QTable {
        &self.table
    }

    fn counts(&self, state: &[f64]) -> Result<Counts> {
        let b = BanditBeliefState {
            arms: [
                self.prior.arms[0].with_vec_clamped(&state[..2], MIN_HYPERPARAMETER)?,
                self.prior.arms[1].with_vec_clamped(&state[2..], MIN_HYPERPARAMETER)?,
            ],
            t: 0,
        };
        b.counts(&self.table.priors)
            .ok_or_else(|| Error::argument("state is not reachable from the prior"))
    }
}

impl Agent for ExactDpBandit {
    fn state_dim(&self) -> usize {
        4
    }

    fn initial_state(&self) -> Vec<f64> {
        self.prior.to_vec()
    }

    fn transition(&self, input: &[f64], state: &[f64]) -> Result<Vec<f64>> {
        if state.len() != 4 {
            return Err(Error::contract("bandit state must have 4 entries"));
        }
        let b = BanditBeliefState {
            arms: [
                self.prior.arms[0].with_vec_clamped(&state[..2], MIN_HYPERPARAMETER)?,
                self.prior.arms[1].with_vec_clamped(&state[2..], MIN_HYPERPARAMETER)?,
            ],
            t: 0,
        };
        Ok(bandit_transition(&self.spec, b, input)?.to_vec())
    }

    fn output(&self, state: &[f64]) -> Result<Vec<f64>> {
        Ok(self.table.q(&self.counts(state)?)?.to_vec())
    }

    fn decode(&self, y: &[f64]) -> Result<Decision> {
        one_hot_decision(y)
    }
}

/// The action a Bayes-optimal player takes in `state`.
pub fn bayes_optimal_action(
    gittins: &GittinsBandit,
    state: &BanditBeliefState,
    policy: BanditPolicy,
    exact: Option<&QTable>,
) -> Result<usize> {
    let v = match policy {
        BanditPolicy::Gittins => gittins.indices(state)?,
        BanditPolicy::ExactDp => {
            let table = exact.ok_or_else(|| Error::argument("exact policy needs a Q-table"))?;
            let c = state
                .counts(&table.priors)
                .ok_or_else(|| Error::argument("state is not reachable from the prior"))?;
            table.q(&c)?
        }
    };
    Ok(argmax_low(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task_env::rollout;
    use crate::task_env::suite::task_by_id;

    #[test]
    fn predictor_tracks_counts() {
        let spec = task_by_id("pred-bernoulli-beta-1-1").unwrap();
        let agent = BayesPredictor::new(&spec).unwrap();
        let s = agent
            .transition(&[1.0, 1.0], &agent.initial_state())
            .unwrap();
        assert_eq!(s, vec![2.0, 1.0]);
        assert_eq!(agent.output(&s).unwrap(), vec![2.0 / 3.0]);
        assert_eq!(agent.transition(&[0.0, 0.0], &s).unwrap(), s);
    }

    #[test]
    fn dominant_arm_is_chosen_by_both_policies() {
        let spec = task_by_id("bandit-bernoulli-beta-1-1").unwrap();
        let g = GittinsBandit::new(&spec).unwrap();
        let q = QTable::build(&spec).unwrap();
        let b = BanditBeliefState {
            arms: [
                SufficientStats::Bernoulli {
                    alpha: 5.0,
                    beta: 1.0,
                },
                SufficientStats::Bernoulli {
                    alpha: 1.0,
                    beta: 5.0,
                },
            ],
            t: 10,
        };
        assert_eq!(
            bayes_optimal_action(&g, &b, BanditPolicy::Gittins, None).unwrap(),
            0
        );
        assert_eq!(
            bayes_optimal_action(&g, &b, BanditPolicy::ExactDp, Some(&q)).unwrap(),
            0
        );
        let prior = BanditBeliefState::prior(&spec).unwrap();
        assert_eq!(
            bayes_optimal_action(&g, &prior, BanditPolicy::Gittins, None).unwrap(),
            0
        );
    }

    #[test]
    fn gittins_rollout_is_deterministic() {
        let spec = task_by_id("bandit-bernoulli-beta-2-1-1-2").unwrap();
        let g = GittinsBandit::new(&spec).unwrap();
        let a = rollout(&spec, &g, 20, 0, 77).unwrap();
        let b = rollout(&spec, &g, 20, 0, 77).unwrap();
        assert_eq!(a, b);
        a.check_consistent().unwrap();
    }

    #[test]
    fn exact_agent_matches_table_at_prior() {
        let spec = task_by_id("bandit-bernoulli-beta-1-1").unwrap();
        let e = ExactDpBandit::new(&spec).unwrap();
        let y = e.output(&e.initial_state()).unwrap();
        assert_eq!(y[0], y[1]);
        assert_eq!(y[0], e.table().optimal_return());
    }
}
