use rand::Rng;
use serde::{Deserialize, Serialize};

use super::encoding::{decode_input, encode_observation, encode_pull, null_input, Experience};
use super::{
    best_expected_reward, sample_task, step_bandit, step_prediction, Agent, Decision, TaskKind,
    TaskParams, TaskSpec,
};
use crate::seeding::{self, Stream};
use crate::{Error, Result};

/// One episode through a state machine: `s_0 x_1 s_1 ... x_T s_T` plus outputs and environment feedback.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub task_id: String,
    pub episode_index: u64,
    pub episode_seed: u64,
    pub task_params: TaskParams,
    pub inputs: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
    /// `T + 1` states, starting with the initial state.
    pub states: Vec<Vec<f64>>,
    pub decisions: Vec<Decision>,
    /// Prediction tasks: `observations[t]` is the target of `decisions[t]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observations: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actions: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rewards: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_rewards: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_expected_reward: Option<f64>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn is_bandit(&self) -> bool {
        self.rewards.is_some()
    }

    /// Checks the length invariants: `T` inputs, outputs and decisions, `T + 1`
    /// states, rewards present iff the trace comes from a bandit.
    pub fn check_consistent(&self) -> Result<()> {
        let t = self.len();
        let ok = self.outputs.len() == t
            && self.decisions.len() == t
            && self.states.len() == t + 1
            && match (&self.observations, &self.rewards) {
                (Some(o), None) => o.len() == t && self.actions.is_none(),
                (None, Some(r)) => {
                    r.len() == t
                        && self.actions.as_ref().is_some_and(|a| a.len() == t)
                        && self.expected_rewards.as_ref().is_some_and(|e| e.len() == t)
                        && self.best_expected_reward.is_some()
                }
                _ => false,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::contract(format!(
                "inconsistent trace for episode {}",
                self.episode_index
            )))
        }
    }

    /// Per-step log-loss `-log π_t(x_t)` (prediction traces).
    pub fn log_losses(&self) -> Result<Vec<f64>> {
        let obs = self
            .observations
            .as_ref()
            .ok_or_else(|| Error::contract("log-loss requested for a bandit trace"))?;
        self.decisions
            .iter()
            .zip(obs)
            .map(|(d, &x)| {
                let p = d
                    .predictive()
                    .ok_or_else(|| Error::contract("decision is not a prediction"))?;
                Ok(-p.log_density_or_neg_inf(x))
            })
            .collect()
    }

    pub fn expected_rewards(&self) -> Result<&[f64]> {
        self.expected_rewards.as_deref().ok_or_else(|| {
            Error::contract(format!(
                "episode {} has no expected rewards",
                self.episode_index
            ))
        })
    }

    /// Per-step expected regret `max_a E[r|θ_a] - E[r|θ_{a_t}]`.
    pub fn regrets(&self) -> Result<Vec<f64>> {
        let best = self
            .best_expected_reward
            .ok_or_else(|| Error::contract("regret requested without best-arm reward"))?;
        Ok(self.expected_rewards()?.iter().map(|r| best - r).collect())
    }

    /// Discounted sum `Σ_t γ^{t-1} E[r_t]` of expected rewards.
    pub fn discounted_expected_return(&self, gamma: f64) -> Result<f64> {
        Ok(self
            .expected_rewards()?
            .iter()
            .enumerate()
            .map(|(t, r)| gamma.powi(t as i32) * r)
            .sum())
    }
}

/// Seeds of the first `k` episodes of a seeded evaluation.
pub fn episode_seeds(master_seed: u64, k: usize) -> Vec<(u64, u64)> {
    (0..k as u64)
        .map(|i| (i, seeding::episode_seed(master_seed, i)))
        .collect()
}

fn sample_action<R: Rng + ?Sized>(probs: [f64; 2], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    usize::from(u >= probs[0])
}

/// Runs one episode of `t_eval` steps against `agent`.
///
/// Task parameters, observations, per-arm rewards and action sampling use
/// separate streams of `episode_seed`, so for prediction tasks two agents see
/// identical observations, and for bandits the same arm parameters and the
/// same reward sequence per arm.
pub fn rollout<A: Agent + ?Sized>(
    spec: &TaskSpec,
    agent: &A,
    t_eval: usize,
    episode_index: u64,
    episode_seed: u64,
) -> Result<Trace> {
    let params = sample_task(
        spec,
        &mut seeding::stream(episode_seed, Stream::TaskParams as u64),
    )?;
    let mut state = agent.initial_state();
    if state.len() != agent.state_dim() {
        return Err(Error::contract("initial state has wrong dimension"));
    }
    let mut trace = Trace {
        task_id: spec.id.clone(),
        episode_index,
        episode_seed,
        task_params: params.clone(),
        inputs: Vec::with_capacity(t_eval),
        outputs: Vec::with_capacity(t_eval),
        states: vec![state.clone()],
        decisions: Vec::with_capacity(t_eval),
        observations: None,
        actions: None,
        rewards: None,
        expected_rewards: None,
        best_expected_reward: None,
    };
    let mut input = null_input(spec);
    match spec.kind {
        TaskKind::Prediction => {
            let mut obs_rng = seeding::stream(episode_seed, Stream::Observations as u64);
            let mut observations = Vec::with_capacity(t_eval);
            for _ in 0..t_eval {
                let (y, next) = agent.step(&input, &state)?;
                let decision = agent.decode(&y)?;
                if decision.predictive().is_none() {
                    return Err(Error::contract(
                        "agent emitted an action on a prediction task",
                    ));
                }
                let x = step_prediction(spec, &params, &mut obs_rng)?;
                trace
                    .inputs
                    .push(std::mem::replace(&mut input, encode_observation(spec, x)));
                trace.outputs.push(y);
                trace.decisions.push(decision);
                trace.states.push(next.clone());
                observations.push(x);
                state = next;
            }
            trace.observations = Some(observations);
        }
        TaskKind::Bandit => {
            let mut arm_rngs = [
                seeding::stream(episode_seed, Stream::ArmRewards as u64),
                seeding::stream(episode_seed, Stream::ArmRewards as u64 + 1),
            ];
            let mut act_rng = seeding::stream(episode_seed, Stream::Actions as u64);
            let (mut actions, mut rewards, mut expected) = (vec![], vec![], vec![]);
            for _ in 0..t_eval {
                let (y, next) = agent.step(&input, &state)?;
                let decision = agent.decode(&y)?;
                let probs = decision.action_probs().ok_or_else(|| {
                    Error::contract("agent emitted a prediction on a bandit task")
                })?;
                let a = sample_action(probs, &mut act_rng);
                let pull = step_bandit(spec, &params, a, &mut arm_rngs[a])?;
                trace
                    .inputs
                    .push(std::mem::replace(&mut input, encode_pull(a, pull.reward)));
                trace.outputs.push(y);
                trace.decisions.push(decision);
                trace.states.push(next.clone());
                actions.push(a);
                rewards.push(pull.reward);
                expected.push(pull.expected_reward);
                state = next;
            }
            trace.actions = Some(actions);
            trace.rewards = Some(rewards);
            trace.expected_rewards = Some(expected);
            trace.best_expected_reward = Some(best_expected_reward(spec, &params));
        }
    }
    Ok(trace)
}

/// Feeds the inputs of `reference` into `agent`, keeping the reference's
/// environment feedback. This is how two machines are compared on an
/// identical input history when the history depends on actions.
pub fn replay<A: Agent + ?Sized>(agent: &A, reference: &Trace) -> Result<Trace> {
    let mut state = agent.initial_state();
    let mut states = vec![state.clone()];
    let mut outputs = Vec::with_capacity(reference.len());
    let mut decisions = Vec::with_capacity(reference.len());
    for x in &reference.inputs {
        let (y, next) = agent.step(x, &state)?;
        decisions.push(agent.decode(&y)?);
        outputs.push(y);
        states.push(next.clone());
        state = next;
    }
    Ok(Trace {
        outputs,
        states,
        decisions,
        ..reference.clone()
    })
}

/// Decodes a bandit input into (action, reward); used by trainers that build inputs themselves.
pub fn pull_from_input(spec: &TaskSpec, input: &[f64]) -> Result<Option<(usize, f64)>> {
    Ok(match decode_input(spec, input)? {
        Experience::Pull { action, reward } => Some((action, reward)),
        _ => None,
    })
}
