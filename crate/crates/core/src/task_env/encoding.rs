//! Input vectors fed to agents.
//!
//! Prediction: the previous observation, one-hot for categorical tasks and
//! `[x, 1]` for scalar families, where the trailing 1 marks that an
//! observation is present. Bandits: one-hot previous action followed by the
//! previous reward. The first step of every episode receives all zeros.

use super::{Family, TaskKind, TaskSpec};
use crate::{Error, Result};

pub fn input_dim(spec: &TaskSpec) -> usize {
    match (spec.kind, spec.family) {
        (TaskKind::Bandit, _) => 3,
        (TaskKind::Prediction, Family::Categorical3) => 3,
        (TaskKind::Prediction, _) => 2,
    }
}

pub fn null_input(spec: &TaskSpec) -> Vec<f64> {
    vec![0.0; input_dim(spec)]
}

pub fn encode_observation(spec: &TaskSpec, x: f64) -> Vec<f64> {
    match spec.family {
        Family::Categorical3 => {
            let mut v = vec![0.0; 3];
            v[x as usize] = 1.0;
            v
        }
        _ => vec![x, 1.0],
    }
}

pub fn encode_pull(action: usize, reward: f64) -> Vec<f64> {
    let mut v = vec![0.0; 3];
    v[action] = 1.0;
    v[2] = reward;
    v
}

/// What an input vector tells the agent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Experience {
    Nothing,
    Observation(f64),
    Pull { action: usize, reward: f64 },
}

pub fn decode_input(spec: &TaskSpec, input: &[f64]) -> Result<Experience> {
    if input.len() != input_dim(spec) {
        return Err(Error::contract(format!(
            "input of length {} for task {} (expects {})",
            input.len(),
            spec.id,
            input_dim(spec)
        )));
    }
    Ok(match (spec.kind, spec.family) {
        (TaskKind::Bandit, _) => {
            if input[0] == 0.0 && input[1] == 0.0 {
                Experience::Nothing
            } else {
                let action = usize::from(input[1] > input[0]);
                Experience::Pull {
                    action,
                    reward: input[2],
                }
            }
        }
        (TaskKind::Prediction, Family::Categorical3) => match input.iter().position(|&v| v > 0.5) {
            None => Experience::Nothing,
            Some(k) => Experience::Observation(k as f64),
        },
        (TaskKind::Prediction, _) => {
            if input[1] > 0.5 {
                Experience::Observation(input[0])
            } else {
                Experience::Nothing
            }
        }
    })
}
