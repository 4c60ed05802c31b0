use serde::{Deserialize, Serialize};

use crate::bayes_agent::PredictiveDistribution;
use crate::Result;

/// What an agent commits to at one step: a predictive distribution or an action distribution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Decision {
    Predict(PredictiveDistribution),
    Act { probs: [f64; 2] },
}

impl Decision {
    pub fn predictive(&self) -> Option<&PredictiveDistribution> {
        match self {
            Decision::Predict(d) => Some(d),
            Decision::Act { .. } => None,
        }
    }

    pub fn action_probs(&self) -> Option<[f64; 2]> {
        match self {
            Decision::Act { probs } => Some(*probs),
            Decision::Predict(_) => None,
        }
    }
}

/// A deterministic state machine `s_t = g(x_t, s_{t-1})`, `y_t = f(s_t)`.
///
/// The output is read from the post-transition state, so `y_t = f(g(x_t, s_{t-1}))`,
/// and any state vector (for example one produced by an embedding) can be
/// implanted and read out through [`Agent::output`].
pub trait Agent {
    fn state_dim(&self) -> usize;
    fn initial_state(&self) -> Vec<f64>;
    fn transition(&self, input: &[f64], state: &[f64]) -> Result<Vec<f64>>;
    fn output(&self, state: &[f64]) -> Result<Vec<f64>>;
    fn decode(&self, output: &[f64]) -> Result<Decision>;

    fn step(&self, input: &[f64], state: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let next = self.transition(input, state)?;
        let y = self.output(&next)?;
        Ok((y, next))
    }

    fn decide(&self, state: &[f64]) -> Result<Decision> {
        self.decode(&self.output(state)?)
    }
}

impl<A: Agent + ?Sized> Agent for &A {
    fn state_dim(&self) -> usize {
        (**self).state_dim()
    }
    fn initial_state(&self) -> Vec<f64> {
        (**self).initial_state()
    }
    fn transition(&self, input: &[f64], state: &[f64]) -> Result<Vec<f64>> {
        (**self).transition(input, state)
    }
    fn output(&self, state: &[f64]) -> Result<Vec<f64>> {
        (**self).output(state)
    }
    fn decode(&self, output: &[f64]) -> Result<Decision> {
        (**self).decode(output)
    }
}

impl<A: Agent + ?Sized> Agent for Box<A> {
    fn state_dim(&self) -> usize {
        (**self).state_dim()
    }
    fn initial_state(&self) -> Vec<f64> {
        (**self).initial_state()
    }
    fn transition(&self, input: &[f64], state: &[f64]) -> Result<Vec<f64>> {
        (**self).transition(input, state)
    }
    fn output(&self, state: &[f64]) -> Result<Vec<f64>> {
        (**self).output(state)
    }
    fn decode(&self, output: &[f64]) -> Result<Decision> {
        (**self).decode(output)
    }
}
