use super::network::Network;
use crate::task_env::{Agent, Decision};
use crate::Result;

/// A network behind the shared agent interface; state `[c; h]` for the LSTM core.
#[derive(Clone, Debug, PartialEq)]
pub struct NeuralAgent {
    pub net: Network,
}

impl NeuralAgent {
    pub fn new(net: Network) -> Self {
        Self { net }
    }
}

impl Agent for NeuralAgent {
    fn state_dim(&self) -> usize {
        self.net.state_dim()
    }

    fn initial_state(&self) -> Vec<f64> {
        vec![0.0; self.net.state_dim()]
    }

    fn transition(&self, input: &[f64], state: &[f64]) -> Result<Vec<f64>> {
        Ok(self.net.step(input, state)?.1)
    }

    /// Output read from an arbitrary (possibly implanted) state.
    ///
    /// The readout depends only on `h`, so it is evaluated directly rather than
    /// by running a transition.
    fn output(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.net.readout(state)
    }

    fn decode(&self, y: &[f64]) -> Result<Decision> {
        self.net.arch.head.decode(y)
    }

    fn step(&self, input: &[f64], state: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.net.step(input, state)
    }
}
