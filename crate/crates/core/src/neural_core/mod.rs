//! Dense and LSTM kernels with hand-written backpropagation through time.
//!
//! Everything is `f64` and single-threaded so that finite-difference checks are
//! reliable and repeated runs are bitwise identical. Matrix products go through
//! `matrixmultiply`; all layer logic and gradients are written out here.

mod agent;
pub mod bptt;
pub mod checkpoint;
pub mod heads;
pub mod network;
pub mod optim;
mod params;
pub mod tensor;

pub use agent::NeuralAgent;
pub use bptt::{bptt_gradients, forward_window, output_gradients, WindowLoss, WindowResult};
pub use checkpoint::{Container, NamedArray};
pub use heads::{a2c_loss, A2cTerms, A2cWeights, HeadKind};
pub use network::{Network, StepCache};
pub use optim::{clip_gradients, AdamConfig, AdamState, ClipMode};
pub use params::{
    init_params, sample_truncated_normal, truncated_normal_std, Activation, ArchitectureConfig,
    Core, ParamSet,
};
pub use tensor::Matrix;
