//! Behavioural, convergence and structural comparisons between agents.

pub mod behavior;
pub mod divergence;
pub mod embedding;
pub mod mds;
pub mod pca;
pub mod report;
pub mod simulation;

pub use behavior::{
    behavioral_dissimilarity, behavioral_dissimilarity_bandit, behavioral_dissimilarity_prediction,
    pairwise_distance_matrix, within_episode_dissimilarity, DissimilarityReport, DistanceMatrix,
    DistanceOptions,
};
pub use divergence::{js_divergence, kl_divergence, Estimate, MonteCarlo};
pub use embedding::{Direction, EmbeddingConfig, SimulationMap};
pub use mds::{classical_mds, embedded_distances, MdsEmbedding};
pub use pca::PcaModel;
pub use simulation::{
    held_out_traces, simulation_quality, structural_comparison, SimulationInputs, SimulationReport,
    StructureConfig, StructureResult,
};
