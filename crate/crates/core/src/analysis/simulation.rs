//! Structural comparison: how well one agent's states can stand in for the other's.
//!
//! Both agents are driven by identical input histories generated by the trained
//! meta-learner. States are projected to whitened PCA coordinates, a regressor φ
//! maps source coordinates to target coordinates, and two scores are reported on
//! held-out episodes: `D_s`, the MSE of φ in whitened target units, and `D_o`,
//! the output dissimilarity after implanting φ's prediction into the target machine.

use serde::{Deserialize, Serialize};

use super::divergence::{kl_divergence, MonteCarlo};
use super::embedding::{Direction, EmbeddingConfig, SimulationMap};
use super::pca::PcaModel;
use crate::task_env::{episode_seeds, replay, rollout, Agent, Decision, TaskSpec, Trace};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub direction: Direction,
    pub d_s: f64,
    pub d_o: f64,
    pub train_episodes: usize,
    pub test_episodes: usize,
    pub units: String,
}

/// Post-transition states `s_1..s_T` of every episode.
pub fn episode_states(traces: &[Trace]) -> Vec<Vec<Vec<f64>>> {
    traces.iter().map(|t| t.states[1..].to_vec()).collect()
}

fn whiten_all(pca: &PcaModel, eps: &[Vec<Vec<f64>>]) -> Vec<Vec<Vec<f64>>> {
    eps.iter()
        .map(|e| e.iter().map(|s| pca.whiten(s)).collect())
        .collect()
}

/// Expected reward of acting with `probs` on arms with expected rewards `means`.
fn policy_reward(d: &Decision, means: &[f64]) -> Result<f64> {
    let p = d
        .action_probs()
        .ok_or_else(|| Error::contract("not a bandit decision"))?;
    Ok(p[0] * means[0] + p[1] * means[1])
}

pub struct SimulationInputs<'a> {
    pub spec: &'a TaskSpec,
    pub direction: Direction,
    pub source_pca: &'a PcaModel,
    pub target_pca: &'a PcaModel,
    pub target: &'a dyn Agent,
    /// Held-out episodes of the source and target machines on the same inputs.
    pub source: &'a [Trace],
    pub target_traces: &'a [Trace],
    pub mc: MonteCarlo,
    pub train_episodes: usize,
}

/// Scores a state map on held-out episodes.
pub fn simulation_quality(
    inp: &SimulationInputs,
    phi: &dyn Fn(&[f64]) -> Vec<f64>,
) -> Result<SimulationReport> {
    if inp.source.len() != inp.target_traces.len() || inp.source.is_empty() {
        return Err(Error::contract(
            "simulation quality needs matched held-out episodes",
        ));
    }
    let means: Vec<Vec<f64>> = inp.source.iter().map(|t| arm_means(inp.spec, t)).collect();
    let (mut se, mut count) = (0.0, 0usize);
    let mut kl_sum = 0.0;
    let mut reward_diff = 0.0;
    for (k, (src, tgt)) in inp.source.iter().zip(inp.target_traces).enumerate() {
        if src.inputs != tgt.inputs {
            return Err(Error::contract(format!(
                "episode {} has different input histories",
                src.episode_index
            )));
        }
        for t in 0..src.len() {
            let z_src = inp.source_pca.whiten(&src.states[t + 1]);
            let z_tgt = inp.target_pca.whiten(&tgt.states[t + 1]);
            let z_hat = phi(&z_src);
            if z_hat.len() != z_tgt.len() {
                return Err(Error::contract(
                    "φ output dimension does not match the target PCA",
                ));
            }
            se += z_hat
                .iter()
                .zip(&z_tgt)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                / z_tgt.len() as f64;
            count += 1;
            let implanted = inp.target_pca.unwhiten(&z_hat);
            let y = inp.target.output(&implanted)?;
            let emitted = inp.target.decode(&y)?;
            let original = &src.decisions[t];
            match (original, &emitted) {
                (Decision::Predict(p_src), Decision::Predict(p_tgt)) => {
                    // KL is always taken as (Bayes-optimal side ‖ meta-learner side)
                    let (opt_side, rnn_side) = match inp.direction {
                        Direction::RnnToOpt => (p_tgt, p_src),
                        Direction::OptToRnn => (p_src, p_tgt),
                    };
                    kl_sum +=
                        kl_divergence(opt_side, rnn_side, &inp.mc.keyed(&[k as u64, t as u64]))?
                            .value;
                }
                (Decision::Act { .. }, Decision::Act { .. }) => {
                    let r_src = policy_reward(original, &means[k])?;
                    let r_tgt = policy_reward(&emitted, &means[k])?;
                    reward_diff += match inp.direction {
                        Direction::RnnToOpt => r_tgt - r_src,
                        Direction::OptToRnn => r_src - r_tgt,
                    };
                }
                _ => {
                    return Err(Error::contract(
                        "source and target emit different decision kinds",
                    ))
                }
            }
        }
    }
    let k = inp.source.len() as f64;
    let d_o = if inp.source[0].is_bandit() {
        (reward_diff / k).abs()
    } else {
        kl_sum / k
    };
    Ok(SimulationReport {
        direction: inp.direction,
        d_s: se / count.max(1) as f64,
        d_o,
        train_episodes: inp.train_episodes,
        test_episodes: inp.source.len(),
        units: "whitened".into(),
    })
}

fn arm_means(spec: &TaskSpec, t: &Trace) -> Vec<f64> {
    (0..spec.n_arms())
        .map(|a| spec.observation_model(t.task_params.values[a]).mean())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureConfig {
    pub train_episodes: usize,
    pub test_episodes: usize,
    /// Principal components kept for the meta-learner; the Bayes-optimal side keeps its full dimension.
    pub rnn_components: usize,
    pub train_seed: u64,
    pub test_seed: u64,
    pub embedding: EmbeddingConfig,
    pub kl_samples: usize,
}

impl StructureConfig {
    pub fn for_task(spec: &TaskSpec) -> Self {
        let embedding = match spec.kind {
            crate::task_env::TaskKind::Prediction => EmbeddingConfig::prediction(),
            crate::task_env::TaskKind::Bandit => EmbeddingConfig::bandit(),
        };
        Self {
            train_episodes: 500,
            test_episodes: 500,
            rnn_components: spec.stats_dim(),
            train_seed: 0x5354_5255_4354,
            test_seed: 0x5445_5354,
            embedding,
            kl_samples: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureResult {
    pub rnn2opt: SimulationReport,
    pub opt2rnn: SimulationReport,
    /// Fraction of the analysed meta-learner's state variance in its retained components.
    pub var_explained: f64,
    pub rnn_pca: PcaModel,
    pub opt_pca: PcaModel,
    /// The fitted maps, in the order (RNN→Opt, Opt→RNN).
    #[serde(skip)]
    pub maps: Option<(SimulationMap, SimulationMap)>,
}

/// Held-out `(meta-learner, Bayes-optimal)` traces on the reference agent's input histories.
pub fn held_out_traces(
    spec: &TaskSpec,
    reference: &dyn Agent,
    subject: &dyn Agent,
    opt: &dyn Agent,
    cfg: &StructureConfig,
) -> Result<(Vec<Trace>, Vec<Trace>)> {
    let refs = episode_seeds(cfg.test_seed, cfg.test_episodes)
        .into_iter()
        .map(|(i, s)| rollout(spec, reference, spec.horizon, i, s))
        .collect::<Result<Vec<_>>>()?;
    let rnn = refs
        .iter()
        .map(|r| replay(subject, r))
        .collect::<Result<Vec<_>>>()?;
    let opt = refs
        .iter()
        .map(|r| replay(opt, r))
        .collect::<Result<Vec<_>>>()?;
    Ok((rnn, opt))
}

/// Runs both embedding directions for `subject` (a meta-learner checkpoint) against `opt`,
/// on input histories generated by the trained meta-learner `reference`.
pub fn structural_comparison(
    spec: &TaskSpec,
    reference: &dyn Agent,
    subject: &dyn Agent,
    opt: &dyn Agent,
    cfg: &StructureConfig,
) -> Result<StructureResult> {
    let gen = |master: u64, k: usize| -> Result<Vec<Trace>> {
        episode_seeds(master, k)
            .into_iter()
            .map(|(i, s)| rollout(spec, reference, spec.horizon, i, s))
            .collect()
    };
    let (ref_train, ref_test) = (
        gen(cfg.train_seed, cfg.train_episodes)?,
        gen(cfg.test_seed, cfg.test_episodes)?,
    );
    let run = |a: &dyn Agent, refs: &[Trace]| -> Result<Vec<Trace>> {
        refs.iter().map(|r| replay(a, r)).collect()
    };
    let (rnn_train, rnn_test) = (run(subject, &ref_train)?, run(subject, &ref_test)?);
    let (opt_train, opt_test) = (run(opt, &ref_train)?, run(opt, &ref_test)?);

    let rnn_states = episode_states(&rnn_train);
    let opt_states = episode_states(&opt_train);
    let flat = |e: &[Vec<Vec<f64>>]| -> Vec<Vec<f64>> { e.iter().flatten().cloned().collect() };
    let rnn_pca = PcaModel::fit(&flat(&rnn_states), cfg.rnn_components)?;
    let opt_pca = PcaModel::fit(&flat(&opt_states), opt.state_dim())?;
    let (zr, zo) = (
        whiten_all(&rnn_pca, &rnn_states),
        whiten_all(&opt_pca, &opt_states),
    );
    let mc = MonteCarlo {
        samples: cfg.kl_samples,
        seed: cfg.test_seed,
    };

    let phi_ro = SimulationMap::fit(Direction::RnnToOpt, &zr, &zo, &cfg.embedding)?;
    let rnn2opt = simulation_quality(
        &SimulationInputs {
            spec,
            direction: Direction::RnnToOpt,
            source_pca: &rnn_pca,
            target_pca: &opt_pca,
            target: opt,
            source: &rnn_test,
            target_traces: &opt_test,
            mc,
            train_episodes: cfg.train_episodes,
        },
        &|z| phi_ro.apply(z),
    )?;
    let phi_or = SimulationMap::fit(Direction::OptToRnn, &zo, &zr, &cfg.embedding)?;
    let opt2rnn = simulation_quality(
        &SimulationInputs {
            spec,
            direction: Direction::OptToRnn,
            source_pca: &opt_pca,
            target_pca: &rnn_pca,
            target: subject,
            source: &opt_test,
            target_traces: &rnn_test,
            mc,
            train_episodes: cfg.train_episodes,
        },
        &|z| phi_or.apply(z),
    )?;
    Ok(StructureResult {
        rnn2opt,
        opt2rnn,
        var_explained: rnn_pca.explained_fraction(),
        rnn_pca,
        opt_pca,
        maps: Some((phi_ro, phi_or)),
    })
}
