//! Behavioural dissimilarities between two agents on matched episodes.

use serde::{Deserialize, Serialize};

use super::divergence::{js_divergence, kl_divergence, MonteCarlo};
use crate::task_env::Trace;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DissimilarityReport {
    pub task_id: String,
    pub agents: (String, String),
    /// Mean over episodes at each step: KL for prediction, expected-reward difference for bandits.
    pub per_step: Vec<f64>,
    /// Prediction: `Σ_t per_step[t]`. Bandits: `|Σ_t per_step[t]|`.
    pub d: f64,
    pub episodes: usize,
}

fn check_matched(a: &[Trace], b: &[Trace]) -> Result<usize> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::contract(format!(
            "{} vs {} episodes",
            a.len(),
            b.len()
        )));
    }
    let t = a[0].len();
    for (x, y) in a.iter().zip(b) {
        if x.episode_seed != y.episode_seed || x.len() != t || y.len() != t {
            return Err(Error::contract(format!(
                "episodes are not matched (seeds {} / {}, lengths {} / {})",
                x.episode_seed,
                y.episode_seed,
                x.len(),
                y.len()
            )));
        }
    }
    Ok(t)
}

/// `(1/K) Σ_k Σ_t KL(π^opt_t ‖ π^rnn_t)`; both trace sets must share input histories.
pub fn behavioral_dissimilarity_prediction(
    opt: &[Trace],
    rnn: &[Trace],
    mc: &MonteCarlo,
) -> Result<DissimilarityReport> {
    let t = check_matched(opt, rnn)?;
    let mut per_step = vec![0.0; t];
    for (k, (a, b)) in opt.iter().zip(rnn).enumerate() {
        if a.inputs != b.inputs {
            return Err(Error::contract(format!(
                "episode {} has different input histories",
                a.episode_index
            )));
        }
        for step in 0..t {
            let p = a.decisions[step]
                .predictive()
                .ok_or_else(|| Error::contract("not a prediction trace"))?;
            let q = b.decisions[step]
                .predictive()
                .ok_or_else(|| Error::contract("not a prediction trace"))?;
            per_step[step] += kl_divergence(p, q, &mc.keyed(&[k as u64, step as u64]))?.value;
        }
    }
    let kf = opt.len() as f64;
    per_step.iter_mut().for_each(|v| *v /= kf);
    Ok(DissimilarityReport {
        task_id: opt[0].task_id.clone(),
        agents: ("opt".into(), "rnn".into()),
        d: per_step.iter().sum(),
        per_step,
        episodes: opt.len(),
    })
}

/// `|(1/K) Σ_k Σ_t (r^opt_t - r^rnn_t)|` over expected rewards, on matched task draws.
pub fn behavioral_dissimilarity_bandit(
    opt: &[Trace],
    rnn: &[Trace],
) -> Result<DissimilarityReport> {
    let t = check_matched(opt, rnn)?;
    let mut per_step = vec![0.0; t];
    for (a, b) in opt.iter().zip(rnn) {
        if a.task_params != b.task_params {
            return Err(Error::contract(format!(
                "episode {} has different task draws",
                a.episode_index
            )));
        }
        for (s, (ra, rb)) in a
            .expected_rewards()?
            .iter()
            .zip(b.expected_rewards()?)
            .enumerate()
        {
            per_step[s] += ra - rb;
        }
    }
    let kf = opt.len() as f64;
    per_step.iter_mut().for_each(|v| *v /= kf);
    Ok(DissimilarityReport {
        task_id: opt[0].task_id.clone(),
        agents: ("opt".into(), "rnn".into()),
        d: per_step.iter().sum::<f64>().abs(),
        per_step,
        episodes: opt.len(),
    })
}

pub fn behavioral_dissimilarity(
    opt: &[Trace],
    rnn: &[Trace],
    mc: &MonteCarlo,
) -> Result<DissimilarityReport> {
    match opt.first().map(Trace::is_bandit) {
        Some(true) => behavioral_dissimilarity_bandit(opt, rnn),
        Some(false) => behavioral_dissimilarity_prediction(opt, rnn, mc),
        None => Err(Error::contract("no episodes")),
    }
}

/// One row per checkpoint: per-step dissimilarity to the Bayes-optimal traces.
pub fn within_episode_dissimilarity(
    opt: &[Trace],
    checkpoints: &[Vec<Trace>],
    mc: &MonteCarlo,
) -> Result<Vec<Vec<f64>>> {
    checkpoints
        .iter()
        .map(|c| Ok(behavioral_dissimilarity(opt, c, mc)?.per_step))
        .collect()
}

/// Symmetric distances with zero diagonal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    pub labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl DistanceMatrix {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if self.values.len() != n || self.values.iter().any(|r| r.len() != n) {
            return Err(Error::contract("distance matrix is not square"));
        }
        for i in 0..n {
            if self.values[i][i] != 0.0 {
                return Err(Error::contract("distance matrix diagonal is not zero"));
            }
            for j in 0..n {
                if self.values[i][j] != self.values[j][i] || !(self.values[i][j] >= 0.0) {
                    return Err(Error::contract(
                        "distance matrix is not symmetric and non-negative",
                    ));
                }
            }
        }
        Ok(())
    }

    /// Number of ordered triples with `d(i, j) > d(i, k) + d(k, j)`.
    pub fn triangle_violations(&self) -> usize {
        let n = self.len();
        let d = &self.values;
        let mut count = 0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if d[i][j] > d[i][k] + d[k][j] + 1e-12 * (1.0 + d[i][j]) {
                        count += 1;
                    }
                }
            }
        }
        count
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistanceOptions {
    /// Sum `√JS` per step instead of `JS`, which makes the distance a metric.
    pub sqrt_js: bool,
    pub mc: MonteCarlo,
}

impl Default for DistanceOptions {
    fn default() -> Self {
        Self {
            sqrt_js: false,
            mc: MonteCarlo {
                samples: 2_000,
                seed: 0,
            },
        }
    }
}

fn pair_distance(a: &[Trace], b: &[Trace], opts: &DistanceOptions) -> Result<f64> {
    check_matched(a, b)?;
    if a[0].is_bandit() {
        let regret = |ts: &[Trace]| -> Result<f64> {
            let mut s = 0.0;
            for t in ts {
                s += t.regrets()?.iter().sum::<f64>();
            }
            Ok(s / ts.len() as f64)
        };
        return Ok((regret(a)? - regret(b)?).abs());
    }
    let mut total = 0.0;
    for (k, (x, y)) in a.iter().zip(b).enumerate() {
        for (s, (p, q)) in x.decisions.iter().zip(&y.decisions).enumerate() {
            let (p, q) = (p.predictive(), q.predictive());
            let (Some(p), Some(q)) = (p, q) else {
                return Err(Error::contract("not a prediction trace"));
            };
            let js = js_divergence(p, q, &opts.mc.keyed(&[k as u64, s as u64]))?
                .value
                .max(0.0);
            total += if opts.sqrt_js { js.sqrt() } else { js };
        }
    }
    Ok(total / a.len() as f64)
}

/// Pairwise behavioural distances between agents evaluated on identical episode seeds.
pub fn pairwise_distance_matrix(
    labels: Vec<String>,
    traces: &[Vec<Trace>],
    opts: &DistanceOptions,
) -> Result<DistanceMatrix> {
    let n = traces.len();
    if labels.len() != n {
        return Err(Error::contract("one label per agent"));
    }
    let mut values = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = pair_distance(&traces[i], &traces[j], opts)?;
            values[i][j] = d;
            values[j][i] = d;
        }
    }
    Ok(DistanceMatrix { labels, values })
}
