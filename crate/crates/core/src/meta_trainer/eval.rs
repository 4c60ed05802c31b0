use serde::Serialize;

use crate::task_env::{episode_seeds, rollout, Agent, TaskKind, TaskSpec, Trace};
use crate::{Error, Result};

/// Seeded evaluation summary.
///
/// Prediction: `per_episode` is the mean log-loss per step. Bandit: it is the
/// cumulative expected regret, with expected rather than sampled rewards.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalMetrics {
    pub metric: &'static str,
    pub per_episode: Vec<f64>,
    /// Mean over episodes at each step: log-loss or expected regret.
    pub per_step: Vec<f64>,
    pub mean: f64,
    /// Mean undiscounted expected return (bandits only).
    pub mean_return: Option<f64>,
}

/// Evaluates `agent` on `k` episodes of `t_eval` steps seeded from `seed`.
pub fn evaluate<A: Agent + ?Sized>(
    agent: &A,
    spec: &TaskSpec,
    k: usize,
    t_eval: usize,
    seed: u64,
) -> Result<(EvalMetrics, Vec<Trace>)> {
    if k == 0 || t_eval == 0 {
        return Err(Error::argument(
            "evaluation needs at least one episode and one step",
        ));
    }
    let traces = episode_seeds(seed, k)
        .into_iter()
        .map(|(i, s)| rollout(spec, agent, t_eval, i, s))
        .collect::<Result<Vec<_>>>()?;
    Ok((metrics_of(spec, &traces)?, traces))
}

/// Metrics for traces that were already rolled out.
pub fn metrics_of(spec: &TaskSpec, traces: &[Trace]) -> Result<EvalMetrics> {
    let t_eval = traces.first().map_or(0, Trace::len);
    let mut per_step = vec![0.0; t_eval];
    let mut per_episode = Vec::with_capacity(traces.len());
    let mut returns = 0.0;
    for tr in traces {
        if tr.len() != t_eval {
            return Err(Error::contract("traces of different lengths"));
        }
        let steps = match spec.kind {
            TaskKind::Prediction => tr.log_losses()?,
            TaskKind::Bandit => {
                returns += tr.expected_rewards()?.iter().sum::<f64>();
                tr.regrets()?
            }
        };
        for (acc, v) in per_step.iter_mut().zip(&steps) {
            *acc += v;
        }
        let total: f64 = steps.iter().sum();
        per_episode.push(match spec.kind {
            TaskKind::Prediction => total / t_eval as f64,
            TaskKind::Bandit => total,
        });
    }
    let k = traces.len().max(1) as f64;
    per_step.iter_mut().for_each(|v| *v /= k);
    Ok(EvalMetrics {
        metric: match spec.kind {
            TaskKind::Prediction => "logloss",
            TaskKind::Bandit => "regret",
        },
        mean: per_episode.iter().sum::<f64>() / k,
        per_episode,
        per_step,
        mean_return: (spec.kind == TaskKind::Bandit).then(|| returns / k),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes_agent::BayesPredictor;
    use crate::task_env::suite::task_by_id;

    #[test]
    fn single_episode_matches_first_row() {
        let spec = task_by_id("pred-categorical-dirichlet-1-1-1").unwrap();
        let agent = BayesPredictor::new(&spec).unwrap();
        let (one, _) = evaluate(&agent, &spec, 1, 20, 5).unwrap();
        let (many, traces) = evaluate(&agent, &spec, 50, 20, 5).unwrap();
        assert_eq!(one.per_episode[0], many.per_episode[0]);
        assert_eq!(traces.len(), 50);
        let (long, _) = evaluate(&agent, &spec, 3, 30, 5).unwrap();
        assert_eq!(long.per_step.len(), 30);
    }
}
