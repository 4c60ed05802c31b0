use std::collections::BTreeMap;

use metabayes::analysis::report::{fmt_f64, quantiles};
use metabayes::meta_trainer::{
    curve_seed, evaluate, reduced_memory_config, train, TrainConfig, TrainOptions,
};
use metabayes::task_env::{Agent, TaskKind, TaskSpec, Trace};
use metabayes::{Error, Result};

use crate::config::ExperimentConfig;
use crate::pipeline::{bayes_agent, eval_seed, map_runs, meta, write};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepKind {
    /// Layer width N of the LSTM agent.
    Width,
    /// Context window k of the feedforward reduced-memory baseline.
    Context,
}

impl SweepKind {
    fn label(self) -> &'static str {
        match self {
            SweepKind::Width => "width",
            SweepKind::Context => "context",
        }
    }
}

/// One trained agent of the sweep; `param = None` is the LSTM reference of a context sweep.
struct Job {
    spec: TaskSpec,
    param: Option<usize>,
    repeat: usize,
}

impl Job {
    fn param_label(&self) -> String {
        self.param.map_or_else(|| "lstm".into(), |p| p.to_string())
    }
}

fn job_config(cfg: &ExperimentConfig, kind: SweepKind, job: &Job) -> Result<TrainConfig> {
    let mut tc = cfg.train_config(&job.spec, job.repeat)?;
    if let Some(steps) = cfg.sweep.total_steps {
        tc.total_steps = steps;
    }
    tc.run_id = format!(
        "{}-{}{}-rep{}",
        job.spec.id,
        kind.label(),
        job.param_label(),
        job.repeat
    );
    let tc = match (kind, job.param) {
        (SweepKind::Width, Some(w)) => {
            let mut tc = tc;
            tc.arch.width = w;
            tc
        }
        (SweepKind::Context, Some(k)) => reduced_memory_config(&tc, k)?,
        (_, None) => tc,
    };
    tc.validate()?;
    Ok(tc)
}

/// Log-loss of the memoryless agent that always emits the prior predictive.
fn prior_logloss(opt_traces: &[Trace]) -> Result<f64> {
    let mut total = 0.0;
    let mut n = 0usize;
    for tr in opt_traces {
        let p = tr.decisions[0]
            .predictive()
            .ok_or_else(|| Error::contract("not a prediction trace"))?;
        for &x in tr.observations.as_deref().unwrap_or_default() {
            total -= p.log_density_or_neg_inf(x);
            n += 1;
        }
    }
    Ok(total / n.max(1) as f64)
}

/// Expected return of the uniformly random policy on the same episodes.
fn random_return(spec: &TaskSpec, traces: &[Trace]) -> f64 {
    let per: f64 = traces
        .iter()
        .map(|t| {
            let m: f64 = (0..spec.n_arms())
                .map(|a| spec.observation_model(t.task_params.values[a]).mean())
                .sum();
            m / spec.n_arms() as f64 * t.len() as f64
        })
        .sum();
    per / traces.len().max(1) as f64
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Trains one agent per (task, parameter, repeat) and reports final performance.
///
/// Width sweeps report the log-loss gap to the Bayes-optimal predictor (prediction)
/// or mean expected reward per step (bandits). Context sweeps additionally train the
/// LSTM agent and report each baseline's score as a percentage of the LSTM score,
/// where score is the improvement over the memoryless prior-predictive agent
/// (prediction) or over the uniformly random policy (bandits).
pub fn run(cfg: &ExperimentConfig, kind: SweepKind, strict: bool, dry_run: bool) -> Result<()> {
    let params = match kind {
        SweepKind::Width => &cfg.sweep.widths,
        SweepKind::Context => &cfg.sweep.contexts,
    };
    if params.is_empty() || cfg.sweep.repeats == 0 {
        return Err(Error::config(format!(
            "at `sweep`: no {} values or no repeats",
            kind.label()
        )));
    }
    let mut jobs = Vec::new();
    for spec in cfg.task_specs()? {
        let mut values: Vec<Option<usize>> = params.iter().copied().map(Some).collect();
        if kind == SweepKind::Context {
            values.push(None);
        }
        for &param in &values {
            for repeat in 0..cfg.sweep.repeats {
                jobs.push(Job {
                    spec: spec.clone(),
                    param,
                    repeat,
                });
            }
        }
    }
    let configs = jobs
        .iter()
        .map(|j| job_config(cfg, kind, j))
        .collect::<Result<Vec<_>>>()?;
    if dry_run {
        println!("{}", serde_json::to_string_pretty(&configs)?);
        return Ok(());
    }
    let root = cfg.out.join("sweep").join(kind.label());
    let k = cfg.analysis.episodes;
    let pairs: Vec<_> = jobs.iter().zip(&configs).collect();
    let results = map_runs(strict, &pairs, |(job, tc)| {
        let dir = root
            .join(&job.spec.id)
            .join(job.param_label())
            .join(format!("rep{}", job.repeat));
        let out = train(tc, &dir, &TrainOptions { resume: true })?;
        let agent = out.final_checkpoint.agent()?;
        let (m, traces) = evaluate(
            &agent,
            &job.spec,
            k,
            job.spec.horizon,
            eval_seed(cfg, &job.spec),
        )?;
        Ok((out.curve, m, traces))
    })?;

    let mut curve_rows = Vec::new();
    let mut rows = Vec::new();
    let mut by_task: BTreeMap<String, (Vec<Trace>, f64)> = BTreeMap::new();
    for spec in cfg.task_specs()? {
        let opt = bayes_agent(&spec)?;
        let (m, traces) = evaluate(opt.as_ref(), &spec, k, spec.horizon, eval_seed(cfg, &spec))?;
        by_task.insert(spec.id.clone(), (traces, m.mean));
    }
    // final score per (task, param label, repeat), used for the LSTM percentage
    let mut scores: BTreeMap<(String, String, usize), f64> = BTreeMap::new();
    for ((job, tc), (curve, m, traces)) in pairs.iter().zip(&results) {
        let id = &job.spec.id;
        let param = job.param_label();
        let (opt_traces, opt_mean) = &by_task[id];
        // curve gap against the Bayes-optimal agent on the curve's own held-out episodes
        let opt_curve = if job.spec.kind == TaskKind::Prediction && tc.curve_episodes > 0 {
            let opt = bayes_agent(&job.spec)?;
            Some(
                evaluate(
                    opt.as_ref() as &dyn Agent,
                    &job.spec,
                    tc.curve_episodes,
                    job.spec.horizon,
                    curve_seed(tc.master_seed),
                )?
                .0
                .mean,
            )
        } else {
            None
        };
        for p in &curve.points {
            let base = |metric: &str, v: f64| {
                vec![
                    id.clone(),
                    kind.label().into(),
                    param.clone(),
                    job.repeat.to_string(),
                    p.step.to_string(),
                    metric.into(),
                    fmt_f64(v),
                ]
            };
            curve_rows.push(base(&p.metric, p.value));
            if let (Some(o), "eval_logloss") = (opt_curve, p.metric.as_str()) {
                curve_rows.push(base("logloss_gap", p.value - o));
            }
        }
        let row = |metric: &str, v: f64| {
            vec![
                id.clone(),
                kind.label().into(),
                param.clone(),
                job.repeat.to_string(),
                metric.into(),
                fmt_f64(v),
            ]
        };
        let score = match job.spec.kind {
            TaskKind::Prediction => {
                rows.push(row("logloss", m.mean));
                rows.push(row("logloss_gap", m.mean - opt_mean));
                prior_logloss(opt_traces)? - m.mean
            }
            TaskKind::Bandit => {
                let ret = m.mean_return.expect("bandit metrics carry returns");
                rows.push(row("regret", m.mean));
                rows.push(row("mean_reward", ret / job.spec.horizon as f64));
                ret - random_return(&job.spec, traces)
            }
        };
        rows.push(row("score", score));
        scores.insert((id.clone(), param, job.repeat), score);
    }
    if kind == SweepKind::Context {
        let mut extra = Vec::new();
        for ((id, param, repeat), s) in &scores {
            if let Some(lstm) = scores.get(&(id.clone(), "lstm".into(), *repeat)) {
                extra.push(vec![
                    id.clone(),
                    kind.label().into(),
                    param.clone(),
                    repeat.to_string(),
                    "percent_of_lstm".into(),
                    fmt_f64(100.0 * s / lstm),
                ]);
            }
        }
        rows.extend(extra);
    }

    // mean ± standard error and median over repeats, in job order
    let mut summary = Vec::new();
    let mut seen = Vec::new();
    for r in &rows {
        let key = (r[0].clone(), r[2].clone(), r[4].clone());
        if seen.contains(&key) {
            continue;
        }
        let v: Vec<f64> = rows
            .iter()
            .filter(|x| x[0] == key.0 && x[2] == key.1 && x[4] == key.2)
            .map(|x| x[5].parse().expect("written by fmt_f64"))
            .collect();
        let (mean, se) = mean_se(&v);
        let (median, _, _) = quantiles(&v);
        summary.push(vec![
            key.0.clone(),
            kind.label().into(),
            key.1.clone(),
            key.2.clone(),
            fmt_f64(mean),
            fmt_f64(se),
            fmt_f64(median),
            v.len().to_string(),
        ]);
        seen.push(key);
    }
    let m = meta(cfg, &format!("sweep_{}", kind.label()));
    let name = |s: &str| cfg.out.join(format!("sweep_{}{s}.csv", kind.label()));
    write(
        &name("_curves"),
        &m,
        &["task", "kind", "param", "repeat", "step", "metric", "value"],
        &curve_rows,
    )?;
    write(
        &name(""),
        &m,
        &["task", "kind", "param", "repeat", "metric", "value"],
        &rows,
    )?;
    write(
        &name("_summary"),
        &m,
        &[
            "task",
            "kind",
            "param",
            "metric",
            "mean",
            "std_error",
            "median",
            "n",
        ],
        &summary,
    )
}
