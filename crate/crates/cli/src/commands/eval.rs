use metabayes::analysis::report::fmt_f64;
use metabayes::meta_trainer::{evaluate, EvalMetrics};
use metabayes::Result;

use crate::config::ExperimentConfig;
use crate::pipeline::{bayes_agent, eval_seed, map_runs, meta, runs, write};

fn rows_of(
    task: &str,
    run_id: &str,
    agent: &str,
    t_eval: usize,
    m: &EvalMetrics,
    out: &mut Vec<Vec<String>>,
    steps: &mut Vec<Vec<String>>,
) {
    let base = |metric: &str, v: f64| {
        vec![
            task.into(),
            run_id.into(),
            agent.into(),
            t_eval.to_string(),
            metric.into(),
            fmt_f64(v),
        ]
    };
    out.push(base(m.metric, m.mean));
    if let Some(r) = m.mean_return {
        out.push(base("return", r));
    }
    for (t, v) in m.per_step.iter().enumerate() {
        steps.push(vec![
            task.into(),
            run_id.into(),
            agent.into(),
            t_eval.to_string(),
            (t + 1).to_string(),
            m.metric.into(),
            fmt_f64(*v),
        ]);
    }
}

/// Evaluates the final checkpoint of every run and the Bayes-optimal agent at each `T_eval`.
pub fn run(cfg: &ExperimentConfig, strict: bool) -> Result<()> {
    let k = cfg.analysis.episodes;
    let mut rows = Vec::new();
    let mut steps = Vec::new();
    for spec in cfg.task_specs()? {
        let opt = bayes_agent(&spec)?;
        let seed = eval_seed(cfg, &spec);
        for &t in &cfg.analysis.t_eval {
            let (m, _) = evaluate(opt.as_ref(), &spec, k, t, seed)?;
            rows_of(
                &spec.id,
                "bayes-optimal",
                "bayes",
                t,
                &m,
                &mut rows,
                &mut steps,
            );
        }
        let work: Vec<_> = runs(cfg)?
            .into_iter()
            .filter(|r| r.spec.id == spec.id)
            .collect();
        let results = map_runs(strict, &work, |r| {
            let agent = r.last()?.agent()?;
            let mut out = (Vec::new(), Vec::new());
            for &t in &cfg.analysis.t_eval {
                let (m, _) = evaluate(&agent, &spec, k, t, seed)?;
                rows_of(&spec.id, &r.run_id, "rnn", t, &m, &mut out.0, &mut out.1);
            }
            Ok(out)
        })?;
        for (a, b) in results {
            rows.extend(a);
            steps.extend(b);
        }
    }
    let m = meta(cfg, "eval");
    write(
        &cfg.out.join("eval.csv"),
        &m,
        &["task", "run_id", "agent", "t_eval", "metric", "value"],
        &rows,
    )?;
    write(
        &cfg.out.join("eval_per_step.csv"),
        &m,
        &["task", "run_id", "agent", "t_eval", "t", "metric", "value"],
        &steps,
    )
}
