use std::collections::BTreeMap;

use metabayes::analysis::report::{fmt_f64, quantiles};
use metabayes::analysis::{behavioral_dissimilarity, MonteCarlo};
use metabayes::meta_trainer::evaluate;
use metabayes::seeding::derive;
use metabayes::Result;

use super::structure::{metric_rows, structure_cached};
use crate::config::ExperimentConfig;
use crate::pipeline::{bayes_agent, eval_seed, map_runs, meta, runs, write, EVAL_KEY};

pub const METRICS: [&str; 6] = [
    "behavioral_d",
    "D_s_rnn2opt",
    "D_o_rnn2opt",
    "D_s_opt2rnn",
    "D_o_opt2rnn",
    "var_explained",
];

/// Behavioural and structural comparison of the initial and final checkpoint of every
/// run against the Bayes-optimal agent, with per-task medians and 5-95% quantiles.
pub fn run(cfg: &ExperimentConfig, strict: bool) -> Result<()> {
    let k = cfg.analysis.episodes;
    let mc = MonteCarlo {
        samples: cfg.analysis.kl_samples,
        seed: derive(&[cfg.master_seed, EVAL_KEY, 3]),
    };
    let mut rows = Vec::new();
    for spec in cfg.task_specs()? {
        let opt = bayes_agent(&spec)?;
        let seed = eval_seed(cfg, &spec);
        let (_, opt_traces) = evaluate(opt.as_ref(), &spec, k, spec.horizon, seed)?;
        // the Bayes-optimal agent against itself through the same pipeline
        let (_, again) = evaluate(opt.as_ref(), &spec, k, spec.horizon, seed)?;
        let d_self = behavioral_dissimilarity(&opt_traces, &again, &mc)?.d;
        rows.push(vec![
            spec.id.clone(),
            "bayes-optimal".into(),
            "final".into(),
            "behavioral_d".into(),
            fmt_f64(d_self),
        ]);

        let work: Vec<_> = runs(cfg)?
            .into_iter()
            .filter(|r| r.spec.id == spec.id)
            .collect();
        let per_run = map_runs(strict, &work, |r| {
            let last = r.last()?;
            let mut stages = Vec::new();
            match r.initial()? {
                Some(init) => stages.push(("init", init)),
                None => log::warn!("{}: no initial checkpoint, init rows skipped", r.run_id),
            }
            stages.push(("final", last.clone()));
            let mut out = Vec::new();
            for (stage, ck) in stages {
                let agent = ck.agent()?;
                let (_, traces) = evaluate(&agent, &spec, k, spec.horizon, seed)?;
                let d = behavioral_dissimilarity(&opt_traces, &traces, &mc)?.d;
                out.push(vec![
                    spec.id.clone(),
                    r.run_id.clone(),
                    stage.into(),
                    "behavioral_d".into(),
                    fmt_f64(d),
                ]);
                let s = structure_cached(cfg, r, stage, &ck, &last, opt.as_ref(), false)?;
                out.extend(metric_rows(&spec.id, &r.run_id, stage, &s));
            }
            Ok(out)
        })?;
        rows.extend(per_run.into_iter().flatten());
    }
    let m = meta(cfg, "compare_runs");
    write(
        &cfg.out.join("compare_runs.csv"),
        &m,
        &["task", "run_id", "stage", "metric", "value"],
        &rows,
    )?;

    let mut groups: BTreeMap<(usize, String, usize, usize), Vec<f64>> = BTreeMap::new();
    let order: Vec<String> = cfg.task_specs()?.into_iter().map(|s| s.id).collect();
    for r in rows.iter().filter(|r| r[1] != "bayes-optimal") {
        let task = order.iter().position(|t| *t == r[0]).expect("known task");
        let stage = usize::from(r[2] == "final");
        let metric = METRICS
            .iter()
            .position(|m| *m == r[3])
            .expect("known metric");
        groups
            .entry((task, r[0].clone(), stage, metric))
            .or_default()
            .push(r[4].parse().expect("written by fmt_f64"));
    }
    let summary: Vec<Vec<String>> = groups
        .into_iter()
        .map(|((_, task, stage, metric), v)| {
            let (med, lo, hi) = quantiles(&v);
            vec![
                task,
                ["init", "final"][stage].into(),
                METRICS[metric].into(),
                fmt_f64(med),
                fmt_f64(lo),
                fmt_f64(hi),
                v.len().to_string(),
            ]
        })
        .collect();
    write(
        &cfg.out.join("compare.csv"),
        &meta(cfg, "compare"),
        &["task", "stage", "metric", "median", "q05", "q95", "runs"],
        &summary,
    )
}
