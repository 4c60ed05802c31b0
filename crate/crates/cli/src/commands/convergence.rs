use metabayes::analysis::report::fmt_f64;
use metabayes::analysis::{
    classical_mds, pairwise_distance_matrix, within_episode_dissimilarity, DistanceOptions,
    MonteCarlo,
};
use metabayes::meta_trainer::{evaluate, Checkpoint};
use metabayes::seeding::derive;
use metabayes::task_env::{Agent, TaskSpec, Trace};
use metabayes::Result;

use crate::config::ExperimentConfig;
use crate::pipeline::{bayes_agent, eval_seed, map_runs, meta, runs, write};

const ANCHOR: &str = "bayes-optimal";

/// Traces without their state vectors, which the behavioural distances do not need.
fn lean_traces(agent: &dyn Agent, spec: &TaskSpec, k: usize, seed: u64) -> Result<Vec<Trace>> {
    let (_, mut traces) = evaluate(agent, spec, k, spec.horizon, seed)?;
    for t in &mut traces {
        t.states = Vec::new();
    }
    Ok(traces)
}

/// Within-episode dissimilarity of every checkpoint to the Bayes-optimal agent, and a
/// 2-D classical MDS embedding of all (run, checkpoint) policies plus the anchor.
pub fn run(cfg: &ExperimentConfig, strict: bool) -> Result<()> {
    let k = cfg.analysis.convergence_episodes;
    let (mut within_rows, mut dist_rows, mut mds_rows) = (Vec::new(), Vec::new(), Vec::new());
    for spec in cfg.task_specs()? {
        let seed = derive(&[eval_seed(cfg, &spec), 4]);
        let mc = MonteCarlo {
            samples: cfg.analysis.js_samples,
            seed: derive(&[seed, 5]),
        };
        let opt = bayes_agent(&spec)?;
        let opt_traces = lean_traces(opt.as_ref(), &spec, k, seed)?;

        let work: Vec<_> = runs(cfg)?
            .into_iter()
            .filter(|r| r.spec.id == spec.id)
            .collect();
        let per_run = map_runs(strict, &work, |r| {
            r.checkpoints()?
                .into_iter()
                .map(|(step, path)| {
                    let agent = Checkpoint::read(&path)?.agent()?;
                    Ok((r.run_id.clone(), step, lean_traces(&agent, &spec, k, seed)?))
                })
                .collect::<Result<Vec<_>>>()
        })?;
        let points: Vec<(String, u64, Vec<Trace>)> = per_run.into_iter().flatten().collect();

        let curves: Vec<Vec<Trace>> = points.iter().map(|p| p.2.clone()).collect();
        let within = within_episode_dissimilarity(&opt_traces, &curves, &mc)?;
        for ((run_id, step, _), per_step) in points.iter().zip(&within) {
            for (t, v) in per_step.iter().enumerate() {
                within_rows.push(vec![
                    spec.id.clone(),
                    run_id.clone(),
                    step.to_string(),
                    (t + 1).to_string(),
                    fmt_f64(*v),
                ]);
            }
        }

        let mut labels = vec![ANCHOR.to_string()];
        labels.extend(points.iter().map(|(r, s, _)| format!("{r}@{s}")));
        let mut all = vec![opt_traces];
        all.extend(curves);
        let opts = DistanceOptions {
            sqrt_js: cfg.analysis.sqrt_js,
            mc,
        };
        let d = pairwise_distance_matrix(labels, &all, &opts)?;
        let violations = d.triangle_violations();
        if violations > 0 {
            log::info!("{}: {violations} triangle-inequality violations (JS is not a metric; see analysis.sqrt_js)", spec.id);
        }
        for i in 0..d.len() {
            for j in 0..d.len() {
                dist_rows.push(vec![
                    spec.id.clone(),
                    d.labels[i].clone(),
                    d.labels[j].clone(),
                    fmt_f64(d.values[i][j]),
                ]);
            }
        }
        let e = classical_mds(&d, 2)?;
        for (i, label) in e.labels.iter().enumerate() {
            let (run_id, step) = match i {
                0 => (ANCHOR.to_string(), String::new()),
                _ => (points[i - 1].0.clone(), points[i - 1].1.to_string()),
            };
            mds_rows.push(vec![
                spec.id.clone(),
                label.clone(),
                run_id,
                step,
                fmt_f64(e.coords[i][0]),
                fmt_f64(e.coords[i][1]),
            ]);
        }
    }
    write(
        &cfg.out.join("convergence_within.csv"),
        &meta(cfg, "convergence_within"),
        &["task", "run_id", "step", "t", "value"],
        &within_rows,
    )?;
    write(
        &cfg.out.join("convergence_distances.csv"),
        &meta(cfg, "convergence_distances"),
        &["task", "row", "col", "value"],
        &dist_rows,
    )?;
    write(
        &cfg.out.join("convergence_mds.csv"),
        &meta(cfg, "convergence_mds"),
        &["task", "label", "run_id", "step", "x", "y"],
        &mds_rows,
    )
}
