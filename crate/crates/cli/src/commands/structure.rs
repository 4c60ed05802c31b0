use std::path::PathBuf;

use metabayes::analysis::report::fmt_f64;
use metabayes::analysis::{
    held_out_traces, structural_comparison, StructureConfig, StructureResult,
};
use metabayes::meta_trainer::Checkpoint;
use metabayes::seeding::derive;
use metabayes::task_env::{Agent, Decision, TaskSpec, Trace};
use metabayes::Result;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::pipeline::{bayes_agent, map_runs, meta, runs, write, RunRef, EVAL_KEY};

pub fn structure_config(cfg: &ExperimentConfig, spec: &TaskSpec) -> StructureConfig {
    let mut s = StructureConfig::for_task(spec);
    s.train_episodes = cfg.analysis.structure_train_episodes;
    s.test_episodes = cfg.analysis.structure_test_episodes;
    s.rnn_components = cfg.components(spec);
    s.kl_samples = cfg.analysis.kl_samples;
    s.train_seed = derive(&[cfg.master_seed, EVAL_KEY, 1]);
    s.test_seed = derive(&[cfg.master_seed, EVAL_KEY, 2]);
    s
}

#[derive(Serialize, Deserialize)]
struct Cached {
    key: String,
    result: StructureResult,
}

fn cache_key(s: &StructureConfig, subject: &Checkpoint, reference: &Checkpoint) -> String {
    let v = serde_json::json!({
        "structure": s,
        "subject": [subject.config_digest, subject.step],
        "reference": [reference.config_digest, reference.step],
    });
    Sha256::digest(v.to_string().as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn cache_path(r: &RunRef, stage: &str, step: u64) -> PathBuf {
    r.dir.join(format!("structure_{stage}_step{step}.json"))
}

/// Structural comparison of `subject` on histories generated by `reference` (the
/// trained checkpoint), cached in the run directory. Cached results omit the fitted maps.
pub fn structure_cached(
    cfg: &ExperimentConfig,
    r: &RunRef,
    stage: &str,
    subject: &Checkpoint,
    reference: &Checkpoint,
    opt: &dyn Agent,
    need_maps: bool,
) -> Result<StructureResult> {
    let s = structure_config(cfg, &r.spec);
    let key = cache_key(&s, subject, reference);
    let path = cache_path(r, stage, subject.step);
    if need_maps {
        // fall through to a fresh fit
    } else if let Ok(text) = std::fs::read_to_string(&path) {
        if let Ok(c) = serde_json::from_str::<Cached>(&text) {
            if c.key == key {
                return Ok(c.result);
            }
        }
    }
    let result = structural_comparison(&r.spec, &reference.agent()?, &subject.agent()?, opt, &s)?;
    std::fs::write(
        &path,
        serde_json::to_string(&Cached {
            key,
            result: result.clone(),
        })?,
    )?;
    Ok(result)
}

pub fn metric_rows(task: &str, run_id: &str, stage: &str, s: &StructureResult) -> Vec<Vec<String>> {
    [
        ("D_s_rnn2opt", s.rnn2opt.d_s),
        ("D_o_rnn2opt", s.rnn2opt.d_o),
        ("D_s_opt2rnn", s.opt2rnn.d_s),
        ("D_o_opt2rnn", s.opt2rnn.d_o),
        ("var_explained", s.var_explained),
    ]
    .into_iter()
    .map(|(m, v)| {
        vec![
            task.into(),
            run_id.into(),
            stage.into(),
            m.into(),
            fmt_f64(v),
        ]
    })
    .collect()
}

/// Scalar summary of a decision used to colour state-space plots:
/// the predictive mean, or the probability of pulling the second arm.
fn colour(d: &Decision) -> f64 {
    match d {
        Decision::Predict(p) => p.mean(),
        Decision::Act { probs } => probs[1],
    }
}

fn first2(z: &[f64]) -> (f64, f64) {
    (
        z.first().copied().unwrap_or(0.0),
        z.get(1).copied().unwrap_or(0.0),
    )
}

/// Points of the four state-space panels: both agents' own whitened PCA coordinates
/// and both learned embeddings, each with the output emitted in that state.
fn panel_rows(
    spec: &TaskSpec,
    s: &StructureResult,
    rnn: &dyn Agent,
    opt: &dyn Agent,
    rnn_traces: &[Trace],
    opt_traces: &[Trace],
) -> Result<Vec<Vec<String>>> {
    let (ro, or) = s
        .maps
        .as_ref()
        .expect("fresh structural comparison carries its maps");
    let mut rows = Vec::new();
    let mut push = |panel: &str, k: usize, t: usize, z: &[f64], c: f64| {
        let (x, y) = first2(z);
        rows.push(vec![
            spec.id.clone(),
            panel.into(),
            k.to_string(),
            (t + 1).to_string(),
            fmt_f64(x),
            fmt_f64(y),
            fmt_f64(c),
        ]);
    };
    for (k, (tr, to)) in rnn_traces.iter().zip(opt_traces).enumerate() {
        for t in 0..tr.len() {
            let zr = s.rnn_pca.whiten(&tr.states[t + 1]);
            let zo = s.opt_pca.whiten(&to.states[t + 1]);
            push("rnn", k, t, &zr, colour(&tr.decisions[t]));
            push("opt", k, t, &zo, colour(&to.decisions[t]));
            let z = ro.apply(&zr);
            let d = opt.decode(&opt.output(&s.opt_pca.unwhiten(&z))?)?;
            push("rnn2opt", k, t, &z, colour(&d));
            let z = or.apply(&zo);
            let d = rnn.decode(&rnn.output(&s.rnn_pca.unwhiten(&z))?)?;
            push("opt2rnn", k, t, &z, colour(&d));
        }
    }
    Ok(rows)
}

/// Variance explained and simulation scores for every run, plus the state-space
/// panels of run 0 at its initial and final checkpoints.
pub fn run(cfg: &ExperimentConfig, strict: bool) -> Result<()> {
    let work = runs(cfg)?;
    let results = map_runs(strict, &work, |r| {
        let opt = bayes_agent(&r.spec)?;
        let last = r.last()?;
        let mut stages = vec![("final", last.clone())];
        match r.initial()? {
            Some(init) => stages.push(("init", init)),
            None => log::warn!("{}: no initial checkpoint, init rows skipped", r.run_id),
        }
        let mut rows = Vec::new();
        for (stage, ck) in stages {
            let panels = r.run == 0;
            let res = structure_cached(cfg, r, stage, &ck, &last, opt.as_ref(), panels)?;
            rows.extend(metric_rows(&r.spec.id, &r.run_id, stage, &res));
            if panels {
                let (reference, subject) = (last.agent()?, ck.agent()?);
                let s = structure_config(cfg, &r.spec);
                let (rt, ot) = held_out_traces(&r.spec, &reference, &subject, opt.as_ref(), &s)?;
                let points = panel_rows(&r.spec, &res, &subject, opt.as_ref(), &rt, &ot)?;
                let mut m = meta(cfg, "structure_points");
                m["run_id"] = r.run_id.clone().into();
                m["stage"] = stage.into();
                m["step"] = ck.step.into();
                write(
                    &cfg.out
                        .join("structure")
                        .join(format!("{}_{stage}.csv", r.spec.id)),
                    &m,
                    &["task", "panel", "episode", "t", "pc1", "pc2", "output"],
                    &points,
                )?;
            }
        }
        Ok(rows)
    })?;
    let rows: Vec<Vec<String>> = results.into_iter().flatten().collect();
    write(
        &cfg.out.join("structure.csv"),
        &meta(cfg, "structure"),
        &["task", "run_id", "stage", "metric", "value"],
        &rows,
    )
}
