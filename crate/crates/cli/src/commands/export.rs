use metabayes::analysis::report::fmt_f64;
use metabayes::meta_trainer::{curve_path, evaluate, TrainingCurve};
use metabayes::task_env::archive::{write_archive, ArchiveHeader};
use metabayes::{Error, Result};

use crate::config::ExperimentConfig;
use crate::pipeline::{bayes_agent, eval_seed, map_runs, meta, runs, write};

/// Collects all training curves into one CSV and writes gzip trace archives of the
/// final checkpoints and the Bayes-optimal agents on the evaluation episodes.
pub fn run(cfg: &ExperimentConfig, strict: bool) -> Result<()> {
    let work = runs(cfg)?;
    let mut rows = Vec::new();
    for r in &work {
        let path = curve_path(&r.dir, &r.run_id);
        if !path.exists() {
            return Err(Error::Missing(format!("training curve {}", path.display())));
        }
        for p in TrainingCurve::read(&path)?.points {
            rows.push(vec![
                r.spec.id.clone(),
                r.run_id.clone(),
                p.step.to_string(),
                p.metric,
                fmt_f64(p.value),
            ]);
        }
    }
    write(
        &cfg.out.join("curves.csv"),
        &meta(cfg, "curves"),
        &["task", "run_id", "step", "metric", "value"],
        &rows,
    )?;

    let k = cfg.analysis.episodes;
    let dir = cfg.out.join("traces");
    for spec in cfg.task_specs()? {
        let opt = bayes_agent(&spec)?;
        let (_, traces) = evaluate(opt.as_ref(), &spec, k, spec.horizon, eval_seed(cfg, &spec))?;
        let header = ArchiveHeader::new(&spec.id, "bayes-optimal", k);
        write_archive(
            &dir.join(format!("{}_bayes.ndjson.gz", spec.id)),
            &header,
            &traces,
        )?;
    }
    map_runs(strict, &work, |r| {
        let agent = r.last()?.agent()?;
        let (_, traces) = evaluate(&agent, &r.spec, k, r.spec.horizon, eval_seed(cfg, &r.spec))?;
        let header = ArchiveHeader::new(&r.spec.id, &r.run_id, k);
        write_archive(
            &dir.join(format!("{}_final.ndjson.gz", r.run_id)),
            &header,
            &traces,
        )
    })?;
    Ok(())
}
