//! Shared plumbing: per-run work lists, checkpoint discovery, CSV emission, worker pool.

use std::path::{Path, PathBuf};

use metabayes::analysis::report::write_csv;
use metabayes::bayes_agent::{BayesPredictor, GittinsBandit};
use metabayes::meta_trainer::{list_checkpoints, Checkpoint};
use metabayes::seeding::derive;
use metabayes::task_env::{Agent, TaskKind, TaskSpec};
use metabayes::{Error, Result};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

/// Key of the evaluation and comparison episodes; never used by training.
pub const EVAL_KEY: u64 = 0x6576_616c;

#[derive(Clone, Debug)]
pub struct RunRef {
    pub spec: TaskSpec,
    pub run: usize,
    pub run_id: String,
    pub dir: PathBuf,
}

pub fn runs(cfg: &ExperimentConfig) -> Result<Vec<RunRef>> {
    let mut out = Vec::new();
    for spec in cfg.task_specs()? {
        for run in 0..cfg.runs {
            out.push(RunRef {
                run_id: ExperimentConfig::run_id(&spec, run),
                dir: cfg.run_dir(&spec, run),
                spec: spec.clone(),
                run,
            });
        }
    }
    Ok(out)
}

impl RunRef {
    pub fn checkpoints(&self) -> Result<Vec<(u64, PathBuf)>> {
        list_checkpoints(&self.dir, &self.run_id)
    }

    pub fn initial(&self) -> Result<Option<Checkpoint>> {
        match self.checkpoints()?.first() {
            Some((0, p)) => Ok(Some(Checkpoint::read(p)?)),
            _ => Ok(None),
        }
    }

    pub fn last(&self) -> Result<Checkpoint> {
        let cks = self.checkpoints()?;
        let (_, p) = cks.last().ok_or_else(|| {
            Error::Missing(format!(
                "no checkpoints for {} in {}",
                self.run_id,
                self.dir.display()
            ))
        })?;
        Checkpoint::read(p)
    }
}

/// Bayes-optimal reference agent: the conjugate predictor or the Gittins player.
pub fn bayes_agent(spec: &TaskSpec) -> Result<Box<dyn Agent + Send + Sync>> {
    Ok(match spec.kind {
        TaskKind::Prediction => Box::new(BayesPredictor::new(spec)?),
        TaskKind::Bandit => Box::new(GittinsBandit::new(spec)?),
    })
}

pub fn eval_seed(cfg: &ExperimentConfig, spec: &TaskSpec) -> u64 {
    let mut keys = vec![cfg.master_seed, EVAL_KEY];
    keys.extend(spec.id.bytes().map(u64::from));
    derive(&keys)
}

/// Maps `f` over `items`, in parallel unless strict mode is on; results keep input order.
pub fn map_runs<T: Sync, R: Send>(
    strict: bool,
    items: &[T],
    f: impl Fn(&T) -> Result<R> + Sync + Send,
) -> Result<Vec<R>> {
    if strict {
        items.iter().map(f).collect()
    } else {
        items.par_iter().map(f).collect()
    }
}

pub fn meta(cfg: &ExperimentConfig, kind: &str) -> serde_json::Value {
    let digest = digest(cfg);
    serde_json::json!({ "kind": kind, "config_digest": digest, "master_seed": cfg.master_seed })
}

/// Hex SHA-256 of the resolved config without its output directory.
pub fn digest(cfg: &ExperimentConfig) -> String {
    let mut v = serde_json::to_value(cfg).expect("config serializes");
    v.as_object_mut().expect("object").remove("out");
    Sha256::digest(v.to_string().as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn write(
    path: &Path,
    meta: &serde_json::Value,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<()> {
    write_csv(path, meta, header, rows)?;
    log::info!("wrote {} ({} rows)", path.display(), rows.len());
    Ok(())
}
