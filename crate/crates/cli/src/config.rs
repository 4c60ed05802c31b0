//! Experiment configuration: task selection, training overrides and analysis settings.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use metabayes::meta_trainer::{LrSchedule, TrainConfig};
use metabayes::neural_core::{A2cWeights, Activation, ClipMode};
use metabayes::seeding::derive;
use metabayes::task_env::suite::{all_tasks, task_by_id};
use metabayes::task_env::{TaskKind, TaskSpec};
use metabayes::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Task ids, or the groups `all`, `prediction` and `bandit`.
    #[serde(default = "default_tasks")]
    pub tasks: Vec<String>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub analysis: AnalysisSettings,
    #[serde(default)]
    pub sweep: SweepSettings,
}

fn default_tasks() -> Vec<String> {
    vec!["all".into()]
}

fn default_runs() -> usize {
    10
}

fn default_out() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default)]
    pub prediction: TrainOverrides,
    #[serde(default)]
    pub bandit: TrainOverrides,
}

/// Fields left out keep the defaults of [`TrainConfig::for_task`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_steps: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lr_schedule: Option<LrSchedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unroll: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activation: Option<Activation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip_mode: Option<ClipMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve_episodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a2c: Option<A2cWeights>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSettings {
    /// Held-out evaluation and comparison episodes (K).
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    #[serde(default = "default_t_eval")]
    pub t_eval: Vec<usize>,
    #[serde(default = "default_episodes")]
    pub structure_train_episodes: usize,
    #[serde(default = "default_episodes")]
    pub structure_test_episodes: usize,
    /// Retained meta-learner principal components per task id; defaults to the
    /// dimension of the task's minimal sufficient statistics.
    #[serde(default)]
    pub components: BTreeMap<String, usize>,
    /// Episodes per checkpoint for the convergence distance matrix.
    #[serde(default = "default_convergence_episodes")]
    pub convergence_episodes: usize,
    /// Sum `√JS` instead of `JS` per step in the convergence distances.
    #[serde(default)]
    pub sqrt_js: bool,
    #[serde(default = "default_js_samples")]
    pub js_samples: usize,
    #[serde(default = "default_kl_samples")]
    pub kl_samples: usize,
}

fn default_episodes() -> usize {
    500
}

fn default_t_eval() -> Vec<usize> {
    vec![20, 30]
}

fn default_convergence_episodes() -> usize {
    100
}

fn default_js_samples() -> usize {
    2_000
}

fn default_kl_samples() -> usize {
    10_000
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSettings {
    #[serde(default = "default_widths")]
    pub widths: Vec<usize>,
    #[serde(default = "default_contexts")]
    pub contexts: Vec<usize>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    /// Training budget per sweep run; the task-kind default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_steps: Option<u64>,
}

fn default_widths() -> Vec<usize> {
    vec![8, 16, 32, 64]
}

fn default_contexts() -> Vec<usize> {
    vec![1, 5, 10, 20]
}

fn default_repeats() -> usize {
    5
}

impl Default for SweepSettings {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

/// Loads a config, reporting the JSON path of the first offending field.
pub fn load(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Missing(format!("config {}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de)
        .map_err(|e| Error::config(format!("at `{}`: {}", e.path(), e.inner())))?;
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.task_specs()?;
        if self.runs == 0 {
            return Err(Error::config("at `runs`: must be at least 1"));
        }
        let a = &self.analysis;
        if a.episodes == 0 || a.t_eval.is_empty() || a.t_eval.contains(&0) {
            return Err(Error::config(
                "at `analysis`: episodes and every t_eval must be positive",
            ));
        }
        if a.structure_train_episodes < 2
            || a.structure_test_episodes == 0
            || a.convergence_episodes == 0
        {
            return Err(Error::config(
                "at `analysis`: structure and convergence episode counts must be positive",
            ));
        }
        for (id, &n) in &a.components {
            task_by_id(id).map_err(|_| {
                Error::config(format!("at `analysis.components.{id}`: unknown task"))
            })?;
            if n == 0 {
                return Err(Error::config(format!(
                    "at `analysis.components.{id}`: must be positive"
                )));
            }
        }
        for (id, spec) in self.task_specs()?.iter().map(|s| (s.id.clone(), s)) {
            self.train_config(spec, 0)
                .map_err(|e| Error::config(format!("training config for {id}: {e}")))?;
        }
        Ok(())
    }

    /// The selected tasks in suite order, without duplicates.
    pub fn task_specs(&self) -> Result<Vec<TaskSpec>> {
        let mut want = Vec::new();
        for (i, t) in self.tasks.iter().enumerate() {
            let picked: Vec<TaskSpec> = match t.as_str() {
                "all" => all_tasks(),
                "prediction" => all_tasks()
                    .into_iter()
                    .filter(|s| s.kind == TaskKind::Prediction)
                    .collect(),
                "bandit" => all_tasks()
                    .into_iter()
                    .filter(|s| s.kind == TaskKind::Bandit)
                    .collect(),
                id => vec![task_by_id(id)
                    .map_err(|_| Error::config(format!("at `tasks[{i}]`: unknown task {id:?}")))?],
            };
            want.extend(picked.into_iter().map(|s| s.id));
        }
        if want.is_empty() {
            return Err(Error::config("at `tasks`: no tasks selected"));
        }
        Ok(all_tasks()
            .into_iter()
            .filter(|s| want.contains(&s.id))
            .collect())
    }

    pub fn run_id(spec: &TaskSpec, run: usize) -> String {
        format!("{}-run{run}", spec.id)
    }

    /// Seed of run `run` on `spec`: distinct per task and per run, fixed by `master_seed`.
    pub fn run_seed(&self, spec: &TaskSpec, run: usize) -> u64 {
        let mut keys = vec![self.master_seed];
        keys.extend(spec.id.bytes().map(u64::from));
        keys.push(run as u64);
        derive(&keys)
    }

    pub fn overrides(&self, kind: TaskKind) -> &TrainOverrides {
        match kind {
            TaskKind::Prediction => &self.train.prediction,
            TaskKind::Bandit => &self.train.bandit,
        }
    }

    pub fn train_config(&self, spec: &TaskSpec, run: usize) -> Result<TrainConfig> {
        let mut cfg = TrainConfig::for_task(spec.clone(), self.run_seed(spec, run));
        cfg.run_id = Self::run_id(spec, run);
        self.overrides(spec.kind).apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn run_dir(&self, spec: &TaskSpec, run: usize) -> PathBuf {
        self.out
            .join("runs")
            .join(&spec.id)
            .join(format!("run{run}"))
    }

    pub fn components(&self, spec: &TaskSpec) -> usize {
        self.analysis
            .components
            .get(&spec.id)
            .copied()
            .unwrap_or_else(|| spec.stats_dim())
    }
}

impl TrainOverrides {
    pub fn apply(&self, cfg: &mut TrainConfig) {
        if let Some(v) = self.total_steps {
            cfg.total_steps = v;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = self.learning_rate {
            cfg.learning_rate = v;
        }
        if let Some(v) = self.lr_schedule {
            cfg.lr_schedule = v;
        }
        if let Some(v) = self.unroll {
            cfg.unroll = v;
        }
        if let Some(v) = self.width {
            cfg.arch.width = v;
        }
        if let Some(v) = self.activation {
            cfg.arch.activation = v;
        }
        if let Some(v) = self.clip {
            cfg.clip = v;
        }
        if let Some(v) = self.clip_mode {
            cfg.clip_mode = v;
        }
        if let Some(v) = self.checkpoints {
            cfg.checkpoints = v;
        }
        if let Some(v) = self.curve_episodes {
            cfg.curve_episodes = v;
        }
        if let Some(v) = self.a2c {
            cfg.a2c = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_selects_the_whole_suite() {
        let cfg = parse("{}").unwrap();
        assert_eq!(cfg.task_specs().unwrap().len(), 14);
        assert_eq!(cfg.runs, 10);
        assert_eq!(cfg.analysis.t_eval, vec![20, 30]);
    }

    #[test]
    fn errors_name_the_field_path() {
        let e = parse(r#"{"train": {"bandit": {"widht": 3}}}"#)
            .unwrap_err()
            .to_string();
        assert!(e.contains("train.bandit"), "{e}");
        let e = parse(r#"{"tasks": ["nope"]}"#).unwrap_err().to_string();
        assert!(e.contains("tasks[0]"), "{e}");
        let e = parse(r#"{"train": {"prediction": {"learning_rate": -1}}}"#).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
    }

    #[test]
    fn run_seeds_differ_across_tasks_and_runs() {
        let cfg = parse(r#"{"tasks": ["prediction"]}"#).unwrap();
        let specs = cfg.task_specs().unwrap();
        assert_ne!(cfg.run_seed(&specs[0], 0), cfg.run_seed(&specs[0], 1));
        assert_ne!(cfg.run_seed(&specs[0], 0), cfg.run_seed(&specs[1], 0));
    }
}
