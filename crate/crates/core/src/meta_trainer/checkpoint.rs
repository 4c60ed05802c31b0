use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use crate::neural_core::{
    AdamConfig, AdamState, ArchitectureConfig, Container, Network, NeuralAgent, ParamSet,
};
use crate::{Error, Result};

const PARAMS: &str = "params/";
const ADAM_M: &str = "adam.m/";
const ADAM_V: &str = "adam.v/";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Header {
    run_id: String,
    config_digest: String,
    arch: ArchitectureConfig,
    adam: AdamConfig,
    adam_step: u64,
    batch: u64,
}

/// Network parameters and optimizer state at an episode-batch boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub run_id: String,
    pub config_digest: String,
    pub arch: ArchitectureConfig,
    pub params: ParamSet,
    pub adam: AdamState,
    /// Environment steps consumed so far.
    pub step: u64,
    /// Episode batches completed so far.
    pub batch: u64,
}

pub fn checkpoint_path(dir: &Path, run_id: &str, step: u64) -> PathBuf {
    dir.join(format!("{run_id}_step{step}.ckpt"))
}

pub fn curve_path(dir: &Path, run_id: &str) -> PathBuf {
    dir.join(format!("{run_id}_curve.csv"))
}

impl Checkpoint {
    pub fn to_container(&self) -> Container {
        let header = Header {
            run_id: self.run_id.clone(),
            config_digest: self.config_digest.clone(),
            arch: self.arch.clone(),
            adam: self.adam.config,
            adam_step: self.adam.step,
            batch: self.batch,
        };
        let mut c = Container {
            header: serde_json::to_value(header).expect("header serializes"),
            step: self.step,
            arrays: Vec::new(),
        };
        c.push_params(PARAMS, &self.params);
        c.push_params(ADAM_M, &self.adam.m);
        c.push_params(ADAM_V, &self.adam.v);
        c
    }

    pub fn from_container(c: &Container, path: &Path) -> Result<Self> {
        let h: Header = serde_json::from_value(c.header.clone()).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            msg: format!("checkpoint header: {e}"),
        })?;
        h.arch.validate()?;
        let params = c.params(&h.arch, PARAMS)?;
        let adam = AdamState {
            config: h.adam,
            m: c.params(&h.arch, ADAM_M)?,
            v: c.params(&h.arch, ADAM_V)?,
            step: h.adam_step,
        };
        Ok(Self {
            run_id: h.run_id,
            config_digest: h.config_digest,
            arch: h.arch,
            params,
            adam,
            step: c.step,
            batch: h.batch,
        })
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = checkpoint_path(dir, &self.run_id, self.step);
        self.to_container().write(&path)?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_container(&Container::read(path)?, path)
    }

    pub fn network(&self) -> Result<Network> {
        Network::new(self.arch.clone(), self.params.clone())
    }

    pub fn agent(&self) -> Result<NeuralAgent> {
        Ok(NeuralAgent::new(self.network()?))
    }

    pub fn check_config(&self, cfg: &TrainConfig) -> Result<()> {
        if self.config_digest != cfg.digest() || self.arch != cfg.arch {
            return Err(Error::config(format!(
                "checkpoint of run {} was written by a different configuration",
                self.run_id
            )));
        }
        Ok(())
    }
}

/// Checkpoints of `run_id` found in `dir`, sorted by step.
pub fn list_checkpoints(dir: &Path, run_id: &str) -> Result<Vec<(u64, PathBuf)>> {
    let mut out = Vec::new();
    if !dir.is_dir() {
        return Ok(out);
    }
    let prefix = format!("{run_id}_step");
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        let step = name
            .strip_prefix(&prefix)
            .and_then(|rest| rest.strip_suffix(".ckpt"))
            .and_then(|s| s.parse::<u64>().ok());
        if let Some(step) = step {
            out.push((step, path));
        }
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural_core::{init_params, HeadKind};
    use crate::seeding::rng_from;

    #[test]
    fn checkpoint_round_trips_bitwise() {
        let arch = ArchitectureConfig::lstm(4, 2, HeadKind::BernoulliLogp);
        let params = init_params(&arch, &mut rng_from(&[1]));
        let mut adam = AdamState::new(AdamConfig::with_lr(1e-3), &params);
        adam.m.fill(0.25);
        adam.v.fill(1e-300);
        adam.step = 7;
        let ck = Checkpoint {
            run_id: "r".into(),
            config_digest: "abc".into(),
            arch,
            params,
            adam,
            step: 640,
            batch: 5,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = ck.write(dir.path()).unwrap();
        assert!(path.ends_with("r_step640.ckpt"));
        assert_eq!(Checkpoint::read(&path).unwrap(), ck);
        assert_eq!(
            list_checkpoints(dir.path(), "r").unwrap(),
            vec![(640, path)]
        );
    }
}
