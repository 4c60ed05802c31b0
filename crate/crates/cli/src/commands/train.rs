use metabayes::meta_trainer::{train, TrainOptions};
use metabayes::Result;

use crate::config::ExperimentConfig;
use crate::pipeline::{map_runs, runs};

/// Trains every (task, run) pair, resuming from existing checkpoints.
pub fn run(cfg: &ExperimentConfig, strict: bool, dry_run: bool) -> Result<()> {
    let work = runs(cfg)?;
    let train_cfgs = work
        .iter()
        .map(|r| cfg.train_config(&r.spec, r.run))
        .collect::<Result<Vec<_>>>()?;
    if dry_run {
        let resolved = serde_json::json!({ "experiment": cfg, "runs": train_cfgs });
        println!("{}", serde_json::to_string_pretty(&resolved)?);
        return Ok(());
    }
    std::fs::create_dir_all(&cfg.out)?;
    std::fs::write(
        cfg.out.join("experiment.json"),
        serde_json::to_string_pretty(cfg)? + "\n",
    )?;
    let pairs: Vec<_> = work.iter().zip(&train_cfgs).collect();
    map_runs(strict, &pairs, |(r, tc)| {
        let out = train(tc, &r.dir, &TrainOptions { resume: true })?;
        if out.resumed_from > 0 {
            log::info!("{} resumed from batch {}", r.run_id, out.resumed_from);
        }
        log::info!(
            "{} finished at step {}",
            r.run_id,
            out.final_checkpoint.step
        );
        Ok(())
    })?;
    Ok(())
}
