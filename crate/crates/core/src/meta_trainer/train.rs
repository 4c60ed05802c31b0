use std::path::{Path, PathBuf};

use rand::Rng as _;

use super::checkpoint::{curve_path, list_checkpoints, Checkpoint};
use super::config::TrainConfig;
use super::curve::TrainingCurve;
use super::eval::evaluate;
use crate::analysis::{behavioral_dissimilarity, MonteCarlo};
use crate::bayes_agent::{BayesPredictor, GittinsBandit};
use crate::neural_core::heads::softmax2;
use crate::neural_core::{
    clip_gradients, init_params, output_gradients, AdamConfig, AdamState, Core, Matrix, Network,
    NeuralAgent, WindowLoss,
};
use crate::seeding::{self, derive, Stream};
use crate::task_env::encoding::{encode_observation, encode_pull, null_input};
use crate::task_env::{
    sample_task, step_bandit, step_prediction, Agent, TaskKind, TaskParams, Trace,
};
use crate::{Error, Result};

/// Key separating training-batch episodes from every evaluation seed.
const TRAIN_KEY: u64 = 0x7472_6169_6e;
/// Key of the held-out episodes scored on the training curve.
const CURVE_KEY: u64 = 0x6375_7276_65;

#[derive(Clone, Debug, Default)]
pub struct TrainOptions {
    /// Continue from the latest checkpoint of the run in the output directory.
    pub resume: bool,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub checkpoints: Vec<PathBuf>,
    pub curve: TrainingCurve,
    pub final_checkpoint: Checkpoint,
    /// Batch index training resumed from (0 for a fresh run).
    pub resumed_from: u64,
}

/// Seed of episode `i` in training batch `batch`.
pub fn batch_episode_seed(master_seed: u64, batch: u64, i: usize) -> u64 {
    derive(&[master_seed, TRAIN_KEY, batch, i as u64])
}

/// Master seed of the held-out episodes used on the training curve.
pub fn curve_seed(master_seed: u64) -> u64 {
    derive(&[master_seed, CURVE_KEY])
}

pub fn train_prediction(
    cfg: &TrainConfig,
    out: &Path,
    opts: &TrainOptions,
) -> Result<TrainOutcome> {
    if cfg.task.kind != TaskKind::Prediction {
        return Err(Error::config(format!(
            "{} is not a prediction task",
            cfg.task.id
        )));
    }
    train(cfg, out, opts)
}

pub fn train_bandit(cfg: &TrainConfig, out: &Path, opts: &TrainOptions) -> Result<TrainOutcome> {
    if cfg.task.kind != TaskKind::Bandit {
        return Err(Error::config(format!(
            "{} is not a bandit task",
            cfg.task.id
        )));
    }
    train(cfg, out, opts)
}

/// Trains the feedforward baseline that sees only the last `context` inputs.
pub fn train_reduced_memory(
    cfg: &TrainConfig,
    context: usize,
    out: &Path,
    opts: &TrainOptions,
) -> Result<TrainOutcome> {
    let cfg = reduced_memory_config(cfg, context)?;
    train(&cfg, out, opts)
}

pub fn reduced_memory_config(cfg: &TrainConfig, context: usize) -> Result<TrainConfig> {
    if context == 0 {
        return Err(Error::config("context width must be at least 1"));
    }
    let mut cfg = cfg.clone();
    cfg.arch.core = Core::Context { context };
    Ok(cfg)
}

fn reference_agent(cfg: &TrainConfig) -> Result<Box<dyn Agent>> {
    Ok(match cfg.task.kind {
        TaskKind::Prediction => Box::new(BayesPredictor::new(&cfg.task)?),
        TaskKind::Bandit => Box::new(GittinsBandit::new(&cfg.task)?),
    })
}

struct CurveEval {
    reference: Option<Vec<Trace>>,
    mc: MonteCarlo,
    seed: u64,
}

impl CurveEval {
    fn record(
        &mut self,
        cfg: &TrainConfig,
        net: &Network,
        step: u64,
        curve: &mut TrainingCurve,
    ) -> Result<()> {
        if cfg.curve_episodes == 0 {
            return Ok(());
        }
        let reference = match &self.reference {
            Some(r) => r,
            None => {
                let opt = reference_agent(cfg)?;
                let (_, traces) = evaluate(
                    opt.as_ref(),
                    &cfg.task,
                    cfg.curve_episodes,
                    cfg.task.horizon,
                    self.seed,
                )?;
                self.reference.insert(traces)
            }
        };
        let agent = NeuralAgent::new(net.clone());
        let (m, traces) = evaluate(
            &agent,
            &cfg.task,
            cfg.curve_episodes,
            cfg.task.horizon,
            self.seed,
        )?;
        let d = behavioral_dissimilarity(reference, &traces, &self.mc)?;
        curve.push(step, &format!("eval_{}", m.metric), m.mean)?;
        curve.push(step, "behavioral_d", d.d)?;
        Ok(())
    }
}

fn curve_meta(cfg: &TrainConfig) -> serde_json::Value {
    serde_json::json!({
        "kind": "training_curve",
        "run_id": cfg.run_id,
        "task": cfg.task.id,
        "config_digest": cfg.digest(),
        "master_seed": cfg.master_seed,
    })
}

/// Meta-trains a network on `cfg.task`, writing `{run_id}_step{n}.ckpt` files and
/// `{run_id}_curve.csv` into `out`.
///
/// Batches are generated from seeds derived from `(master_seed, batch index)`, so a
/// resumed run replays exactly the batches an uninterrupted run would have seen.
pub fn train(cfg: &TrainConfig, out: &Path, opts: &TrainOptions) -> Result<TrainOutcome> {
    cfg.validate()?;
    std::fs::create_dir_all(out)?;
    let schedule = cfg.checkpoint_batches();
    let spb = cfg.steps_per_batch();
    let digest = cfg.digest();

    let mut curve = TrainingCurve::default();
    let mut checkpoints = Vec::new();
    let mut start: Option<Checkpoint> = None;
    if opts.resume {
        for (_, path) in list_checkpoints(out, &cfg.run_id)?.into_iter().rev() {
            let ck = Checkpoint::read(&path)?;
            ck.check_config(cfg)?;
            if schedule.contains(&ck.batch) {
                start = Some(ck);
                break;
            }
        }
        if let Some(ck) = &start {
            let cp = curve_path(out, &cfg.run_id);
            if cp.exists() {
                curve = TrainingCurve::read(&cp)?;
                curve.truncate_after(ck.step);
            }
            checkpoints = list_checkpoints(out, &cfg.run_id)?
                .into_iter()
                .filter(|(s, _)| *s <= ck.step)
                .map(|(_, p)| p)
                .collect();
        }
    }
    let resumed_from = start.as_ref().map_or(0, |c| c.batch);
    let (mut net, mut adam, mut batch) = match start {
        Some(ck) => {
            let net = ck.network()?;
            (net, ck.adam, ck.batch)
        }
        None => {
            let params = init_params(
                &cfg.arch,
                &mut seeding::rng_from(&[cfg.master_seed, Stream::Init as u64]),
            );
            let adam = AdamState::new(AdamConfig::with_lr(cfg.learning_rate), &params);
            (Network::new(cfg.arch.clone(), params)?, adam, 0)
        }
    };

    let mut evals = CurveEval {
        reference: None,
        mc: MonteCarlo {
            samples: 2_000,
            seed: derive(&[cfg.master_seed, CURVE_KEY, Stream::MonteCarlo as u64]),
        },
        seed: curve_seed(cfg.master_seed),
    };
    let snapshot = |net: &Network, adam: &AdamState, batch: u64| Checkpoint {
        run_id: cfg.run_id.clone(),
        config_digest: digest.clone(),
        arch: cfg.arch.clone(),
        params: net.params.clone(),
        adam: adam.clone(),
        step: batch * spb,
        batch,
    };
    let save =
        |ck: &Checkpoint, curve: &TrainingCurve, checkpoints: &mut Vec<PathBuf>| -> Result<()> {
            checkpoints.push(ck.write(out)?);
            curve.write(&curve_path(out, &cfg.run_id), &curve_meta(cfg))
        };

    if checkpoints.is_empty() {
        evals.record(cfg, &net, 0, &mut curve)?;
        save(&snapshot(&net, &adam, 0), &curve, &mut checkpoints)?;
    }

    let total = cfg.total_batches();
    let metric = match cfg.task.kind {
        TaskKind::Prediction => "train_loss",
        TaskKind::Bandit => "train_regret",
    };
    while batch < total {
        let before = (net.params.clone(), adam.clone());
        adam.config.learning_rate = cfg.learning_rate_at(batch);
        let stat = match cfg.task.kind {
            TaskKind::Prediction => prediction_batch(cfg, &mut net, &mut adam, batch),
            TaskKind::Bandit => bandit_batch(cfg, &mut net, &mut adam, batch),
        };
        let stat = match stat {
            Ok(s) => s,
            Err(e) => {
                if e.is_numeric() {
                    // keep the parameters this batch started from as the last good state
                    net.params = before.0;
                    let ck = snapshot(&net, &before.1, batch);
                    if !schedule.contains(&batch) {
                        save(&ck, &curve, &mut checkpoints)?;
                    }
                    log::error!("run {} diverged in batch {batch}: {e}", cfg.run_id);
                }
                return Err(e);
            }
        };
        batch += 1;
        let step = batch * spb;
        curve.push(step, metric, stat)?;
        if schedule.contains(&batch) {
            evals.record(cfg, &net, step, &mut curve)?;
            save(&snapshot(&net, &adam, batch), &curve, &mut checkpoints)?;
            log::info!(
                "run {} step {step}/{}: {metric} {stat:.5}",
                cfg.run_id,
                total * spb
            );
        }
    }
    let final_checkpoint = snapshot(&net, &adam, batch);
    Ok(TrainOutcome {
        checkpoints,
        curve,
        final_checkpoint,
        resumed_from,
    })
}

fn apply_update(
    cfg: &TrainConfig,
    net: &mut Network,
    adam: &mut AdamState,
    mut grads: crate::neural_core::ParamSet,
) -> Result<()> {
    if !grads.is_finite() {
        return Err(Error::numeric("non-finite gradient"));
    }
    clip_gradients(&mut grads, cfg.clip, cfg.clip_mode);
    adam.update(&mut net.params, &grads);
    Ok(())
}

fn batch_tasks(cfg: &TrainConfig, batch: u64) -> Result<(Vec<u64>, Vec<TaskParams>)> {
    let seeds: Vec<u64> = (0..cfg.batch_size)
        .map(|i| batch_episode_seed(cfg.master_seed, batch, i))
        .collect();
    let params = seeds
        .iter()
        .map(|&s| {
            sample_task(
                &cfg.task,
                &mut seeding::stream(s, Stream::TaskParams as u64),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((seeds, params))
}

/// One batch of supervised log-loss training; returns the mean log-loss per step.
fn prediction_batch(
    cfg: &TrainConfig,
    net: &mut Network,
    adam: &mut AdamState,
    batch: u64,
) -> Result<f64> {
    let spec = &cfg.task;
    let (t_max, b) = (spec.horizon, cfg.batch_size);
    let (seeds, params) = batch_tasks(cfg, batch)?;
    let mut inputs: Vec<Matrix> = (0..t_max)
        .map(|_| Matrix::zeros(b, net.arch.input_dim))
        .collect();
    let mut targets = vec![vec![0.0; b]; t_max];
    for (r, (&s, p)) in seeds.iter().zip(&params).enumerate() {
        let mut rng = seeding::stream(s, Stream::Observations as u64);
        let mut x_in = null_input(spec);
        for t in 0..t_max {
            let x = step_prediction(spec, p, &mut rng)?;
            inputs[t].row_mut(r).copy_from_slice(&x_in);
            targets[t][r] = x;
            x_in = encode_observation(spec, x);
        }
    }
    let mut state = net.zero_state(b);
    let mut total = 0.0;
    for start in (0..t_max).step_by(cfg.unroll) {
        let end = (start + cfg.unroll).min(t_max);
        let res = crate::neural_core::bptt_gradients(
            net,
            &inputs[start..end],
            &state,
            &WindowLoss::LogLoss {
                targets: &targets[start..end],
            },
            &seeds,
        )?;
        total += res.loss;
        state = res.final_state;
        apply_update(cfg, net, adam, res.grads)?;
    }
    Ok(total / t_max as f64)
}

/// One batch of on-policy actor-critic training; returns the mean cumulative expected regret.
fn bandit_batch(
    cfg: &TrainConfig,
    net: &mut Network,
    adam: &mut AdamState,
    batch: u64,
) -> Result<f64> {
    let spec = &cfg.task;
    let (t_max, b) = (spec.horizon, cfg.batch_size);
    let gamma = spec.discount;
    let (seeds, params) = batch_tasks(cfg, batch)?;
    let mut arm_rngs: Vec<[seeding::Rng; 2]> = seeds
        .iter()
        .map(|&s| {
            [
                seeding::stream(s, Stream::ArmRewards as u64),
                seeding::stream(s, Stream::ArmRewards as u64 + 1),
            ]
        })
        .collect();
    let mut act_rngs: Vec<seeding::Rng> = seeds
        .iter()
        .map(|&s| seeding::stream(s, Stream::Actions as u64))
        .collect();
    let best: Vec<f64> = params
        .iter()
        .map(|p| crate::task_env::best_expected_reward(spec, p))
        .collect();

    let mut x = Matrix::zeros(b, net.arch.input_dim);
    for r in 0..b {
        x.row_mut(r).copy_from_slice(&null_input(spec));
    }
    let mut state = net.zero_state(b);
    let mut regret = 0.0;
    for start in (0..t_max).step_by(cfg.unroll) {
        let len = cfg.unroll.min(t_max - start);
        let mut outputs = Vec::with_capacity(len);
        let mut caches = Vec::with_capacity(len);
        let mut actions = vec![vec![0usize; b]; len];
        let mut rewards = vec![vec![0.0; b]; len];
        for t in 0..len {
            let (y, next, cache) = net.forward(&x, &state)?;
            let mut x_next = Matrix::zeros(b, net.arch.input_dim);
            for r in 0..b {
                let row = y.row(r);
                let probs = softmax2([row[0], row[1]]);
                if !(probs[0].is_finite() && row[2].is_finite()) {
                    return Err(Error::NonFiniteLoss {
                        loss: f64::NAN,
                        episode_seed: seeds[r],
                    });
                }
                let u: f64 = act_rngs[r].random();
                let a = usize::from(u >= probs[0]);
                let pull = step_bandit(spec, &params[r], a, &mut arm_rngs[r][a])?;
                regret += best[r] - pull.expected_reward;
                actions[t][r] = a;
                rewards[t][r] = pull.reward;
                x_next
                    .row_mut(r)
                    .copy_from_slice(&encode_pull(a, pull.reward));
            }
            outputs.push(y);
            caches.push(cache);
            state = next;
            x = x_next;
        }
        // bootstrap from the value of the next state, zero once the episode is over
        let boot = if start + len < t_max {
            let (y, _, _) = net.forward(&x, &state)?;
            (0..b).map(|r| y.row(r)[2]).collect()
        } else {
            vec![0.0; b]
        };
        let mut returns = vec![vec![0.0; b]; len];
        let mut advantages = vec![vec![0.0; b]; len];
        for r in 0..b {
            let mut g = boot[r];
            for t in (0..len).rev() {
                g = rewards[t][r] + gamma * g;
                returns[t][r] = g;
                advantages[t][r] = g - outputs[t].row(r)[2];
            }
        }
        let loss = WindowLoss::A2c {
            actions: &actions,
            advantages: &advantages,
            returns: &returns,
            weights: cfg.a2c,
        };
        let (_, dys, _) = output_gradients(net, &outputs, &loss, &seeds)?;
        let mut grads = net.params.zeros_like();
        net.backward(&caches, &dys, &mut grads)?;
        apply_update(cfg, net, adam, grads)?;
    }
    Ok(regret / b as f64)
}
