//! End-to-end properties of the trainers on small budgets.

use std::fs;
use std::path::Path;

use metabayes::meta_trainer::{
    edge_median, evaluate, train, Checkpoint, TrainConfig, TrainOptions,
};
use metabayes::neural_core::{
    a2c_loss, init_params, A2cWeights, ArchitectureConfig, HeadKind, Network, NeuralAgent,
};
use metabayes::seeding::rng_from;
use metabayes::task_env::suite::task_by_id;
use metabayes::task_env::{rollout, Family, TaskKind, TaskSpec};
use rand::Rng;

fn small_prediction(seed: u64) -> TrainConfig {
    let mut cfg = TrainConfig::prediction(task_by_id("pred-bernoulli-beta-1-1").unwrap(), seed);
    cfg.arch.width = 8;
    cfg.total_steps = 40_000;
    cfg.batch_size = 32;
    cfg.learning_rate = 3e-3;
    cfg.checkpoints = 5;
    cfg.curve_episodes = 20;
    cfg
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

#[test]
fn checkpoint_series_is_bit_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = small_prediction(4);
    let ra = train(&cfg, a.path(), &TrainOptions::default()).unwrap();
    train(&cfg, b.path(), &TrainOptions::default()).unwrap();
    let (fa, fb) = (files(a.path()), files(b.path()));
    assert_eq!(fa.len(), ra.checkpoints.len() + 1);
    assert_eq!(fa, fb);
}

#[test]
fn loaded_checkpoints_reproduce_forward_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = train(&small_prediction(1), dir.path(), &TrainOptions::default()).unwrap();
    let spec = task_by_id("pred-bernoulli-beta-1-1").unwrap();
    let loaded = Checkpoint::read(out.checkpoints.last().unwrap()).unwrap();
    let (x, y) = (
        out.final_checkpoint.agent().unwrap(),
        loaded.agent().unwrap(),
    );
    for i in 0..5 {
        let (tx, ty) = (
            rollout(&spec, &x, 20, i, 77 + i).unwrap(),
            rollout(&spec, &y, 20, i, 77 + i).unwrap(),
        );
        assert_eq!(tx, ty);
    }
}

#[test]
fn training_curve_decreases_and_starts_near_uniform_loss() {
    let dir = tempfile::tempdir().unwrap();
    let out = train(&small_prediction(2), dir.path(), &TrainOptions::default()).unwrap();
    let loss = out.curve.series("train_loss");
    let (first, last) = (
        edge_median(&loss, 0.1, false).unwrap(),
        edge_median(&loss, 0.1, true).unwrap(),
    );
    assert!(last <= first, "median loss rose from {first} to {last}");
    let eval = out.curve.series("eval_logloss");
    assert_eq!(eval[0].0, 0);
    assert!(
        (eval[0].1 - 2f64.ln()).abs() < 0.05,
        "step-0 loss {}",
        eval[0].1
    );
}

#[test]
fn zero_readout_predicts_uniformly() {
    let spec = task_by_id("pred-bernoulli-beta-1-1").unwrap();
    let arch = ArchitectureConfig::lstm(8, 2, HeadKind::BernoulliLogp);
    let mut params = init_params(&arch, &mut rng_from(&[0]));
    params.get_mut("out.w").unwrap().fill(0.0);
    let agent = NeuralAgent::new(Network::new(arch, params).unwrap());
    let (m, _) = evaluate(&agent, &spec, 10, 20, 3).unwrap();
    assert!((m.mean - 2f64.ln()).abs() < 1e-12);
}

#[test]
fn degenerate_prior_drives_the_loss_to_zero() {
    let spec = TaskSpec {
        id: "pred-bernoulli-degenerate".into(),
        kind: TaskKind::Prediction,
        family: Family::Bernoulli,
        prior_params: vec![1e6, 1e-6],
        known_precision: None,
        horizon: 20,
        discount: 1.0,
    };
    let mut cfg = small_prediction(0);
    cfg.task = spec;
    cfg.learning_rate = 1e-2;
    let dir = tempfile::tempdir().unwrap();
    let out = train(&cfg, dir.path(), &TrainOptions::default()).unwrap();
    let eval = out.curve.series("eval_logloss");
    let final_loss = eval.last().unwrap().1;
    assert!(final_loss < 0.01, "final loss {final_loss}");
}

#[test]
fn dominant_arm_is_learned() {
    let spec = TaskSpec {
        id: "bandit-bernoulli-deterministic".into(),
        kind: TaskKind::Bandit,
        family: Family::Bernoulli,
        prior_params: vec![1e6, 1e-6, 1e-6, 1e6],
        known_precision: None,
        horizon: 20,
        discount: 0.95,
    };
    let mut cfg = TrainConfig::bandit(spec.clone(), 0);
    cfg.arch.width = 16;
    cfg.total_steps = 2_000_000;
    cfg.learning_rate = 1e-3;
    cfg.checkpoints = 3;
    cfg.curve_episodes = 20;
    let dir = tempfile::tempdir().unwrap();
    let out = train(&cfg, dir.path(), &TrainOptions::default()).unwrap();
    let agent = out.final_checkpoint.agent().unwrap();
    let (_, traces) = evaluate(&agent, &spec, 20, 20, 9).unwrap();
    let p_min = traces
        .iter()
        .flat_map(|t| t.decisions.iter().map(|d| d.action_probs().unwrap()[0]))
        .fold(1.0, f64::min);
    assert!(p_min > 0.99, "P(arm 1) fell to {p_min}");
}

#[test]
fn policy_gradient_estimator_is_unbiased_on_a_one_step_bandit() {
    // Deterministic rewards (1, 0); J = π_0 and ∂J/∂l_j = π_j (r_j - J).
    let logits: [f64; 2] = [0.3, -0.4];
    let r = [1.0, 0.0];
    let z = logits[0].exp() + logits[1].exp();
    let pi = [logits[0].exp() / z, logits[1].exp() / z];
    let j = pi[0];
    let analytic = [pi[0] * (r[0] - j), pi[1] * (r[1] - j)];
    let w = A2cWeights {
        entropy: 0.0,
        value: 0.0,
    };
    let n = 100_000;
    let mut rng = rng_from(&[0x7067]);
    let (mut sum, mut sq) = ([0.0; 2], [0.0; 2]);
    let mut grad = [0.0; 3];
    for _ in 0..n {
        let a = usize::from(rng.random::<f64>() >= pi[0]);
        a2c_loss(&[logits[0], logits[1], 0.0], a, r[a], r[a], w, &mut grad);
        for k in 0..2 {
            // the surrogate's gradient is minus the return-gradient estimate
            sum[k] -= grad[k];
            sq[k] += grad[k] * grad[k];
        }
    }
    for k in 0..2 {
        let mean = sum[k] / n as f64;
        let se = ((sq[k] / n as f64 - mean * mean) / n as f64).sqrt();
        assert!(
            (mean - analytic[k]).abs() <= 2.0 * se,
            "logit {k}: {mean} vs {} (se {se})",
            analytic[k]
        );
    }
}
