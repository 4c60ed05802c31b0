//! Finite-difference checks of the hand-written gradients, for every head and both cores.

#[path = "common/gradcheck.rs"]
#[allow(dead_code)]
mod gradcheck;

use gradcheck::{case, check, HEADS};
use metabayes::neural_core::{
    bptt_gradients, init_params, ArchitectureConfig, HeadKind, Matrix, Network, WindowLoss,
};
use metabayes::seeding::rng_from;

#[test]
fn lstm_gradients_match_finite_differences_for_every_head() {
    for head in HEADS {
        for seed in 0..4 {
            let mut arch = ArchitectureConfig::lstm(4, 3, head);
            arch.activation = metabayes::neural_core::Activation::Tanh;
            check(arch, seed).unwrap();
        }
        check(ArchitectureConfig::lstm(4, 3, head), 7).unwrap();
    }
}

#[test]
fn context_gradients_match_finite_differences() {
    for head in HEADS {
        let mut arch = ArchitectureConfig::context(4, 2, head, 3);
        arch.activation = metabayes::neural_core::Activation::Tanh;
        check(arch, 11).unwrap();
    }
}

#[test]
fn batch_gradient_is_mean_of_episode_gradients() {
    let arch = ArchitectureConfig::lstm(4, 2, HeadKind::BernoulliLogp);
    let net = Network::new(arch.clone(), init_params(&arch, &mut rng_from(&[5]))).unwrap();
    let c = case(arch.head, 2, 8, 2, 5, 5);
    let full = bptt_gradients(
        &net,
        &c.inputs,
        &c.state,
        &WindowLoss::LogLoss {
            targets: &c.targets,
        },
        &[0, 1],
    )
    .unwrap();
    let mut sum = net.params.zeros_like();
    for r in 0..2 {
        let inputs: Vec<Matrix> = c
            .inputs
            .iter()
            .map(|x| Matrix::from_vec(1, 2, x.row(r).to_vec()))
            .collect();
        let state = Matrix::from_vec(1, 8, c.state.row(r).to_vec());
        let targets: Vec<Vec<f64>> = c.targets.iter().map(|t| vec![t[r]]).collect();
        let g = bptt_gradients(
            &net,
            &inputs,
            &state,
            &WindowLoss::LogLoss { targets: &targets },
            &[r as u64],
        )
        .unwrap();
        sum.add_assign(&g.grads);
    }
    sum.scale(0.5);
    for (a, b) in sum.iter_values().zip(full.grads.iter_values()) {
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }
}

#[test]
fn certain_predictions_have_zero_gradient() {
    // A categorical head with an enormous logit on the observed class has loss and gradient exactly 0.
    let arch = ArchitectureConfig::lstm(2, 3, HeadKind::CategoricalLogits);
    let mut params = init_params(&arch, &mut rng_from(&[1]));
    for t in &mut params.tensors {
        t.fill(0.0);
    }
    params.get_mut("out.b").unwrap().data = vec![1e3, 0.0, 0.0];
    let net = Network::new(arch, params).unwrap();
    let inputs = vec![Matrix::from_vec(1, 3, vec![1.0, 0.0, 0.0]); 5];
    let targets = vec![vec![0.0]; 5];
    let res = bptt_gradients(
        &net,
        &inputs,
        &net.zero_state(1),
        &WindowLoss::LogLoss { targets: &targets },
        &[0],
    )
    .unwrap();
    assert_eq!(res.loss, 0.0);
    assert!(res.grads.iter_values().all(|&g| g == 0.0));
}

#[test]
fn non_finite_loss_reports_the_episode_seed() {
    let arch = ArchitectureConfig::lstm(2, 2, HeadKind::GaussianMeanLogprec);
    let mut params = init_params(&arch, &mut rng_from(&[1]));
    params.get_mut("out.b").unwrap().data = vec![0.0, 1e6];
    let net = Network::new(arch, params).unwrap();
    let inputs = vec![Matrix::from_vec(2, 2, vec![0.0, 0.0, 0.0, 0.0])];
    let targets = vec![vec![0.0, 5.0]];
    let err = bptt_gradients(
        &net,
        &inputs,
        &net.zero_state(2),
        &WindowLoss::LogLoss { targets: &targets },
        &[11, 22],
    )
    .unwrap_err();
    assert!(
        matches!(
            err,
            metabayes::Error::NonFiniteLoss {
                episode_seed: 11,
                ..
            }
        ),
        "{err}"
    );
}
