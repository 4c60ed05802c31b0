//! Central finite differences against the hand-written gradients.

use metabayes::neural_core::{
    bptt_gradients, init_params, A2cWeights, ArchitectureConfig, HeadKind, Matrix, Network,
    WindowLoss,
};
use metabayes::seeding::rng_from;
use rand::Rng;

pub const HEADS: [HeadKind; 5] = [
    HeadKind::BernoulliLogp,
    HeadKind::CategoricalLogits,
    HeadKind::GaussianMeanLogprec,
    HeadKind::ExponentialLogalphaLogbeta,
    HeadKind::ActionLogitsPlusValue,
];

pub struct Case {
    pub inputs: Vec<Matrix>,
    pub state: Matrix,
    pub targets: Vec<Vec<f64>>,
    pub actions: Vec<Vec<usize>>,
    pub advantages: Vec<Vec<f64>>,
    pub returns: Vec<Vec<f64>>,
}

pub fn case(
    head: HeadKind,
    in_dim: usize,
    state_dim: usize,
    b: usize,
    t: usize,
    seed: u64,
) -> Case {
    let mut rng = rng_from(&[seed, 99]);
    let mut m = |r, c, s: f64| {
        Matrix::from_vec(
            r,
            c,
            (0..r * c)
                .map(|_| s * (rng.random::<f64>() - 0.5))
                .collect(),
        )
    };
    let inputs = (0..t).map(|_| m(b, in_dim, 2.0)).collect();
    let state = m(b, state_dim, 1.0);
    let mut rng = rng_from(&[seed, 100]);
    let targets = (0..t)
        .map(|_| {
            (0..b)
                .map(|_| match head {
                    HeadKind::BernoulliLogp => f64::from(rng.random::<bool>()),
                    HeadKind::CategoricalLogits => f64::from(rng.random_range(0..3u8)),
                    HeadKind::GaussianMeanLogprec => rng.random::<f64>() * 2.0 - 1.0,
                    _ => rng.random::<f64>() * 2.0,
                })
                .collect()
        })
        .collect();
    let actions = (0..t)
        .map(|_| (0..b).map(|_| rng.random_range(0..2)).collect())
        .collect();
    let advantages = (0..t)
        .map(|_| (0..b).map(|_| rng.random::<f64>() - 0.5).collect())
        .collect();
    let returns = (0..t)
        .map(|_| (0..b).map(|_| rng.random::<f64>() * 3.0).collect())
        .collect();
    Case {
        inputs,
        state,
        targets,
        actions,
        advantages,
        returns,
    }
}

pub fn loss_of<'a>(head: HeadKind, c: &'a Case) -> WindowLoss<'a> {
    match head {
        HeadKind::ActionLogitsPlusValue => WindowLoss::A2c {
            actions: &c.actions,
            advantages: &c.advantages,
            returns: &c.returns,
            weights: A2cWeights::default(),
        },
        _ => WindowLoss::LogLoss {
            targets: &c.targets,
        },
    }
}

/// Largest violation of |fd - g| <= rtol·max(|fd|, |g|) + atol over all parameters.
pub fn check(arch: ArchitectureConfig, seed: u64) -> Result<(), String> {
    let params = init_params(&arch, &mut rng_from(&[seed]));
    let net = Network::new(arch.clone(), params).unwrap();
    let c = case(arch.head, arch.input_dim, net.state_dim(), 3, 5, seed);
    let loss = loss_of(arch.head, &c);
    let res = bptt_gradients(&net, &c.inputs, &c.state, &loss, &[0, 1, 2]).unwrap();
    let h = 1e-5;
    for (ti, t) in net.params.tensors.iter().enumerate() {
        for k in 0..t.data.len() {
            let f = |delta: f64| {
                let mut n2 = net.clone();
                n2.params.tensors[ti].data[k] += delta;
                bptt_gradients(&n2, &c.inputs, &c.state, &loss, &[0, 1, 2])
                    .unwrap()
                    .loss
            };
            let fd = (f(h) - f(-h)) / (2.0 * h);
            let g = res.grads.tensors[ti].data[k];
            if (fd - g).abs() > 1e-4 * fd.abs().max(g.abs()) + 1e-8 {
                return Err(format!(
                    "{:?} seed {seed}: {}[{k}] analytic {g} vs fd {fd}",
                    arch.head, net.params.names[ti]
                ));
            }
        }
    }
    Ok(())
}
