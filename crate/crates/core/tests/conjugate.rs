//! Posterior predictives against a Monte-Carlo oracle, and exchangeability of the updates.

use metabayes::bayes_agent::{PredictiveDistribution, SufficientStats};
use metabayes::seeding::{rng_from, stream, Stream};
use metabayes::task_env::suite::task_by_id;
use metabayes::task_env::{sample_task, step_prediction, TaskSpec};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand_distr::{Beta, Distribution, Gamma, Normal};
use statrs::distribution::{Continuous, Exp, Normal as SNormal};

const SAMPLES: usize = 100_000;
const QUANTILES: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

fn history(spec: &TaskSpec, n: usize, seed: u64) -> Vec<f64> {
    let params = sample_task(spec, &mut stream(seed, Stream::TaskParams as u64)).unwrap();
    let mut rng = stream(seed, Stream::Observations as u64);
    (0..n)
        .map(|_| step_prediction(spec, &params, &mut rng).unwrap())
        .collect()
}

fn posterior(spec: &TaskSpec, xs: &[f64]) -> SufficientStats {
    SufficientStats::from_prior(spec.family, &spec.prior_params, spec.known_precision)
        .unwrap()
        .update_all(xs)
        .unwrap()
}

/// Density of the next observation averaged over posterior draws of the parameter.
fn mc_density(stats: &SufficientStats, xs_probe: &[f64], seed: u64) -> Vec<f64> {
    let mut rng = rng_from(&[seed, 0x6f72_6163]);
    let mut acc = vec![0.0; xs_probe.len()];
    match *stats {
        SufficientStats::Bernoulli { alpha, beta } => {
            let d = Beta::new(alpha, beta).unwrap();
            for _ in 0..SAMPLES {
                let th: f64 = d.sample(&mut rng);
                for (a, &x) in acc.iter_mut().zip(xs_probe) {
                    *a += if x == 1.0 { th } else { 1.0 - th };
                }
            }
        }
        SufficientStats::Categorical { alpha } => {
            let g: Vec<Gamma<f64>> = alpha.iter().map(|&a| Gamma::new(a, 1.0).unwrap()).collect();
            for _ in 0..SAMPLES {
                let w: Vec<f64> = g.iter().map(|d| d.sample(&mut rng)).collect();
                let s: f64 = w.iter().sum();
                for (a, &x) in acc.iter_mut().zip(xs_probe) {
                    *a += w[x as usize] / s;
                }
            }
        }
        SufficientStats::Gaussian {
            mean,
            precision,
            tau,
        } => {
            let d = Normal::new(mean, precision.recip().sqrt()).unwrap();
            for _ in 0..SAMPLES {
                let mu: f64 = d.sample(&mut rng);
                let lik = SNormal::new(mu, tau.recip().sqrt()).unwrap();
                for (a, &x) in acc.iter_mut().zip(xs_probe) {
                    *a += lik.pdf(x);
                }
            }
        }
        SufficientStats::Exponential { alpha, beta } => {
            let d = Gamma::new(alpha, beta.recip()).unwrap();
            for _ in 0..SAMPLES {
                let lik = Exp::new(d.sample(&mut rng)).unwrap();
                for (a, &x) in acc.iter_mut().zip(xs_probe) {
                    *a += lik.pdf(x);
                }
            }
        }
    }
    acc.iter().map(|a| a / SAMPLES as f64).collect()
}

fn probes(d: &PredictiveDistribution) -> Vec<f64> {
    match *d {
        PredictiveDistribution::Bernoulli { .. } => vec![0.0, 1.0],
        PredictiveDistribution::Categorical { .. } => vec![0.0, 1.0, 2.0],
        PredictiveDistribution::Normal { mean, variance } => [-1.645, -0.674, 0.0, 0.674, 1.645]
            .iter()
            .map(|z| mean + z * variance.sqrt())
            .collect(),
        // Lomax quantiles: x_q = beta ((1 - q)^(-1/alpha) - 1)
        PredictiveDistribution::Lomax { alpha, beta } => QUANTILES
            .iter()
            .map(|q| beta * ((1.0 - q).powf(-1.0 / alpha) - 1.0))
            .collect(),
    }
}

#[test]
fn predictives_match_monte_carlo_oracle_for_every_family() {
    let ids = [
        "pred-bernoulli-beta-1-1",
        "pred-bernoulli-beta-0.5-0.5",
        "pred-categorical-dirichlet-1-1-0.1",
        "pred-gaussian-normal-1-1",
        "pred-exponential-gamma-1-0.5",
        "pred-exponential-gamma-5-1",
    ];
    for (i, id) in ids.iter().enumerate() {
        let spec = task_by_id(id).unwrap();
        for (j, n) in [0usize, 3, 20].into_iter().enumerate() {
            let stats = posterior(&spec, &history(&spec, n, (i * 10 + j) as u64));
            let pred = stats.posterior_predictive();
            let xs = probes(&pred);
            let mc = mc_density(&stats, &xs, (i * 10 + j) as u64);
            for (&x, &m) in xs.iter().zip(&mc) {
                let exact = pred.log_density(x).unwrap().exp();
                assert!(
                    (exact - m).abs() <= 0.01 * m,
                    "{id} n={n} x={x}: closed form {exact} vs oracle {m}"
                );
            }
        }
    }
}

#[test]
fn gaussian_predictive_variance_adds_both_uncertainties() {
    let stats = SufficientStats::Gaussian {
        mean: 0.3,
        precision: 4.0,
        tau: 2.0,
    };
    match stats.posterior_predictive() {
        PredictiveDistribution::Normal { mean, variance } => {
            assert_eq!(mean, 0.3);
            assert!((variance - 0.75).abs() < 1e-15);
        }
        other => panic!("unexpected {other:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn updates_are_exchangeable(task in 0usize..4, n in 0usize..40, seed in any::<u64>()) {
        let id = ["pred-bernoulli-beta-1-5", "pred-categorical-dirichlet-0.5-0.5-0.5", "pred-gaussian-normal-0-1", "pred-exponential-gamma-5-1"][task];
        let spec = task_by_id(id).unwrap();
        let xs = history(&spec, n, seed);
        let reference = posterior(&spec, &xs);
        let mut rng = rng_from(&[seed, Stream::Shuffle as u64]);
        for _ in 0..100 {
            let mut p = xs.clone();
            p.shuffle(&mut rng);
            let s = posterior(&spec, &p);
            prop_assert!(s == reference, "{id}: {s:?} vs {reference:?}");
        }
    }
}
