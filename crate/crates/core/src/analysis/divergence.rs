//! KL and Jensen-Shannon divergences between predictive distributions.
//!
//! Discrete families and the Normal have closed forms. Lomax KL and every
//! continuous JS divergence are Monte-Carlo estimates from a fixed-seed stream.

use crate::bayes_agent::PredictiveDistribution;
use crate::seeding::{rng_from, Stream};
use crate::{Error, Result};

/// Log density ratios are clipped to ±ln(1e30).
const LOG_RATIO_CLIP: f64 = 69.077_552_789_821_37;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonteCarlo {
    pub samples: usize,
    pub seed: u64,
}

impl Default for MonteCarlo {
    fn default() -> Self {
        Self {
            samples: 10_000,
            seed: 0,
        }
    }
}

impl MonteCarlo {
    /// The same settings on an independent stream.
    pub fn keyed(&self, keys: &[u64]) -> Self {
        let mut k = vec![self.seed];
        k.extend_from_slice(keys);
        Self {
            samples: self.samples,
            seed: crate::seeding::derive(&k),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    /// Zero for closed forms.
    pub std_error: f64,
}

impl Estimate {
    fn exact(value: f64) -> Self {
        Self {
            value,
            std_error: 0.0,
        }
    }
}

fn xlogy_ratio(p: f64, q: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        p * (p / q).ln()
    }
}

fn mismatch(p: &PredictiveDistribution, q: &PredictiveDistribution) -> Error {
    Error::contract(format!(
        "divergence between different families: {p:?} vs {q:?}"
    ))
}

fn mean_and_se(xs: impl Iterator<Item = f64>) -> Estimate {
    let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
    for x in xs {
        n += 1.0;
        let d = x - mean;
        mean += d / n;
        m2 += d * (x - mean);
    }
    let var = if n > 1.0 { m2 / (n - 1.0) } else { 0.0 };
    Estimate {
        value: mean,
        std_error: (var / n.max(1.0)).sqrt(),
    }
}

/// `KL(p ‖ q)`.
pub fn kl_divergence(
    p: &PredictiveDistribution,
    q: &PredictiveDistribution,
    mc: &MonteCarlo,
) -> Result<Estimate> {
    use PredictiveDistribution::*;
    Ok(match (*p, *q) {
        (Bernoulli { p: a }, Bernoulli { p: b }) => {
            Estimate::exact(xlogy_ratio(a, b) + xlogy_ratio(1.0 - a, 1.0 - b))
        }
        (Categorical { p: a }, Categorical { p: b }) => {
            Estimate::exact(a.iter().zip(&b).map(|(&x, &y)| xlogy_ratio(x, y)).sum())
        }
        (
            Normal {
                mean: m1,
                variance: v1,
            },
            Normal {
                mean: m2,
                variance: v2,
            },
        ) => Estimate::exact(0.5 * ((v2 / v1).ln() + (v1 + (m1 - m2).powi(2)) / v2 - 1.0)),
        (Lomax { .. }, Lomax { .. }) => {
            let mut rng = rng_from(&[mc.seed, Stream::MonteCarlo as u64]);
            mean_and_se((0..mc.samples).map(|_| {
                let x = p.sample(&mut rng);
                (p.log_density_or_neg_inf(x) - q.log_density_or_neg_inf(x))
                    .clamp(-LOG_RATIO_CLIP, LOG_RATIO_CLIP)
            }))
        }
        _ => return Err(mismatch(p, q)),
    })
}

/// `½ KL(p ‖ m) + ½ KL(q ‖ m)` with `m = (p + q) / 2`, in nats.
pub fn js_divergence(
    p: &PredictiveDistribution,
    q: &PredictiveDistribution,
    mc: &MonteCarlo,
) -> Result<Estimate> {
    use PredictiveDistribution::*;
    let half =
        |a: f64, b: f64| 0.5 * (xlogy_ratio(a, 0.5 * (a + b)) + xlogy_ratio(b, 0.5 * (a + b)));
    Ok(match (*p, *q) {
        (Bernoulli { p: a }, Bernoulli { p: b }) => {
            Estimate::exact(half(a, b) + half(1.0 - a, 1.0 - b))
        }
        (Categorical { p: a }, Categorical { p: b }) => {
            Estimate::exact(a.iter().zip(&b).map(|(&x, &y)| half(x, y)).sum())
        }
        (Normal { .. }, Normal { .. }) | (Lomax { .. }, Lomax { .. }) => {
            let mut rng = rng_from(&[mc.seed, Stream::MonteCarlo as u64]);
            let ln2 = std::f64::consts::LN_2;
            let term = |lp: f64, lq: f64| {
                // log(p / m) = log 2 + lp - logaddexp(lp, lq)
                let hi = lp.max(lq);
                let lse = hi + ((lp - hi).exp() + (lq - hi).exp()).ln();
                ln2 + lp - lse
            };
            // pair one sample from each side so the estimator is symmetric in (p, q)
            mean_and_se((0..mc.samples).map(|_| {
                let x = p.sample(&mut rng);
                let y = q.sample(&mut rng);
                let (px, qx) = (p.log_density_or_neg_inf(x), q.log_density_or_neg_inf(x));
                let (py, qy) = (p.log_density_or_neg_inf(y), q.log_density_or_neg_inf(y));
                0.5 * (term(px, qx) + term(qy, py))
            }))
        }
        _ => return Err(mismatch(p, q)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use PredictiveDistribution::*;

    #[test]
    fn closed_forms() {
        let mc = MonteCarlo::default();
        let a = Bernoulli { p: 0.5 };
        let b = Bernoulli { p: 0.75 };
        let want = 0.5 * (0.5f64 / 0.75).ln() + 0.5 * (0.5f64 / 0.25).ln();
        assert!((kl_divergence(&a, &b, &mc).unwrap().value - want).abs() < 1e-15);
        let n0 = Normal {
            mean: 0.0,
            variance: 1.0,
        };
        let n1 = Normal {
            mean: 0.1,
            variance: 1.0,
        };
        assert!((kl_divergence(&n0, &n1, &mc).unwrap().value - 0.005).abs() < 1e-15);
        let js = js_divergence(&Bernoulli { p: 1.0 }, &Bernoulli { p: 0.0 }, &mc)
            .unwrap()
            .value;
        assert!((js - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(js_divergence(&a, &a, &mc).unwrap().value, 0.0);
        assert_eq!(
            js_divergence(&a, &b, &mc).unwrap(),
            js_divergence(&b, &a, &mc).unwrap()
        );
    }

    #[test]
    fn monte_carlo_estimates() {
        let mc = MonteCarlo {
            samples: 20_000,
            seed: 3,
        };
        let p = Lomax {
            alpha: 2.0,
            beta: 1.0,
        };
        assert_eq!(kl_divergence(&p, &p, &mc).unwrap().value, 0.0);
        let q = Lomax {
            alpha: 3.0,
            beta: 2.0,
        };
        let e = kl_divergence(&p, &q, &mc).unwrap();
        assert!(e.value > 0.0 && e.std_error > 0.0);
        let n0 = Normal {
            mean: 0.0,
            variance: 1.0,
        };
        let n1 = Normal {
            mean: 0.5,
            variance: 1.0,
        };
        let js01 = js_divergence(&n0, &n1, &mc).unwrap();
        let js10 = js_divergence(&n1, &n0, &mc).unwrap();
        assert!((js01.value - js10.value).abs() < 4.0 * (js01.std_error + js10.std_error));
        assert!(js01.value > 0.0 && js01.value < std::f64::consts::LN_2);
        assert!(kl_divergence(&n0, &p, &mc).is_err());
    }
}
