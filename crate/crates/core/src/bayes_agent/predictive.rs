use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Posterior (or model) predictive distribution over the next observation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PredictiveDistribution {
    Bernoulli {
        p: f64,
    },
    Categorical {
        p: [f64; 3],
    },
    Normal {
        mean: f64,
        variance: f64,
    },
    /// Lomax (Pareto type II) with shape `alpha` and scale `beta`:
    /// density `alpha * beta^alpha / (beta + x)^(alpha + 1)` on `x >= 0`.
    Lomax {
        alpha: f64,
        beta: f64,
    },
}

/// Returned when a log density is requested outside the support.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OutOfSupport;

impl OutOfSupport {
    pub fn value(self) -> f64 {
        f64::NEG_INFINITY
    }
}

impl PredictiveDistribution {
    pub fn is_valid(&self) -> bool {
        match *self {
            Self::Bernoulli { p } => (0.0..=1.0).contains(&p),
            Self::Categorical { p } => {
                p.iter().all(|q| (0.0..=1.0).contains(q))
                    && (p.iter().sum::<f64>() - 1.0).abs() < 1e-9
            }
            Self::Normal { mean, variance } => {
                mean.is_finite() && variance > 0.0 && variance.is_finite()
            }
            Self::Lomax { alpha, beta } => {
                alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()
            }
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Self::Bernoulli { .. } | Self::Categorical { .. })
    }

    /// Exact log density (continuous) or log mass (discrete) at `x`.
    pub fn log_density(&self, x: f64) -> Result<f64, OutOfSupport> {
        match *self {
            Self::Bernoulli { p } => {
                if x == 1.0 {
                    Ok(p.ln())
                } else if x == 0.0 {
                    Ok((1.0 - p).ln())
                } else {
                    Err(OutOfSupport)
                }
            }
            Self::Categorical { p } => {
                if x >= 0.0 && x < 3.0 && x.fract() == 0.0 {
                    Ok(p[x as usize].ln())
                } else {
                    Err(OutOfSupport)
                }
            }
            Self::Normal { mean, variance } => {
                if !x.is_finite() {
                    return Err(OutOfSupport);
                }
                Ok(-0.5 * (2.0 * PI * variance).ln() - 0.5 * (x - mean).powi(2) / variance)
            }
            Self::Lomax { alpha, beta } => {
                if !(x >= 0.0) || !x.is_finite() {
                    return Err(OutOfSupport);
                }
                Ok(alpha.ln() + alpha * beta.ln() - (alpha + 1.0) * (beta + x).ln())
            }
        }
    }

    /// Log density with `-inf` outside the support.
    pub fn log_density_or_neg_inf(&self, x: f64) -> f64 {
        self.log_density(x).unwrap_or_else(OutOfSupport::value)
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Bernoulli { p } => p,
            Self::Categorical { p } => p[1] + 2.0 * p[2],
            Self::Normal { mean, .. } => mean,
            Self::Lomax { alpha, beta } => {
                if alpha > 1.0 {
                    beta / (alpha - 1.0)
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Bernoulli { p } => {
                if rng.random::<f64>() < p {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Categorical { p } => {
                let u: f64 = rng.random();
                if u < p[0] {
                    0.0
                } else if u < p[0] + p[1] {
                    1.0
                } else {
                    2.0
                }
            }
            Self::Normal { mean, variance } => Normal::new(mean, variance.sqrt())
                .expect("valid normal")
                .sample(rng),
            Self::Lomax { alpha, beta } => {
                // inverse CDF of 1 - (1 + x / beta)^(-alpha)
                let u: f64 = 1.0 - rng.random::<f64>();
                beta * (u.powf(-1.0 / alpha) - 1.0)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn closed_form_log_densities() {
        let b = PredictiveDistribution::Bernoulli { p: 0.5 };
        assert_abs_diff_eq!(b.log_density(1.0).unwrap(), 0.5f64.ln(), epsilon = 1e-15);
        let n = PredictiveDistribution::Normal {
            mean: 0.0,
            variance: 1.0,
        };
        assert_abs_diff_eq!(
            n.log_density(0.0).unwrap(),
            -0.5 * (2.0 * PI).ln(),
            epsilon = 1e-15
        );
        let l = PredictiveDistribution::Lomax {
            alpha: 2.0,
            beta: 1.0,
        };
        assert_abs_diff_eq!(l.log_density(1.0).unwrap(), 0.25f64.ln(), epsilon = 1e-15);
        let l11 = PredictiveDistribution::Lomax {
            alpha: 1.0,
            beta: 1.0,
        };
        assert_abs_diff_eq!(l11.log_density(0.0).unwrap().exp(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn out_of_support_is_explicit() {
        assert_eq!(
            PredictiveDistribution::Bernoulli { p: 0.3 }.log_density(0.5),
            Err(OutOfSupport)
        );
        let c = PredictiveDistribution::Categorical { p: [0.2, 0.3, 0.5] };
        assert!(c.log_density(3.0).is_err());
        assert!(c.log_density(-1.0).is_err());
        let l = PredictiveDistribution::Lomax {
            alpha: 1.0,
            beta: 1.0,
        };
        assert_eq!(l.log_density_or_neg_inf(-0.1), f64::NEG_INFINITY);
    }

    #[test]
    fn lomax_sampler_matches_mean() {
        let l = PredictiveDistribution::Lomax {
            alpha: 4.0,
            beta: 3.0,
        };
        let mut rng = crate::seeding::rng_from(&[1]);
        let n = 200_000;
        let m: f64 = (0..n).map(|_| l.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((m - 1.0).abs() < 0.02, "{m}");
    }
}
