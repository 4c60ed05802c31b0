use serde::{Deserialize, Serialize};

use super::PredictiveDistribution;
use crate::task_env::Family;
use crate::{Error, Result};

/// Conjugate hyperparameters: the complete state of a Bayes-optimal predictor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SufficientStats {
    /// Beta(alpha, beta) over a Bernoulli bias.
    Bernoulli { alpha: f64, beta: f64 },
    /// Dirichlet(alpha) over three category probabilities.
    Categorical { alpha: [f64; 3] },
    /// Normal(mean, 1/precision) over an unknown mean with known observation precision `tau`.
    Gaussian { mean: f64, precision: f64, tau: f64 },
    /// Gamma(shape alpha, rate beta) over an exponential rate.
    Exponential { alpha: f64, beta: f64 },
}

impl SufficientStats {
    pub fn family(&self) -> Family {
        match self {
            Self::Bernoulli { .. } => Family::Bernoulli,
            Self::Categorical { .. } => Family::Categorical3,
            Self::Gaussian { .. } => Family::Gaussian,
            Self::Exponential { .. } => Family::Exponential,
        }
    }

    /// Builds the prior from a task's hyperparameter list.
    pub fn from_prior(family: Family, prior: &[f64], tau: Option<f64>) -> Result<Self> {
        let need = family.prior_len();
        if prior.len() != need {
            return Err(Error::config(format!(
                "{family:?} prior needs {need} hyperparameters, got {}",
                prior.len()
            )));
        }
        let stats = match family {
            Family::Bernoulli => Self::Bernoulli {
                alpha: prior[0],
                beta: prior[1],
            },
            Family::Categorical3 => Self::Categorical {
                alpha: [prior[0], prior[1], prior[2]],
            },
            Family::Exponential => Self::Exponential {
                alpha: prior[0],
                beta: prior[1],
            },
            Family::Gaussian => {
                let tau =
                    tau.ok_or_else(|| Error::config("gaussian family needs a known precision"))?;
                Self::Gaussian {
                    mean: prior[0],
                    precision: prior[1],
                    tau,
                }
            }
        };
        if !stats.is_valid() {
            return Err(Error::config(format!(
                "invalid prior hyperparameters {prior:?} for {family:?}"
            )));
        }
        Ok(stats)
    }

    pub fn is_valid(&self) -> bool {
        let pos = |x: f64| x > 0.0 && x.is_finite();
        match *self {
            Self::Bernoulli { alpha, beta } | Self::Exponential { alpha, beta } => {
                pos(alpha) && pos(beta)
            }
            Self::Categorical { alpha } => alpha.iter().all(|&a| pos(a)),
            Self::Gaussian {
                mean,
                precision,
                tau,
            } => mean.is_finite() && pos(precision) && pos(tau),
        }
    }

    /// Conjugate update with one observation.
    pub fn update(&self, x: f64) -> Result<Self> {
        let bad = || Error::argument(format!("observation {x} invalid for {:?}", self.family()));
        Ok(match *self {
            Self::Bernoulli { alpha, beta } => {
                if x != 0.0 && x != 1.0 {
                    return Err(bad());
                }
                Self::Bernoulli {
                    alpha: alpha + x,
                    beta: beta + (1.0 - x),
                }
            }
            Self::Categorical { mut alpha } => {
                if !(x == 0.0 || x == 1.0 || x == 2.0) {
                    return Err(bad());
                }
                alpha[x as usize] += 1.0;
                Self::Categorical { alpha }
            }
            Self::Gaussian {
                mean,
                precision,
                tau,
            } => {
                if !x.is_finite() {
                    return Err(bad());
                }
                Self::Gaussian {
                    mean: (precision * mean + tau * x) / (precision + tau),
                    precision: precision + tau,
                    tau,
                }
            }
            Self::Exponential { alpha, beta } => {
                if !(x >= 0.0) || !x.is_finite() {
                    return Err(bad());
                }
                Self::Exponential {
                    alpha: alpha + 1.0,
                    beta: beta + x,
                }
            }
        })
    }

    /// Updates with a whole sequence. Observations are folded in sorted order,
    /// so the result is bitwise identical for every permutation of `xs`.
    pub fn update_all(&self, xs: &[f64]) -> Result<Self> {
        let mut sorted = xs.to_vec();
        sorted.sort_by(f64::total_cmp);
        sorted.iter().try_fold(*self, |s, &x| s.update(x))
    }

    pub fn posterior_predictive(&self) -> PredictiveDistribution {
        match *self {
            Self::Bernoulli { alpha, beta } => PredictiveDistribution::Bernoulli {
                p: alpha / (alpha + beta),
            },
            Self::Categorical { alpha } => {
                let s: f64 = alpha.iter().sum();
                PredictiveDistribution::Categorical {
                    p: [alpha[0] / s, alpha[1] / s, alpha[2] / s],
                }
            }
            Self::Gaussian {
                mean,
                precision,
                tau,
            } => PredictiveDistribution::Normal {
                mean,
                variance: 1.0 / precision + 1.0 / tau,
            },
            Self::Exponential { alpha, beta } => PredictiveDistribution::Lomax { alpha, beta },
        }
    }

    /// Posterior mean of the observation model's parameter that sets the expected reward.
    pub fn expected_reward(&self) -> f64 {
        match *self {
            Self::Bernoulli { alpha, beta } => alpha / (alpha + beta),
            Self::Gaussian { mean, .. } => mean,
            Self::Categorical { .. } | Self::Exponential { .. } => {
                self.posterior_predictive().mean()
            }
        }
    }

    /// The state vector exposed to structural analysis (the known precision is a constant, not state).
    pub fn to_vec(&self) -> Vec<f64> {
        match *self {
            Self::Bernoulli { alpha, beta } | Self::Exponential { alpha, beta } => {
                vec![alpha, beta]
            }
            Self::Categorical { alpha } => alpha.to_vec(),
            Self::Gaussian {
                mean, precision, ..
            } => vec![mean, precision],
        }
    }

    pub fn dim(&self) -> usize {
        self.family().stats_dim()
    }

    /// Rebuilds stats of the same family from a state vector, clamping
    /// hyperparameters that must be positive to `min_positive`. Used when
    /// implanting embedded states, which need not be valid.
    pub fn with_vec_clamped(&self, v: &[f64], min_positive: f64) -> Result<Self> {
        if v.len() != self.dim() {
            return Err(Error::contract(format!(
                "state vector length {} != {}",
                v.len(),
                self.dim()
            )));
        }
        let c = |x: f64| {
            if x.is_finite() {
                x.max(min_positive)
            } else {
                min_positive
            }
        };
        Ok(match *self {
            Self::Bernoulli { .. } => Self::Bernoulli {
                alpha: c(v[0]),
                beta: c(v[1]),
            },
            Self::Exponential { .. } => Self::Exponential {
                alpha: c(v[0]),
                beta: c(v[1]),
            },
            Self::Categorical { .. } => Self::Categorical {
                alpha: [c(v[0]), c(v[1]), c(v[2])],
            },
            Self::Gaussian { tau, .. } => Self::Gaussian {
                mean: if v[0].is_finite() { v[0] } else { 0.0 },
                precision: c(v[1]),
                tau,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn update_rules() {
        let b = SufficientStats::Bernoulli {
            alpha: 1.0,
            beta: 1.0,
        }
        .update(1.0)
        .unwrap();
        assert_eq!(
            b,
            SufficientStats::Bernoulli {
                alpha: 2.0,
                beta: 1.0
            }
        );
        let g = SufficientStats::Gaussian {
            mean: 0.0,
            precision: 1.0,
            tau: 1.0,
        }
        .update(2.0)
        .unwrap();
        assert_eq!(
            g,
            SufficientStats::Gaussian {
                mean: 1.0,
                precision: 2.0,
                tau: 1.0
            }
        );
        let e = SufficientStats::Exponential {
            alpha: 5.0,
            beta: 1.0,
        }
        .update(0.5)
        .unwrap();
        assert_eq!(
            e,
            SufficientStats::Exponential {
                alpha: 6.0,
                beta: 1.5
            }
        );
        let c = SufficientStats::Categorical {
            alpha: [1.0, 1.0, 0.1],
        }
        .update(2.0)
        .unwrap();
        assert_eq!(
            c,
            SufficientStats::Categorical {
                alpha: [1.0, 1.0, 1.1]
            }
        );
    }

    #[test]
    fn invalid_observations_are_rejected() {
        assert!(SufficientStats::Exponential {
            alpha: 1.0,
            beta: 1.0
        }
        .update(-0.5)
        .is_err());
        assert!(SufficientStats::Bernoulli {
            alpha: 1.0,
            beta: 1.0
        }
        .update(0.3)
        .is_err());
        assert!(SufficientStats::Categorical { alpha: [1.0; 3] }
            .update(3.0)
            .is_err());
        assert!(SufficientStats::from_prior(Family::Bernoulli, &[0.0, 1.0], None).is_err());
    }

    #[test]
    fn predictive_rules() {
        let b = SufficientStats::Bernoulli {
            alpha: 3.0,
            beta: 2.0,
        }
        .posterior_predictive();
        assert_eq!(b, PredictiveDistribution::Bernoulli { p: 0.6 });
        let g = SufficientStats::Gaussian {
            mean: 1.0,
            precision: 2.0,
            tau: 1.0,
        }
        .posterior_predictive();
        assert_eq!(
            g,
            PredictiveDistribution::Normal {
                mean: 1.0,
                variance: 1.5
            }
        );
        let l = SufficientStats::Exponential {
            alpha: 1.0,
            beta: 1.0,
        }
        .posterior_predictive();
        assert_abs_diff_eq!(l.log_density(0.0).unwrap().exp(), 1.0, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn bernoulli_update_is_exchangeable(xs in prop::collection::vec(0u8..2, 0..30), seed in any::<u64>()) {
            let xs: Vec<f64> = xs.into_iter().map(f64::from).collect();
            let mut ys = xs.clone();
            let mut rng = crate::seeding::rng_from(&[seed]);
            rand::seq::SliceRandom::shuffle(ys.as_mut_slice(), &mut rng);
            let prior = SufficientStats::Bernoulli { alpha: 0.5, beta: 0.5 };
            prop_assert_eq!(prior.update_all(&xs).unwrap(), prior.update_all(&ys).unwrap());
        }
    }
}
