//! Exact finite-horizon dynamic programming for two-armed Bernoulli bandits.
//!
//! States are integer count offsets `(s1, f1, s2, f2)` from the arm priors,
//! so real-valued priors such as Beta(2, 1) are handled exactly. The step
//! index is the total count, `t = s1 + f1 + s2 + f2`.

use std::collections::HashMap;

use crate::task_env::{Family, TaskKind, TaskSpec};
use crate::{Error, Result};

pub type Counts = [u32; 4];

/// Largest horizon for which the exact table is built (about 6e5 states).
pub const MAX_EXACT_HORIZON: usize = 60;

pub fn counts_total(c: &Counts) -> usize {
    c.iter().map(|&v| v as usize).sum()
}

fn successor(c: &Counts, arm: usize, success: bool) -> Counts {
    let mut n = *c;
    n[2 * arm + usize::from(!success)] += 1;
    n
}

/// Every count vector with the given total.
fn states_at(t: u32) -> impl Iterator<Item = Counts> {
    (0..=t).flat_map(move |s1| {
        (0..=t - s1)
            .flat_map(move |f1| (0..=t - s1 - f1).map(move |s2| [s1, f1, s2, t - s1 - f1 - s2]))
    })
}

#[derive(Clone, Debug)]
pub struct QTable {
    pub priors: [[f64; 2]; 2],
    pub discount: f64,
    pub horizon: usize,
    q: HashMap<Counts, [f64; 2]>,
}

impl QTable {
    pub fn build(spec: &TaskSpec) -> Result<Self> {
        if spec.kind != TaskKind::Bandit || spec.family != Family::Bernoulli {
            return Err(Error::config(format!(
                "exact DP needs a Bernoulli bandit, got {}",
                spec.id
            )));
        }
        let p = |a: usize| [spec.arm_prior(a)[0], spec.arm_prior(a)[1]];
        Self::build_with(p(0), p(1), spec.discount, spec.horizon, MAX_EXACT_HORIZON)
    }

    pub fn build_with(
        prior1: [f64; 2],
        prior2: [f64; 2],
        discount: f64,
        horizon: usize,
        cap: usize,
    ) -> Result<Self> {
        if horizon > cap {
            return Err(Error::config(format!(
                "exact DP horizon {horizon} exceeds cap {cap}"
            )));
        }
        let mut table = Self {
            priors: [prior1, prior2],
            discount,
            horizon,
            q: HashMap::new(),
        };
        for t in (0..horizon as u32).rev() {
            for c in states_at(t) {
                let q = [table.backup(&c, 0), table.backup(&c, 1)];
                table.q.insert(c, q);
            }
        }
        Ok(table)
    }

    pub fn mean(&self, c: &Counts, arm: usize) -> f64 {
        let [a, b] = self.priors[arm];
        let (s, f) = (f64::from(c[2 * arm]), f64::from(c[2 * arm + 1]));
        (a + s) / (a + b + s + f)
    }

    /// `max_a Q(a | c)`, zero once the horizon is reached.
    pub fn value(&self, c: &Counts) -> f64 {
        if counts_total(c) >= self.horizon {
            return 0.0;
        }
        let q = self.q[c];
        q[0].max(q[1])
    }

    /// Right-hand side of the Bellman recursion for `Q(arm | c)`.
    fn backup(&self, c: &Counts, arm: usize) -> f64 {
        let mu = self.mean(c, arm);
        let g = self.discount;
        mu * (1.0 + g * self.value(&successor(c, arm, true)))
            + (1.0 - mu) * g * self.value(&successor(c, arm, false))
    }

    pub fn q(&self, c: &Counts) -> Result<[f64; 2]> {
        if counts_total(c) >= self.horizon {
            return Ok([0.0, 0.0]);
        }
        self.q
            .get(c)
            .copied()
            .ok_or_else(|| Error::argument(format!("counts {c:?} not in the table")))
    }

    /// Q-values at Beta posteriors given as absolute hyperparameters.
    pub fn q_at(&self, arms: [[f64; 2]; 2]) -> Result<[f64; 2]> {
        let mut c = [0u32; 4];
        for (arm, ab) in arms.iter().enumerate() {
            for k in 0..2 {
                let off = ab[k] - self.priors[arm][k];
                let r = off.round();
                if (off - r).abs() > 1e-9 || r < 0.0 {
                    return Err(Error::argument(format!(
                        "posterior {arms:?} is not reachable from the priors"
                    )));
                }
                c[2 * arm + k] = r as u32;
            }
        }
        self.q(&c)
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    /// Largest absolute Bellman residual over all memoized states.
    pub fn max_bellman_residual(&self) -> f64 {
        self.q
            .iter()
            .flat_map(|(c, q)| (0..2).map(move |a| (q[a] - self.backup(c, a)).abs()))
            .fold(0.0, f64::max)
    }

    /// Expected discounted return of following the greedy policy from the prior.
    pub fn optimal_return(&self) -> f64 {
        self.value(&[0; 4])
    }
}

/// Exact expected discounted return of a deterministic counts-based policy,
/// by backward induction over the states it can reach.
pub fn policy_value<F: FnMut(&Counts) -> usize>(table: &QTable, mut policy: F) -> f64 {
    let mut memo: HashMap<Counts, f64> = HashMap::new();
    for t in (0..table.horizon as u32).rev() {
        for c in states_at(t) {
            let a = policy(&c);
            let mu = table.mean(&c, a);
            let v = |n: Counts| {
                if counts_total(&n) >= table.horizon {
                    0.0
                } else {
                    memo[&n]
                }
            };
            let g = table.discount;
            let val = mu * (1.0 + g * v(successor(&c, a, true)))
                + (1.0 - mu) * g * v(successor(&c, a, false));
            memo.insert(c, val);
        }
    }
    memo.get(&[0; 4]).copied().unwrap_or(0.0)
}
