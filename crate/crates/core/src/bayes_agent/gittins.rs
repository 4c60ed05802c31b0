//! Gittins indices by retirement-option calibration.
//!
//! For a single arm and a retirement reward `λ` per step (a perpetuity worth
//! `λ / (1 - γ)`), the index is the `λ` at which continuing to pull the arm
//! and retiring immediately have equal value. The arm's value under a given
//! `λ` is computed by backward induction truncated at depth `H`; the index is
//! found by bisection on `λ`.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianGridSpec {
    /// Half-width of the standardized posterior-mean grid, in root posterior std units.
    pub half_range: f64,
    pub step: f64,
    /// Gauss-Hermite order for the posterior-mean transition.
    pub quadrature_order: usize,
    /// Geometric grid of effective observation counts `p / τ` for the index table.
    pub n_eff_min: f64,
    pub n_eff_max: f64,
    pub n_eff_points: usize,
}

impl Default for GaussianGridSpec {
    fn default() -> Self {
        Self {
            half_range: 6.0,
            step: 0.025,
            quadrature_order: 12,
            n_eff_min: 0.5,
            n_eff_max: 64.0,
            n_eff_points: 41,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GittinsConfig {
    pub discount: f64,
    /// Calibration horizon `H`.
    pub horizon: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub gaussian: GaussianGridSpec,
}

impl Default for GittinsConfig {
    fn default() -> Self {
        Self {
            discount: 0.95,
            horizon: 400,
            tolerance: 1e-6,
            max_iterations: 200,
            gaussian: GaussianGridSpec::default(),
        }
    }
}

impl GittinsConfig {
    pub fn with_discount(discount: f64) -> Self {
        Self {
            discount,
            ..Self::default()
        }
    }

    /// The value lost by truncating the calibration at depth `H`.
    pub fn truncation_bound(&self) -> f64 {
        self.discount.powi(self.horizon as i32) / (1.0 - self.discount)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return Err(Error::config(format!(
                "Gittins discount {} outside (0, 1)",
                self.discount
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::config("Gittins tolerance must be positive"));
        }
        if self.truncation_bound() >= self.tolerance {
            return Err(Error::config(format!(
                "calibration horizon {} too short: γ^H/(1-γ) = {:e} >= tolerance {:e}",
                self.horizon,
                self.truncation_bound(),
                self.tolerance
            )));
        }
        let g = &self.gaussian;
        if !(g.step > 0.0 && g.half_range > g.step && g.quadrature_order >= 2) {
            return Err(Error::config("invalid Gaussian grid"));
        }
        if !(g.n_eff_min > 0.0 && g.n_eff_max > g.n_eff_min && g.n_eff_points >= 2) {
            return Err(Error::config("invalid Gaussian n_eff grid"));
        }
        Ok(())
    }

    /// Cache key: hex SHA-256 of the canonical JSON of this config plus `extra`.
    pub fn digest(&self, extra: &str) -> String {
        let json = serde_json::to_value(self)
            .expect("config serializes")
            .to_string();
        let mut h = Sha256::new();
        h.update(json.as_bytes());
        h.update(extra.as_bytes());
        h.finalize()
            .iter()
            .take(8)
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

fn bisect<F: FnMut(f64) -> f64>(
    mut lo: f64,
    mut hi: f64,
    cfg: &GittinsConfig,
    mut excess: F,
) -> Result<f64> {
    // excess(λ) = continue value - retirement value, non-increasing in λ
    for _ in 0..cfg.max_iterations {
        if hi - lo <= cfg.tolerance {
            return Ok(0.5 * (lo + hi));
        }
        let mid = 0.5 * (lo + hi);
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::numeric(format!(
        "Gittins bisection did not converge in {} iterations, bracket [{lo}, {hi}]",
        cfg.max_iterations
    )))
}

/// Value of continuing a Beta(α, β) arm once more (then behaving optimally
/// with the retirement option) minus the retirement value.
fn bernoulli_excess(
    alpha: f64,
    beta: f64,
    lambda: f64,
    cfg: &GittinsConfig,
    buf: &mut Vec<f64>,
) -> f64 {
    let g = cfg.discount;
    let h = cfg.horizon;
    let retire = lambda / (1.0 - g);
    buf.clear();
    // depth h: index by successes s = 0..=h
    let n_h = alpha + beta + h as f64;
    buf.extend((0..=h).map(|s| {
        let mu = (alpha + s as f64) / n_h;
        lambda.max(mu) / (1.0 - g)
    }));
    for d in (1..h).rev() {
        let n_d = alpha + beta + d as f64;
        for s in 0..=d {
            let mu = (alpha + s as f64) / n_d;
            let cont = mu * (1.0 + g * buf[s + 1]) + (1.0 - mu) * g * buf[s];
            buf[s] = retire.max(cont);
        }
    }
    let mu = alpha / (alpha + beta);
    let cont = if h >= 1 {
        mu * (1.0 + g * buf[1]) + (1.0 - mu) * g * buf[0]
    } else {
        mu / (1.0 - g)
    };
    cont - retire
}

/// Gittins index of a Bernoulli arm with posterior Beta(α, β).
pub fn gittins_index_bernoulli(alpha: f64, beta: f64, cfg: &GittinsConfig) -> Result<f64> {
    cfg.validate()?;
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::argument(format!(
            "Beta({alpha}, {beta}) is not a valid posterior"
        )));
    }
    let mu = alpha / (alpha + beta);
    let mut buf = Vec::with_capacity(cfg.horizon + 1);
    bisect(mu, 1.0, cfg, |l| {
        bernoulli_excess(alpha, beta, l, cfg, &mut buf)
    })
}

/// Probabilists' Gauss-Hermite rule: `E[f(Z)] ≈ Σ w_i f(z_i)` for `Z ~ N(0, 1)`.
pub fn gauss_hermite(order: usize) -> (Vec<f64>, Vec<f64>) {
    // Golub-Welsch on the Jacobi matrix of the monic Hermite_e recurrence
    let jacobi = DMatrix::from_fn(order, order, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..order)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

struct GaussianSolver {
    grid: Vec<f64>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    lo: f64,
    step: f64,
}

impl GaussianSolver {
    fn new(cfg: &GittinsConfig) -> Self {
        let g = &cfg.gaussian;
        let m = (2.0 * g.half_range / g.step).round() as usize;
        let grid = (0..=m).map(|j| -g.half_range + j as f64 * g.step).collect();
        let (nodes, weights) = gauss_hermite(g.quadrature_order);
        Self {
            grid,
            nodes,
            weights,
            lo: -g.half_range,
            step: g.step,
        }
    }

    #[inline]
    fn interp(&self, v: &[f64], u: f64, outside: impl Fn(f64) -> f64) -> f64 {
        let pos = (u - self.lo) / self.step;
        if pos < 0.0 || pos >= (v.len() - 1) as f64 {
            return outside(u);
        }
        let j = pos as usize;
        let w = pos - j as f64;
        v[j] * (1.0 - w) + v[j + 1] * w
    }

    /// Continue-minus-retire value at the root, in root-posterior-std units
    /// (root mean 0, retirement reward `nu`).
    fn excess(
        &self,
        n0: f64,
        nu: f64,
        cfg: &GittinsConfig,
        v: &mut Vec<f64>,
        next: &mut Vec<f64>,
    ) -> f64 {
        let g = cfg.discount;
        let retire = nu / (1.0 - g);
        let outside = |u: f64| nu.max(u) / (1.0 - g);
        v.clear();
        v.extend(self.grid.iter().map(|&u| outside(u)));
        for k in (1..cfg.horizon).rev() {
            let n = n0 + k as f64;
            let sigma = (n0 / (n * (n + 1.0))).sqrt();
            next.clear();
            for &u in &self.grid {
                let ev: f64 = self
                    .nodes
                    .iter()
                    .zip(&self.weights)
                    .map(|(z, w)| w * self.interp(v, u + sigma * z, outside))
                    .sum();
                next.push(retire.max(u + g * ev));
            }
            std::mem::swap(v, next);
        }
        let sigma0 = (1.0 / (n0 + 1.0)).sqrt();
        let ev: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(z, w)| w * self.interp(v, sigma0 * z, outside))
            .sum();
        g * ev - retire
    }
}

/// Standardized Gaussian index `ν̃(n_eff)` for an arm with zero posterior mean
/// and unit posterior std, `n_eff = p / τ`. The index of an arm with posterior
/// Normal(m, 1/p) is `m + ν̃(p/τ) / √p`.
pub fn gittins_index_gaussian(n_eff: f64, cfg: &GittinsConfig) -> Result<f64> {
    cfg.validate()?;
    let solver = GaussianSolver::new(cfg);
    gaussian_index_with(&solver, n_eff, cfg)
}

fn gaussian_index_with(solver: &GaussianSolver, n_eff: f64, cfg: &GittinsConfig) -> Result<f64> {
    if !(n_eff > 0.0 && n_eff.is_finite()) {
        return Err(Error::argument(format!(
            "effective count {n_eff} must be positive"
        )));
    }
    let (mut v, mut next) = (Vec::new(), Vec::new());
    let mut hi = 0.5;
    while solver.excess(n_eff, hi, cfg, &mut v, &mut next) > 0.0 {
        hi *= 2.0;
        if hi > solver.grid.last().copied().unwrap_or(1.0) {
            return Err(Error::numeric(format!(
                "Gaussian index exceeds grid range at n_eff={n_eff}"
            )));
        }
    }
    bisect(0.0, hi, cfg, |nu| {
        solver.excess(n_eff, nu, cfg, &mut v, &mut next)
    })
}

/// Indices of one Bernoulli arm prior for every posterior reachable with at most `max_pulls` pulls.
#[derive(Clone, Debug, PartialEq)]
pub struct BernoulliGittinsTable {
    pub prior: (f64, f64),
    pub discount: f64,
    pub max_pulls: usize,
    /// Keyed by (successes, failures).
    values: HashMap<(u32, u32), f64>,
}

impl BernoulliGittinsTable {
    pub fn build(prior: (f64, f64), max_pulls: usize, cfg: &GittinsConfig) -> Result<Self> {
        let mut values = HashMap::new();
        for n in 0..=max_pulls as u32 {
            for s in 0..=n {
                let f = n - s;
                let idx =
                    gittins_index_bernoulli(prior.0 + f64::from(s), prior.1 + f64::from(f), cfg)?;
                values.insert((s, f), idx);
            }
        }
        Ok(Self {
            prior,
            discount: cfg.discount,
            max_pulls,
            values,
        })
    }

    pub fn get(&self, successes: u32, failures: u32) -> Option<f64> {
        self.values.get(&(successes, failures)).copied()
    }

    /// Index at posterior Beta(α, β), if it is a tabulated offset of the prior.
    pub fn lookup(&self, alpha: f64, beta: f64) -> Option<f64> {
        let s = alpha - self.prior.0;
        let f = beta - self.prior.1;
        let (sr, fr) = (s.round(), f.round());
        if (s - sr).abs() > 1e-9 || (f - fr).abs() > 1e-9 || sr < 0.0 || fr < 0.0 {
            return None;
        }
        self.get(sr as u32, fr as u32)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn rows(&self) -> Vec<IndexRow> {
        let mut keys: Vec<_> = self.values.keys().copied().collect();
        keys.sort();
        keys.into_iter()
            .map(|(s, f)| IndexRow {
                family: "bernoulli".into(),
                hyper1: self.prior.0 + f64::from(s),
                hyper2: Some(self.prior.1 + f64::from(f)),
                gamma: self.discount,
                index: self.values[&(s, f)],
            })
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_rows(path, &self.rows())
    }

    pub fn read_csv(path: &Path, prior: (f64, f64), max_pulls: usize) -> Result<Self> {
        let rows = read_rows(path)?;
        let mut values = HashMap::new();
        let mut discount = None;
        for r in rows {
            let fmt = |m: &str| Error::Format {
                path: path.to_path_buf(),
                msg: m.to_string(),
            };
            if r.family != "bernoulli" {
                return Err(fmt("non-bernoulli row in bernoulli table"));
            }
            let beta = r.hyper2.ok_or_else(|| fmt("missing beta"))?;
            let (s, f) = ((r.hyper1 - prior.0).round(), (beta - prior.1).round());
            if s < 0.0 || f < 0.0 {
                return Err(fmt("row below the prior"));
            }
            values.insert((s as u32, f as u32), r.index);
            discount = Some(r.gamma);
        }
        let discount = discount.ok_or_else(|| Error::Format {
            path: path.to_path_buf(),
            msg: "empty table".into(),
        })?;
        Ok(Self {
            prior,
            discount,
            max_pulls,
            values,
        })
    }
}

/// `ν̃` on a geometric grid of effective counts, linearly interpolated.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianGittinsTable {
    pub discount: f64,
    pub n_eff: Vec<f64>,
    pub nu: Vec<f64>,
}

impl GaussianGittinsTable {
    pub fn build(cfg: &GittinsConfig) -> Result<Self> {
        cfg.validate()?;
        let g = &cfg.gaussian;
        let ratio = (g.n_eff_max / g.n_eff_min).powf(1.0 / (g.n_eff_points - 1) as f64);
        let n_eff: Vec<f64> = (0..g.n_eff_points)
            .map(|i| g.n_eff_min * ratio.powi(i as i32))
            .collect();
        let solver = GaussianSolver::new(cfg);
        let nu = n_eff
            .iter()
            .map(|&n| gaussian_index_with(&solver, n, cfg))
            .collect::<Result<Vec<_>>>()?;
        let table = Self {
            discount: cfg.discount,
            n_eff,
            nu,
        };
        table.check_monotone(cfg.tolerance)?;
        Ok(table)
    }

    fn check_monotone(&self, tol: f64) -> Result<()> {
        for w in self.nu.windows(2).zip(self.n_eff.windows(2)) {
            if w.0[1] > w.0[0] + tol {
                return Err(Error::numeric(format!(
                    "Gaussian index increases between n_eff {} and {} ({} -> {}): grid too coarse",
                    w.1[0], w.1[1], w.0[0], w.0[1]
                )));
            }
        }
        Ok(())
    }

    pub fn standardized_index(&self, n_eff: f64) -> Result<f64> {
        let (first, last) = (self.n_eff[0], *self.n_eff.last().expect("non-empty"));
        if !(n_eff >= first * (1.0 - 1e-12) && n_eff <= last * (1.0 + 1e-12)) {
            return Err(Error::config(format!(
                "n_eff {n_eff} outside Gittins table range [{first}, {last}]"
            )));
        }
        let k = self
            .n_eff
            .partition_point(|&n| n <= n_eff)
            .clamp(1, self.n_eff.len() - 1);
        let (n0, n1) = (self.n_eff[k - 1], self.n_eff[k]);
        let w = ((n_eff - n0) / (n1 - n0)).clamp(0.0, 1.0);
        Ok(self.nu[k - 1] * (1.0 - w) + self.nu[k] * w)
    }

    /// Index of an arm with posterior Normal(mean, 1/precision) and observation precision `tau`.
    pub fn index(&self, mean: f64, precision: f64, tau: f64) -> Result<f64> {
        Ok(mean + self.standardized_index(precision / tau)? / precision.sqrt())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows: Vec<IndexRow> = self
            .n_eff
            .iter()
            .zip(&self.nu)
            .map(|(&n, &nu)| IndexRow {
                family: "gaussian".into(),
                hyper1: n,
                hyper2: None,
                gamma: self.discount,
                index: nu,
            })
            .collect();
        write_rows(path, &rows)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let rows = read_rows(path)?;
        let fmt = |m: &str| Error::Format {
            path: path.to_path_buf(),
            msg: m.to_string(),
        };
        if rows.len() < 2 || rows.iter().any(|r| r.family != "gaussian") {
            return Err(fmt("expected at least two gaussian rows"));
        }
        Ok(Self {
            discount: rows[0].gamma,
            n_eff: rows.iter().map(|r| r.hyper1).collect(),
            nu: rows.iter().map(|r| r.index).collect(),
        })
    }
}

/// CSV row: `family,hyper1,hyper2,gamma,index`. Bernoulli rows hold (α, β);
/// Gaussian rows hold `n_eff` and the standardized index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct IndexRow {
    family: String,
    hyper1: f64,
    hyper2: Option<f64>,
    gamma: f64,
    index: f64,
}

fn write_rows(path: &Path, rows: &[IndexRow]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows(path: &Path) -> Result<Vec<IndexRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

/// Directory for cached tables: `$METABAYES_CACHE` if set.
pub fn cache_dir() -> Option<PathBuf> {
    std::env::var_os("METABAYES_CACHE").map(PathBuf::from)
}

/// Loads a Bernoulli table from `dir` if cached under this config's digest, otherwise builds and stores it.
pub fn bernoulli_table_cached(
    dir: Option<&Path>,
    prior: (f64, f64),
    max_pulls: usize,
    cfg: &GittinsConfig,
) -> Result<BernoulliGittinsTable> {
    let Some(dir) = dir else {
        return BernoulliGittinsTable::build(prior, max_pulls, cfg);
    };
    let key = cfg.digest(&format!("bernoulli:{}:{}:{}", prior.0, prior.1, max_pulls));
    let path = dir.join(format!("gittins_bernoulli_{key}.csv"));
    if path.exists() {
        return BernoulliGittinsTable::read_csv(&path, prior, max_pulls);
    }
    let table = BernoulliGittinsTable::build(prior, max_pulls, cfg)?;
    table.write_csv(&path)?;
    Ok(table)
}

pub fn gaussian_table_cached(
    dir: Option<&Path>,
    cfg: &GittinsConfig,
) -> Result<GaussianGittinsTable> {
    let Some(dir) = dir else {
        return GaussianGittinsTable::build(cfg);
    };
    let path = dir.join(format!("gittins_gaussian_{}.csv", cfg.digest("gaussian")));
    if path.exists() {
        return GaussianGittinsTable::read_csv(&path);
    }
    let table = GaussianGittinsTable::build(cfg)?;
    table.write_csv(&path)?;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_rejects_short_horizon() {
        let cfg = GittinsConfig {
            horizon: 50,
            ..GittinsConfig::default()
        };
        assert!(cfg.validate().is_err());
        GittinsConfig::default().validate().unwrap();
    }

    #[test]
    fn gauss_hermite_integrates_moments() {
        let (z, w) = gauss_hermite(12);
        let m = |k: i32| z.iter().zip(&w).map(|(z, w)| w * z.powi(k)).sum::<f64>();
        assert!((m(0) - 1.0).abs() < 1e-12);
        assert!(m(1).abs() < 1e-12);
        assert!((m(2) - 1.0).abs() < 1e-10);
        assert!((m(4) - 3.0).abs() < 1e-9);
    }

    #[test]
    fn bernoulli_index_exceeds_mean_and_is_monotone_in_alpha() {
        let cfg = GittinsConfig::default();
        let mut prev = 0.0;
        for a in 1..10 {
            let (alpha, beta) = (a as f64, (10 - a) as f64);
            let idx = gittins_index_bernoulli(alpha, beta, &cfg).unwrap();
            assert!(idx >= alpha / (alpha + beta) - 1e-9);
            assert!(idx >= prev);
            prev = idx;
        }
    }

    #[test]
    fn myopic_limit() {
        let cfg = GittinsConfig {
            discount: 1e-3,
            horizon: 4,
            ..GittinsConfig::default()
        };
        let idx = gittins_index_bernoulli(2.0, 3.0, &cfg).unwrap();
        assert!((idx - 0.4).abs() < 1e-3, "{idx}");
        let nu = gittins_index_gaussian(2.0, &cfg).unwrap();
        assert!(nu.abs() < 1e-3, "{nu}");
    }

    #[test]
    fn table_lookup_uses_exact_offsets() {
        let cfg = GittinsConfig::default();
        let t = BernoulliGittinsTable::build((2.0, 1.0), 3, &cfg).unwrap();
        assert_eq!(t.len(), 10);
        assert_eq!(t.lookup(3.0, 2.0), t.get(1, 1));
        assert_eq!(t.lookup(2.5, 1.0), None);
        assert_eq!(t.lookup(4.0, 3.0), None);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = GittinsConfig::default();
        let t = BernoulliGittinsTable::build((0.5, 0.5), 4, &cfg).unwrap();
        let a = bernoulli_table_cached(Some(dir.path()), (0.5, 0.5), 4, &cfg).unwrap();
        let b = bernoulli_table_cached(Some(dir.path()), (0.5, 0.5), 4, &cfg).unwrap();
        assert_eq!(t, a);
        assert_eq!(a, b);
        let path = dir.path().join("g.csv");
        let small = GittinsConfig {
            gaussian: GaussianGridSpec {
                n_eff_points: 3,
                n_eff_min: 1.0,
                n_eff_max: 4.0,
                ..GaussianGridSpec::default()
            },
            ..cfg
        };
        let g = GaussianGittinsTable::build(&small).unwrap();
        g.write_csv(&path).unwrap();
        assert_eq!(GaussianGittinsTable::read_csv(&path).unwrap(), g);
    }
}
