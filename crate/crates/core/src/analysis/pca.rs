//! Principal components with whitening, used to compare state spaces of different dimension.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::mds::sorted_eigen;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Full orthonormal basis, one component per row, by decreasing variance.
    pub components: Vec<Vec<f64>>,
    /// Sample variance along each component.
    pub variances: Vec<f64>,
    pub retained: usize,
    /// Number of components with non-negligible variance.
    pub rank: usize,
}

impl PcaModel {
    pub fn fit(rows: &[Vec<f64>], retained: usize) -> Result<Self> {
        let m = rows.len();
        if m < 2 || retained == 0 {
            return Err(Error::config(
                "PCA needs at least two samples and one retained component",
            ));
        }
        let d = rows[0].len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::contract("PCA rows have different lengths"));
        }
        let mut mean = vec![0.0; d];
        for r in rows {
            for (a, v) in mean.iter_mut().zip(r) {
                *a += v;
            }
        }
        mean.iter_mut().for_each(|v| *v /= m as f64);
        let x = DMatrix::from_fn(m, d, |i, j| rows[i][j] - mean[j]);
        let cov = (x.transpose() * &x) / (m as f64 - 1.0);
        let (values, vectors) = sorted_eigen(cov);
        let top = values.first().copied().unwrap_or(0.0).max(0.0);
        let variances: Vec<f64> = values.iter().map(|&v| v.max(0.0)).collect();
        let rank = variances
            .iter()
            .filter(|&&v| v > 1e-12 * top.max(1e-300))
            .count();
        let mut components: Vec<Vec<f64>> = (0..d)
            .map(|c| (0..d).map(|r| vectors[(r, c)]).collect())
            .collect();
        // Sign convention from the data rather than the basis: the sample with the
        // largest |projection| projects positively. This survives rotations of the input.
        for v in &mut components {
            let proj = x
                .row_iter()
                .map(|r| r.iter().zip(v.iter()).map(|(a, b)| a * b).sum::<f64>());
            let extreme = proj.fold(0.0f64, |acc, p| if p.abs() > acc.abs() { p } else { acc });
            if extreme < 0.0 {
                v.iter_mut().for_each(|e| *e = -*e);
            }
        }
        Ok(Self {
            mean,
            components,
            variances,
            retained: retained.min(d),
            rank,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// True when fewer than `retained` components carry variance.
    pub fn rank_deficient(&self) -> bool {
        self.rank < self.retained
    }

    /// Fraction of total variance carried by the retained components.
    pub fn explained_fraction(&self) -> f64 {
        let total: f64 = self.variances.iter().sum();
        if total == 0.0 {
            return 1.0;
        }
        (self.variances[..self.retained].iter().sum::<f64>() / total).clamp(0.0, 1.0)
    }

    fn scale(&self, c: usize) -> f64 {
        let s = self.variances[c].sqrt();
        if c < self.rank && s > 0.0 {
            s
        } else {
            1.0
        }
    }

    /// Whitened coordinates along the first `k` components.
    pub fn whiten_k(&self, x: &[f64], k: usize) -> Vec<f64> {
        (0..k)
            .map(|c| {
                let dot: f64 = self.components[c]
                    .iter()
                    .zip(x)
                    .zip(&self.mean)
                    .map(|((v, x), m)| v * (x - m))
                    .sum();
                dot / self.scale(c)
            })
            .collect()
    }

    pub fn whiten(&self, x: &[f64]) -> Vec<f64> {
        self.whiten_k(x, self.retained)
    }

    /// Inverse of whitening for the leading `z.len()` components; the rest sit at their mean (zero).
    pub fn unwhiten(&self, z: &[f64]) -> Vec<f64> {
        let mut x = self.mean.clone();
        for (c, &zc) in z.iter().enumerate() {
            let a = zc * self.scale(c);
            for (xi, v) in x.iter_mut().zip(&self.components[c]) {
                *xi += a * v;
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plane_data_is_fully_explained_and_whitened() {
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|i| {
                let (a, b) = ((i as f64 * 0.37).sin(), (i as f64 * 1.3).cos() * 2.0);
                vec![a + b, a - b, 2.0 * a + 1.0]
            })
            .collect();
        let p = PcaModel::fit(&rows, 2).unwrap();
        assert!((p.explained_fraction() - 1.0).abs() < 1e-12);
        assert_eq!(p.rank, 2);
        let z: Vec<Vec<f64>> = rows.iter().map(|r| p.whiten(r)).collect();
        for c in 0..2 {
            let m = z.iter().map(|v| v[c]).sum::<f64>() / 50.0;
            let var = z.iter().map(|v| (v[c] - m).powi(2)).sum::<f64>() / 49.0;
            assert!((var - 1.0).abs() < 1e-9);
        }
        for r in &rows {
            let back = p.unwhiten(&p.whiten(r));
            for (a, b) in back.iter().zip(r) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
