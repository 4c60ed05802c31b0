//! Classical (Torgerson) multidimensional scaling.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::behavior::DistanceMatrix;
use crate::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdsEmbedding {
    pub labels: Vec<String>,
    /// One row per point, `dims` columns.
    pub coords: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub dims: usize,
    /// Set when fewer positive eigenvalues than requested dimensions were available.
    pub degenerate: bool,
}

/// Eigenpairs of a symmetric matrix, eigenvalues in decreasing order.
pub(crate) fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub fn classical_mds(d: &DistanceMatrix, dims: usize) -> Result<MdsEmbedding> {
    d.validate()?;
    let n = d.len();
    let sq = DMatrix::from_fn(n, n, |i, j| d.values[i][j].powi(2));
    let row_means: Vec<f64> = (0..n).map(|i| sq.row(i).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| {
        -0.5 * (sq[(i, j)] - row_means[i] - row_means[j] + grand)
    });
    let (values, vectors) = sorted_eigen(b);
    let scale = values.first().copied().unwrap_or(0.0).abs().max(1.0);
    let available = values
        .iter()
        .take(dims)
        .filter(|&&v| v > 1e-12 * scale)
        .count();
    let mut coords = vec![vec![0.0; dims]; n];
    for c in 0..available {
        let s = values[c].sqrt();
        let mut col: Vec<f64> = (0..n).map(|r| vectors[(r, c)] * s).collect();
        // sign convention: the largest-magnitude coordinate is positive
        let pivot = col
            .iter()
            .copied()
            .fold(0.0, |m: f64, v| if v.abs() > m.abs() { v } else { m });
        if pivot < 0.0 {
            col.iter_mut().for_each(|v| *v = -*v);
        }
        for r in 0..n {
            coords[r][c] = col[r];
        }
    }
    Ok(MdsEmbedding {
        labels: d.labels.clone(),
        coords,
        eigenvalues: values,
        dims,
        degenerate: available < dims,
    })
}

/// Euclidean distances between embedded points.
pub fn embedded_distances(e: &MdsEmbedding) -> Vec<Vec<f64>> {
    let n = e.coords.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    e.coords[i]
                        .iter()
                        .zip(&e.coords[j])
                        .map(|(a, b)| (a - b).powi(2))
                        .sum::<f64>()
                        .sqrt()
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dm(v: Vec<Vec<f64>>) -> DistanceMatrix {
        DistanceMatrix {
            labels: (0..v.len()).map(|i| i.to_string()).collect(),
            values: v,
        }
    }

    #[test]
    fn recovers_collinear_and_square_configurations() {
        let line = dm(vec![
            vec![0.0, 1.0, 2.0],
            vec![1.0, 0.0, 1.0],
            vec![2.0, 1.0, 0.0],
        ]);
        let e = classical_mds(&line, 2).unwrap();
        assert!(e.degenerate);
        let r = embedded_distances(&e);
        for i in 0..3 {
            for j in 0..3 {
                assert!((r[i][j] - line.values[i][j]).abs() < 1e-9);
            }
        }
        let s2 = 2f64.sqrt();
        let sq = dm(vec![
            vec![0.0, 1.0, s2, 1.0],
            vec![1.0, 0.0, 1.0, s2],
            vec![s2, 1.0, 0.0, 1.0],
            vec![1.0, s2, 1.0, 0.0],
        ]);
        let e = classical_mds(&sq, 2).unwrap();
        assert!(!e.degenerate);
        let r = embedded_distances(&e);
        for i in 0..4 {
            for j in 0..4 {
                assert!((r[i][j] - sq.values[i][j]).abs() < 1e-9);
            }
        }
    }
}
