//! Sliding-window zero-lag correlation matrices and their eigenvalues.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::MultiChannelRecord;

/// Dense symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::validation("matrix is not square"));
        }
        let m = Self {
            dim,
            data: rows.concat(),
        };
        for i in 0..dim {
            for j in 0..i {
                if m.get(i, j) != m.get(j, i) {
                    return Err(Error::validation("matrix is not symmetric"));
                }
            }
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    fn off_diagonal_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                if i != j {
                    s += self.get(i, j).powi(2);
                }
            }
        }
        s.sqrt()
    }
}

/// Pearson correlation of every pair of rows. A constant row correlates
/// 0 with everything else and 1 with itself.
pub fn corr_matrix(window: &[&[f64]]) -> Result<SymMatrix> {
    let r = window.len();
    let m = window.first().map_or(0, |w| w.len());
    if m < 2 {
        return Err(Error::validation(format!(
            "correlation window needs >= 2 samples, got {m}"
        )));
    }
    if window.iter().any(|w| w.len() != m) {
        return Err(Error::validation(
            "correlation window rows differ in length",
        ));
    }
    let centered: Vec<Vec<f64>> = window
        .iter()
        .map(|row| {
            let mean = row.iter().sum::<f64>() / m as f64;
            row.iter().map(|v| v - mean).collect()
        })
        .collect();
    let norms: Vec<f64> = centered
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();

    let mut out = SymMatrix::zeros(r);
    for i in 0..r {
        out.set(i, i, 1.0);
        for j in i + 1..r {
            let rho = if norms[i] == 0.0 || norms[j] == 0.0 {
                0.0
            } else {
                let dot: f64 = centered[i]
                    .iter()
                    .zip(&centered[j])
                    .map(|(a, b)| a * b)
                    .sum();
                (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0)
            };
            out.set(i, j, rho);
            out.set(j, i, rho);
        }
    }
    Ok(out)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted
/// descending. Sweeps stop once the off-diagonal Frobenius norm is below
/// `1e-12`.
pub fn symmetric_eigenvalues(matrix: &SymMatrix) -> Vec<f64> {
    const TOL: f64 = 1e-12;
    const MAX_SWEEPS: usize = 100;
    let mut a = matrix.clone();
    let d = a.dim();

    for _ in 0..MAX_SWEEPS {
        if a.off_diagonal_norm() < TOL {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let (app, aqq) = (a.get(p, p), a.get(q, q));
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..d {
                    if k != p && k != q {
                        let akp = a.get(k, p);
                        let akq = a.get(k, q);
                        let new_kp = c * akp - s * akq;
                        let new_kq = s * akp + c * akq;
                        a.set(k, p, new_kp);
                        a.set(p, k, new_kp);
                        a.set(k, q, new_kq);
                        a.set(q, k, new_kq);
                    }
                }
                a.set(p, p, app - t * apq);
                a.set(q, q, aqq + t * apq);
                a.set(p, q, 0.0);
                a.set(q, p, 0.0);
            }
        }
    }
    let mut eig: Vec<f64> = (0..d).map(|i| a.get(i, i)).collect();
    eig.sort_by(|x, y| y.total_cmp(x));
    eig
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenSeries {
    pub window_centers: Vec<usize>,
    /// One descending list of length `r` per window.
    pub eigenvalues: Vec<Vec<f64>>,
    pub window_len: usize,
    pub hop: usize,
}

/// Eigenvalues of the group's correlation matrix over windows starting at
/// `0, hop, 2*hop, ...` while the window fits. Centers are `start + m/2`.
pub fn eigen_track(
    record: &MultiChannelRecord,
    group: &[String],
    window_len: usize,
    hop: usize,
) -> Result<EigenSeries> {
    use rayon::prelude::*;
    if group.len() < 2 {
        return Err(Error::validation(
            "eigenvalue track needs at least 2 channels",
        ));
    }
    if hop == 0 {
        return Err(Error::validation("hop must be positive"));
    }
    let n = record.n_samples();
    if window_len > n {
        return Err(Error::validation(format!(
            "window of {window_len} samples exceeds record length {n}"
        )));
    }
    let sub = record.select(group)?;
    let starts: Vec<usize> = (0..=n - window_len).step_by(hop).collect();
    let eigenvalues = starts
        .par_iter()
        .map(|&s| {
            let rows: Vec<&[f64]> = sub
                .channels()
                .iter()
                .map(|c| &c[s..s + window_len])
                .collect();
            corr_matrix(&rows).map(|c| symmetric_eigenvalues(&c))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EigenSeries {
        window_centers: starts.iter().map(|s| s + window_len / 2).collect(),
        eigenvalues,
        window_len,
        hop,
    })
}
