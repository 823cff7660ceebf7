//! Cyclic Jacobi eigensolver for small dense symmetric matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const SYMMETRY_TOLERANCE: f64 = 1e-9;
const CONVERGENCE_RATIO: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSpectrum {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `k` (as `vectors[k]`) is the unit eigenvector of `values[k]`.
    #[serde(skip)]
    pub vectors: Vec<Vec<f64>>,
    /// Off-diagonal Frobenius norm at termination.
    pub max_offdiag_residual: f64,
    pub sweeps: usize,
}

impl EigenSpectrum {
    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

fn off_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// All eigenvalues (ascending) and eigenvectors of a symmetric matrix.
///
/// Sweeps stop once the off-diagonal Frobenius norm falls to `1e-12·‖M‖_F`.
pub fn symmetric_eigen(m: &Matrix) -> Result<EigenSpectrum> {
    if !m.is_square() {
        return Err(Error::NonSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let n = m.rows();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let norm = m.frobenius_norm();
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOLERANCE * norm.max(f64::MIN_POSITIVE) {
                return Err(Error::NotSymmetric { i, j });
            }
        }
    }
    let mut a = Matrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
    let mut v = Matrix::identity(n);
    let target = CONVERGENCE_RATIO * norm;
    let mut sweeps = 0;
    let mut off = off_norm(&a);
    while off > target {
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence { residual: off });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);
                a[(p, p)] -= t * apq;
                a[(q, q)] += t * apq;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for r in 0..n {
                    if r != p && r != q {
                        let arp = a[(r, p)];
                        let arq = a[(r, q)];
                        let new_rp = arp - s * (arq + tau * arp);
                        let new_rq = arq + s * (arp - tau * arq);
                        a[(r, p)] = new_rp;
                        a[(p, r)] = new_rp;
                        a[(r, q)] = new_rq;
                        a[(q, r)] = new_rq;
                    }
                    let vrp = v[(r, p)];
                    let vrq = v[(r, q)];
                    v[(r, p)] = vrp - s * (vrq + tau * vrp);
                    v[(r, q)] = vrq + s * (vrp - tau * vrq);
                }
            }
        }
        off = off_norm(&a);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    Ok(EigenSpectrum {
        values: order.iter().map(|&k| a[(k, k)]).collect(),
        vectors: order
            .iter()
            .map(|&k| (0..n).map(|r| v[(r, k)]).collect())
            .collect(),
        max_offdiag_residual: off,
        sweeps,
    })
}

/// `‖Mv - λv‖∞` for one eigenpair.
pub fn eigenpair_residual(m: &Matrix, value: f64, vector: &[f64]) -> Result<f64> {
    let mv = m.mul_vec(vector)?;
    Ok(mv
        .iter()
        .zip(vector)
        .map(|(a, b)| (a - value * b).abs())
        .fold(0.0, f64::max))
}
