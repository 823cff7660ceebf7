#![allow(dead_code)]

use moransar_core::matrix::Matrix;
use proptest::prelude::*;

/// Positive sizes and a symmetric distance matrix with a zero diagonal.
#[derive(Debug, Clone)]
pub struct Instance {
    pub sizes: Vec<f64>,
    pub distances: Matrix,
}

pub fn instance(max_n: usize) -> impl Strategy<Value = Instance> {
    (3..=max_n).prop_flat_map(|n| {
        let pairs = n * (n - 1) / 2;
        (
            prop::collection::vec(0.5f64..500.0, n),
            prop::collection::vec(0.1f64..50.0, pairs),
        )
            .prop_filter("sizes must vary", |(s, _)| {
                let lo = s.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                hi - lo > 1e-3 * hi
            })
            .prop_map(move |(sizes, upper)| {
                let mut d = Matrix::zeros(n, n);
                let mut k = 0;
                for i in 0..n {
                    for j in (i + 1)..n {
                        d[(i, j)] = upper[k];
                        d[(j, i)] = upper[k];
                        k += 1;
                    }
                }
                Instance {
                    sizes,
                    distances: d,
                }
            })
    })
}

/// Textbook Moran's I from raw values and raw proximities `1/d`:
/// `I = (n / S0) ΣΣ v_ij (x_i - x̄)(x_j - x̄) / Σ (x_i - x̄)²`.
pub fn classical_moran(x: &[f64], distances: &Matrix) -> f64 {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let mut s0 = 0.0;
    let mut cross = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let v = 1.0 / distances[(i, j)];
                s0 += v;
                cross += v * (x[i] - mean) * (x[j] - mean);
            }
        }
    }
    let ss: f64 = x.iter().map(|xi| (xi - mean).powi(2)).sum();
    n as f64 / s0 * cross / ss
}

/// Pairwise Geary ratio `(n-1) ΣΣ w_ij (e_i - e_j)² / (2 S0 Σ (e_i - ē)²)`.
pub fn pairwise_geary(e: &[f64], w: &Matrix) -> f64 {
    let n = e.len();
    let mean = e.iter().sum::<f64>() / n as f64;
    let mut s0 = 0.0;
    let mut num = 0.0;
    for i in 0..n {
        for j in 0..n {
            s0 += w[(i, j)];
            num += w[(i, j)] * (e[i] - e[j]).powi(2);
        }
    }
    let ss: f64 = e.iter().map(|v| (v - mean).powi(2)).sum();
    (n as f64 - 1.0) * num / (2.0 * s0 * ss)
}

pub fn quad(v: &[f64], w: &Matrix) -> f64 {
    let n = v.len();
    let mut t = 0.0;
    for i in 0..n {
        for j in 0..n {
            t += v[i] * w[(i, j)] * v[j];
        }
    }
    t
}

/// Lexicographic enumeration of all permutations of `0..n` by recursion.
pub fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for k in 0..used.len() {
            if !used[k] {
                used[k] = true;
                prefix.push(k);
                rec(prefix, used, out);
                prefix.pop();
                used[k] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// Two-sided exhaustive randomization p-value: share of relabellings whose
/// `|vᵀWv|` reaches the observed magnitude.
pub fn exhaustive_p(z: &[f64], w: &Matrix) -> f64 {
    let observed = quad(z, w).abs();
    let perms = all_permutations(z.len());
    let hits = perms
        .iter()
        .filter(|p| {
            let v: Vec<f64> = p.iter().map(|&k| z[k]).collect();
            quad(&v, w).abs() >= observed * (1.0 - 1e-12)
        })
        .count();
    hits as f64 / perms.len() as f64
}

/// `Γ(k/2)` for positive integer `k`, by the half-integer recurrence.
pub fn gamma_half(k: usize) -> f64 {
    let mut g = if k.is_multiple_of(2) {
        1.0
    } else {
        std::f64::consts::PI.sqrt()
    };
    let mut x = if k.is_multiple_of(2) { 1.0 } else { 0.5 };
    while 2.0 * x < k as f64 {
        g *= x;
        x += 1.0;
    }
    g
}

/// Two-sided Student-t tail from composite Simpson integration of the density.
pub fn t_two_sided_simpson(t: f64, df: usize) -> f64 {
    let nu = df as f64;
    let c = gamma_half(df + 1) / ((nu * std::f64::consts::PI).sqrt() * gamma_half(df));
    let f = |x: f64| c * (1.0 + x * x / nu).powf(-(nu + 1.0) / 2.0);
    let t = t.abs();
    let steps = 20_000;
    let h = t / steps as f64;
    let mut acc = f(0.0) + f(t);
    for k in 1..steps {
        let x = k as f64 * h;
        acc += if k % 2 == 1 { 4.0 * f(x) } else { 2.0 * f(x) };
    }
    let central = acc * h / 3.0;
    1.0 - 2.0 * central
}

/// Population z-scores computed directly.
pub fn zscores(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    x.iter().map(|v| (v - mean) / sd).collect()
}
