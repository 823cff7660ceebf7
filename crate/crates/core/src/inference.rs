//! Significance tests and residual diagnostics.
//!
//! Slope t-tests use `n - 2` degrees of freedom. Because the t statistic of a
//! bivariate regression depends only on `R²` and `n`, the autocorrelation
//! slope (`Î`) and the autoregressive slope (`ρ̂`) of the same data share one
//! p-value.
//!
//! Permutation tests draw one seed per permutation from the master seed up
//! front, so the result does not depend on how many worker threads evaluate
//! them. When `n!` does not exceed `permutations + 1` every permutation is
//! enumerated instead and the exact p-value is returned.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::io::csv_error;
use crate::matrix::dot;
use crate::spatial_data::{standardize_values, WeightMatrix};

pub const DEFAULT_PERMUTATIONS: usize = 999;

/// Relative slack when counting permuted statistics as at least as extreme.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    TTest,
    Permutation,
    ExactPermutation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    /// `None` for a degenerate t-test, where `t` is unbounded.
    pub statistic: Option<f64>,
    /// `None` when the test is degenerate (exact fit).
    pub p_value: Option<f64>,
    pub method: TestMethod,
    pub permutations_used: usize,
    pub seed: Option<u64>,
    pub degenerate: bool,
}

impl SignificanceResult {
    pub fn p(&self) -> Option<f64> {
        self.p_value
    }
}

/// Two-tailed test of `coefficient = 0` with `n - 2` degrees of freedom.
///
/// A missing or zero standard error (exact fit) yields a degenerate result:
/// no statistic, no p-value, `degenerate = true`.
pub fn slope_t_test(coefficient: f64, se: Option<f64>, n: usize) -> Result<SignificanceResult> {
    let degenerate = SignificanceResult {
        statistic: None,
        p_value: None,
        method: TestMethod::TTest,
        permutations_used: 0,
        seed: None,
        degenerate: true,
    };
    let se = match se {
        Some(se) if se > 0.0 => se,
        _ => return Ok(degenerate),
    };
    if n < 3 {
        return Err(Error::TooFewElements {
            required: 3,
            found: n,
        });
    }
    let t = coefficient / se;
    Ok(SignificanceResult {
        statistic: Some(t),
        p_value: Some(t_two_tailed(t, (n - 2) as f64)),
        method: TestMethod::TTest,
        permutations_used: 0,
        seed: None,
        degenerate: false,
    })
}

/// `P(|T| ≥ |t|)` for Student's t with `df` degrees of freedom.
pub fn t_two_tailed(t: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sidedness {
    #[default]
    TwoSided,
    Greater,
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationConfig {
    pub permutations: usize,
    pub seed: u64,
    pub sidedness: Sidedness,
    /// Worker threads; `0` uses the global rayon pool.
    pub workers: usize,
}

impl PermutationConfig {
    pub fn new(permutations: usize, seed: u64) -> Self {
        PermutationConfig {
            permutations,
            seed,
            sidedness: Sidedness::TwoSided,
            workers: 0,
        }
    }
}

fn quadratic_form(v: &[f64], w: &WeightMatrix) -> f64 {
    let m = w.matrix();
    let n = v.len();
    let mut total = 0.0;
    for i in 0..n {
        let row = m.row(i);
        total += v[i] * dot(row, v);
    }
    total
}

fn factorial(n: usize) -> Option<usize> {
    (1..=n).try_fold(1usize, |acc, k| acc.checked_mul(k))
}

fn is_extreme(stat: f64, observed: f64, sidedness: Sidedness) -> bool {
    let slack = TIE_TOLERANCE * observed.abs();
    match sidedness {
        Sidedness::TwoSided => stat.abs() >= observed.abs() - slack,
        Sidedness::Greater => stat >= observed - slack,
        Sidedness::Less => stat <= observed + slack,
    }
}

/// All permutations of `0..n` in Heap's-algorithm order.
fn for_each_permutation(n: usize, mut visit: impl FnMut(&[usize])) {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    visit(&perm);
    let mut i = 1;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            visit(&perm);
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Sampled null distribution of `vᵀWv` under random relabelling; one entry per
/// permutation, in seed order.
pub fn permutation_distribution(
    values: &[f64],
    w: &WeightMatrix,
    permutations: usize,
    seed: u64,
    workers: usize,
) -> Result<Vec<f64>> {
    if values.len() != w.len() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            found: values.len(),
        });
    }
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<u64> = (0..permutations).map(|_| master.random()).collect();
    let eval = |s: &u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(*s);
        let mut shuffled = values.to_vec();
        shuffled.shuffle(&mut rng);
        quadratic_form(&shuffled, w)
    };
    if workers == 0 {
        return Ok(seeds.par_iter().map(eval).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    Ok(pool.install(|| seeds.par_iter().map(eval).collect()))
}

/// Randomization test for `zᵀWz`.
///
/// Sampled mode returns the pseudo p-value `(1 + #extreme) / (m + 1)`. When
/// `n! ≤ m + 1` the full permutation set is enumerated and the exact
/// proportion `#extreme / n!` (identity included) is returned instead.
pub fn permutation_test(
    z: &[f64],
    w: &WeightMatrix,
    config: &PermutationConfig,
) -> Result<SignificanceResult> {
    if config.permutations < 1 {
        return Err(Error::InvalidConfig(
            "permutation count must be at least 1".into(),
        ));
    }
    if z.len() != w.len() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            found: z.len(),
        });
    }
    let observed = quadratic_form(z, w);
    let n = z.len();
    if let Some(total) = factorial(n).filter(|t| *t <= config.permutations + 1) {
        let p = exact_permutation_p(z, w, config.sidedness)?;
        return Ok(SignificanceResult {
            statistic: Some(observed),
            p_value: Some(p),
            method: TestMethod::ExactPermutation,
            permutations_used: total,
            seed: Some(config.seed),
            degenerate: false,
        });
    }
    let null = permutation_distribution(z, w, config.permutations, config.seed, config.workers)?;
    let extreme = null
        .iter()
        .filter(|s| is_extreme(**s, observed, config.sidedness))
        .count();
    Ok(SignificanceResult {
        statistic: Some(observed),
        p_value: Some((1 + extreme) as f64 / (config.permutations + 1) as f64),
        method: TestMethod::Permutation,
        permutations_used: config.permutations,
        seed: Some(config.seed),
        degenerate: false,
    })
}

/// Exact randomization p-value over all `n!` relabellings.
pub fn exact_permutation_p(z: &[f64], w: &WeightMatrix, sidedness: Sidedness) -> Result<f64> {
    let n = z.len();
    let total = factorial(n).filter(|t| *t <= 40_320).ok_or_else(|| {
        Error::InvalidConfig(format!("exact enumeration for n = {n} is too large"))
    })?;
    let observed = quadratic_form(z, w);
    let mut extreme = 0usize;
    let mut buf = vec![0.0; n];
    for_each_permutation(n, |perm| {
        for (slot, &k) in buf.iter_mut().zip(perm) {
            *slot = z[k];
        }
        if is_extreme(quadratic_form(&buf, w), observed, sidedness) {
            extreme += 1;
        }
    });
    Ok(extreme as f64 / total as f64)
}

/// Moran's index of the residuals, standardized with the population σ.
pub fn residual_moran(residuals: &[f64], w: &WeightMatrix) -> Result<f64> {
    if residuals.len() != w.len() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            found: residuals.len(),
        });
    }
    let e = standardize_values(residuals)?;
    Ok(quadratic_form(e.as_slice(), w))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DwClass {
    Positive,
    Negative,
    None,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DwResult {
    pub dw: f64,
    pub geary_c: f64,
    /// Moran's index of the standardized residuals.
    pub i_e: f64,
    pub classification: Option<DwClass>,
}

/// Spatial Durbin–Watson statistic `DW = (2(n-1)/n)(oᵀW(e⊙e) - I_e)` with `e`
/// the population-standardized residuals; `geary_c = DW/2`.
pub fn spatial_durbin_watson(residuals: &[f64], w: &WeightMatrix) -> Result<DwResult> {
    if residuals.len() != w.len() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            found: residuals.len(),
        });
    }
    let e = standardize_values(residuals)?;
    let e = e.as_slice();
    let n = e.len() as f64;
    let squared: Vec<f64> = e.iter().map(|v| v * v).collect();
    let w_e2 = w.lag(&squared)?;
    let weighted_square_sum: f64 = w_e2.iter().sum();
    let i_e = quadratic_form(e, w);
    let dw = 2.0 * (n - 1.0) / n * (weighted_square_sum - i_e);
    Ok(DwResult {
        dw,
        geary_c: dw / 2.0,
        i_e,
        classification: None,
    })
}

/// Geary's contiguity ratio in its pairwise form,
/// `C = (n-1) ΣΣ w_ij (x_i - x_j)² / (2 S₀ Σ(x_i - x̄)²)`.
pub fn geary_c(values: &[f64], w: &WeightMatrix) -> Result<f64> {
    let n = values.len();
    if n != w.len() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            found: n,
        });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let m2: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    if m2 == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let m = w.matrix();
    let (mut s0, mut pairs) = (0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let d = values[i] - values[j];
            s0 += m[(i, j)];
            pairs += m[(i, j)] * d * d;
        }
    }
    Ok((n as f64 - 1.0) * pairs / (2.0 * s0 * m2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DwCriticalValues {
    pub n: usize,
    pub alpha: f64,
    pub d_l: f64,
    pub d_u: f64,
}

impl DwCriticalValues {
    pub fn new(n: usize, alpha: f64, d_l: f64, d_u: f64) -> Result<Self> {
        if !(0.0 < d_l && d_l < d_u && d_u < 2.0) {
            return Err(Error::InvalidCriticalValues(format!(
                "need 0 < d_l < d_u < 2, got d_l = {d_l}, d_u = {d_u}"
            )));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidCriticalValues(format!("alpha = {alpha}")));
        }
        Ok(DwCriticalValues { n, alpha, d_l, d_u })
    }
}

/// Durbin–Watson bounds keyed by `(n, alpha)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CriticalTable {
    entries: Vec<DwCriticalValues>,
}

impl CriticalTable {
    /// The single bundled entry: `n = 35`, `alpha = 0.05`.
    pub fn bundled() -> Self {
        CriticalTable {
            entries: vec![DwCriticalValues {
                n: 35,
                alpha: 0.05,
                d_l: 1.402,
                d_u: 1.519,
            }],
        }
    }

    pub fn entries(&self) -> &[DwCriticalValues] {
        &self.entries
    }

    /// Adds or replaces an entry.
    pub fn insert(&mut self, entry: DwCriticalValues) {
        self.entries
            .retain(|e| !(e.n == entry.n && (e.alpha - entry.alpha).abs() < 1e-12));
        self.entries.push(entry);
    }

    pub fn lookup(&self, n: usize, alpha: f64) -> Result<DwCriticalValues> {
        self.entries
            .iter()
            .find(|e| e.n == n && (e.alpha - alpha).abs() < 1e-12)
            .copied()
            .ok_or(Error::MissingCriticalValues { n, alpha })
    }

    /// Reads `n,alpha,d_l,d_u` rows and layers them over the bundled entry.
    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let mut table = CriticalTable::bundled();
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| csv_error(path, e))?;
        let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
        let expected = ["n", "alpha", "d_l", "d_u"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: format!(
                    "expected header `n,alpha,d_l,d_u`, got `{}`",
                    headers.iter().collect::<Vec<_>>().join(",")
                ),
            });
        }
        for record in reader.records() {
            let record = record.map_err(|e| csv_error(path, e))?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            let field = |k: usize| -> Result<f64> {
                record[k].parse::<f64>().map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("column `{}`: {e}", expected[k]),
                })
            };
            let n = record[0].parse::<usize>().map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("column `n`: {e}"),
            })?;
            table.insert(DwCriticalValues::new(n, field(1)?, field(2)?, field(3)?)?);
        }
        Ok(table)
    }
}

/// Banding of a DW value against `(d_l, d_u)`.
pub fn dw_interpret(dw: f64, critical: &DwCriticalValues) -> DwClass {
    let (dl, du) = (critical.d_l, critical.d_u);
    if dw < dl {
        DwClass::Positive
    } else if dw > 4.0 - dl {
        DwClass::Negative
    } else if dw >= du && dw <= 4.0 - du {
        DwClass::None
    } else {
        DwClass::Inconclusive
    }
}
