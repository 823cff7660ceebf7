//! Seeded random instances and the identity suite run over them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::autocorr::{eigen_check, inner_regression, moran_double_sum};
use crate::bounds::{bounds_report, gram_spectrum, outer_spectrum, weight_spectrum};
use crate::error::Result;
use crate::inference::{geary_c, spatial_durbin_watson};
use crate::matrix::{dot, Matrix};
use crate::sar::{fit_sar_ols, identity_eq34_check};
use crate::spatial_data::{
    global_normalize, inverse_distance_proximity, spatial_lag, standardize, RawSizeVector,
    SymmetryPolicy,
};

pub const DEFAULT_INSTANCES: usize = 1000;
pub const DEFAULT_SUITE_SEED: u64 = 7_919;
pub const MIN_N: usize = 3;
pub const MAX_N: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct RandomInstance {
    pub seed: u64,
    pub sizes: RawSizeVector,
    pub distances: Matrix,
}

/// Draws `n ∈ [3, 40]`, lognormal positive sizes, and a symmetric distance
/// matrix. Even seeds place points in the unit square (Euclidean distances),
/// odd seeds draw each pairwise distance independently.
pub fn random_instance(seed: u64) -> RandomInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(MIN_N..=MAX_N);
    let sizes = LogNormal::new(3.0, 1.2).expect("valid lognormal");
    let values: Vec<f64> = (0..n).map(|_| sizes.sample(&mut rng)).collect();
    let mut d = Matrix::zeros(n, n);
    if seed.is_multiple_of(2) {
        let pts: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.random::<f64>(), rng.random::<f64>()))
            .collect();
        for i in 0..n {
            for j in (i + 1)..n {
                let dist = (pts[i].0 - pts[j].0).hypot(pts[i].1 - pts[j].1).max(1e-3);
                d[(i, j)] = dist;
                d[(j, i)] = dist;
            }
        }
    } else {
        for i in 0..n {
            for j in (i + 1)..n {
                let dist = rng.random_range(0.5..20.0);
                d[(i, j)] = dist;
                d[(j, i)] = dist;
            }
        }
    }
    RandomInstance {
        seed,
        sizes: RawSizeVector::from_values(values).expect("finite sizes"),
        distances: d,
    }
}

/// Every check the suite runs, with its tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    /// `ρ̂·I = nR²`, relative 1e-9.
    RhoTimesMoran,
    /// `δ = zᵀε = n(1 - R²)`, absolute 1e-9.
    Delta,
    /// `n(Wz)ᵀWz - ((Wz)ᵀo)² = I²/R²`, relative 1e-9.
    QuadraticIdentity,
    /// Two-sided p-values of `I` and `ρ̂` agree, absolute 1e-9.
    PairedPValues,
    /// `(Wz)ᵀε = 0`, absolute 1e-9.
    LagOrthogonality,
    /// `oᵀε = 0`, absolute 1e-9.
    ResidualSum,
    /// Quadratic form against the classical double sum, absolute 1e-12.
    DoubleSumOracle,
    /// `zzᵀWz = Iz`, absolute 1e-10.
    EigenRelation,
    /// `λ_min(W) ≤ I/n ≤ λ_max(W)`.
    Range1,
    /// `λ*_min ≤ ((Wz)ᵀo/n)² + I²/n² ≤ λ*_max`.
    Range2,
    /// `λ*_min ≤ ((Wz)ᵀo/n)² + I²/(R²n²) ≤ λ*_max`, the R²-adjusted form.
    Range2Empirical,
    /// `0 ≤ I²/n ≤ (Wz)ᵀWz`.
    Range3,
    /// Largest eigenvalue of `(Wz)(Wz)ᵀ` equals `(Wz)ᵀWz`, absolute 1e-10.
    OuterEigenvalue,
    /// Spectrum of `WᵀW` equals the squared spectrum of `W`, absolute 1e-9.
    GramSpectrum,
    /// `DW = 2C`, absolute 1e-10.
    DurbinWatsonGeary,
}

impl Check {
    pub const ALL: [Check; 15] = [
        Check::RhoTimesMoran,
        Check::Delta,
        Check::QuadraticIdentity,
        Check::PairedPValues,
        Check::LagOrthogonality,
        Check::ResidualSum,
        Check::DoubleSumOracle,
        Check::EigenRelation,
        Check::Range1,
        Check::Range2,
        Check::Range2Empirical,
        Check::Range3,
        Check::OuterEigenvalue,
        Check::GramSpectrum,
        Check::DurbinWatsonGeary,
    ];

    /// Spectral containment checks, as opposed to algebraic identities.
    pub fn is_containment(self) -> bool {
        matches!(
            self,
            Check::Range1 | Check::Range2 | Check::Range2Empirical | Check::Range3
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            Check::RhoTimesMoran => "rho_hat * I = n R^2",
            Check::Delta => "delta = n (1 - R^2)",
            Check::QuadraticIdentity => "n (Wz)'Wz - ((Wz)'o)^2 = I^2/R^2",
            Check::PairedPValues => "p(I) = p(rho_hat)",
            Check::LagOrthogonality => "(Wz)' eps = 0",
            Check::ResidualSum => "o' eps = 0",
            Check::DoubleSumOracle => "z'Wz = classical double sum",
            Check::EigenRelation => "zz'Wz = I z",
            Check::Range1 => "lambda_min(W) <= I/n <= lambda_max(W)",
            Check::Range2 => "lambda*_min <= ((Wz)'o/n)^2 + I^2/n^2 <= lambda*_max",
            Check::Range2Empirical => "lambda*_min <= ((Wz)'o/n)^2 + I^2/(R^2 n^2) <= lambda*_max",
            Check::Range3 => "0 <= I^2/n <= (Wz)'Wz",
            Check::OuterEigenvalue => "lambda**_max = (Wz)'Wz",
            Check::GramSpectrum => "spectrum(W'W) = spectrum(W)^2",
            Check::DurbinWatsonGeary => "DW = 2C",
        }
    }
}

/// One failed check on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub seed: u64,
    pub n: usize,
    pub check: Check,
    /// Observed discrepancy (for ranges: distance outside the interval).
    pub slack: f64,
    pub tolerance: f64,
}

/// Worst discrepancy seen for one check across the suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub check: Check,
    pub name: String,
    pub evaluated: usize,
    pub failures: usize,
    pub worst_slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub instances: usize,
    pub base_seed: u64,
    pub checks: Vec<CheckSummary>,
    pub violations: Vec<Violation>,
}

impl SuiteReport {
    /// Every algebraic identity held on every instance.
    pub fn identities_passed(&self) -> bool {
        self.violations.iter().all(|v| v.check.is_containment())
    }

    /// Every spectral containment held on every instance.
    pub fn containment_passed(&self) -> bool {
        self.violations.iter().all(|v| !v.check.is_containment())
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn summary(&self, check: Check) -> &CheckSummary {
        self.checks
            .iter()
            .find(|c| c.check == check)
            .expect("every check is summarized")
    }

    pub fn violations_of(&self, check: Check) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(move |v| v.check == check)
    }
}

/// Discrepancies for a single instance: `(check, slack, tolerance)`.
/// A check that does not apply to the instance is omitted.
pub fn instance_checks(instance: &RandomInstance) -> Result<Vec<(Check, f64, f64)>> {
    let z = standardize(&instance.sizes)?;
    let v = inverse_distance_proximity(&instance.distances, SymmetryPolicy::Strict)?;
    let w = global_normalize(&v)?;
    let lag = spatial_lag(&w, &z)?;
    let n = z.len();
    let nf = n as f64;
    let moran = inner_regression(&z, &w)?;
    let i = moran.i_value;
    let fit = fit_sar_ols(&z, &lag)?;
    let mut out = Vec::with_capacity(Check::ALL.len());

    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE);

    if !fit.zero_moran {
        out.push((
            Check::RhoTimesMoran,
            rel(fit.rho_hat * i, nf * fit.r_squared),
            1e-9,
        ));
    }
    out.push((
        Check::Delta,
        (fit.delta - nf * (1.0 - fit.r_squared)).abs(),
        1e-9,
    ));
    if let Ok(d) = identity_eq34_check(&z, &lag, i, fit.r_squared) {
        out.push((Check::QuadraticIdentity, d.abs() / (nf * lag.inner()), 1e-9));
    }
    if let (Some(a), Some(b)) = (moran.slope_test.p_value, fit.slope_test.p_value) {
        out.push((Check::PairedPValues, (a - b).abs(), 1e-9));
    }
    out.push((
        Check::LagOrthogonality,
        dot(&lag.wz, &fit.residuals).abs(),
        1e-9,
    ));
    out.push((
        Check::ResidualSum,
        fit.residuals.iter().sum::<f64>().abs(),
        1e-9,
    ));

    let classical = moran_double_sum(&instance.sizes, &v)?;
    out.push((Check::DoubleSumOracle, (classical - i).abs(), 1e-12));
    out.push((Check::EigenRelation, eigen_check(&z, &w)?.residual, 1e-10));

    let bounds = bounds_report(&w, &lag, i, fit.r_squared, fit.rho_hat)?;
    let outside = |x: f64, lo: f64, hi: f64| (lo - x).max(x - hi).max(0.0);
    let scale = |lo: f64, hi: f64| crate::bounds::CONTAINMENT_TOLERANCE * lo.abs().max(hi.abs());
    let r1 = &bounds.range1;
    out.push((
        Check::Range1,
        outside(r1.i_over_n, r1.lambda_min, r1.lambda_max),
        scale(r1.lambda_min, r1.lambda_max),
    ));
    let r2 = &bounds.range2;
    out.push((
        Check::Range2,
        outside(r2.lhs_value, r2.lambda_min, r2.lambda_max),
        scale(r2.lambda_min, r2.lambda_max),
    ));
    if let Some(e) = r2.empirical_value {
        out.push((
            Check::Range2Empirical,
            outside(e, r2.lambda_min, r2.lambda_max),
            scale(r2.lambda_min, r2.lambda_max),
        ));
    }
    let r3 = &bounds.range3;
    out.push((
        Check::Range3,
        outside(r3.i_sq_over_n, 0.0, r3.lambda_max),
        scale(0.0, r3.lambda_max),
    ));

    let outer = outer_spectrum(&lag)?;
    out.push((
        Check::OuterEigenvalue,
        (outer.max() - lag.inner()).abs(),
        1e-10,
    ));

    let spectrum = weight_spectrum(&w)?;
    let gram = gram_spectrum(&w)?;
    let mut squared: Vec<f64> = spectrum.values.iter().map(|l| l * l).collect();
    squared.sort_by(f64::total_cmp);
    let gap = squared
        .iter()
        .zip(&gram.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    out.push((Check::GramSpectrum, gap, 1e-9));

    if !fit.exact_fit {
        let dw = spatial_durbin_watson(&fit.residuals, &w)?;
        let c = geary_c(&fit.residuals, &w)?;
        out.push((Check::DurbinWatsonGeary, (dw.dw - 2.0 * c).abs(), 1e-10));
    }
    Ok(out)
}

/// Runs [`instance_checks`] on seeds `base_seed .. base_seed + instances`.
pub fn run_identity_suite(instances: usize, base_seed: u64) -> Result<SuiteReport> {
    let mut checks: Vec<CheckSummary> = Check::ALL
        .iter()
        .map(|&c| CheckSummary {
            check: c,
            name: c.name().to_string(),
            evaluated: 0,
            failures: 0,
            worst_slack: 0.0,
        })
        .collect();
    let mut violations = Vec::new();
    for k in 0..instances {
        let seed = base_seed.wrapping_add(k as u64);
        let instance = random_instance(seed);
        for (check, slack, tolerance) in instance_checks(&instance)? {
            let summary = checks
                .iter_mut()
                .find(|c| c.check == check)
                .expect("known check");
            summary.evaluated += 1;
            summary.worst_slack = summary.worst_slack.max(slack);
            if !(slack <= tolerance) {
                summary.failures += 1;
                violations.push(Violation {
                    seed,
                    n: instance.sizes.len(),
                    check,
                    slack,
                    tolerance,
                });
            }
        }
    }
    Ok(SuiteReport {
        instances,
        base_seed,
        checks,
        violations,
    })
}
