//! Rayleigh-quotient ranges for Moran's index and the autoregressive coefficient.
//!
//! Three quotients of the standardized vector `z` are bounded by spectra:
//!
//! | range | quotient                                   | matrix     |
//! |-------|--------------------------------------------|------------|
//! | 1     | `zᵀWz / zᵀz = I/n`                         | `W`        |
//! | 2     | `zᵀWᵀWz / zᵀz = ((Wz)ᵀo/n)² + I²/(R²n²)`   | `WᵀW`      |
//! | 3     | `zᵀWᵀzzᵀWz / zᵀz = I²/n`                   | `Wᵀzzᵀ W`  |
//!
//! Range 2 is checked in its noise-free form (`R² = 1`) and in the empirical
//! form; range 3's matrix has rank one with spectrum `{0, (Wz)ᵀWz}`.

use serde::{Deserialize, Serialize};

use crate::eigen::{symmetric_eigen, EigenSpectrum};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::sar::ZERO_R_SQUARED_TOLERANCE;
use crate::spatial_data::{SpatialLag, WeightMatrix};

/// Containment slack, relative to the largest spectral magnitude involved.
pub const CONTAINMENT_TOLERANCE: f64 = 1e-10;

/// The set of `ρ` values compatible with `c/ρ ∈ [lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RhoRegion {
    Between {
        lower: f64,
        upper: f64,
    },
    /// `ρ ≤ below` or `ρ ≥ above`; the interval of `c/ρ` straddles zero.
    Outside {
        below: f64,
        above: f64,
    },
    AtLeast {
        bound: f64,
    },
    AtMost {
        bound: f64,
    },
}

impl RhoRegion {
    /// Region of `ρ` for `c/ρ ∈ [lo, hi]` with `c > 0`.
    pub fn from_reciprocal(lo: f64, hi: f64, c: f64) -> RhoRegion {
        if lo < 0.0 && hi > 0.0 {
            RhoRegion::Outside {
                below: c / lo,
                above: c / hi,
            }
        } else if lo == 0.0 && hi > 0.0 {
            RhoRegion::AtLeast { bound: c / hi }
        } else if hi == 0.0 && lo < 0.0 {
            RhoRegion::AtMost { bound: c / lo }
        } else {
            let (a, b) = (c / hi, c / lo);
            RhoRegion::Between {
                lower: a.min(b),
                upper: a.max(b),
            }
        }
    }

    pub fn contains(&self, rho: f64) -> bool {
        match *self {
            RhoRegion::Between { lower, upper } => lower <= rho && rho <= upper,
            RhoRegion::Outside { below, above } => rho <= below || rho >= above,
            RhoRegion::AtLeast { bound } => rho >= bound,
            RhoRegion::AtMost { bound } => rho <= bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoranRange {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub i_over_n: f64,
    pub contained: bool,
    /// `I/n - λ_min` and `λ_max - I/n`.
    pub slack_lower: f64,
    pub slack_upper: f64,
    /// From `I/n = 1/ρ`.
    pub rho_theoretical: RhoRegion,
    /// From `I/n = R²/ρ̂`; absent when `R² = 0`.
    pub rho_empirical: Option<RhoRegion>,
    /// `R²/ρ̂`, the empirical route to `I/n`.
    pub empirical_value: Option<f64>,
    pub empirical_contained: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticRange {
    /// Extremes of the spectrum of `WᵀW`.
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// `((Wz)ᵀo/n)² + I²/n²`.
    pub lhs_value: f64,
    pub contained: bool,
    /// `((Wz)ᵀo/n)² + I²/(R²n²)`, equal to `(Wz)ᵀWz / n`.
    pub empirical_value: Option<f64>,
    pub empirical_contained: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterRange {
    pub lambda_min: f64,
    /// `(Wz)ᵀWz`.
    pub lambda_max: f64,
    /// `I²/n`.
    pub i_sq_over_n: f64,
    pub contained: bool,
    pub slack: f64,
    /// `n / (Wz)ᵀWz`: the implied lower bound on `ρ²`.
    pub rho_sq_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub range1: MoranRange,
    pub range2: QuadraticRange,
    pub range3: OuterRange,
    /// `|I| ≤ 1`, reported for reference only.
    pub pearson_style_bound: bool,
}

impl BoundsReport {
    pub fn all_contained(&self) -> bool {
        self.range1.contained && self.range2.contained && self.range3.contained
    }
}

fn within(x: f64, lo: f64, hi: f64) -> bool {
    let tol = CONTAINMENT_TOLERANCE * lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    x >= lo - tol && x <= hi + tol
}

pub fn weight_spectrum(w: &WeightMatrix) -> Result<EigenSpectrum> {
    symmetric_eigen(w.matrix())
}

/// Spectrum of `WᵀW`.
pub fn gram_spectrum(w: &WeightMatrix) -> Result<EigenSpectrum> {
    let m = w.matrix();
    symmetric_eigen(&m.transpose().mul(m)?)
}

/// Spectrum of the rank-one matrix `Wᵀzzᵀ W = (Wz)(Wz)ᵀ`.
pub fn outer_spectrum(lag: &SpatialLag) -> Result<EigenSpectrum> {
    let n = lag.len();
    symmetric_eigen(&Matrix::from_fn(n, n, |i, j| lag.wz[i] * lag.wz[j]))
}

/// Range 1: `λ_min(W) ≤ I/n ≤ λ_max(W)`.
pub fn range_moran(
    spectrum: &EigenSpectrum,
    i_value: f64,
    n: usize,
    r_squared: Option<f64>,
    rho_hat: Option<f64>,
) -> MoranRange {
    let (lo, hi) = (spectrum.min(), spectrum.max());
    let i_over_n = i_value / n as f64;
    let r2 = r_squared.filter(|r| *r >= ZERO_R_SQUARED_TOLERANCE);
    let empirical_value = match (r2, rho_hat) {
        (Some(r2), Some(rho)) if rho != 0.0 => Some(r2 / rho),
        _ => None,
    };
    MoranRange {
        lambda_min: lo,
        lambda_max: hi,
        i_over_n,
        contained: within(i_over_n, lo, hi),
        slack_lower: i_over_n - lo,
        slack_upper: hi - i_over_n,
        rho_theoretical: RhoRegion::from_reciprocal(lo, hi, 1.0),
        rho_empirical: r2.map(|r2| RhoRegion::from_reciprocal(lo, hi, r2)),
        empirical_value,
        empirical_contained: empirical_value.map(|v| within(v, lo, hi)),
    }
}

/// Range 2 against the spectrum of `WᵀW`.
pub fn range_quadratic(
    gram: &EigenSpectrum,
    lag: &SpatialLag,
    i_value: f64,
    r_squared: f64,
    n: usize,
) -> QuadraticRange {
    let nf = n as f64;
    let mean_term = (lag.wz_sum / nf).powi(2);
    let lhs_value = mean_term + i_value * i_value / (nf * nf);
    let (lo, hi) = (gram.min(), gram.max());
    let empirical_value = empirical_quadratic_value(lag, i_value, r_squared, n).ok();
    QuadraticRange {
        lambda_min: lo,
        lambda_max: hi,
        lhs_value,
        contained: within(lhs_value, lo, hi),
        empirical_value,
        empirical_contained: empirical_value.map(|v| within(v, lo, hi)),
    }
}

/// `((Wz)ᵀo/n)² + I²/(R²n²)`.
pub fn empirical_quadratic_value(
    lag: &SpatialLag,
    i_value: f64,
    r_squared: f64,
    n: usize,
) -> Result<f64> {
    if r_squared < ZERO_R_SQUARED_TOLERANCE {
        return Err(Error::ZeroRSquared);
    }
    let nf = n as f64;
    Ok((lag.wz_sum / nf).powi(2) + i_value * i_value / (r_squared * nf * nf))
}

/// Range 3: `0 ≤ I²/n ≤ (Wz)ᵀWz`.
pub fn range_outer(lag: &SpatialLag, i_value: f64, n: usize) -> OuterRange {
    let lambda_max = lag.inner();
    let i_sq_over_n = i_value * i_value / n as f64;
    OuterRange {
        lambda_min: 0.0,
        lambda_max,
        i_sq_over_n,
        contained: within(i_sq_over_n, 0.0, lambda_max),
        slack: lambda_max - i_sq_over_n,
        rho_sq_min: if lambda_max > 0.0 {
            n as f64 / lambda_max
        } else {
            f64::INFINITY
        },
    }
}

/// Assembles all three ranges, computing the spectra of `W` and `WᵀW` once.
pub fn bounds_report(
    w: &WeightMatrix,
    lag: &SpatialLag,
    i_value: f64,
    r_squared: f64,
    rho_hat: f64,
) -> Result<BoundsReport> {
    let n = w.len();
    let spectrum = weight_spectrum(w)?;
    let gram = gram_spectrum(w)?;
    Ok(BoundsReport {
        range1: range_moran(&spectrum, i_value, n, Some(r_squared), Some(rho_hat)),
        range2: range_quadratic(&gram, lag, i_value, r_squared, n),
        range3: range_outer(lag, i_value, n),
        pearson_style_bound: i_value.abs() <= 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two_city() -> (WeightMatrix, SpatialLag) {
        let w = WeightMatrix::new(Matrix::from_rows(&[vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap())
            .unwrap();
        let lag = SpatialLag {
            wz: vec![0.5, -0.5],
            wz_sum: 0.0,
        };
        (w, lag)
    }

    #[test]
    fn two_city_boundaries_attained() {
        let (w, lag) = two_city();
        let r = bounds_report(&w, &lag, -1.0, 1.0, -2.0).unwrap();
        assert_eq!(r.range1.i_over_n, r.range1.lambda_min);
        assert!(r.range1.contained);
        assert_eq!(r.range1.empirical_value, Some(-0.5));
        assert_eq!(r.range2.lambda_min, 0.25);
        assert_eq!(r.range2.lambda_max, 0.25);
        assert_eq!(r.range2.lhs_value, 0.25);
        assert!(r.range2.contained);
        assert_eq!(r.range3.i_sq_over_n, 0.5);
        assert_eq!(r.range3.lambda_max, 0.5);
        assert_eq!(r.range3.slack, 0.0);
        assert!(r.all_contained());
        assert_eq!(
            r.range1.rho_theoretical,
            RhoRegion::Outside {
                below: -2.0,
                above: 2.0
            }
        );
        assert!(r.range1.rho_theoretical.contains(-2.0));
        assert!(!r.range1.rho_theoretical.contains(1.0));
    }

    #[test]
    fn rho_regions() {
        assert_eq!(
            RhoRegion::from_reciprocal(0.1, 0.5, 1.0),
            RhoRegion::Between {
                lower: 2.0,
                upper: 10.0
            }
        );
        assert_eq!(
            RhoRegion::from_reciprocal(-0.5, -0.25, 1.0),
            RhoRegion::Between {
                lower: -4.0,
                upper: -2.0
            }
        );
        assert_eq!(
            RhoRegion::from_reciprocal(0.0, 0.5, 0.5),
            RhoRegion::AtLeast { bound: 1.0 }
        );
        assert_eq!(
            RhoRegion::from_reciprocal(-0.25, 0.0, 1.0),
            RhoRegion::AtMost { bound: -4.0 }
        );
    }

    #[test]
    fn gram_spectrum_is_squared_for_symmetric() {
        let w = WeightMatrix::new(
            Matrix::from_rows(&[
                vec![0.0, 0.2, 0.1],
                vec![0.2, 0.0, 0.2],
                vec![0.1, 0.2, 0.0],
            ])
            .unwrap(),
        )
        .unwrap();
        let s = weight_spectrum(&w).unwrap();
        let g = gram_spectrum(&w).unwrap();
        let mut squared: Vec<f64> = s.values.iter().map(|v| v * v).collect();
        squared.sort_by(f64::total_cmp);
        for (a, b) in g.values.iter().zip(&squared) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn outer_spectrum_rank_one() {
        let lag = SpatialLag {
            wz: vec![0.3, -0.1, 0.25],
            wz_sum: 0.45,
        };
        let s = outer_spectrum(&lag).unwrap();
        assert_abs_diff_eq!(s.max(), lag.inner(), epsilon = 1e-15);
        assert!(s.values[..2].iter().all(|v| v.abs() <= 1e-15));
    }

    #[test]
    fn empirical_needs_r_squared() {
        let (_, lag) = two_city();
        assert!(matches!(
            empirical_quadratic_value(&lag, 0.0, 0.0, 2),
            Err(Error::ZeroRSquared)
        ));
    }
}
