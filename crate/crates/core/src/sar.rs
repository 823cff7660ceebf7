//! The simplest spatial autoregressive model `z = a·o + ρ·Wz + ε`.
//!
//! Coefficients come from the 2×2 normal equations. The closed forms in terms
//! of Moran's index,
//!
//! ```text
//! ρ̂ = nR²/I,    â = -(R²/I)(Wz)ᵀo,    δ = zᵀε = n(1 - R²),
//! n(Wz)ᵀWz - ((Wz)ᵀo)² = I²/R²,
//! ```
//!
//! are exposed as cross-checks; they divide by `I` and are never the
//! primary computation path.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{slope_t_test, SignificanceResult};
use crate::matrix::{dot, mean};
use crate::ols;
use crate::spatial_data::{SpatialLag, StandardizedVector};

/// `|I|` below this sets the zero-Moran flag.
pub const ZERO_MORAN_TOLERANCE: f64 = 1e-12;

/// `R²` below this makes the `I²/R²` identities undefined.
pub const ZERO_R_SQUARED_TOLERANCE: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarFit {
    pub n: usize,
    pub a_hat: f64,
    pub rho_hat: f64,
    pub r_squared: f64,
    /// `zᵀε`.
    pub delta: f64,
    pub se_slope: Option<f64>,
    pub se_intercept: Option<f64>,
    pub p_slope: Option<f64>,
    pub p_intercept: Option<f64>,
    pub slope_test: SignificanceResult,
    pub intercept_test: SignificanceResult,
    /// `R² = 1`: residuals are reported as zero and p-values as degenerate.
    pub exact_fit: bool,
    /// `|I| < ZERO_MORAN_TOLERANCE`: the `nR²/I` cross-checks are skipped.
    pub zero_moran: bool,
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoreticalCoefficients {
    pub a: f64,
    pub rho: f64,
}

fn check_lengths(z: &StandardizedVector, lag: &SpatialLag) -> Result<()> {
    if z.len() != lag.len() {
        return Err(Error::DimensionMismatch {
            expected: z.len(),
            found: lag.len(),
        });
    }
    Ok(())
}

fn regress(z: &StandardizedVector, x: &[f64]) -> Result<SarFit> {
    let fit = ols::fit(x, z.as_slice()).map_err(|e| match e {
        Error::DegenerateRegression => Error::DegenerateLag,
        other => other,
    })?;
    let slope_test = slope_t_test(fit.slope, fit.se_slope, fit.n)?;
    let intercept_test = slope_t_test(fit.intercept, fit.se_intercept, fit.n)?;
    let delta = dot(z.as_slice(), &fit.residuals);
    // zᵀ(Wz) with mean(z) = 0 is the regression cross-product, so I is free here
    let i_value = dot(z.as_slice(), x);
    Ok(SarFit {
        n: fit.n,
        a_hat: fit.intercept,
        rho_hat: fit.slope,
        r_squared: fit.r_squared,
        delta,
        se_slope: fit.se_slope,
        se_intercept: fit.se_intercept,
        p_slope: slope_test.p(),
        p_intercept: intercept_test.p(),
        slope_test,
        intercept_test,
        exact_fit: fit.exact_fit,
        zero_moran: i_value.abs() < ZERO_MORAN_TOLERANCE,
        residuals: fit.residuals,
    })
}

/// Least squares of `z` on `Wz` with an intercept.
pub fn fit_sar_ols(z: &StandardizedVector, lag: &SpatialLag) -> Result<SarFit> {
    check_lengths(z, lag)?;
    regress(z, &lag.wz)
}

/// Regression of `z` on the centered lag `Wz - mean(Wz)`. The slope matches
/// [`fit_sar_ols`]; the intercept is `mean(z) = 0`.
pub fn centered_fit(z: &StandardizedVector, lag: &SpatialLag) -> Result<SarFit> {
    check_lengths(z, lag)?;
    let m = lag.mean();
    let centered: Vec<f64> = lag.wz.iter().map(|v| v - m).collect();
    regress(z, &centered)
}

/// `(â, ρ̂)` from `I`, `R²` and `(Wz)ᵀo`.
pub fn closed_form_from_moran(
    i_value: f64,
    r_squared: f64,
    wz_sum: f64,
    n: usize,
) -> Result<(f64, f64)> {
    if i_value.abs() < ZERO_MORAN_TOLERANCE {
        return Err(Error::ZeroMoran);
    }
    let rho_hat = n as f64 * r_squared / i_value;
    let a_hat = -(r_squared / i_value) * wz_sum;
    Ok((a_hat, rho_hat))
}

/// `(â, ρ̂)` from `δ = zᵀε`:
/// `ρ̂ = (n - δ)/I`, `â = ((n - δ)(Wz)ᵀWz - I²) / (-I (Wz)ᵀo)`.
pub fn closed_form_from_delta(
    n: usize,
    delta: f64,
    i_value: f64,
    wz_sum: f64,
    wz_inner: f64,
) -> Result<(f64, f64)> {
    if i_value.abs() < ZERO_MORAN_TOLERANCE {
        return Err(Error::ZeroMoran);
    }
    let explained = n as f64 - delta;
    let rho_hat = explained / i_value;
    let a_hat = (explained * wz_inner - i_value * i_value) / (-i_value * wz_sum);
    Ok((a_hat, rho_hat))
}

/// Coefficients of the exact (noise-free) model: `ρ = n/I`, `a = -(Wz)ᵀo / I`.
pub fn theoretical_coefficients(
    i_value: f64,
    wz_sum: f64,
    n: usize,
) -> Result<TheoreticalCoefficients> {
    if i_value.abs() < ZERO_MORAN_TOLERANCE {
        return Err(Error::ZeroMoran);
    }
    Ok(TheoreticalCoefficients {
        a: -wz_sum / i_value,
        rho: n as f64 / i_value,
    })
}

/// `zᵀε`; equals `n(1 - R²)` for any least-squares fit with intercept.
pub fn delta_inner(z: &StandardizedVector, fit: &SarFit) -> f64 {
    dot(z.as_slice(), &fit.residuals)
}

/// Signed discrepancy `n(Wz)ᵀWz - ((Wz)ᵀo)² - I²/R²`.
pub fn identity_eq34_check(
    z: &StandardizedVector,
    lag: &SpatialLag,
    i_value: f64,
    r_squared: f64,
) -> Result<f64> {
    check_lengths(z, lag)?;
    if r_squared < ZERO_R_SQUARED_TOLERANCE {
        return Err(Error::ZeroRSquared);
    }
    let n = z.len() as f64;
    Ok(n * lag.inner() - lag.wz_sum * lag.wz_sum - i_value * i_value / r_squared)
}

/// `n(Wz)ᵀWz - I² - ((Wz)ᵀo)²`, which vanishes only for exact fits.
pub fn exact_fit_discrepancy(lag: &SpatialLag, i_value: f64) -> f64 {
    lag.len() as f64 * lag.inner() - i_value * i_value - lag.wz_sum * lag.wz_sum
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopePair {
    /// Slope of `y` on `x`.
    pub b: f64,
    /// Slope of `x` on `y`.
    pub b_prime: f64,
    pub product: f64,
}

pub fn inverse_slope_relation(x: &[f64], y: &[f64]) -> Result<SlopePair> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::TooFewElements {
            required: 2,
            found: x.len(),
        });
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
        sxy += (a - mx) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let b = sxy / sxx;
    let b_prime = sxy / syy;
    Ok(SlopePair {
        b,
        b_prime,
        product: b * b_prime,
    })
}
