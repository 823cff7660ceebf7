//! Bivariate least squares `y = b0 + b1·x + e` from centered sums.

use crate::error::{Error, Result};
use crate::matrix::mean;

/// `SSE / SST` below this is treated as an exact fit.
pub const EXACT_FIT_TOLERANCE: f64 = 1e-20;

#[derive(Debug, Clone, PartialEq)]
pub struct SimpleFit {
    pub n: usize,
    pub intercept: f64,
    pub slope: f64,
    pub residuals: Vec<f64>,
    /// Squared Pearson correlation of `x` and `y`.
    pub r_squared: f64,
    pub sse: f64,
    /// `None` when the fit is exact or `n < 3`.
    pub se_slope: Option<f64>,
    pub se_intercept: Option<f64>,
    pub exact_fit: bool,
}

pub fn fit(x: &[f64], y: &[f64]) -> Result<SimpleFit> {
    let n = x.len();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: y.len(),
        });
    }
    if n < 2 {
        return Err(Error::TooFewElements {
            required: 2,
            found: n,
        });
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let x_scale = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if sxx == 0.0 || sxx.sqrt() <= 1e-14 * x_scale * (n as f64).sqrt() {
        return Err(Error::DegenerateRegression);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        0.0
    } else {
        (sxy * sxy / (sxx * syy)).min(1.0)
    };
    let mut residuals: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| b - intercept - slope * a)
        .collect();
    let mut sse: f64 = residuals.iter().map(|e| e * e).sum();
    let exact_fit = syy == 0.0 || sse <= EXACT_FIT_TOLERANCE * syy;
    let (mut se_slope, mut se_intercept) = (None, None);
    if exact_fit {
        residuals.iter_mut().for_each(|e| *e = 0.0);
        sse = 0.0;
    } else if n > 2 {
        let s2 = sse / (n - 2) as f64;
        se_slope = Some((s2 / sxx).sqrt());
        se_intercept = Some((s2 * (1.0 / n as f64 + mx * mx / sxx)).sqrt());
    }
    Ok(SimpleFit {
        n,
        intercept,
        slope,
        residuals,
        r_squared: if exact_fit && syy != 0.0 {
            1.0
        } else {
            r_squared
        },
        sse,
        se_slope,
        se_intercept,
        exact_fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_line() {
        let f = fit(&[1.0, 2.0, 3.0], &[3.0, 5.0, 7.0]).unwrap();
        assert_abs_diff_eq!(f.slope, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.intercept, 1.0, epsilon = 1e-15);
        assert!(f.exact_fit);
        assert_eq!(f.r_squared, 1.0);
        assert!(f.se_slope.is_none());
    }

    #[test]
    fn textbook_standard_errors() {
        // x = 1..5, y = [2, 4, 5, 4, 5]: b1 = 0.6, b0 = 2.2, SSE = 2.4
        let f = fit(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 4.0, 5.0, 4.0, 5.0]).unwrap();
        assert_abs_diff_eq!(f.slope, 0.6, epsilon = 1e-14);
        assert_abs_diff_eq!(f.intercept, 2.2, epsilon = 1e-14);
        assert_abs_diff_eq!(f.sse, 2.4, epsilon = 1e-13);
        assert_abs_diff_eq!(
            f.se_slope.unwrap(),
            (0.8_f64 / 10.0).sqrt(),
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            f.se_intercept.unwrap(),
            (0.8_f64 * (0.2 + 9.0 / 10.0)).sqrt(),
            epsilon = 1e-14
        );
        // Sxy = 6, Sxx = 10, Syy = 6
        assert_abs_diff_eq!(f.r_squared, 36.0 / 60.0, epsilon = 1e-14);
    }

    #[test]
    fn constant_predictor() {
        assert!(matches!(
            fit(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]),
            Err(Error::DegenerateRegression)
        ));
    }
}
