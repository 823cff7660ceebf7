//! Moran's index and the normalized Moran scatterplot.
//!
//! With `z` standardized (`zᵀz = n`) and `W` globally normalized, Moran's index
//! is the quadratic form `I = zᵀWz`. It is also
//!
//! * the classical double-sum statistic on the raw sizes and proximities,
//! * the only nonzero eigenvalue of the rank-one matrix `zzᵀW`,
//! * the least-squares slope of `nWz` regressed on `z`; the fitted intercept of
//!   that regression is `(Wz)ᵀo`, the mean of `nWz`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{slope_t_test, SignificanceResult};
use crate::matrix::{dot, mean};
use crate::ols;
use crate::sar::{self, SarFit};
use crate::spatial_data::{
    spatial_lag, ProximityMatrix, RawSizeVector, StandardizedVector, WeightMatrix,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoranResult {
    /// `zᵀWz`.
    pub i_value: f64,
    /// Least-squares slope of `nWz` on `z` (equals `i_value` up to rounding).
    pub slope: f64,
    /// Least-squares intercept, an estimate of `(Wz)ᵀo`.
    pub intercept: f64,
    /// Squared Pearson correlation of `z` and `Wz`.
    pub r_squared: f64,
    pub residuals_e: Vec<f64>,
    pub se_slope: Option<f64>,
    pub se_intercept: Option<f64>,
    pub slope_test: SignificanceResult,
    pub intercept_test: SignificanceResult,
    /// `max_i |n(Wz)_i - I z_i|`: how far the data sit from the no-intercept
    /// relation `nWz = Iz`. Reported only; no accuracy is claimed for it.
    pub through_origin_residual: f64,
}

impl MoranResult {
    pub fn slope_p_value(&self) -> Option<f64> {
        self.slope_test.p()
    }
}

pub fn moran_index(z: &StandardizedVector, w: &WeightMatrix) -> Result<f64> {
    let wz = w.lag(z.as_slice())?;
    Ok(dot(z.as_slice(), &wz))
}

/// Moran's (1950) statistic on the raw inputs:
/// `I = (n/S₀) ΣΣ v_ij (x_i - x̄)(x_j - x̄) / Σ (x_i - x̄)²`.
pub fn moran_double_sum(x: &RawSizeVector, v: &ProximityMatrix) -> Result<f64> {
    let n = x.len();
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: v.len(),
        });
    }
    let xbar = mean(x.values());
    let dev: Vec<f64> = x.values().iter().map(|xi| xi - xbar).collect();
    let m2: f64 = dev.iter().map(|d| d * d).sum();
    let scale = x.values().iter().fold(0.0_f64, |m, xi| m.max(xi.abs()));
    if m2 == 0.0 || m2.sqrt() <= 1e-14 * scale * (n as f64).sqrt() {
        return Err(Error::ZeroVariance);
    }
    let vm = v.matrix();
    let (mut s0, mut cross) = (0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            s0 += vm[(i, j)];
            cross += vm[(i, j)] * dev[i] * dev[j];
        }
    }
    if s0 == 0.0 {
        return Err(Error::DegenerateMatrix);
    }
    Ok(n as f64 / s0 * cross / m2)
}

/// Least squares of `nWz` on `z` with an intercept.
pub fn inner_regression(z: &StandardizedVector, w: &WeightMatrix) -> Result<MoranResult> {
    let lag = spatial_lag(w, z)?;
    let n = z.len() as f64;
    let y: Vec<f64> = lag.wz.iter().map(|v| n * v).collect();
    let i_value = dot(z.as_slice(), &lag.wz);
    let fit = ols::fit(z.as_slice(), &y)?;
    let slope_test = slope_t_test(fit.slope, fit.se_slope, fit.n)?;
    let intercept_test = slope_t_test(fit.intercept, fit.se_intercept, fit.n)?;
    let through_origin_residual = z
        .as_slice()
        .iter()
        .zip(&y)
        .map(|(zi, yi)| (yi - i_value * zi).abs())
        .fold(0.0, f64::max);
    Ok(MoranResult {
        i_value,
        slope: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        residuals_e: fit.residuals,
        se_slope: fit.se_slope,
        se_intercept: fit.se_intercept,
        slope_test,
        intercept_test,
        through_origin_residual,
    })
}

/// Residuals of the outer-product eigen relation `zzᵀWz = Iz` and of the
/// scalar identity `(Wz)ᵀzzᵀWz = I²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenCheck {
    /// `max_i |(zzᵀWz)_i - I z_i|`.
    pub residual: f64,
    /// `trace(zzᵀW)`, the only nonzero eigenvalue of the rank-one matrix.
    pub rank_one_eigenvalue: f64,
    /// `|(Wz)ᵀ(zzᵀWz) - I²|`.
    pub squared_identity_residual: f64,
}

pub fn eigen_check(z: &StandardizedVector, w: &WeightMatrix) -> Result<EigenCheck> {
    let zs = z.as_slice();
    let n = zs.len();
    let i_value = moran_index(z, w)?;
    let wm = w.matrix();
    // row k of zzᵀW is z_k · (zᵀW)
    let zt_w: Vec<f64> = (0..n)
        .map(|col| (0..n).map(|r| zs[r] * wm[(r, col)]).sum())
        .collect();
    let rank_one_eigenvalue: f64 = (0..n).map(|k| zs[k] * zt_w[k]).sum();
    let zt_w_z = dot(&zt_w, zs);
    let product: Vec<f64> = zs.iter().map(|zk| zk * zt_w_z).collect();
    let residual = product
        .iter()
        .zip(zs)
        .map(|(p, zk)| (p - i_value * zk).abs())
        .fold(0.0, f64::max);
    let wz = w.lag(zs)?;
    let squared_identity_residual = (dot(&wz, &product) - i_value * i_value).abs();
    Ok(EigenCheck {
        residual,
        rank_one_eigenvalue,
        squared_identity_residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScatterMode {
    /// Points `(z_i, n(Wz)_i)`; trend lines have slope `I`.
    Autocorrelation,
    /// Points `((Wz)_i, z_i)`; trend lines come from the SAR fit.
    Autoregression,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendLine {
    pub slope: f64,
    pub intercept: f64,
}

impl TrendLine {
    pub fn at(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterDataset {
    pub mode: ScatterMode,
    pub points: Vec<(f64, f64)>,
    /// Absent in autoregression mode when `I = 0` (no theoretical coefficients).
    pub theoretical_line: Option<TrendLine>,
    pub empirical_line: TrendLine,
}

impl ScatterDataset {
    pub fn x_label(&self) -> &'static str {
        match self.mode {
            ScatterMode::Autocorrelation => "z",
            ScatterMode::Autoregression => "Wz",
        }
    }

    pub fn y_label(&self) -> &'static str {
        match self.mode {
            ScatterMode::Autocorrelation => "nWz",
            ScatterMode::Autoregression => "z",
        }
    }

    /// CSV with `#line` comment rows ahead of the `x,y` table.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if let Some(line) = self.theoretical_line {
            out.push_str(&format!(
                "#line {} {} theoretical\n",
                line.slope, line.intercept
            ));
        }
        let e = self.empirical_line;
        out.push_str(&format!("#line {} {} empirical\n", e.slope, e.intercept));
        out.push_str("x,y\n");
        for (x, y) in &self.points {
            out.push_str(&format!("{x},{y}\n"));
        }
        out
    }
}

pub fn scatter_dataset(
    z: &StandardizedVector,
    w: &WeightMatrix,
    mode: ScatterMode,
) -> Result<ScatterDataset> {
    let lag = spatial_lag(w, z)?;
    let n = z.len() as f64;
    let i_value = dot(z.as_slice(), &lag.wz);
    match mode {
        ScatterMode::Autocorrelation => Ok(ScatterDataset {
            mode,
            points: z
                .as_slice()
                .iter()
                .zip(&lag.wz)
                .map(|(zi, wi)| (*zi, n * wi))
                .collect(),
            theoretical_line: Some(TrendLine {
                slope: i_value,
                intercept: 0.0,
            }),
            empirical_line: TrendLine {
                slope: i_value,
                intercept: lag.wz_sum,
            },
        }),
        ScatterMode::Autoregression => {
            let fit: SarFit = sar::fit_sar_ols(z, &lag)?;
            let theoretical_line = sar::theoretical_coefficients(i_value, lag.wz_sum, z.len())
                .ok()
                .map(|t| TrendLine {
                    slope: t.rho,
                    intercept: t.a,
                });
            Ok(ScatterDataset {
                mode,
                points: lag
                    .wz
                    .iter()
                    .zip(z.as_slice())
                    .map(|(wi, zi)| (*wi, *zi))
                    .collect(),
                theoretical_line,
                empirical_line: TrendLine {
                    slope: fit.rho_hat,
                    intercept: fit.a_hat,
                },
            })
        }
    }
}
