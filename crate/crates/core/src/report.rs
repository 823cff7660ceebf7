//! End-to-end analysis: inputs → Moran → SAR → bounds → inference → report.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::autocorr::{
    eigen_check, inner_regression, scatter_dataset, EigenCheck, MoranResult, ScatterDataset,
    ScatterMode,
};
use crate::bounds::{bounds_report, BoundsReport};
use crate::error::{Error, Result};
use crate::inference::{
    dw_interpret, geary_c, permutation_test, spatial_durbin_watson, CriticalTable, DwResult,
    PermutationConfig, SignificanceResult, DEFAULT_PERMUTATIONS,
};
use crate::io::{
    align_sizes, file_sha256, load_distances, load_sizes, DistanceFormat, DistanceTable,
};
use crate::matrix::{dot, Matrix};
use crate::sar::{self, centered_fit, fit_sar_ols, SarFit};
use crate::spatial_data::{
    global_normalize, inverse_distance_proximity, log_transform, spatial_lag, standardize,
    RawSizeVector, StandardizedVector, SymmetryPolicy, WeightMatrix,
};
use crate::svg::render_svg;

pub const DEFAULT_SEED: u64 = 20_240_417;
pub const DEFAULT_ALPHA: f64 = 0.05;

/// Relative tolerance for identities that depend on the data.
pub const DATA_IDENTITY_TOLERANCE: f64 = 1e-9;
/// Absolute tolerance for exact linear-algebra identities.
pub const EXACT_IDENTITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub log_transform: bool,
    /// `0` skips permutation tests.
    pub permutations: usize,
    pub seed: u64,
    pub alpha: f64,
    pub symmetry: SymmetryPolicy,
    pub workers: usize,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            log_transform: false,
            permutations: DEFAULT_PERMUTATIONS,
            seed: DEFAULT_SEED,
            alpha: DEFAULT_ALPHA,
            symmetry: SymmetryPolicy::Auto,
            workers: 0,
        }
    }
}

impl AnalysisOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    pub sizes_path: PathBuf,
    pub dist_path: PathBuf,
    pub dist_format: DistanceFormat,
    pub dw_critical: Option<PathBuf>,
    pub options: AnalysisOptions,
}

/// One embedded identity: both sides, their gap, and the verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub tolerance: f64,
    /// `None` when the identity does not apply (e.g. `I = 0`).
    pub pass: Option<bool>,
}

impl IdentityCheck {
    fn absolute(name: &str, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let slack = (lhs - rhs).abs();
        IdentityCheck {
            name: name.to_string(),
            lhs,
            rhs,
            slack,
            tolerance,
            pass: Some(slack <= tolerance),
        }
    }

    fn relative(name: &str, lhs: f64, rhs: f64, rel: f64) -> Self {
        let tolerance = rel * lhs.abs().max(rhs.abs());
        IdentityCheck::absolute(name, lhs, rhs, tolerance)
    }

    fn skipped(name: &str) -> Self {
        IdentityCheck {
            name: name.to_string(),
            lhs: 0.0,
            rhs: 0.0,
            slack: 0.0,
            tolerance: 0.0,
            pass: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceSection {
    pub moran_t: SignificanceResult,
    pub sar_t: SignificanceResult,
    pub moran_permutation: Option<SignificanceResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSection {
    /// Absent when the SAR fit is exact (residuals vanish).
    pub durbin_watson: Option<DwResult>,
    pub residual_permutation: Option<SignificanceResult>,
    pub critical_values: Option<crate::inference::DwCriticalValues>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenteredSummary {
    pub slope: f64,
    pub intercept: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub seed: u64,
    pub permutations: usize,
    pub log_transform: bool,
    pub sizes_sha256: Option<String>,
    pub dist_sha256: Option<String>,
    /// Seconds since the Unix epoch; the only nondeterministic field.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub n: usize,
    pub ids: Vec<String>,
    pub z: Vec<f64>,
    pub wz: Vec<f64>,
    pub wz_sum: f64,
    pub moran: MoranResult,
    pub sar: SarFit,
    pub centered: CenteredSummary,
    pub eigen: EigenCheck,
    pub bounds: BoundsReport,
    pub inference: InferenceSection,
    pub diagnostics: DiagnosticsSection,
    pub identities: Vec<IdentityCheck>,
    pub scatter: Vec<ScatterDataset>,
    pub provenance: Provenance,
}

impl AnalysisReport {
    /// All applicable identity checks pass. Spectral containment is reported
    /// separately in `bounds`.
    pub fn all_pass(&self) -> bool {
        self.identities.iter().all(|c| c.pass != Some(false))
    }

    pub fn failures(&self) -> Vec<&IdentityCheck> {
        self.identities
            .iter()
            .filter(|c| c.pass == Some(false))
            .collect()
    }
}

/// Standardized sizes and the normalized weight matrix, the shared starting
/// point of every analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedInputs {
    pub z: StandardizedVector,
    pub w: WeightMatrix,
}

pub fn prepare(
    sizes: &RawSizeVector,
    distances: &Matrix,
    log: bool,
    symmetry: SymmetryPolicy,
) -> Result<PreparedInputs> {
    if distances.rows() != sizes.len() {
        return Err(Error::DimensionMismatch {
            expected: sizes.len(),
            found: distances.rows(),
        });
    }
    let raw = if log {
        log_transform(sizes)?
    } else {
        sizes.clone()
    };
    let z = standardize(&raw)?;
    let v = inverse_distance_proximity(distances, symmetry)?;
    let w = global_normalize(&v)?;
    Ok(PreparedInputs { z, w })
}

/// Reads a sizes file and a distance file and orders the sizes like the
/// distance ids.
pub fn load_inputs(
    sizes_path: &Path,
    dist_path: &Path,
    format: DistanceFormat,
    symmetry: SymmetryPolicy,
) -> Result<(RawSizeVector, DistanceTable)> {
    let sizes = load_sizes(sizes_path)?;
    let table = load_distances(dist_path, format, symmetry)?;
    let sizes = align_sizes(&sizes, &table)?;
    Ok((sizes, table))
}

/// Runs the full pipeline on in-memory inputs. `distances` must be ordered
/// like `sizes`.
pub fn analyze_data(
    sizes: &RawSizeVector,
    distances: &Matrix,
    options: &AnalysisOptions,
    critical: &CriticalTable,
) -> Result<AnalysisReport> {
    options.validate()?;
    let PreparedInputs { z, w } =
        prepare(sizes, distances, options.log_transform, options.symmetry)?;
    let lag = spatial_lag(&w, &z)?;
    let n = z.len();
    let nf = n as f64;

    let moran = inner_regression(&z, &w)?;
    let i_value = moran.i_value;
    let fit = fit_sar_ols(&z, &lag)?;
    let centered = centered_fit(&z, &lag)?;
    let eigen = eigen_check(&z, &w)?;
    let bounds = bounds_report(&w, &lag, i_value, fit.r_squared, fit.rho_hat)?;

    let moran_permutation = if options.permutations > 0 {
        let mut cfg = PermutationConfig::new(options.permutations, options.seed);
        cfg.workers = options.workers;
        Some(permutation_test(z.as_slice(), &w, &cfg)?)
    } else {
        None
    };

    let critical_values = critical.lookup(n, options.alpha).ok();
    let (durbin_watson, residual_permutation, geary) = if fit.exact_fit {
        (None, None, None)
    } else {
        let mut dw = spatial_durbin_watson(&fit.residuals, &w)?;
        dw.classification = critical_values.as_ref().map(|c| dw_interpret(dw.dw, c));
        let geary = geary_c(&fit.residuals, &w)?;
        let perm = if options.permutations > 0 {
            let e = crate::spatial_data::standardize_values(&fit.residuals)?;
            let mut cfg =
                PermutationConfig::new(options.permutations, options.seed.wrapping_add(1));
            cfg.workers = options.workers;
            Some(permutation_test(e.as_slice(), &w, &cfg)?)
        } else {
            None
        };
        (Some(dw), perm, Some(geary))
    };

    let mut identities = Vec::new();
    let product = fit.rho_hat * i_value;
    identities.push(IdentityCheck::relative(
        "rho_hat * I = n * R^2",
        product,
        nf * fit.r_squared,
        DATA_IDENTITY_TOLERANCE,
    ));
    identities.push(IdentityCheck::absolute(
        "delta = n * (1 - R^2)",
        fit.delta,
        nf * (1.0 - fit.r_squared),
        DATA_IDENTITY_TOLERANCE,
    ));
    identities.push(
        match sar::identity_eq34_check(&z, &lag, i_value, fit.r_squared) {
            Ok(d) => IdentityCheck::absolute(
                "n (Wz)'Wz - ((Wz)'o)^2 = I^2 / R^2",
                d,
                0.0,
                DATA_IDENTITY_TOLERANCE * nf * lag.inner(),
            ),
            Err(_) => IdentityCheck::skipped("n (Wz)'Wz - ((Wz)'o)^2 = I^2 / R^2"),
        },
    );
    identities.push(IdentityCheck::absolute(
        "(Wz)' eps = 0",
        dot(&lag.wz, &fit.residuals),
        0.0,
        DATA_IDENTITY_TOLERANCE,
    ));
    identities.push(IdentityCheck::absolute(
        "o' eps = 0",
        fit.residuals.iter().sum(),
        0.0,
        DATA_IDENTITY_TOLERANCE,
    ));
    identities.push(IdentityCheck::absolute(
        "OLS slope of nWz on z = z'Wz",
        moran.slope,
        i_value,
        EXACT_IDENTITY_TOLERANCE,
    ));
    identities.push(IdentityCheck::absolute(
        "OLS intercept of nWz on z = (Wz)'o",
        moran.intercept,
        lag.wz_sum,
        DATA_IDENTITY_TOLERANCE,
    ));
    identities.push(IdentityCheck::relative(
        "(I/n) * rho_hat = R^2",
        moran.slope / nf * fit.rho_hat,
        fit.r_squared,
        DATA_IDENTITY_TOLERANCE,
    ));
    identities.push(IdentityCheck::relative(
        "centered slope = rho_hat",
        centered.rho_hat,
        fit.rho_hat,
        DATA_IDENTITY_TOLERANCE,
    ));
    identities.push(IdentityCheck::absolute(
        "centered intercept = mean(z)",
        centered.a_hat,
        0.0,
        EXACT_IDENTITY_TOLERANCE,
    ));
    identities.push(IdentityCheck::absolute(
        "zz'Wz = Iz",
        eigen.residual,
        0.0,
        1e-10,
    ));
    identities.push(IdentityCheck::absolute(
        "(Wz)'zz'Wz = I^2",
        eigen.squared_identity_residual,
        0.0,
        EXACT_IDENTITY_TOLERANCE,
    ));
    identities.push(
        match sar::closed_form_from_moran(i_value, fit.r_squared, lag.wz_sum, n) {
            Ok((a, _)) if !fit.zero_moran => IdentityCheck::absolute(
                "a_hat = -(R^2/I)(Wz)'o",
                fit.a_hat,
                a,
                DATA_IDENTITY_TOLERANCE * fit.a_hat.abs().max(a.abs()).max(1.0),
            ),
            _ => IdentityCheck::skipped("a_hat = -(R^2/I)(Wz)'o"),
        },
    );
    if fit.r_squared == 1.0 {
        identities.push(IdentityCheck::absolute(
            "n (Wz)'Wz = I^2 + ((Wz)'o)^2 (exact fit)",
            nf * lag.inner(),
            i_value * i_value + lag.wz_sum * lag.wz_sum,
            DATA_IDENTITY_TOLERANCE,
        ));
    }
    let paired_p = match (moran.slope_test.p_value, fit.slope_test.p_value) {
        (Some(a), Some(b)) => {
            IdentityCheck::absolute("p(I) = p(rho_hat)", a, b, DATA_IDENTITY_TOLERANCE)
        }
        _ => IdentityCheck::skipped("p(I) = p(rho_hat)"),
    };
    identities.push(paired_p);
    identities.push(match (&durbin_watson, geary) {
        (Some(dw), Some(c)) => IdentityCheck::absolute("DW = 2C", dw.dw, 2.0 * c, 1e-10),
        _ => IdentityCheck::skipped("DW = 2C"),
    });

    let scatter = vec![
        scatter_dataset(&z, &w, ScatterMode::Autocorrelation)?,
        scatter_dataset(&z, &w, ScatterMode::Autoregression)?,
    ];

    Ok(AnalysisReport {
        n,
        ids: sizes.ids().to_vec(),
        wz: lag.wz.clone(),
        wz_sum: lag.wz_sum,
        z: z.into_inner(),
        inference: InferenceSection {
            moran_t: moran.slope_test.clone(),
            sar_t: fit.slope_test.clone(),
            moran_permutation,
        },
        moran,
        centered: CenteredSummary {
            slope: centered.rho_hat,
            intercept: centered.a_hat,
        },
        sar: fit,
        eigen,
        bounds,
        diagnostics: DiagnosticsSection {
            durbin_watson,
            residual_permutation,
            critical_values,
        },
        identities,
        scatter,
        provenance: Provenance {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: options.seed,
            permutations: options.permutations,
            log_transform: options.log_transform,
            sizes_sha256: None,
            dist_sha256: None,
            generated_at: None,
        },
    })
}

/// Loads the files named in `config` and runs [`analyze_data`].
pub fn analyze(config: &AnalysisConfig) -> Result<AnalysisReport> {
    let (sizes, table) = load_inputs(
        &config.sizes_path,
        &config.dist_path,
        config.dist_format,
        config.options.symmetry,
    )?;
    let critical = match &config.dw_critical {
        Some(p) => CriticalTable::from_csv_path(p)?,
        None => CriticalTable::bundled(),
    };
    let mut report = analyze_data(&sizes, &table.matrix, &config.options, &critical)?;
    report.provenance.sizes_sha256 = Some(file_sha256(&config.sizes_path)?);
    report.provenance.dist_sha256 = Some(file_sha256(&config.dist_path)?);
    report.provenance.generated_at = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .ok()
        .map(|d| d.as_secs());
    Ok(report)
}

/// Rounds to six significant digits and prints the shortest decimal form.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{}", if x == 0.0 { 0.0 } else { x });
    }
    let rounded: f64 = format!("{x:.5e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub measure: &'static str,
    pub parameter: &'static str,
    pub coefficient: f64,
    pub p_value: Option<f64>,
    pub r_squared: f64,
}

/// Two rows per model: intercept then slope, each carrying the shared `R²`.
pub fn summary_rows(report: &AnalysisReport) -> Vec<SummaryRow> {
    let r2 = report.sar.r_squared;
    vec![
        SummaryRow {
            measure: "spatial_autocorrelation",
            parameter: "(Wz)'o",
            coefficient: report.moran.intercept,
            p_value: report.moran.intercept_test.p_value,
            r_squared: report.moran.r_squared,
        },
        SummaryRow {
            measure: "spatial_autocorrelation",
            parameter: "I",
            coefficient: report.moran.slope,
            p_value: report.moran.slope_test.p_value,
            r_squared: report.moran.r_squared,
        },
        SummaryRow {
            measure: "spatial_autoregression",
            parameter: "a",
            coefficient: report.sar.a_hat,
            p_value: report.sar.p_intercept,
            r_squared: r2,
        },
        SummaryRow {
            measure: "spatial_autoregression",
            parameter: "rho",
            coefficient: report.sar.rho_hat,
            p_value: report.sar.p_slope,
            r_squared: r2,
        },
    ]
}

pub fn summary_csv(report: &AnalysisReport) -> String {
    let mut out = String::from("measure,parameter,coefficient,p_value,r_squared\n");
    for row in summary_rows(report) {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.measure,
            row.parameter,
            format_sig6(row.coefficient),
            row.p_value.map(format_sig6).unwrap_or_default(),
            format_sig6(row.r_squared)
        ));
    }
    out
}

pub fn report_json(report: &AnalysisReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OutputFormats {
    pub json: bool,
    pub csv: bool,
    pub svg: bool,
}

impl OutputFormats {
    pub fn all() -> Self {
        OutputFormats {
            json: true,
            csv: true,
            svg: true,
        }
    }
}

/// Writes `report.json`, `summary.csv` and the scatterplot SVGs into `out_dir`,
/// returning the paths written.
pub fn emit_report(
    report: &AnalysisReport,
    formats: OutputFormats,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)
        .map_err(|e| Error::io(format!("creating {}", out_dir.display()), e))?;
    let mut written = Vec::new();
    let write = |name: &str, body: String, written: &mut Vec<PathBuf>| -> Result<()> {
        let path = out_dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        written.push(path);
        Ok(())
    };
    if formats.json {
        write("report.json", report_json(report)?, &mut written)?;
    }
    if formats.csv {
        write("summary.csv", summary_csv(report), &mut written)?;
        for s in &report.scatter {
            let name = match s.mode {
                ScatterMode::Autocorrelation => "scatter_autocorr.csv",
                ScatterMode::Autoregression => "scatter_sar.csv",
            };
            write(name, s.to_csv(), &mut written)?;
        }
    }
    if formats.svg {
        for s in &report.scatter {
            let name = match s.mode {
                ScatterMode::Autocorrelation => "scatter_autocorr.svg",
                ScatterMode::Autoregression => "scatter_sar.svg",
            };
            let path = out_dir.join(name);
            render_svg(s, &path)?;
            written.push(path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_city() -> (RawSizeVector, Matrix) {
        (
            RawSizeVector::from_values(vec![1.0, 3.0]).unwrap(),
            Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap(),
        )
    }

    #[test]
    fn sig6() {
        assert_eq!(format_sig6(0.1248), "0.1248");
        assert_eq!(format_sig6(-64.55151234), "-64.5515");
        assert_eq!(format_sig6(1234567.0), "1234570");
        assert_eq!(format_sig6(0.0), "0");
        assert_eq!(format_sig6(1.0e-9 / 3.0), "0.000000000333333");
    }

    #[test]
    fn two_city_report() {
        let (s, d) = two_city();
        let r = analyze_data(
            &s,
            &d,
            &AnalysisOptions::default(),
            &CriticalTable::bundled(),
        )
        .unwrap();
        assert_eq!(r.moran.i_value, -1.0);
        assert!((r.sar.rho_hat + 2.0).abs() < 1e-14);
        assert_eq!(r.sar.r_squared, 1.0);
        assert!(r.all_pass(), "{:?}", r.failures());
        assert!(r.diagnostics.durbin_watson.is_none());
        assert_eq!(
            r.inference.moran_permutation.as_ref().unwrap().p_value,
            Some(1.0)
        );
        let csv = summary_csv(&r);
        let rows: Vec<&str> = csv.lines().collect();
        assert_eq!(rows.len(), 5);
        assert!(rows[2].starts_with("spatial_autocorrelation,I,-1,"));
    }

    #[test]
    fn bad_alpha_rejected() {
        let (s, d) = two_city();
        let options = AnalysisOptions {
            alpha: 1.5,
            ..AnalysisOptions::default()
        };
        assert!(matches!(
            analyze_data(&s, &d, &options, &CriticalTable::bundled()),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn unwritable_dir() {
        let (s, d) = two_city();
        let r = analyze_data(
            &s,
            &d,
            &AnalysisOptions::default(),
            &CriticalTable::bundled(),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        assert!(matches!(
            emit_report(&r, OutputFormats::all(), &blocker.join("sub")),
            Err(Error::Io { .. })
        ));
    }
}
