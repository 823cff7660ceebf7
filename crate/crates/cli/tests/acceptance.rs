//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line to stderr
//! (bypassing output capture) and then asserts its verdict.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use moransar_core::autocorr::{inner_regression, moran_index};
use moransar_core::inference::{
    dw_interpret, permutation_distribution, permutation_test, spatial_durbin_watson, CriticalTable,
    DwClass, PermutationConfig,
};
use moransar_core::matrix::Matrix;
use moransar_core::report::{analyze_data, AnalysisOptions};
use moransar_core::sar::{closed_form_from_moran, fit_sar_ols};
use moransar_core::spatial_data::{
    global_normalize, inverse_distance_proximity, spatial_lag, standardize, RawSizeVector,
    SymmetryPolicy, WeightMatrix,
};
use moransar_core::verify::{random_instance, run_identity_suite, Check, DEFAULT_SUITE_SEED};

const INSTANCES: usize = 1000;

fn report(id: u32, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(
        std::io::stderr().lock(),
        "criterion {id:>2}: {verdict}  {detail}"
    );
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn weights(d: &Matrix) -> WeightMatrix {
    global_normalize(&inverse_distance_proximity(d, SymmetryPolicy::Strict).unwrap()).unwrap()
}

/// Textbook double-sum Moran's I straight from raw sizes and distances.
fn classical_moran(x: &[f64], d: &Matrix) -> f64 {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let (mut s0, mut cross) = (0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let v = 1.0 / d[(i, j)];
                s0 += v;
                cross += v * (x[i] - mean) * (x[j] - mean);
            }
        }
    }
    let ss: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    n as f64 / s0 * cross / ss
}

fn pairwise_geary(e: &[f64], w: &Matrix) -> f64 {
    let n = e.len();
    let mean = e.iter().sum::<f64>() / n as f64;
    let (mut s0, mut num) = (0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            s0 += w[(i, j)];
            num += w[(i, j)] * (e[i] - e[j]).powi(2);
        }
    }
    let ss: f64 = e.iter().map(|v| (v - mean).powi(2)).sum();
    (n as f64 - 1.0) * num / (2.0 * s0 * ss)
}

fn quad(v: &[f64], w: &Matrix) -> f64 {
    let n = v.len();
    (0..n)
        .map(|i| (0..n).map(|j| v[i] * w[(i, j)] * v[j]).sum::<f64>())
        .sum()
}

/// Two-sided exhaustive p over all relabellings, by recursive enumeration.
fn exhaustive_p(z: &[f64], w: &Matrix) -> f64 {
    fn rec(
        z: &[f64],
        w: &Matrix,
        buf: &mut Vec<f64>,
        used: &mut [bool],
        obs: f64,
        hits: &mut usize,
        total: &mut usize,
    ) {
        if buf.len() == z.len() {
            *total += 1;
            if quad(buf, w).abs() >= obs * (1.0 - 1e-12) {
                *hits += 1;
            }
            return;
        }
        for k in 0..z.len() {
            if !used[k] {
                used[k] = true;
                buf.push(z[k]);
                rec(z, w, buf, used, obs, hits, total);
                buf.pop();
                used[k] = false;
            }
        }
    }
    let (mut hits, mut total) = (0, 0);
    let obs = quad(z, w).abs();
    rec(
        z,
        w,
        &mut Vec::new(),
        &mut vec![false; z.len()],
        obs,
        &mut hits,
        &mut total,
    );
    hits as f64 / total as f64
}

fn chain_distances() -> Matrix {
    Matrix::from_rows(&[
        vec![0.0, 1.0, 2.0],
        vec![1.0, 0.0, 1.0],
        vec![2.0, 1.0, 0.0],
    ])
    .unwrap()
}

fn two_city_distances() -> Matrix {
    Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
}

// Published 35-city scalars.
const N35: usize = 35;
const I35: f64 = 0.1248;
const R2_35: f64 = 0.2301;
const WZ_SUM_35: f64 = -0.1427;

#[test]
fn criterion_01_published_coefficients() {
    let (a, rho) = closed_form_from_moran(I35, R2_35, WZ_SUM_35, N35).unwrap();
    let a_ok = (a - 0.2631).abs() <= 0.002;
    let rho_ok = ((rho - 64.5515) / 64.5515).abs() <= 5e-3;
    let product_ok = (rho * I35 - 8.0536).abs() <= 0.01;
    let pass = a_ok && rho_ok && product_ok;
    report(
        1,
        pass,
        &format!("a = {a:.4}, rho = {rho:.4}, rho*I = {:.4}", rho * I35),
    );
    assert!(pass);
}

#[test]
fn criterion_02_published_quadratic_identity() {
    let wz_inner = (WZ_SUM_35 * WZ_SUM_35 + I35 * I35 / R2_35) / N35 as f64;
    let lhs = N35 as f64 * wz_inner - I35 * I35 / R2_35;
    let rhs = WZ_SUM_35 * WZ_SUM_35;
    let pass = (lhs - 0.0204).abs() <= 5e-4 && (rhs - 0.0204).abs() <= 5e-4;
    report(
        2,
        pass,
        &format!("n(Wz)'Wz - I^2/R^2 = {lhs:.5}, ((Wz)'o)^2 = {rhs:.5}, (Wz)'Wz = {wz_inner:.5}"),
    );
    assert!(pass);
}

#[test]
fn criterion_03_identity_suite() {
    let start = Instant::now();
    let suite = run_identity_suite(INSTANCES, DEFAULT_SUITE_SEED).unwrap();
    let elapsed = start.elapsed();
    let checks = [
        Check::RhoTimesMoran,
        Check::Delta,
        Check::QuadraticIdentity,
        Check::PairedPValues,
        Check::LagOrthogonality,
        Check::ResidualSum,
    ];
    let mut pass = elapsed < Duration::from_secs(30);
    let mut detail = format!("{INSTANCES} instances in {:.1}s;", elapsed.as_secs_f64());
    for c in checks {
        let s = suite.summary(c);
        pass &= s.failures == 0 && s.evaluated == INSTANCES;
        detail.push_str(&format!(" {} worst {:.1e};", c.name(), s.worst_slack));
    }
    report(3, pass, &detail);
    assert!(pass);
}

#[test]
fn criterion_04_double_sum_oracle() {
    let mut worst = 0.0f64;
    for k in 0..INSTANCES as u64 {
        let inst = random_instance(DEFAULT_SUITE_SEED + k);
        let z = standardize(&inst.sizes).unwrap();
        let w = weights(&inst.distances);
        let ours = moran_index(&z, &w).unwrap();
        let oracle = classical_moran(inst.sizes.values(), &inst.distances);
        worst = worst.max((ours - oracle).abs());
    }
    let pass = worst <= 1e-12;
    report(
        4,
        pass,
        &format!("max |z'Wz - double sum| = {worst:.2e} over {INSTANCES} instances"),
    );
    assert!(pass);
}

#[test]
fn criterion_05_spectral_suite() {
    let suite = run_identity_suite(INSTANCES, DEFAULT_SUITE_SEED).unwrap();
    let mut lines = Vec::new();
    let mut pass = true;
    for c in [
        Check::EigenRelation,
        Check::Range1,
        Check::Range2,
        Check::Range3,
        Check::OuterEigenvalue,
        Check::GramSpectrum,
    ] {
        let s = suite.summary(c);
        pass &= s.failures == 0;
        lines.push(format!(
            "{}: {} of {} violated",
            c.name(),
            s.failures,
            s.evaluated
        ));
    }

    // Confirm each containment failure with an independent eigensolver so a
    // red verdict reflects the inequality, not the Jacobi routine.
    let mut confirmed = 0;
    let violations: Vec<_> = suite.violations_of(Check::Range2).collect();
    for v in &violations {
        let inst = random_instance(v.seed);
        let z = standardize(&inst.sizes).unwrap();
        let w = weights(&inst.distances);
        let n = w.len();
        let m = nalgebra::DMatrix::from_fn(n, n, |i, j| w.matrix()[(i, j)]);
        let gram = (m.transpose() * &m).symmetric_eigen();
        let lambda_min = gram
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let wz: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| m[(i, j)] * z.as_slice()[j]).sum())
            .collect();
        let s: f64 = wz.iter().sum();
        let i_value: f64 = z.as_slice().iter().zip(&wz).map(|(a, b)| a * b).sum();
        let nf = n as f64;
        let lhs = (s / nf).powi(2) + i_value * i_value / (nf * nf);
        let rayleigh = wz.iter().map(|v| v * v).sum::<f64>() / nf;
        if lhs < lambda_min && rayleigh >= lambda_min * (1.0 - 1e-12) {
            confirmed += 1;
        }
    }
    if !violations.is_empty() {
        let v = violations[0];
        lines.push(format!(
            "Range2 lower bound fails (e.g. seed {} n = {}, below lambda*_min by {:.3e}); {}/{} confirmed by an independent eigensolver; the R^2-adjusted form held on all {} instances",
            v.seed,
            v.n,
            v.slack,
            confirmed,
            violations.len(),
            suite.summary(Check::Range2Empirical).evaluated,
        ));
    }

    // n = 2: z is the eigenvector of lambda_min, so I/n sits on the boundary.
    let w2 = weights(&two_city_distances());
    let z2 = standardize(&RawSizeVector::from_values(vec![1.0, 3.0]).unwrap()).unwrap();
    let lag2 = spatial_lag(&w2, &z2).unwrap();
    let i2 = moran_index(&z2, &w2).unwrap();
    let fit2 = fit_sar_ols(&z2, &lag2).unwrap();
    let b2 =
        moransar_core::bounds::bounds_report(&w2, &lag2, i2, fit2.r_squared, fit2.rho_hat).unwrap();
    let boundary = b2.range1.i_over_n == b2.range1.lambda_min;
    pass &= boundary;
    lines.push(format!(
        "n=2 I/n = {} = lambda_min: {boundary}",
        b2.range1.i_over_n
    ));

    report(5, pass, &lines.join("; "));
    assert!(pass, "{}", lines.join("\n"));
}

#[test]
fn criterion_06_exact_small_fixtures() {
    let w2 = weights(&two_city_distances());
    let z2 = standardize(&RawSizeVector::from_values(vec![1.0, 3.0]).unwrap()).unwrap();
    let lag2 = spatial_lag(&w2, &z2).unwrap();
    let i2 = moran_index(&z2, &w2).unwrap();
    let f2 = fit_sar_ols(&z2, &lag2).unwrap();
    let dw2 = spatial_durbin_watson(z2.as_slice(), &w2).unwrap().dw;
    let got2 = [i2, f2.rho_hat, f2.a_hat, f2.r_squared, f2.delta, dw2];
    let want2 = [-1.0, -2.0, 0.0, 1.0, 0.0, 2.0];

    let w3 = weights(&chain_distances());
    let z3 = standardize(&RawSizeVector::from_values(vec![1.0, 2.0, 3.0]).unwrap()).unwrap();
    let lag3 = spatial_lag(&w3, &z3).unwrap();
    let i3 = moran_index(&z3, &w3).unwrap();
    let f3 = fit_sar_ols(&z3, &lag3).unwrap();
    let got3 = [i3, f3.rho_hat, f3.r_squared];
    let want3 = [-0.3, -10.0, 1.0];

    let close = |g: &[f64], w: &[f64]| g.iter().zip(w).all(|(a, b)| (a - b).abs() <= 1e-10);
    let pass = close(&got2, &want2) && close(&got3, &want3);
    report(
        6,
        pass,
        &format!("n=2 (I, rho, a, R2, delta, DW) = {got2:?}; chain (I, rho, R2) = {got3:?}"),
    );
    assert!(pass);
}

#[test]
fn criterion_07_diagnostics() {
    let mut worst = 0.0f64;
    let mut evaluated = 0;
    for k in 0..INSTANCES as u64 {
        let inst = random_instance(DEFAULT_SUITE_SEED + k);
        let z = standardize(&inst.sizes).unwrap();
        let w = weights(&inst.distances);
        let lag = spatial_lag(&w, &z).unwrap();
        let fit = fit_sar_ols(&z, &lag).unwrap();
        if fit.exact_fit {
            continue;
        }
        let dw = spatial_durbin_watson(&fit.residuals, &w).unwrap().dw;
        worst = worst.max((dw - 2.0 * pairwise_geary(&fit.residuals, w.matrix())).abs());
        evaluated += 1;
    }
    let c = CriticalTable::bundled().lookup(35, 0.05).unwrap();
    let bands = [
        (1.401, DwClass::Positive),
        (1.402, DwClass::Inconclusive),
        (1.518, DwClass::Inconclusive),
        (1.519, DwClass::None),
        (2.481, DwClass::None),
        (2.482, DwClass::Inconclusive),
        (2.598, DwClass::Inconclusive),
        (2.599, DwClass::Negative),
    ];
    let bands_ok = bands
        .iter()
        .all(|(dw, class)| dw_interpret(*dw, &c) == *class)
        && (4.0 - c.d_u - 2.481).abs() < 1e-12
        && (4.0 - c.d_l - 2.598).abs() < 1e-12;
    let pass = worst <= 1e-10 && evaluated == INSTANCES && bands_ok;
    report(
        7,
        pass,
        &format!("max |DW - 2C| = {worst:.2e} over {evaluated} instances; n=35 bands 1.402/1.519/2.481/2.598 reproduced: {bands_ok}"),
    );
    assert!(pass);
}

#[test]
fn criterion_08_permutation_test() {
    let m = 999;
    let w2 = weights(&two_city_distances());
    let p2 = permutation_test(&[-1.0, 1.0], &w2, &PermutationConfig::new(m, 1))
        .unwrap()
        .p_value;

    let d5 = Matrix::from_fn(5, 5, |i, j| {
        if i == j {
            0.0
        } else {
            1.0 + ((i * 7 + j * 7) % 5) as f64 + (i as f64 - j as f64).abs()
        }
    });
    let w5 = weights(&d5);
    let z5 =
        standardize(&RawSizeVector::from_values(vec![2.0, 9.0, 4.0, 15.0, 1.0]).unwrap()).unwrap();
    let exhaustive = exhaustive_p(z5.as_slice(), w5.matrix());
    let reported = permutation_test(z5.as_slice(), &w5, &PermutationConfig::new(m, 11)).unwrap();
    let gap = (reported.p_value.unwrap() - exhaustive).abs();

    // The raw Monte Carlo estimate, for reference: its binomial standard error
    // at this p is far wider than 2/(m+1).
    let null = permutation_distribution(z5.as_slice(), &w5, m, 11, 1).unwrap();
    let obs = quad(z5.as_slice(), w5.matrix()).abs();
    let hits = null
        .iter()
        .filter(|s| s.abs() >= obs * (1.0 - 1e-12))
        .count();
    let sampled = (1 + hits) as f64 / (m + 1) as f64;

    let inst = random_instance(DEFAULT_SUITE_SEED);
    let z = standardize(&inst.sizes).unwrap();
    let w = weights(&inst.distances);
    let run = |workers| {
        let mut cfg = PermutationConfig::new(m, 42);
        cfg.workers = workers;
        serde_json::to_string(&permutation_test(z.as_slice(), &w, &cfg).unwrap()).unwrap()
    };
    let (one, four) = (run(1), run(4));

    let pass = p2 == Some(1.0) && gap <= 2.0 / (m + 1) as f64 && one == four;
    report(
        8,
        pass,
        &format!(
            "n=2 p = {p2:?}; n=5 exhaustive p = {exhaustive:.4}, reported p = {:.4} ({:?}), raw sampled estimate {sampled:.4}; 1 vs 4 workers identical: {}",
            reported.p_value.unwrap(),
            reported.method,
            one == four
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_09_coefficient_summary_from_loader_slot() {
    let slot = fixture("user_data/README.md");
    let documented = fs::read_to_string(&slot)
        .map(|s| s.contains("summary.csv"))
        .unwrap_or(false);

    // A 35-city stand-in written through the same file loaders.
    let inst = (0..)
        .map(|k| random_instance(DEFAULT_SUITE_SEED + k))
        .find(|i| i.sizes.len() >= 10)
        .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let ids: Vec<String> = (0..inst.sizes.len())
        .map(|k| format!("city{k:02}"))
        .collect();
    let sizes = RawSizeVector::new(ids.clone(), inst.sizes.values().to_vec()).unwrap();
    moransar_core::io::write_sizes(&dir.path().join("sizes.csv"), &sizes).unwrap();
    moransar_core::io::write_distance_matrix(
        &dir.path().join("distances.csv"),
        &moransar_core::io::DistanceTable {
            ids,
            matrix: inst.distances.clone(),
        },
    )
    .unwrap();
    let out = dir.path().join("out");
    let status = Command::new(env!("CARGO_BIN_EXE_moransar"))
        .args(["analyze", "--log", "--permutations", "99", "--sizes"])
        .arg(dir.path().join("sizes.csv"))
        .arg("--dist")
        .arg(dir.path().join("distances.csv"))
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    let csv = fs::read_to_string(out.join("summary.csv")).unwrap_or_default();
    let rows: Vec<Vec<&str>> = csv.lines().map(|l| l.split(',').collect()).collect();
    let shaped = rows.len() == 5
        && rows[0]
            == [
                "measure",
                "parameter",
                "coefficient",
                "p_value",
                "r_squared",
            ]
        && rows[1..].iter().map(|r| r[1]).collect::<Vec<_>>() == ["(Wz)'o", "I", "a", "rho"]
        && rows[1..].iter().all(|r| r.len() == 5 && !r[3].is_empty());
    let pass = documented && status.status.success() && shaped;
    report(
        9,
        pass,
        "published 35-city rows not reproducible (data unpublished); loader slot documented and analyze emits the per-coefficient summary.csv",
    );
    assert!(pass, "{}", String::from_utf8_lossy(&status.stderr));
}

#[test]
fn criterion_10_end_to_end() {
    let start = Instant::now();
    let verify = Command::new(env!("CARGO_BIN_EXE_moransar"))
        .arg("verify")
        .output()
        .unwrap();
    let verify_time = start.elapsed();

    let dir = tempfile::tempdir().unwrap();
    let analyze = Command::new(env!("CARGO_BIN_EXE_moransar"))
        .args(["analyze", "--svg", "--sizes"])
        .arg(fixture("two_city_sizes.csv"))
        .arg("--dist")
        .arg(fixture("two_city_dist.csv"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    let json_ok = fs::read_to_string(dir.path().join("report.json"))
        .ok()
        .and_then(|t| serde_json::from_str::<serde_json::Value>(&t).ok())
        .is_some();
    let csv_ok = fs::read_to_string(dir.path().join("summary.csv"))
        .map(|t| t.lines().count() == 5)
        .unwrap_or(false);
    let svg = fs::read_to_string(dir.path().join("scatter_autocorr.svg")).unwrap_or_default();
    let (points, lines) = match roxmltree::Document::parse(&svg) {
        Ok(doc) => (
            doc.descendants()
                .filter(|n| n.attribute("class") == Some("point"))
                .count(),
            doc.descendants()
                .filter(|n| n.attribute("class") == Some("trend"))
                .count(),
        ),
        Err(_) => (0, 0),
    };
    let pass = verify.status.code() == Some(0)
        && verify_time < Duration::from_secs(60)
        && analyze.status.success()
        && json_ok
        && csv_ok
        && points == 2
        && lines == 1;
    report(
        10,
        pass,
        &format!(
            "verify exit {:?} in {:.1}s; analyze n=2: json {json_ok}, csv {csv_ok}, svg points {points}, trend lines {lines}",
            verify.status.code(),
            verify_time.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn inner_regression_slope_is_moran_on_fixture() {
    // guards the fixture files themselves against drift
    let text = fs::read_to_string(fixture("chain_sizes.csv")).unwrap();
    assert!(text.starts_with("id,value"));
    let w = weights(&chain_distances());
    let z = standardize(&RawSizeVector::from_values(vec![1.0, 2.0, 3.0]).unwrap()).unwrap();
    let r = inner_regression(&z, &w).unwrap();
    assert!((r.slope + 0.3).abs() < 1e-12);
    let full = analyze_data(
        &RawSizeVector::from_values(vec![1.0, 2.0, 3.0]).unwrap(),
        &chain_distances(),
        &AnalysisOptions::default(),
        &CriticalTable::bundled(),
    )
    .unwrap();
    assert!(full.all_pass());
}
