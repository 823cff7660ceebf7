use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};

use moransar_core::autocorr::{scatter_dataset, ScatterMode};
use moransar_core::bounds::bounds_report;
use moransar_core::inference::DEFAULT_PERMUTATIONS;
use moransar_core::io::{load_distances, write_sizes, DistanceFormat};
use moransar_core::report::{
    analyze, emit_report, format_sig6, load_inputs, prepare, summary_rows, AnalysisConfig,
    AnalysisOptions, AnalysisReport, OutputFormats, DEFAULT_ALPHA, DEFAULT_SEED,
};
use moransar_core::sar::fit_sar_ols;
use moransar_core::simulate::{simulate_sar, SarSimulation};
use moransar_core::spatial_data::{
    global_normalize, inverse_distance_proximity, spatial_lag, RawSizeVector, SymmetryPolicy,
};
use moransar_core::svg::render_svg;
use moransar_core::verify::{run_identity_suite, DEFAULT_INSTANCES, DEFAULT_SUITE_SEED};
use moransar_core::ErrorKind;

#[derive(Parser)]
#[command(
    name = "moransar",
    version,
    about = "Moran's index and spatial autoregression toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write report.json, summary.csv and scatterplots.
    Analyze(AnalyzeArgs),
    /// Write one normalized scatterplot as CSV and SVG.
    Scatter(ScatterArgs),
    /// Print the three spectral value ranges as JSON.
    Bounds(InputArgs),
    /// Generate sizes from the SAR process on a given distance matrix.
    Simulate(SimulateArgs),
    /// Run the identity suite over seeded random instances.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Matrix,
    Long,
}

impl From<FormatArg> for DistanceFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Matrix => DistanceFormat::Matrix,
            FormatArg::Long => DistanceFormat::Long,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Autocorr,
    Sar,
}

#[derive(Args)]
struct InputArgs {
    /// CSV with header `id,value`.
    #[arg(long)]
    sizes: PathBuf,
    /// Distance CSV, as a square matrix or a `from,to,distance` list.
    #[arg(long)]
    dist: PathBuf,
    #[arg(long, value_enum, default_value = "matrix")]
    dist_format: FormatArg,
    /// Take natural logarithms of the sizes before standardizing.
    #[arg(long)]
    log: bool,
    /// Reject asymmetric distances instead of averaging them.
    #[arg(long)]
    strict_symmetry: bool,
}

impl InputArgs {
    fn symmetry(&self) -> SymmetryPolicy {
        if self.strict_symmetry {
            SymmetryPolicy::Strict
        } else {
            SymmetryPolicy::Auto
        }
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = DEFAULT_PERMUTATIONS)]
    permutations: usize,
    #[arg(long, env = "MORANSAR_SEED", default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    /// CSV of Durbin-Watson bounds with header `n,alpha,d_l,d_u`.
    #[arg(long)]
    dw_critical: Option<PathBuf>,
    #[arg(long, default_value = "moransar-out")]
    out: PathBuf,
    /// Also write the two scatterplots as SVG.
    #[arg(long)]
    svg: bool,
    /// Threads for the permutation test (0 = all cores).
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct ScatterArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value = "autocorr")]
    mode: ModeArg,
    #[arg(long, default_value = "moransar-out")]
    out: PathBuf,
    /// Also write the plot as SVG.
    #[arg(long)]
    svg: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    dist: PathBuf,
    #[arg(long, value_enum, default_value = "matrix")]
    dist_format: FormatArg,
    #[arg(long)]
    strict_symmetry: bool,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    a: f64,
    #[arg(long, allow_hyphen_values = true)]
    rho: f64,
    #[arg(long, default_value_t = 1.0)]
    noise_sd: f64,
    #[arg(long, env = "MORANSAR_SEED", default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Output sizes CSV (`id,value`).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = DEFAULT_INSTANCES)]
    instances: usize,
    #[arg(long, env = "MORANSAR_SEED", default_value_t = DEFAULT_SUITE_SEED)]
    seed: u64,
    /// Write the full suite report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<moransar_core::Error>().map(|e| e.kind()) {
        Some(ErrorKind::Input) => 1,
        Some(ErrorKind::Numerical) => 2,
        Some(ErrorKind::Io) => 3,
        None => 1,
    }
}

fn print_summary(report: &AnalysisReport) {
    println!("n = {}", report.n);
    println!("measure,parameter,coefficient,p_value,r_squared");
    for row in summary_rows(report) {
        println!(
            "{},{},{},{},{}",
            row.measure,
            row.parameter,
            format_sig6(row.coefficient),
            row.p_value.map(format_sig6).unwrap_or_default(),
            format_sig6(row.r_squared)
        );
    }
    if let Some(dw) = &report.diagnostics.durbin_watson {
        println!(
            "residual I = {}, DW = {}, C = {}, class = {}",
            format_sig6(dw.i_e),
            format_sig6(dw.dw),
            format_sig6(dw.geary_c),
            dw.classification
                .map(|c| format!("{c:?}").to_lowercase())
                .unwrap_or_else(|| "no critical values".into())
        );
    }
    let b = &report.bounds;
    println!(
        "ranges contained: I/n {}, quadratic {}, outer {}",
        b.range1.contained, b.range2.contained, b.range3.contained
    );
}

fn run_analyze(args: AnalyzeArgs) -> Result<u8> {
    let config = AnalysisConfig {
        sizes_path: args.input.sizes.clone(),
        dist_path: args.input.dist.clone(),
        dist_format: args.input.dist_format.into(),
        dw_critical: args.dw_critical,
        options: AnalysisOptions {
            log_transform: args.input.log,
            permutations: args.permutations,
            seed: args.seed,
            alpha: args.alpha,
            symmetry: args.input.symmetry(),
            workers: args.workers,
        },
    };
    let report = analyze(&config)?;
    let formats = OutputFormats {
        json: true,
        csv: true,
        svg: args.svg,
    };
    let written = emit_report(&report, formats, &args.out)?;
    print_summary(&report);
    for p in written {
        log::info!("wrote {}", p.display());
    }
    if !report.bounds.all_contained() {
        log::warn!("a spectral value range is violated; see `bounds` in report.json");
    }
    let failures = report.failures();
    if failures.is_empty() {
        Ok(0)
    } else {
        for f in failures {
            eprintln!(
                "identity violated: {} (slack {:e}, tolerance {:e})",
                f.name, f.slack, f.tolerance
            );
        }
        Ok(2)
    }
}

fn run_scatter(args: ScatterArgs) -> Result<u8> {
    let symmetry = args.input.symmetry();
    let (sizes, table) = load_inputs(
        &args.input.sizes,
        &args.input.dist,
        args.input.dist_format.into(),
        symmetry,
    )?;
    let prepared = prepare(&sizes, &table.matrix, args.input.log, symmetry)?;
    let (mode, stem) = match args.mode {
        ModeArg::Autocorr => (ScatterMode::Autocorrelation, "scatter_autocorr"),
        ModeArg::Sar => (ScatterMode::Autoregression, "scatter_sar"),
    };
    let dataset = scatter_dataset(&prepared.z, &prepared.w, mode)?;
    fs::create_dir_all(&args.out).map_err(|e| moransar_core::Error::Io {
        context: format!("creating {}", args.out.display()),
        source: e,
    })?;
    let csv_path = args.out.join(format!("{stem}.csv"));
    fs::write(&csv_path, dataset.to_csv()).map_err(|e| moransar_core::Error::Io {
        context: format!("writing {}", csv_path.display()),
        source: e,
    })?;
    println!("{}", csv_path.display());
    if args.svg {
        let svg_path = args.out.join(format!("{stem}.svg"));
        render_svg(&dataset, &svg_path)?;
        println!("{}", svg_path.display());
    }
    Ok(0)
}

fn run_bounds(args: InputArgs) -> Result<u8> {
    let symmetry = args.symmetry();
    let (sizes, table) = load_inputs(&args.sizes, &args.dist, args.dist_format.into(), symmetry)?;
    let prepared = prepare(&sizes, &table.matrix, args.log, symmetry)?;
    let lag = spatial_lag(&prepared.w, &prepared.z)?;
    let i_value = moransar_core::autocorr::moran_index(&prepared.z, &prepared.w)?;
    let fit = fit_sar_ols(&prepared.z, &lag)?;
    let report = bounds_report(&prepared.w, &lag, i_value, fit.r_squared, fit.rho_hat)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(0)
}

fn run_simulate(args: SimulateArgs) -> Result<u8> {
    let symmetry = if args.strict_symmetry {
        SymmetryPolicy::Strict
    } else {
        SymmetryPolicy::Auto
    };
    let table = load_distances(&args.dist, args.dist_format.into(), symmetry)?;
    let w = global_normalize(&inverse_distance_proximity(&table.matrix, symmetry)?)?;
    let params = SarSimulation {
        a: args.a,
        rho: args.rho,
        noise_sd: args.noise_sd,
        seed: args.seed,
    };
    let x = simulate_sar(&w, &params)?;
    let sizes = RawSizeVector::new(table.ids.clone(), x.values().to_vec())?;
    write_sizes(&args.out, &sizes)?;
    println!("{}", args.out.display());
    Ok(0)
}

fn write_json(path: &Path, body: String) -> Result<()> {
    fs::write(path, body).map_err(|e| moransar_core::Error::Io {
        context: format!("writing {}", path.display()),
        source: e,
    })?;
    Ok(())
}

fn run_verify(args: VerifyArgs) -> Result<u8> {
    let report = run_identity_suite(args.instances, args.seed)?;
    println!(
        "{} instances from seed {}, n in [{}, {}]",
        report.instances,
        report.base_seed,
        moransar_core::verify::MIN_N,
        moransar_core::verify::MAX_N
    );
    for c in &report.checks {
        let status = if c.failures == 0 {
            "ok"
        } else if c.check.is_containment() {
            "VIOLATED"
        } else {
            "FAIL"
        };
        println!(
            "{:<8} {:<62} evaluated {:>5}  failures {:>4}  worst {:.3e}",
            status, c.name, c.evaluated, c.failures, c.worst_slack
        );
    }
    for v in report.violations.iter().take(20) {
        eprintln!(
            "seed {} (n = {}): {} off by {:e} (tolerance {:e})",
            v.seed,
            v.n,
            v.check.name(),
            v.slack,
            v.tolerance
        );
    }
    if let Some(path) = &args.json {
        write_json(path, serde_json::to_string_pretty(&report)?)?;
    }
    if !report.containment_passed() {
        eprintln!(
            "note: spectral containment violations are reported but do not fail the identity suite"
        );
    }
    Ok(if report.identities_passed() { 0 } else { 2 })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(a) => run_analyze(a),
        Command::Scatter(a) => run_scatter(a),
        Command::Bounds(a) => run_bounds(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Verify(a) => run_verify(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
