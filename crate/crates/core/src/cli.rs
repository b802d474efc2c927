//! Command-line front end.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::bandwidth::Semantics;
use crate::discrepancy::Variant;
use crate::error::{LaserError, Result};
use crate::estimator::{fit_with_design, FitResult};
use crate::experiments::{
    bandwidth_scaling_study_with, run_monte_carlo, runtime_scaling_with, ExperimentConfig, MetricsRow,
    ScalingOptions,
};
use crate::polyproj::Design;
use crate::signals::{add_noise, generate, scale_to_snr, NoiseSpec, SignalKind, SignalSpec};
use crate::tuning::{cv_lambda, default_grid, default_lambda, estimate_sigma, log_grid, DEFAULT_GRID_RANGE};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_DOMAIN: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "laser", version, about = "Locally adaptive variable-bandwidth local polynomial regression")]
pub struct Cli {
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, env = "LASER_THREADS", default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a test signal with Gaussian noise.
    Simulate(SimulateArgs),
    /// Fit the estimator to a CSV column `y`.
    Fit(FitArgs),
    /// Cross-validate the threshold.
    Tune(TuneArgs),
    /// Run a Monte Carlo experiment from a JSON config.
    Bench(BenchArgs),
    /// Bandwidth and runtime scaling studies.
    Scaling(ScalingArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_parser = ["blocks", "bumps", "heavisine", "doppler", "check"])]
    pub signal: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 4.0)]
    pub snr: f64,
    #[arg(long, default_value_t = 0.5)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub degree: usize,
    /// `auto`, `cv` or a non-negative number.
    #[arg(long, default_value = "auto")]
    pub lambda: String,
    #[arg(long, value_enum, default_value_t = Variant::Dyadic)]
    pub variant: Variant,
    #[arg(long, value_enum, default_value_t = Semantics::MaxGood)]
    pub semantics: Semantics,
    /// Folds when `--lambda cv`.
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
    /// Leave timings out of the sidecar so reruns are byte-identical.
    #[arg(long)]
    pub omit_timings: bool,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub degree: usize,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Defaults to 0.1 times the default threshold.
    #[arg(long)]
    pub grid_min: Option<f64>,
    /// Defaults to 10 times the default threshold.
    #[arg(long)]
    pub grid_max: Option<f64>,
    #[arg(long, default_value_t = 15)]
    pub grid_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Variant::Dyadic)]
    pub variant: Variant,
    /// Report path; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Metrics CSV.
    #[arg(long)]
    pub output: PathBuf,
    /// Summary JSON; defaults to the metrics path with `.json` appended.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[arg(long)]
    pub omit_timings: bool,
}

#[derive(Debug, Args)]
pub struct ScalingArgs {
    /// `bandwidth` or `runtime`.
    #[arg(long, value_parser = ["bandwidth", "runtime"], default_value = "bandwidth")]
    pub study: String,
    #[arg(long, value_delimiter = ',', default_values_t = [512usize, 1024, 2048, 4096, 8192, 16384])]
    pub n_list: Vec<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub degree: usize,
    #[arg(long, value_enum, default_value_t = Variant::Dyadic)]
    pub variant: Variant,
    /// Location as a fraction of n (bandwidth study).
    #[arg(long, default_value_t = 0.75)]
    pub location: f64,
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    #[arg(long)]
    pub output: PathBuf,
}

/// Formats like C's `%.15g`.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{:.14e}", v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..15).contains(&exp) {
        let decimals = (14 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, v))
    } else {
        format!("{}e{}{:02}", trim_zeros(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(create(path)?))
}

fn csv_err(e: csv::Error) -> LaserError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => LaserError::Io(io),
        kind => LaserError::Parse { line, msg: format!("{kind:?}") },
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| LaserError::Io(e.into()))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Observations read from CSV: `y` and, when present, `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    pub x: Option<Vec<f64>>,
    pub y: Vec<f64>,
}

pub fn read_observations(path: &Path) -> Result<Observations> {
    let mut rdr = csv::ReaderBuilder::new().from_path(path).map_err(csv_err)?;
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let y_col = col("y").ok_or_else(|| LaserError::Parse { line: 1, msg: "missing column `y`".into() })?;
    let x_col = col("x");
    let mut x = Vec::new();
    let mut y = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |c: usize, name: &str| -> Result<f64> {
            let raw = record.get(c).ok_or_else(|| LaserError::Parse { line, msg: format!("missing `{name}` field") })?;
            raw.trim()
                .parse::<f64>()
                .map_err(|_| LaserError::Parse { line, msg: format!("`{name}` is not a number: `{raw}`") })
        };
        y.push(field(y_col, "y")?);
        if let Some(c) = x_col {
            x.push(field(c, "x")?);
        }
    }
    if y.is_empty() {
        return Err(LaserError::Parse { line: 1, msg: "no data rows".into() });
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(LaserError::domain(format!("y on data row {} is not finite", i + 1)));
    }
    Ok(Observations { x: x_col.map(|_| x), y })
}

/// Design for the observations: the grid `i / n` unless a differing `x` column is given.
fn design_for(obs: &Observations) -> Result<Design> {
    let n = obs.y.len();
    match &obs.x {
        Some(x) if x.iter().enumerate().any(|(i, &v)| (v - (i + 1) as f64 / n as f64).abs() > 1e-12) => {
            let d = Design::from_abscissae(x.clone())?;
            if !d.is_strictly_increasing() {
                return Err(LaserError::domain("x must be strictly increasing"));
            }
            Ok(d)
        }
        _ => Ok(Design::equispaced(n)),
    }
}

fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let kind: SignalKind = a.signal.parse()?;
    let template = generate(&SignalSpec { kind, n: a.n })?;
    let theta = if a.snr == 0.0 { vec![0.0; a.n] } else { scale_to_snr(&template, a.snr, a.sigma)? };
    let y = add_noise(&theta, &NoiseSpec { sigma: a.sigma, seed: a.seed, distribution: Default::default() })?;
    let mut w = csv_writer(&a.output)?;
    w.write_record(["i", "x", "theta", "y"]).map_err(csv_err)?;
    for i in 0..a.n {
        let x = (i + 1) as f64 / a.n as f64;
        w.write_record([(i + 1).to_string(), fmt_num(x), fmt_num(theta[i]), fmt_num(y[i])]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct FitSidecar<'a> {
    n: usize,
    lambda: f64,
    lambda_rule: &'a str,
    sigma_hat: Option<f64>,
    degree: usize,
    variant: Variant,
    semantics: Semantics,
    #[serde(skip_serializing_if = "Option::is_none")]
    timings_ms: Option<crate::estimator::Timings>,
}

fn cmd_fit(a: &FitArgs) -> Result<()> {
    let obs = read_observations(&a.input)?;
    let design = design_for(&obs)?;
    let y = &obs.y;
    let sigma_hat = if y.len() >= 2 { Some(estimate_sigma(y)?) } else { None };
    let (lambda, rule) = match a.lambda.as_str() {
        "auto" => (default_lambda(sigma_hat.unwrap_or(0.0), y.len().max(2))?, "auto"),
        "cv" => {
            let grid = default_grid(y)?;
            (cv_lambda(y, a.degree, &grid, a.folds, a.seed, a.variant)?.lambda_star, "cv")
        }
        s => {
            let v: f64 = s.parse().map_err(|_| {
                LaserError::domain(format!("--lambda must be `auto`, `cv` or a number, got `{s}`"))
            })?;
            (v, "fixed")
        }
    };
    let f: FitResult = fit_with_design(y, &design, a.degree, lambda, a.variant, a.semantics)?;
    let mut w = csv_writer(&a.output)?;
    w.write_record(["i", "x", "y", "theta_hat", "h_hat"]).map_err(csv_err)?;
    for i in 0..y.len() {
        w.write_record([
            (i + 1).to_string(),
            fmt_num(design.x(i + 1)),
            fmt_num(y[i]),
            fmt_num(f.theta_hat[i]),
            f.h_hat[i].to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    write_json(
        &sidecar_path(&a.output),
        &FitSidecar {
            n: y.len(),
            lambda,
            lambda_rule: rule,
            sigma_hat,
            degree: a.degree,
            variant: a.variant,
            semantics: a.semantics,
            timings_ms: (!a.omit_timings).then_some(f.runtime_ms),
        },
    )
}

fn cmd_tune(a: &TuneArgs) -> Result<()> {
    let obs = read_observations(&a.input)?;
    let y = &obs.y;
    let grid = match (a.grid_min, a.grid_max) {
        (Some(lo), Some(hi)) => log_grid(lo, hi, a.grid_size)?,
        (lo, hi) => {
            let base = default_lambda(estimate_sigma(y)?, y.len())?;
            if base == 0.0 && (lo.is_none() || hi.is_none()) {
                return Err(LaserError::domain("estimated noise is zero; pass --grid-min and --grid-max"));
            }
            log_grid(
                lo.unwrap_or(DEFAULT_GRID_RANGE.0 * base),
                hi.unwrap_or(DEFAULT_GRID_RANGE.1 * base),
                a.grid_size,
            )?
        }
    };
    let report = cv_lambda(y, a.degree, &grid, a.folds, a.seed, a.variant)?;
    match &a.output {
        Some(p) => write_json(p, &report),
        None => {
            let out = serde_json::to_string_pretty(&report).map_err(|e| LaserError::Io(e.into()))?;
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{out}")?;
            Ok(())
        }
    }
}

#[derive(Debug, Serialize)]
struct BenchSummary {
    reps: usize,
    mean_rmse: f64,
    median_rmse: f64,
    mean_lambda: f64,
    mean_h: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    total_runtime_ms: Option<f64>,
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    let config: ExperimentConfig = serde_json::from_str(&text).map_err(|e| {
        let msg = e.to_string();
        let field = msg
            .split('`')
            .nth(1)
            .map_or_else(|| "<document>".to_string(), str::to_string);
        LaserError::Schema { field, msg }
    })?;
    config.validate()?;
    Ok(config)
}

fn cmd_bench(a: &BenchArgs) -> Result<()> {
    let config = load_config(&a.config)?;
    let rows: Vec<MetricsRow> = run_monte_carlo(&config)?;
    let mut w = csv_writer(&a.output)?;
    let mut header = vec!["rep", "seed", "rmse", "lambda_used", "mean_h"];
    if !a.omit_timings {
        header.push("runtime_ms");
    }
    w.write_record(&header).map_err(csv_err)?;
    for r in &rows {
        let mut rec = vec![r.rep.to_string(), r.seed.to_string(), fmt_num(r.rmse), fmt_num(r.lambda_used), fmt_num(r.mean_h)];
        if !a.omit_timings {
            rec.push(fmt_num(r.runtime_ms));
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    let k = rows.len() as f64;
    let mut rm: Vec<f64> = rows.iter().map(|r| r.rmse).collect();
    rm.sort_by(f64::total_cmp);
    let median = if rm.len() % 2 == 1 { rm[rm.len() / 2] } else { 0.5 * (rm[rm.len() / 2 - 1] + rm[rm.len() / 2]) };
    let summary = BenchSummary {
        reps: rows.len(),
        mean_rmse: rm.iter().sum::<f64>() / k,
        median_rmse: median,
        mean_lambda: rows.iter().map(|r| r.lambda_used).sum::<f64>() / k,
        mean_h: rows.iter().map(|r| r.mean_h).sum::<f64>() / k,
        total_runtime_ms: (!a.omit_timings).then(|| rows.iter().map(|r| r.runtime_ms).sum()),
    };
    write_json(&a.summary.clone().unwrap_or_else(|| sidecar_path(&a.output)), &summary)
}

fn cmd_scaling(a: &ScalingArgs) -> Result<()> {
    let mut w = csv_writer(&a.output)?;
    if a.study == "bandwidth" {
        let opts = ScalingOptions { degree: a.degree, variant: a.variant, location: a.location };
        let study = bandwidth_scaling_study_with(&a.n_list, a.sigma, opts)?;
        w.write_record(["n", "i0", "threshold", "h"]).map_err(csv_err)?;
        for p in &study.points {
            w.write_record([p.n.to_string(), p.i0.to_string(), fmt_num(p.threshold), p.h.to_string()])
                .map_err(csv_err)?;
        }
        w.flush()?;
        eprintln!("slope {}", fmt_num(study.slope));
    } else {
        let rows = runtime_scaling_with(&a.n_list, a.variant, a.degree, a.repeats)?;
        w.write_record(["n", "seconds", "ratio"]).map_err(csv_err)?;
        for r in &rows {
            w.write_record([r.n.to_string(), fmt_num(r.seconds), r.ratio.map(fmt_num).unwrap_or_default()])
                .map_err(csv_err)?;
        }
        w.flush()?;
    }
    Ok(())
}

fn exit_code(e: &LaserError) -> i32 {
    match e {
        LaserError::Domain(_) => EXIT_DOMAIN,
        LaserError::Parse { .. } | LaserError::Schema { .. } => EXIT_PARSE,
        LaserError::Io(_) => EXIT_IO,
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| LaserError::domain(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Tune(a) => cmd_tune(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Scaling(a) => cmd_scaling(a),
    })
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("laser: {e}");
            exit_code(&e)
        }
    }
}
