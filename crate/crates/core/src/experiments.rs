//! Monte Carlo harness, baselines and scaling studies.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandwidth::Semantics;
use crate::discrepancy::{DiscrepancyEngine, Variant};
use crate::error::{LaserError, Result};
use crate::estimator::{fit, project_all};
use crate::polyproj::{Design, IntInterval};
use crate::signals::{add_noise, generate, scale_to_snr, standard_noise, NoiseSpec, SignalKind, SignalSpec};
use crate::tuning::{cv_lambda, default_grid, default_lambda, estimate_sigma};

/// How each replication picks its threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", deny_unknown_fields)]
pub enum LambdaRule {
    Fixed { lambda: f64 },
    /// `default_lambda(estimate_sigma(y), n)`.
    Auto,
    /// Cross-validation; the grid defaults to [`default_grid`].
    Cv {
        #[serde(default)]
        grid: Option<Vec<f64>>,
        #[serde(default = "default_folds")]
        folds: usize,
    },
}

fn default_folds() -> usize {
    5
}

fn default_degree() -> usize {
    0
}

fn default_variant() -> Variant {
    Variant::Dyadic
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub signal: SignalSpec,
    pub snr: f64,
    pub sigma: f64,
    #[serde(default = "default_degree")]
    pub degree: usize,
    #[serde(default = "default_variant")]
    pub variant: Variant,
    #[serde(default)]
    pub semantics: Semantics,
    pub lambda_rule: LambdaRule,
    pub reps: usize,
    #[serde(default)]
    pub base_seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let field = |field: &str, msg: String| Err(LaserError::Schema { field: field.into(), msg });
        if self.reps == 0 {
            return field("reps", "must be at least 1".into());
        }
        if self.signal.n < 2 {
            return field("signal.n", "must be at least 2".into());
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return field("sigma", format!("must be finite and positive, got {}", self.sigma));
        }
        if !(self.snr >= 0.0) || !self.snr.is_finite() {
            return field("snr", format!("must be finite and non-negative, got {}", self.snr));
        }
        match &self.lambda_rule {
            LambdaRule::Fixed { lambda } if !(*lambda >= 0.0) || !lambda.is_finite() => {
                field("lambda_rule.lambda", format!("must be finite and non-negative, got {lambda}"))
            }
            LambdaRule::Cv { folds, .. } if *folds < 2 => {
                field("lambda_rule.folds", format!("must be at least 2, got {folds}"))
            }
            LambdaRule::Cv { grid: Some(g), .. } if g.is_empty() || g.iter().any(|l| !(*l >= 0.0)) => {
                field("lambda_rule.grid", "must be a non-empty list of non-negative values".into())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub rep: usize,
    pub seed: u64,
    pub rmse: f64,
    pub lambda_used: f64,
    pub mean_h: f64,
    pub runtime_ms: f64,
}

pub fn rmse(theta_hat: &[f64], theta: &[f64]) -> Result<f64> {
    if theta_hat.len() != theta.len() {
        return Err(LaserError::domain(format!(
            "length mismatch: {} estimates for {} values",
            theta_hat.len(),
            theta.len()
        )));
    }
    if theta.is_empty() {
        return Err(LaserError::domain("empty vectors"));
    }
    let sse: f64 = theta_hat.iter().zip(theta).map(|(a, b)| (a - b).powi(2)).sum();
    Ok((sse / theta.len() as f64).sqrt())
}

/// True signal of a configuration.
pub fn config_signal(config: &ExperimentConfig) -> Result<Vec<f64>> {
    let template = generate(&config.signal)?;
    if config.snr == 0.0 {
        return Ok(vec![0.0; template.len()]);
    }
    scale_to_snr(&template, config.snr, config.sigma)
}

/// Threshold for `y` under a rule.
pub fn resolve_lambda(rule: &LambdaRule, y: &[f64], degree: usize, variant: Variant, seed: u64) -> Result<f64> {
    match rule {
        LambdaRule::Fixed { lambda } => Ok(*lambda),
        LambdaRule::Auto => default_lambda(estimate_sigma(y)?, y.len()),
        LambdaRule::Cv { grid, folds } => {
            let grid = match grid {
                Some(g) => g.clone(),
                None => default_grid(y)?,
            };
            Ok(cv_lambda(y, degree, &grid, *folds, seed, variant)?.lambda_star)
        }
    }
}

/// One row per replication; replication `k` draws noise with seed `base_seed + k`.
pub fn run_monte_carlo(config: &ExperimentConfig) -> Result<Vec<MetricsRow>> {
    config.validate()?;
    let theta = config_signal(config)?;
    (0..config.reps)
        .into_par_iter()
        .map(|rep| {
            let seed = config.base_seed.wrapping_add(rep as u64);
            let start = Instant::now();
            let y = add_noise(&theta, &NoiseSpec { sigma: config.sigma, seed, distribution: Default::default() })?;
            let lambda = resolve_lambda(&config.lambda_rule, &y, config.degree, config.variant, seed)?;
            let f = fit(&y, config.degree, lambda, config.variant, config.semantics)?;
            Ok(MetricsRow {
                rep,
                seed,
                rmse: rmse(&f.theta_hat, &theta)?,
                lambda_used: lambda,
                mean_h: f.mean_h(),
                runtime_ms: start.elapsed().as_secs_f64() * 1e3,
            })
        })
        .collect()
}

/// Degree-`degree` fit on `[i0 - h, i0 + h]` at every location.
pub fn baseline_fixed_bandwidth(y: &[f64], degree: usize, h: usize) -> Result<Vec<f64>> {
    let n = y.len();
    if n == 0 || h >= n {
        return Err(LaserError::domain(format!("bandwidth {h} outside [0, {}]", n.saturating_sub(1))));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(LaserError::domain("observations must be finite"));
    }
    Ok(project_all(y, &Design::equispaced(n), degree, &vec![h; n]))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingPoint {
    pub n: usize,
    pub i0: usize,
    pub threshold: f64,
    pub h: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingStudy {
    pub points: Vec<ScalingPoint>,
    /// Least-squares slope of `ln h` against `ln n`.
    pub slope: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingOptions {
    pub degree: usize,
    pub variant: Variant,
    /// Location as a fraction of `n`, floored.
    pub location: f64,
}

impl Default for ScalingOptions {
    fn default() -> Self {
        ScalingOptions { degree: 0, variant: Variant::Dyadic, location: 0.75 }
    }
}

/// Largest `h` whose window around `i0` has `T <= threshold` on the noiseless signal.
pub fn oracle_bandwidth(engine: &DiscrepancyEngine, i0: usize, threshold: f64) -> usize {
    let n = engine.len();
    let mut hint = None;
    (0..n)
        .rev()
        .find(|&h| !engine.exceeds(IntInterval::around(i0, h, n), threshold, &mut hint))
        .unwrap_or(0)
}

/// Noiseless bandwidth at `floor(3n/4)` of the check signal with threshold
/// `sigma * sqrt(ln n)`, and the log-log slope across `n_list`.
pub fn bandwidth_scaling_study(n_list: &[usize], sigma: f64) -> Result<ScalingStudy> {
    bandwidth_scaling_study_with(n_list, sigma, ScalingOptions::default())
}

pub fn bandwidth_scaling_study_with(n_list: &[usize], sigma: f64, opts: ScalingOptions) -> Result<ScalingStudy> {
    if n_list.len() < 2 || n_list.windows(2).any(|w| w[0] >= w[1]) || n_list[0] < 2 {
        return Err(LaserError::domain("need at least two increasing sizes, all >= 2"));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(LaserError::domain(format!("sigma must be finite and positive, got {sigma}")));
    }
    if !(opts.location > 0.0 && opts.location <= 1.0) {
        return Err(LaserError::domain("location fraction must lie in (0, 1]"));
    }
    let points = n_list
        .iter()
        .map(|&n| {
            let theta = generate(&SignalSpec { kind: SignalKind::Check, n })?;
            let engine = DiscrepancyEngine::new(&theta, opts.degree, opts.variant)?;
            let i0 = ((opts.location * n as f64).floor() as usize).max(1);
            let threshold = sigma * (n as f64).ln().sqrt();
            Ok(ScalingPoint { n, i0, threshold, h: oracle_bandwidth(&engine, i0, threshold) })
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(p) = points.iter().find(|p| p.h == 0) {
        return Err(LaserError::domain(format!("bandwidth is zero at n = {}; slope undefined", p.n)));
    }
    let xs: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| (p.h as f64).ln()).collect();
    Ok(ScalingStudy { slope: ls_slope(&xs, &ys), points })
}

fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuntimeRow {
    pub n: usize,
    pub seconds: f64,
    /// Ratio to the previous row.
    pub ratio: Option<f64>,
}

/// Largest size the full variant is timed at.
pub const FULL_RUNTIME_LIMIT: usize = 256;

/// Median wall time of `repeats` fits on seeded white noise with the default threshold.
pub fn runtime_scaling_with(n_list: &[usize], variant: Variant, degree: usize, repeats: usize) -> Result<Vec<RuntimeRow>> {
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(LaserError::domain("sizes must be increasing"));
    }
    if variant == Variant::Full {
        if let Some(&n) = n_list.iter().find(|&&n| n > FULL_RUNTIME_LIMIT) {
            return Err(LaserError::domain(format!(
                "full variant is only timed up to n = {FULL_RUNTIME_LIMIT}, got {n}"
            )));
        }
    }
    let mut rows: Vec<RuntimeRow> = Vec::new();
    for &n in n_list {
        let y = standard_noise(n, n as u64);
        let lambda = default_lambda(1.0, n.max(2))?;
        let mut times = Vec::with_capacity(repeats.max(1));
        for _ in 0..repeats.max(1) {
            let start = Instant::now();
            fit(&y, degree, lambda, variant, Semantics::MaxGood)?;
            times.push(start.elapsed().as_secs_f64());
        }
        times.sort_by(f64::total_cmp);
        let seconds = times[times.len() / 2];
        let ratio = rows.last().map(|r| seconds / r.seconds);
        rows.push(RuntimeRow { n, seconds, ratio });
    }
    Ok(rows)
}

pub fn runtime_scaling(n_list: &[usize], variant: Variant) -> Result<Vec<RuntimeRow>> {
    runtime_scaling_with(n_list, variant, 2, 3)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[2.0, 3.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert!((rmse(&[0.0, 2.0], &[0.0, 0.0]).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!(rmse(&[0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn baseline_examples() {
        let y = crate::signals::standard_noise(20, 1);
        assert_eq!(baseline_fixed_bandwidth(&y, 1, 0).unwrap(), y);
        let lin: Vec<f64> = (1..=20).map(|i| 0.5 - 0.1 * i as f64).collect();
        for h in [1, 5, 19] {
            let f = baseline_fixed_bandwidth(&lin, 1, h).unwrap();
            assert!(f.iter().zip(&lin).all(|(a, b)| (a - b).abs() < 1e-10));
        }
        let global = baseline_fixed_bandwidth(&y, 0, 19).unwrap();
        let mean = y.iter().sum::<f64>() / 20.0;
        assert!(global.iter().all(|v| (v - mean).abs() < 1e-12));
        assert!(baseline_fixed_bandwidth(&y, 0, 20).is_err());
    }

    fn config(rule: LambdaRule) -> ExperimentConfig {
        ExperimentConfig {
            signal: SignalSpec { kind: SignalKind::Doppler, n: 128 },
            snr: 4.0,
            sigma: 0.5,
            degree: 2,
            variant: Variant::Dyadic,
            semantics: Semantics::MaxGood,
            lambda_rule: rule,
            reps: 2,
            base_seed: 7,
        }
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let c = config(LambdaRule::Auto);
        let a = run_monte_carlo(&c).unwrap();
        let b = run_monte_carlo(&c).unwrap();
        assert_eq!(a.len(), 2);
        let strip = |rows: &[MetricsRow]| rows.iter().map(|r| (r.rep, r.seed, r.rmse, r.lambda_used, r.mean_h)).collect::<Vec<_>>();
        assert_eq!(strip(&a), strip(&b));
        assert_eq!(a[1].seed, 8);
    }

    #[test]
    fn polynomial_signal_without_noise() {
        let mut c = config(LambdaRule::Fixed { lambda: 1.0 });
        c.signal = SignalSpec {
            kind: SignalKind::PiecewisePoly {
                pieces: vec![crate::signals::PolyPiece { start: 0.0, coeffs: vec![1.0, -2.0, 0.5] }],
            },
            n: 64,
        };
        c.sigma = 1e-12;
        c.reps = 1;
        assert!(run_monte_carlo(&c).unwrap()[0].rmse < 1e-6);
    }

    #[test]
    fn invalid_configs() {
        let mut c = config(LambdaRule::Cv { grid: None, folds: 1 });
        assert!(matches!(c.validate(), Err(LaserError::Schema { .. })));
        c.lambda_rule = LambdaRule::Auto;
        c.reps = 0;
        assert!(matches!(c.validate(), Err(LaserError::Schema { field, .. }) if field == "reps"));
    }

    #[test]
    fn full_runtime_guard() {
        assert!(runtime_scaling(&[128, 512], Variant::Full).is_err());
    }

    #[test]
    fn slope_of_exact_power() {
        let xs: Vec<f64> = [1.0f64, 2.0, 3.0].iter().map(|v| v.ln()).collect();
        let ys: Vec<f64> = [1.0f64, 2.0, 3.0].iter().map(|v| 0.5 * v.ln() + 2.0).collect();
        assert!((ls_slope(&xs, &ys) - 0.5).abs() < 1e-12);
    }
}
