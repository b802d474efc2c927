//! Noise scale, the default threshold and cross-validated threshold choice.

use rayon::prelude::*;
use serde::Serialize;

use crate::bandwidth::{h_hat_from_profile, profile, select_fast, Semantics};
use crate::discrepancy::{DiscrepancyEngine, Variant};
use crate::error::{LaserError, Result};
use crate::polyproj::{build_basis, eval_fit_at, Design, IndexSet, IntInterval};

/// Default multiplier in `lambda = C * sigma * sqrt(ln n)`.
pub const DEFAULT_LAMBDA_CONSTANT: f64 = 2.0 * std::f64::consts::SQRT_2;
pub const DEFAULT_GRID_SIZE: usize = 15;
pub const DEFAULT_GRID_RANGE: (f64, f64) = (0.1, 10.0);

/// Median absolute first difference over `0.6745 * sqrt(2)`.
pub fn estimate_sigma(y: &[f64]) -> Result<f64> {
    if y.len() < 2 {
        return Err(LaserError::domain("noise scale needs at least two observations"));
    }
    let mut d: Vec<f64> = y.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    d.sort_by(f64::total_cmp);
    let k = d.len();
    let median = if k % 2 == 1 { d[k / 2] } else { 0.5 * (d[k / 2 - 1] + d[k / 2]) };
    Ok(median / (0.6745 * std::f64::consts::SQRT_2))
}

pub fn default_lambda(sigma: f64, n: usize) -> Result<f64> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(LaserError::domain(format!("noise scale must be finite and non-negative, got {sigma}")));
    }
    if n < 2 {
        return Err(LaserError::domain("default threshold needs n >= 2"));
    }
    Ok(DEFAULT_LAMBDA_CONSTANT * sigma * (n as f64).ln().sqrt())
}

/// `size` log-spaced values from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, size: usize) -> Result<Vec<f64>> {
    if size == 0 || !(lo > 0.0) || !(hi >= lo) || !hi.is_finite() {
        return Err(LaserError::domain(format!("invalid grid [{lo}, {hi}] with {size} points")));
    }
    if size == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..size)
        .map(|k| match k {
            0 => lo,
            k if k == size - 1 => hi,
            k => (a + (b - a) * k as f64 / (size - 1) as f64).exp(),
        })
        .collect())
}

/// The default grid around `default_lambda(estimate_sigma(y), n)`.
pub fn default_grid(y: &[f64]) -> Result<Vec<f64>> {
    let base = default_lambda(estimate_sigma(y)?, y.len())?;
    if base == 0.0 {
        return Ok(vec![0.0]);
    }
    log_grid(DEFAULT_GRID_RANGE.0 * base, DEFAULT_GRID_RANGE.1 * base, DEFAULT_GRID_SIZE)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvReport {
    pub lambda_grid: Vec<f64>,
    pub cv_error: Vec<f64>,
    pub lambda_star: f64,
    pub folds: usize,
    pub seed: u64,
}

/// Fold `k` holds the 1-based indices `i` with `i % folds == k`.
pub fn fold_indices(n: usize, folds: usize, k: usize) -> Vec<usize> {
    (1..=n).filter(|i| i % folds == k).collect()
}

/// Training index nearest in abscissa to `x`; ties go to the lower index.
fn nearest_training(train_x: &[f64], x: f64) -> usize {
    let p = train_x.partition_point(|&t| t < x);
    if p == 0 {
        return 0;
    }
    if p == train_x.len() {
        return p - 1;
    }
    if x - train_x[p - 1] <= train_x[p] - x {
        p - 1
    } else {
        p
    }
}

/// Squared prediction errors of one fold, one row per threshold.
fn fold_errors(
    y: &[f64],
    degree: usize,
    grid: &[f64],
    folds: usize,
    k: usize,
    variant: Variant,
    semantics: Semantics,
) -> Result<Vec<Vec<f64>>> {
    let n = y.len();
    let held = fold_indices(n, folds, k);
    let train: Vec<usize> = (1..=n).filter(|i| i % folds != k).collect();
    let train_x: Vec<f64> = train.iter().map(|&i| i as f64 / n as f64).collect();
    let train_y: Vec<f64> = train.iter().map(|&i| y[i - 1]).collect();
    let m = train.len();
    let design = Design::from_abscissae(train_x.clone())?;
    let engine = DiscrepancyEngine::with_design(&train_y, design.clone(), degree, variant)?;
    let anchors: Vec<usize> = held.iter().map(|&i| nearest_training(&train_x, i as f64 / n as f64)).collect();

    // Bandwidths only matter at anchor points.
    let mut needed: Vec<usize> = anchors.iter().map(|j| j + 1).collect();
    needed.dedup();
    let profiles: Option<Vec<Vec<(usize, f64)>>> =
        (variant == Variant::Dyadic).then(|| needed.iter().map(|&j| profile(&engine, j)).collect());

    grid.iter()
        .map(|&lambda| {
            let h_of: Vec<usize> = match &profiles {
                Some(p) => p.iter().map(|pr| h_hat_from_profile(pr, lambda, semantics)).collect(),
                None => needed.iter().map(|&j| select_fast(&engine, j, lambda, semantics)).collect(),
            };
            held.iter()
                .zip(&anchors)
                .map(|(&i, &a)| {
                    let slot = needed.binary_search(&(a + 1)).expect("anchor recorded");
                    let window = IntInterval::around(a + 1, h_of[slot], m);
                    let basis = build_basis(&IndexSet::from_interval(window, m)?, degree, &design)?;
                    let pred = eval_fit_at(&basis, &train_y[window.lo - 1..window.hi], i as f64 / n as f64)?;
                    Ok((pred.value - y[i - 1]).powi(2))
                })
                .collect()
        })
        .collect()
}

/// K-fold cross-validation over a threshold grid with interleaved folds.
pub fn cv_lambda(
    y: &[f64],
    degree: usize,
    grid: &[f64],
    folds: usize,
    seed: u64,
    variant: Variant,
) -> Result<CvReport> {
    cv_lambda_with(y, degree, grid, folds, seed, variant, Semantics::MaxGood)
}

pub fn cv_lambda_with(
    y: &[f64],
    degree: usize,
    grid: &[f64],
    folds: usize,
    seed: u64,
    variant: Variant,
    semantics: Semantics,
) -> Result<CvReport> {
    let n = y.len();
    if folds < 2 {
        return Err(LaserError::domain(format!("need at least 2 folds, got {folds}")));
    }
    if folds > n {
        return Err(LaserError::domain(format!("{folds} folds for only {n} observations")));
    }
    if grid.is_empty() {
        return Err(LaserError::domain("empty threshold grid"));
    }
    if let Some(l) = grid.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
        return Err(LaserError::domain(format!("threshold must be finite and non-negative, got {l}")));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(LaserError::domain(format!("observation {} is not finite", i + 1)));
    }
    let per_fold: Vec<Vec<Vec<f64>>> = (0..folds)
        .into_par_iter()
        .map(|k| fold_errors(y, degree, grid, folds, k, variant, semantics))
        .collect::<Result<_>>()?;
    let cv_error: Vec<f64> = (0..grid.len())
        .map(|g| per_fold.iter().flat_map(|f| f[g].iter()).sum::<f64>() / n as f64)
        .collect();
    let lambda_star = pick_lambda(grid, &cv_error, y);
    Ok(CvReport { lambda_grid: grid.to_vec(), cv_error, lambda_star, folds, seed })
}

/// Minimizer of the CV error; near-ties go to the largest threshold.
fn pick_lambda(grid: &[f64], cv_error: &[f64], y: &[f64]) -> f64 {
    let min = cv_error.iter().copied().fold(f64::INFINITY, f64::min);
    let mean_sq = y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
    let tol = 1e-9 * min + 1e-14 * mean_sq;
    grid.iter()
        .zip(cv_error)
        .filter(|(_, &e)| e <= min + tol)
        .map(|(&l, _)| l)
        .fold(f64::NEG_INFINITY, f64::max)
}
