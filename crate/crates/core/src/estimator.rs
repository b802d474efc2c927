//! The estimator: a bandwidth per location, then a local polynomial fit on the
//! selected window.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::bandwidth::{select_fast, select_with, BandwidthResult, Semantics};
use crate::discrepancy::{DiscrepancyEngine, Variant};
use crate::error::{LaserError, Result};
use crate::polyproj::{build_basis, eval_fit_at, project, Design, IndexSet, IntInterval};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Timings {
    /// Discrepancy tables.
    pub setup_ms: f64,
    pub select_ms: f64,
    pub project_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub theta_hat: Vec<f64>,
    pub h_hat: Vec<usize>,
    pub lambda: f64,
    pub degree: usize,
    pub variant: Variant,
    pub semantics: Semantics,
    pub runtime_ms: Timings,
}

impl FitResult {
    pub fn window(&self, i0: usize) -> IntInterval {
        IntInterval::around(i0, self.h_hat[i0 - 1], self.theta_hat.len())
    }

    /// Per-location selections without traces, e.g. for [`crate::bandwidth::check_bse`].
    pub fn bandwidths(&self) -> Vec<BandwidthResult> {
        (1..=self.h_hat.len())
            .map(|i0| BandwidthResult {
                i0,
                h_hat: self.h_hat[i0 - 1],
                window: self.window(i0),
                trace: Vec::new(),
                semantics: self.semantics,
                variant: self.variant,
            })
            .collect()
    }

    pub fn mean_h(&self) -> f64 {
        self.h_hat.iter().sum::<usize>() as f64 / self.h_hat.len().max(1) as f64
    }
}

fn check_inputs(y: &[f64], lambda: f64) -> Result<()> {
    if y.is_empty() {
        return Err(LaserError::domain("no observations"));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(LaserError::domain(format!("observation {} is not finite", i + 1)));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(LaserError::domain(format!("threshold must be finite and non-negative, got {lambda}")));
    }
    Ok(())
}

/// Least-squares fit of degree `degree` over `window`, evaluated at `i0`.
pub(crate) fn local_estimate(y: &[f64], design: &Design, window: IntInterval, degree: usize, i0: usize) -> f64 {
    let set = IndexSet::from_interval(window, y.len()).expect("window inside design");
    let basis = build_basis(&set, degree, design).expect("non-empty window");
    let fitted = project(&basis, &y[window.lo - 1..window.hi]).expect("length matches");
    fitted[i0 - window.lo]
}

/// Fits every location on the equispaced design `x_i = i / n`.
pub fn fit(y: &[f64], degree: usize, lambda: f64, variant: Variant, semantics: Semantics) -> Result<FitResult> {
    fit_with_design(y, &Design::equispaced(y.len()), degree, lambda, variant, semantics)
}

/// Like [`fit`] for arbitrary strictly increasing abscissae. Windows are chosen in index space.
pub fn fit_with_design(
    y: &[f64],
    design: &Design,
    degree: usize,
    lambda: f64,
    variant: Variant,
    semantics: Semantics,
) -> Result<FitResult> {
    check_inputs(y, lambda)?;
    let start = Instant::now();
    let engine = DiscrepancyEngine::with_design(y, design.clone(), degree, variant)?;
    let setup = start.elapsed();
    let h_hat = select_all(&engine, lambda, semantics);
    let selected = start.elapsed();
    let theta_hat = project_all(y, design, degree, &h_hat);
    let total = start.elapsed();
    let ms = |d: std::time::Duration| d.as_secs_f64() * 1e3;
    Ok(FitResult {
        theta_hat,
        h_hat,
        lambda,
        degree,
        variant,
        semantics,
        runtime_ms: Timings {
            setup_ms: ms(setup),
            select_ms: ms(selected - setup),
            project_ms: ms(total - selected),
            total_ms: ms(total),
        },
    })
}

pub(crate) fn select_all(engine: &DiscrepancyEngine, lambda: f64, semantics: Semantics) -> Vec<usize> {
    (1..=engine.len())
        .into_par_iter()
        .map(|i0| select_fast(engine, i0, lambda, semantics))
        .collect()
}

pub(crate) fn project_all(y: &[f64], design: &Design, degree: usize, h_hat: &[usize]) -> Vec<f64> {
    let n = y.len();
    (1..=n)
        .into_par_iter()
        .map(|i0| local_estimate(y, design, IntInterval::around(i0, h_hat[i0 - 1], n), degree, i0))
        .collect()
}

/// Estimate at one location together with its bandwidth trace.
pub fn fit_at(
    y: &[f64],
    i0: usize,
    degree: usize,
    lambda: f64,
    variant: Variant,
    semantics: Semantics,
) -> Result<(f64, BandwidthResult)> {
    check_inputs(y, lambda)?;
    let engine = DiscrepancyEngine::new(y, degree, variant)?;
    let b = select_with(&engine, i0, lambda, semantics)?;
    let estimate = local_estimate(y, &Design::equispaced(y.len()), b.window, degree, i0);
    Ok((estimate, b))
}

/// Design index nearest to `x` on the grid `i / n`, ties to the lower index.
pub fn nearest_index(x: f64, n: usize) -> usize {
    let t = x * n as f64;
    let below = t.floor();
    let i = if t - below > 0.5 { below + 1.0 } else { below };
    (i as usize).clamp(1, n)
}

/// Evaluates the local fit selected at the design point nearest to `x_query`.
pub fn predict_at(
    y: &[f64],
    x_query: f64,
    degree: usize,
    lambda: f64,
    variant: Variant,
    semantics: Semantics,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&x_query) {
        return Err(LaserError::domain(format!("query abscissa {x_query} outside [0, 1]")));
    }
    check_inputs(y, lambda)?;
    let n = y.len();
    let i0 = nearest_index(x_query, n);
    let engine = DiscrepancyEngine::new(y, degree, variant)?;
    let h = select_fast(&engine, i0, lambda, semantics);
    let window = IntInterval::around(i0, h, n);
    let basis = build_basis(&IndexSet::from_interval(window, n)?, degree, &Design::equispaced(n))?;
    Ok(eval_fit_at(&basis, &y[window.lo - 1..window.hi], x_query)?.value)
}
