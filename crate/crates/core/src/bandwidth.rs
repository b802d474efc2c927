//! Good bandwidths and the bandwidth selector at a single location.

use serde::{Deserialize, Serialize};

use crate::discrepancy::{DiscrepancyEngine, Variant};
use crate::error::{LaserError, Result};
use crate::polyproj::IntInterval;

/// How the selected bandwidth is read off the good set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Semantics {
    /// Largest good bandwidth on the grid.
    #[default]
    MaxGood,
    /// Grow `h` and stop at the first bad grid point, returning the previous one.
    FirstFailure,
}

impl std::fmt::Display for Semantics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Semantics::MaxGood => "max-good",
            Semantics::FirstFailure => "first-failure",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceEntry {
    pub h: usize,
    pub t_value: f64,
    pub good: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandwidthResult {
    pub i0: usize,
    pub h_hat: usize,
    pub window: IntInterval,
    pub trace: Vec<TraceEntry>,
    pub semantics: Semantics,
    pub variant: Variant,
}

/// Bandwidth grid: every `h` in `[0, n-1]` (full) or `{0} ∪ {2^k <= n-1}` (dyadic).
pub fn h_grid(n: usize, variant: Variant) -> Vec<usize> {
    match variant {
        Variant::Full => (0..n).collect(),
        Variant::Dyadic => {
            let mut g = vec![0];
            let mut h = 1;
            while h < n {
                g.push(h);
                h *= 2;
            }
            g
        }
    }
}

fn check_location(n: usize, i0: usize) -> Result<()> {
    if i0 == 0 || i0 > n {
        return Err(LaserError::domain(format!("location {i0} outside [1, {n}]")));
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(LaserError::domain(format!("threshold must be finite and non-negative, got {lambda}")));
    }
    Ok(())
}

/// `T` at every grid bandwidth around `i0`, flagged against `lambda`.
pub fn good_set_with(
    engine: &DiscrepancyEngine,
    i0: usize,
    lambda: f64,
    grid: &[usize],
) -> Result<Vec<TraceEntry>> {
    let n = engine.len();
    check_location(n, i0)?;
    check_lambda(lambda)?;
    if let Some(&h) = grid.iter().find(|&&h| h >= n) {
        return Err(LaserError::domain(format!("bandwidth {h} outside [0, {}]", n - 1)));
    }
    Ok(grid
        .iter()
        .map(|&h| {
            let t_value = engine.t_value(IntInterval::around(i0, h, n));
            TraceEntry { h, t_value, good: t_value <= lambda }
        })
        .collect())
}

/// Good-set trace on `y` with the default grid of the variant unless `grid` is given.
pub fn good_set(
    y: &[f64],
    i0: usize,
    degree: usize,
    lambda: f64,
    variant: Variant,
    grid: Option<&[usize]>,
) -> Result<Vec<TraceEntry>> {
    check_location(y.len(), i0)?;
    let engine = DiscrepancyEngine::new(y, degree, variant)?;
    let default_grid;
    let grid = match grid {
        Some(g) => g,
        None => {
            default_grid = h_grid(y.len(), variant);
            &default_grid
        }
    };
    good_set_with(&engine, i0, lambda, grid)
}

/// Reads the selected bandwidth off a trace sorted by `h`.
pub fn h_hat_from_trace(trace: &[TraceEntry], semantics: Semantics) -> usize {
    match semantics {
        Semantics::MaxGood => trace.iter().rev().find(|e| e.good).map_or(0, |e| e.h),
        Semantics::FirstFailure => {
            let mut last = 0;
            for e in trace {
                if !e.good {
                    break;
                }
                last = e.h;
            }
            last
        }
    }
}

/// Bandwidth selection with a complete trace over the variant's grid.
pub fn select_with(
    engine: &DiscrepancyEngine,
    i0: usize,
    lambda: f64,
    semantics: Semantics,
) -> Result<BandwidthResult> {
    let n = engine.len();
    let trace = good_set_with(engine, i0, lambda, &h_grid(n, engine.variant()))?;
    let h_hat = h_hat_from_trace(&trace, semantics);
    Ok(BandwidthResult {
        i0,
        h_hat,
        window: IntInterval::around(i0, h_hat, n),
        trace,
        semantics,
        variant: engine.variant(),
    })
}

pub fn select_bandwidth(
    y: &[f64],
    i0: usize,
    degree: usize,
    lambda: f64,
    variant: Variant,
    semantics: Semantics,
) -> Result<BandwidthResult> {
    check_location(y.len(), i0)?;
    let engine = DiscrepancyEngine::new(y, degree, variant)?;
    select_with(&engine, i0, lambda, semantics)
}

/// Selected bandwidth only, stopping each window test at the first violating split.
///
/// Arguments are assumed validated.
pub(crate) fn select_fast(engine: &DiscrepancyEngine, i0: usize, lambda: f64, semantics: Semantics) -> usize {
    let n = engine.len();
    let grid = h_grid(n, engine.variant());
    let mut hint = None;
    let bad = |h: usize, hint: &mut Option<(usize, usize)>| {
        engine.exceeds(IntInterval::around(i0, h, n), lambda, hint)
    };
    match semantics {
        Semantics::MaxGood => {
            // Windows stop growing once both sides are truncated.
            let saturated = (i0 - 1).max(n - i0);
            let mut last_window_bad = None;
            for &h in grid.iter().rev() {
                if h >= saturated {
                    let v = *last_window_bad.get_or_insert_with(|| bad(saturated.min(n - 1), &mut hint));
                    if !v {
                        return h;
                    }
                    continue;
                }
                if !bad(h, &mut hint) {
                    return h;
                }
            }
            0
        }
        Semantics::FirstFailure => {
            let mut last = 0;
            for &h in &grid {
                if bad(h, &mut hint) {
                    break;
                }
                last = h;
            }
            last
        }
    }
}

/// T profile over the grid: `(h, T(window))` pairs.
pub fn profile(engine: &DiscrepancyEngine, i0: usize) -> Vec<(usize, f64)> {
    let n = engine.len();
    h_grid(n, engine.variant())
        .into_iter()
        .map(|h| (h, engine.t_value(IntInterval::around(i0, h, n))))
        .collect()
}

/// Selected bandwidth for `lambda` from a [`profile`].
pub fn h_hat_from_profile(profile: &[(usize, f64)], lambda: f64, semantics: Semantics) -> usize {
    let trace: Vec<TraceEntry> = profile
        .iter()
        .map(|&(h, t_value)| TraceEntry { h, t_value, good: t_value <= lambda })
        .collect();
    h_hat_from_trace(&trace, semantics)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BseLocation {
    pub i0: usize,
    /// `T` of the true signal on the selected window.
    pub t_window: f64,
    /// `T` of the true signal on the window grown by one; `None` when the window is `[1, n]`.
    pub t_grown: Option<f64>,
    pub upper_ok: bool,
    pub lower_ok: bool,
}

impl BseLocation {
    pub fn passed(&self) -> bool {
        self.upper_ok && self.lower_ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BseReport {
    pub lambda: f64,
    pub effective_noise: f64,
    pub locations: Vec<BseLocation>,
}

impl BseReport {
    pub fn pass_fraction(&self) -> f64 {
        if self.locations.is_empty() {
            return 1.0;
        }
        self.locations.iter().filter(|l| l.passed()).count() as f64 / self.locations.len() as f64
    }
}

/// Checks that each selected window satisfies
/// `T*(window) <= lambda + E` and `T*(window grown by 1) >= lambda - E`, where
/// `T*` is evaluated on the true signal and `E` is the full effective noise of
/// `eps`.
pub fn check_bse(
    theta_star: &[f64],
    eps: &[f64],
    fit: &[BandwidthResult],
    lambda: f64,
    degree: usize,
) -> Result<BseReport> {
    let n = theta_star.len();
    if eps.len() != n {
        return Err(LaserError::domain(format!(
            "signal has {n} values but noise has {}",
            eps.len()
        )));
    }
    check_lambda(lambda)?;
    let e = crate::discrepancy::effective_noise(eps, degree, Variant::Full)?;
    check_bse_with(theta_star, e, fit, lambda, degree)
}

/// [`check_bse`] with a precomputed effective noise.
pub fn check_bse_with(
    theta_star: &[f64],
    effective_noise: f64,
    fit: &[BandwidthResult],
    lambda: f64,
    degree: usize,
) -> Result<BseReport> {
    let n = theta_star.len();
    let engine = DiscrepancyEngine::new(theta_star, degree, Variant::Full)?;
    let slack = 1e-9 * (1.0 + lambda + effective_noise);
    let mut locations = Vec::with_capacity(fit.len());
    for b in fit {
        check_location(n, b.i0)?;
        let window = IntInterval::around(b.i0, b.h_hat, n);
        let t_window = engine.t_value(window);
        let t_grown = (window != IntInterval { lo: 1, hi: n })
            .then(|| engine.t_value(IntInterval::around(b.i0, b.h_hat + 1, n)));
        locations.push(BseLocation {
            i0: b.i0,
            t_window,
            t_grown,
            upper_ok: t_window <= lambda + effective_noise + slack,
            lower_ok: t_grown.is_none_or(|t| t >= lambda - effective_noise - slack),
        });
    }
    Ok(BseReport { lambda, effective_noise, locations })
}

#[cfg(test)]
mod tests {
    use super::*;

    const STEP8: [f64; 8] = [0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0];

    #[test]
    fn grids() {
        assert_eq!(h_grid(5, Variant::Full), vec![0, 1, 2, 3, 4]);
        assert_eq!(h_grid(9, Variant::Dyadic), vec![0, 1, 2, 4, 8]);
        assert_eq!(h_grid(8, Variant::Dyadic), vec![0, 1, 2, 4]);
        assert_eq!(h_grid(1, Variant::Dyadic), vec![0]);
    }

    #[test]
    fn step_good_set() {
        let trace = good_set(&STEP8, 2, 0, 0.5, Variant::Full, None).unwrap();
        let good: Vec<bool> = trace.iter().map(|e| e.good).collect();
        assert_eq!(good, vec![true, true, true, false, false, false, false, false]);
        assert!((trace[3].t_value - 0.8f64.sqrt()).abs() < 1e-12);
        let b = select_bandwidth(&STEP8, 2, 0, 0.5, Variant::Full, Semantics::MaxGood).unwrap();
        assert_eq!(b.h_hat, 2);
        assert_eq!(b.window, IntInterval { lo: 1, hi: 4 });
    }

    #[test]
    fn fast_path_matches_trace() {
        let engine = DiscrepancyEngine::new(&STEP8, 0, Variant::Full).unwrap();
        for i0 in 1..=8 {
            for sem in [Semantics::MaxGood, Semantics::FirstFailure] {
                let slow = select_with(&engine, i0, 0.5, sem).unwrap().h_hat;
                assert_eq!(select_fast(&engine, i0, 0.5, sem), slow, "i0={i0}");
            }
        }
    }

    #[test]
    fn semantics_differ_on_gapped_good_set() {
        let trace: Vec<TraceEntry> = [true, true, true, false, false, true]
            .iter()
            .enumerate()
            .map(|(h, &good)| TraceEntry { h, t_value: 0.0, good })
            .collect();
        assert_eq!(h_hat_from_trace(&trace, Semantics::MaxGood), 5);
        assert_eq!(h_hat_from_trace(&trace, Semantics::FirstFailure), 2);
    }

    #[test]
    fn polynomial_is_good_everywhere() {
        let y: Vec<f64> = (1..=16).map(|i| 2.0 - 0.5 * i as f64).collect();
        let trace = good_set(&y, 7, 1, 0.0, Variant::Full, None).unwrap();
        assert!(trace.iter().all(|e| e.good));
        let b = select_bandwidth(&y, 7, 1, 0.0, Variant::Dyadic, Semantics::MaxGood).unwrap();
        assert_eq!(b.h_hat, 8);
        assert_eq!(b.window, IntInterval { lo: 1, hi: 15 });
    }

    #[test]
    fn bad_arguments() {
        assert!(good_set(&STEP8, 0, 0, 0.5, Variant::Full, None).is_err());
        assert!(good_set(&STEP8, 9, 0, 0.5, Variant::Full, None).is_err());
        assert!(good_set(&STEP8, 1, 0, -1.0, Variant::Full, None).is_err());
        assert!(good_set(&STEP8, 1, 0, 0.5, Variant::Full, Some(&[8])).is_err());
    }

    #[test]
    fn bse_without_noise() {
        let theta: Vec<f64> = (1..=12).map(|i| ((i as f64) * 0.7).sin()).collect();
        let fit: Vec<BandwidthResult> = (1..=12)
            .map(|i0| select_bandwidth(&theta, i0, 1, 0.0, Variant::Full, Semantics::MaxGood).unwrap())
            .collect();
        let report = check_bse(&theta, &[0.0; 12], &fit, 0.0, 1).unwrap();
        assert_eq!(report.effective_noise, 0.0);
        assert_eq!(report.pass_fraction(), 1.0);
    }
}
