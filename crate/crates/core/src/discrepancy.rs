//! The split gain `Q` and the local discrepancy `T`.
//!
//! `Q(y; I1, I) = RSS(I) - RSS(I1) - RSS(I \ I1)` for a contiguous `I1` inside
//! a window `I`, and `T(I)` is the largest `sqrt(Q)` over the admissible `I1`.
//! The slow routes here work directly from [`crate::polyproj`]; bulk work goes
//! through [`DiscrepancyEngine`].

use serde::{Deserialize, Serialize};

use crate::engine::{snap_q, zero_scale};
pub use crate::engine::{dyadic_intervals, DiscrepancyEngine, MAX_DEGREE, Q_ZERO_RTOL, RAW_ZERO_RTOL, TIE_RTOL};
use crate::error::{LaserError, Result};
use crate::polyproj::{build_basis, dot, rss, Design, IndexSet, IntInterval};

/// Which family of splits (and windows) the search ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Every contiguous `I1` inside the window.
    Full,
    /// Dyadic lengths at dyadic offsets from the window start, plus dyadic suffixes.
    Dyadic,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Full => "full",
            Variant::Dyadic => "dyadic",
        })
    }
}

/// A two-part split of a window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Split {
    pub inner: IntInterval,
    /// `None` when `inner` is the whole window.
    pub outer: Option<IndexSet>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscrepancyResult {
    pub t_value: f64,
    pub argmax_split: Split,
    pub n_splits_scanned: usize,
    pub variant: Variant,
}

fn check_split(theta: &[f64], inner: IntInterval, window: IntInterval) -> Result<()> {
    let n = theta.len();
    IntInterval::new(window.lo, window.hi, n)?;
    IntInterval::new(inner.lo, inner.hi, n)?;
    if !window.contains_interval(&inner) {
        return Err(LaserError::domain(format!("split {inner} is not inside window {window}")));
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(LaserError::domain("signal contains non-finite values"));
    }
    Ok(())
}

fn window_values(theta: &[f64], set: &IndexSet) -> Vec<f64> {
    set.indices().iter().map(|&i| theta[i - 1]).collect()
}

/// Snapping scale of `window`: centred energy plus a sliver of the raw energy.
fn snap_scale(theta: &[f64], window: IntInterval) -> f64 {
    let vals = &theta[window.lo - 1..window.hi];
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    zero_scale(vals.iter().map(|v| (v - mean).powi(2)).sum(), vals.iter().map(|v| v * v).sum())
}

fn rss_on(theta: &[f64], set: &IndexSet, degree: usize, design: &Design) -> Result<f64> {
    let basis = build_basis(set, degree, design)?;
    rss(&basis, &window_values(theta, set))
}

/// `RSS(I) - RSS(I1) - RSS(I2)` without snapping or clamping.
pub fn q_form_raw(theta: &[f64], inner: IntInterval, window: IntInterval, degree: usize) -> Result<f64> {
    check_split(theta, inner, window)?;
    let n = theta.len();
    let design = Design::equispaced(n);
    let whole = rss_on(theta, &IndexSet::from_interval(window, n)?, degree, &design)?;
    let first = rss_on(theta, &IndexSet::from_interval(inner, n)?, degree, &design)?;
    let second = match IndexSet::difference(window, inner, n)? {
        Some(set) => rss_on(theta, &set, degree, &design)?,
        None => return Ok(0.0),
    };
    Ok(whole - first - second)
}

/// The split gain, with values below `Q_ZERO_RTOL` times the window's centred
/// energy (plus `RAW_ZERO_RTOL` times its raw energy), including small
/// negatives, reported as zero.
pub fn q_form(theta: &[f64], inner: IntInterval, window: IntInterval, degree: usize) -> Result<f64> {
    let q = q_form_raw(theta, inner, window, degree)?;
    Ok(snap_q(q, snap_scale(theta, window)))
}

/// Orthonormal basis of `(S_{I1} + S_{I2}) ⊖ S_I`, as vectors over `I`.
fn split_complement_basis(window: IntInterval, inner: IntInterval, n: usize, degree: usize) -> Result<Vec<Vec<f64>>> {
    let design = Design::equispaced(n);
    let m = window.len();
    let embed = |set: &IndexSet| -> Result<Vec<Vec<f64>>> {
        let basis = build_basis(set, degree, &design)?;
        Ok((0..basis.effective_dim())
            .map(|k| {
                let mut v = vec![0.0; m];
                for (j, &i) in set.indices().iter().enumerate() {
                    v[i - window.lo] = basis.column(k)[j];
                }
                v
            })
            .collect())
    };
    let whole = embed(&IndexSet::from_interval(window, n)?)?;
    let mut candidates = embed(&IndexSet::from_interval(inner, n)?)?;
    if let Some(outer) = IndexSet::difference(window, inner, n)? {
        candidates.extend(embed(&outer)?);
    } else {
        return Ok(Vec::new());
    }
    let mut kept: Vec<Vec<f64>> = Vec::new();
    for mut v in candidates {
        let pre = dot(&v, &v).sqrt();
        for _ in 0..2 {
            for u in whole.iter().chain(kept.iter()) {
                let c = dot(u, &v);
                v.iter_mut().zip(u).for_each(|(vi, ui)| *vi -= c * ui);
            }
        }
        let post = dot(&v, &v).sqrt();
        if post > 1e-8 * pre {
            v.iter_mut().for_each(|vi| *vi /= post);
            kept.push(v);
        }
    }
    Ok(kept)
}

/// The split gain computed as `||P y_I||^2` with `P` the projection onto
/// `(S_{I1} + S_{I2}) ⊖ S_I`.
pub fn q_form_projection(theta: &[f64], inner: IntInterval, window: IntInterval, degree: usize) -> Result<f64> {
    check_split(theta, inner, window)?;
    let w = split_complement_basis(window, inner, theta.len(), degree)?;
    let vals = &theta[window.lo - 1..window.hi];
    Ok(w.iter().map(|u| dot(u, vals).powi(2)).sum())
}

/// Rank of the projection behind [`q_form_projection`], i.e.
/// `dim(S_{I1} + S_{I2}) - dim(S_I)`.
pub fn split_projection_rank(inner: IntInterval, window: IntInterval, n: usize, degree: usize) -> Result<usize> {
    check_split(&vec![0.0; n], inner, window)?;
    Ok(split_complement_basis(window, inner, n, degree)?.len())
}

/// Closed form of the degree-0 split gain,
/// `|I1| |I2| / |I| * (mean(I1) - mean(I2))^2`.
pub fn q_form_r0_closed(theta: &[f64], inner: IntInterval, window: IntInterval) -> Result<f64> {
    check_split(theta, inner, window)?;
    let n1 = inner.len();
    let n2 = window.len() - n1;
    if n2 == 0 {
        return Ok(0.0);
    }
    let sum = |iv: IntInterval| theta[iv.lo - 1..iv.hi].iter().sum::<f64>();
    let s1 = sum(inner);
    let s2 = sum(window) - s1;
    let diff = s1 / n1 as f64 - s2 / n2 as f64;
    Ok((n1 * n2) as f64 / window.len() as f64 * diff * diff)
}

/// `T` on one window with the maximizing split.
pub fn t_stat(theta: &[f64], window: IntInterval, degree: usize, variant: Variant) -> Result<DiscrepancyResult> {
    DiscrepancyEngine::new(theta, degree, variant)?.t_stat(window)
}

/// Largest `T` over all windows (full) or over dyadic windows (dyadic).
pub fn effective_noise(eps: &[f64], degree: usize, variant: Variant) -> Result<f64> {
    Ok(DiscrepancyEngine::new(eps, degree, variant)?.max_t_over_windows())
}
