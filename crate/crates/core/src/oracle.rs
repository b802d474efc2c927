//! Slow reference implementations for cross-checking the fast paths.
//!
//! Least squares goes through explicit normal equations on a centred, scaled
//! Vandermonde matrix solved by Gaussian elimination with full pivoting.

use std::collections::HashMap;

use crate::bandwidth::Semantics;
use crate::discrepancy::{Split, Variant};
use crate::engine::{snap_q, zero_scale, TIE_RTOL};
use crate::error::{LaserError, Result};
use crate::estimator::{FitResult, Timings};
use crate::polyproj::{IndexSet, IntInterval};

const RSS_GUARD: usize = 512;
const T_GUARD: usize = 128;
const FIT_GUARD: usize = 64;

fn guard(size: usize, limit: usize, what: &str) -> Result<()> {
    if size > limit {
        return Err(LaserError::domain(format!("{what} of size {size} exceeds the oracle limit {limit}")));
    }
    Ok(())
}

/// Solves `a x = b` for a square system by full-pivot elimination.
fn solve_full_pivot(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let d = b.len();
    let mut col_of: Vec<usize> = (0..d).collect();
    for k in 0..d {
        let (mut pr, mut pc, mut best) = (k, k, -1.0);
        for (i, row) in a.iter().enumerate().skip(k) {
            for (j, v) in row.iter().enumerate().skip(k) {
                if v.abs() > best {
                    (pr, pc, best) = (i, j, v.abs());
                }
            }
        }
        a.swap(k, pr);
        b.swap(k, pr);
        for row in a.iter_mut() {
            row.swap(k, pc);
        }
        col_of.swap(k, pc);
        for i in k + 1..d {
            let f = a[i][k] / a[k][k];
            for j in k..d {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut z = vec![0.0; d];
    for k in (0..d).rev() {
        let s: f64 = (k + 1..d).map(|j| a[k][j] * z[j]).sum();
        z[k] = (b[k] - s) / a[k][k];
    }
    let mut x = vec![0.0; d];
    for k in 0..d {
        x[col_of[k]] = z[k];
    }
    x
}

/// Residual sum of squares of the degree-`degree` least-squares fit of `v`
/// on `index_set` with abscissae `i / n`.
pub fn oracle_rss(index_set: &IndexSet, degree: usize, v: &[f64]) -> Result<f64> {
    let m = index_set.len();
    guard(m, RSS_GUARD, "index set")?;
    if v.len() != m {
        return Err(LaserError::domain(format!("vector has {} entries, index set has {m}", v.len())));
    }
    if m <= degree + 1 {
        return Ok(0.0);
    }
    let n = index_set.ambient_len() as f64;
    let xs: Vec<f64> = index_set.indices().iter().map(|&i| i as f64 / n).collect();
    let centre = xs.iter().sum::<f64>() / m as f64;
    let spread = xs.iter().map(|x| (x - centre).abs()).fold(0.0, f64::max);
    let rows: Vec<Vec<f64>> = xs
        .iter()
        .map(|x| {
            let t = (x - centre) / spread;
            (0..=degree).map(|k| t.powi(k as i32)).collect()
        })
        .collect();
    let d = degree + 1;
    let mut gram = vec![vec![0.0; d]; d];
    let mut rhs = vec![0.0; d];
    for (row, &vi) in rows.iter().zip(v) {
        for k in 0..d {
            rhs[k] += row[k] * vi;
            for l in 0..d {
                gram[k][l] += row[k] * row[l];
            }
        }
    }
    let coef = solve_full_pivot(gram, rhs);
    Ok(rows
        .iter()
        .zip(v)
        .map(|(row, &vi)| {
            let fitted: f64 = row.iter().zip(&coef).map(|(a, c)| a * c).sum();
            (vi - fitted).powi(2)
        })
        .sum())
}

fn rss_of(theta: &[f64], set: &IndexSet, degree: usize) -> Result<f64> {
    let vals: Vec<f64> = set.indices().iter().map(|&i| theta[i - 1]).collect();
    oracle_rss(set, degree, &vals)
}

/// Exhaustive `T` over every contiguous `I1` of `window`, in (start, length)
/// order; ties within a relative `TIE_RTOL` go to the first split.
pub fn oracle_t_stat(theta: &[f64], window: IntInterval, degree: usize) -> Result<(f64, Split)> {
    let n = theta.len();
    let window = IntInterval::new(window.lo, window.hi, n)?;
    guard(window.len(), T_GUARD, "window")?;
    let vals = &theta[window.lo - 1..window.hi];
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let scale = zero_scale(
        vals.iter().map(|v| (v - mean).powi(2)).sum(),
        vals.iter().map(|v| v * v).sum(),
    );
    let whole = rss_of(theta, &IndexSet::from_interval(window, n)?, degree)?;
    let mut gains: Vec<(f64, IntInterval)> = Vec::new();
    for a in window.lo..=window.hi {
        for b in a..=window.hi {
            let inner = IntInterval { lo: a, hi: b };
            let q = match IndexSet::difference(window, inner, n)? {
                None => 0.0,
                Some(outer) => {
                    let parts = rss_of(theta, &IndexSet::from_interval(inner, n)?, degree)?
                        + rss_of(theta, &outer, degree)?;
                    snap_q(whole - parts, scale)
                }
            };
            gains.push((q, inner));
        }
    }
    let q = gains.iter().map(|g| g.0).fold(0.0, f64::max);
    let inner = gains
        .iter()
        .find(|g| g.0 >= q * (1.0 - TIE_RTOL))
        .expect("window is non-empty")
        .1;
    Ok((q.sqrt(), Split { inner, outer: IndexSet::difference(window, inner, n)? }))
}

/// Fit by brute force: `T` at every bandwidth, the largest good one, and an
/// oracle least-squares fit on the resulting window.
pub fn oracle_fit(y: &[f64], degree: usize, lambda: f64) -> Result<FitResult> {
    let n = y.len();
    guard(n, FIT_GUARD, "signal")?;
    if n == 0 || y.iter().any(|v| !v.is_finite()) || !(lambda >= 0.0) {
        return Err(LaserError::domain("oracle fit needs finite data and a non-negative threshold"));
    }
    let mut t_cache: HashMap<IntInterval, f64> = HashMap::new();
    let mut theta_hat = Vec::with_capacity(n);
    let mut h_hat = Vec::with_capacity(n);
    for i0 in 1..=n {
        let mut chosen = 0;
        for h in 0..n {
            let w = IntInterval::around(i0, h, n);
            let t = match t_cache.get(&w) {
                Some(&t) => t,
                None => {
                    let t = oracle_t_stat(y, w, degree)?.0;
                    t_cache.insert(w, t);
                    t
                }
            };
            if t <= lambda {
                chosen = h;
            }
        }
        let w = IntInterval::around(i0, chosen, n);
        theta_hat.push(oracle_value_at(y, w, degree, i0)?);
        h_hat.push(chosen);
    }
    Ok(FitResult {
        theta_hat,
        h_hat,
        lambda,
        degree,
        variant: Variant::Full,
        semantics: Semantics::MaxGood,
        runtime_ms: Timings::default(),
    })
}

/// Oracle least-squares fitted value at `i0` over `window`.
fn oracle_value_at(y: &[f64], window: IntInterval, degree: usize, i0: usize) -> Result<f64> {
    let m = window.len();
    if m <= degree + 1 {
        return Ok(y[i0 - 1]);
    }
    let n = y.len() as f64;
    let xs: Vec<f64> = window.iter().map(|i| i as f64 / n).collect();
    let centre = xs.iter().sum::<f64>() / m as f64;
    let spread = xs.iter().map(|x| (x - centre).abs()).fold(0.0, f64::max);
    let d = degree + 1;
    let row = |x: f64| -> Vec<f64> {
        let t = (x - centre) / spread;
        (0..d).map(|k| t.powi(k as i32)).collect()
    };
    let mut gram = vec![vec![0.0; d]; d];
    let mut rhs = vec![0.0; d];
    for (j, i) in window.iter().enumerate() {
        let r = row(xs[j]);
        for k in 0..d {
            rhs[k] += r[k] * y[i - 1];
            for l in 0..d {
                gram[k][l] += r[k] * r[l];
            }
        }
    }
    let coef = solve_full_pivot(gram, rhs);
    Ok(row(i0 as f64 / n).iter().zip(&coef).map(|(a, c)| a * c).sum())
}
