//! Fast evaluation of the local discrepancy statistic.
//!
//! For a window `I = [lo, hi]` and a contiguous `I1 = [a, b]` the split gain is
//!
//! ```text
//! Q = ||P_{I1} y||^2 + ||P_{I2} y||^2 - ||P_I y||^2,   I2 = I \ I1.
//! ```
//!
//! The first term comes from a table of segment norms built once per signal.
//! `I2` is a left run `[lo, a-1]` plus a right run `[b+1, hi]`; its Gram matrix
//! and moment vector in the window's orthonormal basis are a prefix sum plus a
//! suffix sum, so no cancellation occurs. A small LDL^T solve gives the norm;
//! when a pivot is tiny the projection is recomputed directly on `I2`.
//!
//! In the full variant the segment table also yields the upper bound
//! `||P_{I1} y||^2 + ||P_L y||^2 + ||P_R y||^2 - ||P_I y||^2 >= Q`, which lets
//! the scan skip almost every split without touching the window moments.

use std::sync::OnceLock;

use crate::discrepancy::{DiscrepancyResult, Split, Variant};
use crate::error::{LaserError, Result};
use crate::polyproj::{dot, Design, Factor, IndexSet, IntInterval};

/// Split gains at or below this multiple of the window's centred energy are zero.
pub const Q_ZERO_RTOL: f64 = 1e-10;
/// Gains this close (relatively) to the maximum count as ties.
pub const TIE_RTOL: f64 = 1e-11;
/// Slack applied to the pruning bound.
const PRUNE_RTOL: f64 = 1e-9;
/// Smallest admissible LDL^T pivot of an outer Gram matrix.
const PIVOT_TOL: f64 = 1e-8;
/// Largest polynomial degree supported by the fast path.
pub const MAX_DEGREE: usize = 7;
const MAX_D: usize = MAX_DEGREE + 1;
const MAX_P: usize = MAX_D * (MAX_D + 1) / 2;

/// Multiple of the uncentred window energy added to the snapping scale, so that
/// rounding left over from a large offset also counts as zero.
pub const RAW_ZERO_RTOL: f64 = 1e-10;

/// Scale passed to [`snap_q`] for a window with the given centred and raw energies.
pub fn zero_scale(centred: f64, raw: f64) -> f64 {
    centred + RAW_ZERO_RTOL * raw
}

/// Applies the zero snapping and clamping rule to a raw split gain.
pub fn snap_q(q: f64, scale: f64) -> f64 {
    if q <= Q_ZERO_RTOL * scale {
        0.0
    } else {
        q
    }
}

enum SegTable {
    Full { n: usize, by_start: Vec<f64>, by_end: Vec<f64> },
    Dyadic { levels: Vec<Vec<f64>> },
}

impl SegTable {
    #[inline]
    fn get(&self, a: usize, b: usize) -> f64 {
        match self {
            SegTable::Full { n, by_start, .. } => by_start[(a - 1) * n + (b - 1)],
            SegTable::Dyadic { levels, .. } => {
                let len = b - a + 1;
                debug_assert!(len.is_power_of_two());
                levels[len.trailing_zeros() as usize][a - 1]
            }
        }
    }
}

/// Precomputed state for evaluating `T` on many windows of one signal.
pub struct DiscrepancyEngine {
    theta: Vec<f64>,
    design: Design,
    degree: usize,
    variant: Variant,
    segs: SegTable,
    mean: f64,
    p1: Vec<f64>,
    p2: Vec<f64>,
    prefix_t: Vec<OnceLock<f64>>,
    suffix_t: Vec<OnceLock<f64>>,
}

/// Per-window prefix and suffix moments in the window's orthonormal basis.
struct WindowMoments {
    lo: usize,
    hi: usize,
    d: usize,
    p: usize,
    pg: Vec<f64>,
    sg: Vec<f64>,
    pb: Vec<f64>,
    sb: Vec<f64>,
    pt2: Vec<f64>,
    st2: Vec<f64>,
    s_window: f64,
}

impl DiscrepancyEngine {
    /// Equispaced design `x_i = i / n`.
    pub fn new(theta: &[f64], degree: usize, variant: Variant) -> Result<Self> {
        Self::with_design(theta, Design::equispaced(theta.len()), degree, variant)
    }

    pub fn with_design(theta: &[f64], design: Design, degree: usize, variant: Variant) -> Result<Self> {
        let n = theta.len();
        if n == 0 {
            return Err(LaserError::domain("signal must contain at least one value"));
        }
        if design.len() != n {
            return Err(LaserError::domain(format!(
                "design has {} points but the signal has {n}",
                design.len()
            )));
        }
        if !design.is_strictly_increasing() {
            return Err(LaserError::domain("design abscissae must be strictly increasing"));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(LaserError::domain("signal contains non-finite values"));
        }
        if degree > MAX_DEGREE {
            return Err(LaserError::domain(format!(
                "degree {degree} exceeds the supported maximum {MAX_DEGREE}"
            )));
        }
        let mean = theta.iter().sum::<f64>() / n as f64;
        let theta: Vec<f64> = theta.iter().map(|v| v - mean).collect();
        let mut p1 = vec![0.0; n + 1];
        let mut p2 = vec![0.0; n + 1];
        for (i, v) in theta.iter().enumerate() {
            p1[i + 1] = p1[i] + v;
            p2[i + 1] = p2[i] + v * v;
        }
        let mut engine = DiscrepancyEngine {
            theta,
            design,
            degree,
            variant,
            segs: SegTable::Dyadic { levels: Vec::new() },
            mean,
            p1,
            p2,
            prefix_t: (0..n).map(|_| OnceLock::new()).collect(),
            suffix_t: (0..n).map(|_| OnceLock::new()).collect(),
        };
        engine.segs = engine.build_segments();
        Ok(engine)
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn design(&self) -> &Design {
        &self.design
    }

    fn local_abscissae(&self, indices: impl Iterator<Item = usize>, origin: usize) -> Vec<f64> {
        if self.design.is_equispaced() {
            indices.map(|i| (i - origin) as f64).collect()
        } else {
            indices.map(|i| self.design.x(i)).collect()
        }
    }

    fn segment_norm(&self, a: usize, len: usize, factor: Option<&Factor>) -> f64 {
        let vals = &self.theta[a - 1..a - 1 + len];
        if len <= self.degree + 1 {
            return dot(vals, vals);
        }
        let owned;
        let f = match factor {
            Some(f) => f,
            None => {
                owned = Factor::new(&self.local_abscissae(a..a + len, a), self.degree);
                &owned
            }
        };
        (0..f.dim()).map(|k| dot(f.column(k), vals).powi(2)).sum()
    }

    fn length_factor(&self, len: usize) -> Option<Factor> {
        if self.design.is_equispaced() && len > self.degree + 1 {
            let xs: Vec<f64> = (0..len).map(|j| j as f64).collect();
            Some(Factor::new(&xs, self.degree))
        } else {
            None
        }
    }

    fn build_segments(&self) -> SegTable {
        let n = self.len();
        match self.variant {
            Variant::Full => {
                let mut by_start = vec![0.0; n * n];
                let mut by_end = vec![0.0; n * n];
                for len in 1..=n {
                    let factor = self.length_factor(len);
                    for a in 1..=n + 1 - len {
                        let b = a + len - 1;
                        let v = self.segment_norm(a, len, factor.as_ref());
                        by_start[(a - 1) * n + (b - 1)] = v;
                        by_end[(b - 1) * n + (a - 1)] = v;
                    }
                }
                SegTable::Full { n, by_start, by_end }
            }
            Variant::Dyadic => {
                let mut levels = Vec::new();
                let mut len = 1;
                while len <= n {
                    let factor = self.length_factor(len);
                    let mut level = vec![0.0; n];
                    for a in 1..=n + 1 - len {
                        level[a - 1] = self.segment_norm(a, len, factor.as_ref());
                    }
                    levels.push(level);
                    len *= 2;
                }
                SegTable::Dyadic { levels }
            }
        }
    }

    /// `||y_I||^2` of the centred signal.
    #[inline]
    fn energy(&self, iv: IntInterval) -> f64 {
        self.p2[iv.hi] - self.p2[iv.lo - 1]
    }

    /// Sum of squared deviations from the window mean.
    #[inline]
    fn centred_energy(&self, iv: IntInterval) -> f64 {
        let s = self.p1[iv.hi] - self.p1[iv.lo - 1];
        (self.energy(iv) - s * s / iv.len() as f64).max(0.0)
    }

    fn zero_scale(&self, iv: IntInterval) -> f64 {
        let s = self.p1[iv.hi] - self.p1[iv.lo - 1];
        let m = iv.len() as f64;
        let raw = (self.energy(iv) + 2.0 * self.mean * s + m * self.mean * self.mean).max(0.0);
        zero_scale(self.centred_energy(iv), raw)
    }

    fn moments(&self, iv: IntInterval) -> WindowMoments {
        let (lo, hi) = (iv.lo, iv.hi);
        let m = iv.len();
        let factor = Factor::new(&self.local_abscissae(lo..=hi, lo), self.degree);
        let d = factor.dim();
        let p = d * (d + 1) / 2;
        let vals = &self.theta[lo - 1..hi];

        let mut pg = vec![0.0; (m + 1) * p];
        let mut sg = vec![0.0; (m + 1) * p];
        let mut pb = vec![0.0; (m + 1) * d];
        let mut sb = vec![0.0; (m + 1) * d];
        let mut pt2 = vec![0.0; m + 1];
        let mut st2 = vec![0.0; m + 1];
        let mut phi = [0.0; MAX_D];
        for j in 0..m {
            for (k, ph) in phi.iter_mut().enumerate().take(d) {
                *ph = factor.value(j, k);
            }
            let v = vals[j];
            let mut idx = 0;
            for k in 0..d {
                for l in k..d {
                    pg[(j + 1) * p + idx] = pg[j * p + idx] + phi[k] * phi[l];
                    idx += 1;
                }
                pb[(j + 1) * d + k] = pb[j * d + k] + phi[k] * v;
            }
            pt2[j + 1] = pt2[j] + v * v;

            let jr = m - 1 - j;
            for (k, ph) in phi.iter_mut().enumerate().take(d) {
                *ph = factor.value(jr, k);
            }
            let v = vals[jr];
            let mut idx = 0;
            for k in 0..d {
                for l in k..d {
                    sg[(j + 1) * p + idx] = sg[j * p + idx] + phi[k] * phi[l];
                    idx += 1;
                }
                sb[(j + 1) * d + k] = sb[j * d + k] + phi[k] * v;
            }
            st2[j + 1] = st2[j] + v * v;
        }
        let s_window = (0..d).map(|k| pb[m * d + k].powi(2)).sum();
        WindowMoments { lo, hi, d, p, pg, sg, pb, sb, pt2, st2, s_window }
    }

    /// `||P_{I2} y||^2` for `I2 = [lo, a-1] u [b+1, hi]`.
    fn outer_norm(&self, w: &WindowMoments, a: usize, b: usize) -> f64 {
        let left = a - w.lo;
        let right = w.hi - b;
        let k = left + right;
        if k == 0 {
            return 0.0;
        }
        if k <= self.degree + 1 {
            return w.pt2[left] + w.st2[right];
        }
        let (d, p) = (w.d, w.p);
        let mut g = [0.0; MAX_P];
        let mut z = [0.0; MAX_D];
        for idx in 0..p {
            g[idx] = w.pg[left * p + idx] + w.sg[right * p + idx];
        }
        for kk in 0..d {
            z[kk] = w.pb[left * d + kk] + w.sb[right * d + kk];
        }
        match ldl_norm(&mut g, &mut z, d) {
            Some(v) => v,
            None => self.outer_norm_direct(w, a, b),
        }
    }

    fn outer_norm_direct(&self, w: &WindowMoments, a: usize, b: usize) -> f64 {
        let idx: Vec<usize> = (w.lo..a).chain(b + 1..=w.hi).collect();
        let xs = self.local_abscissae(idx.iter().copied(), w.lo);
        let vals: Vec<f64> = idx.iter().map(|&i| self.theta[i - 1]).collect();
        let f = Factor::new(&xs, self.degree);
        (0..f.dim()).map(|k| dot(f.column(k), &vals).powi(2)).sum()
    }

    /// Snapped split gain for `I1 = [a, b]`.
    #[inline]
    fn split_q(&self, w: &WindowMoments, a: usize, b: usize, scale: f64) -> f64 {
        let m = w.hi + 1 - w.lo;
        let inner = b + 1 - a;
        let q = if inner == m {
            return 0.0;
        } else if inner <= self.degree + 1 && m - inner <= self.degree + 1 {
            // Both pieces are interpolated: the gain is the whole residual.
            w.pt2[m] - w.s_window
        } else if a == w.lo {
            self.two_run_gain(w, b)
        } else if b == w.hi {
            self.two_run_gain(w, a - 1)
        } else {
            self.segs.get(a, b) + self.outer_norm(w, a, b) - w.s_window
        };
        snap_q(q, scale)
    }

    /// Gain of cutting the window after `c`; symmetric in the two pieces so a
    /// prefix and its complementary suffix give identical values.
    #[inline]
    fn two_run_gain(&self, w: &WindowMoments, c: usize) -> f64 {
        (self.outer_norm(w, c + 1, w.hi) + self.outer_norm(w, w.lo, c)) - w.s_window
    }

    /// Upper bound on the split gain from segment norms alone (full variant).
    #[inline]
    fn split_bound(&self, iv: IntInterval, a: usize, b: usize) -> f64 {
        let SegTable::Full { n, by_start, by_end } = &self.segs else {
            return f64::INFINITY;
        };
        let left = if a > iv.lo { by_start[(iv.lo - 1) * n + (a - 2)] } else { 0.0 };
        let right = if b < iv.hi { by_end[(iv.hi - 1) * n + b] } else { 0.0 };
        by_start[(a - 1) * n + (b - 1)] + left + right - by_start[(iv.lo - 1) * n + (iv.hi - 1)]
    }

    fn dyadic_candidates(iv: IntInterval) -> Vec<(usize, usize)> {
        let m = iv.len();
        let mut out = Vec::with_capacity(2 * m + 64);
        let mut len = 1;
        while len <= m {
            let mut a = iv.lo;
            while a + len - 1 <= iv.hi {
                out.push((a, a + len - 1));
                a += len;
            }
            out.push((iv.hi + 1 - len, iv.hi));
            len *= 2;
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// A suffix `[a, hi]` induces the same partition as the prefix `[lo, a-1]`,
    /// which comes earlier in scan order whenever it is a candidate.
    #[inline]
    fn repeats_prefix(iv: IntInterval, a: usize, b: usize, variant: Variant) -> bool {
        b == iv.hi
            && a > iv.lo
            && match variant {
                Variant::Full => true,
                Variant::Dyadic => (a - iv.lo).is_power_of_two(),
            }
    }

    fn check_window(&self, iv: IntInterval) -> Result<()> {
        IntInterval::new(iv.lo, iv.hi, self.len()).map(|_| ())
    }

    fn n_splits(&self, iv: IntInterval) -> usize {
        match self.variant {
            Variant::Full => iv.len() * (iv.len() + 1) / 2,
            Variant::Dyadic => Self::dyadic_candidates(iv).len(),
        }
    }

    /// Largest split gain exceeding `floor`, or `None` when no gain does.
    fn max_split(&self, iv: IntInterval, floor: f64) -> Option<(f64, usize, usize)> {
        let scale = self.zero_scale(iv);
        let margin = PRUNE_RTOL * self.energy(iv);
        let mut best: Option<(f64, usize, usize)> = None;
        let mut threshold = floor;
        match self.variant {
            Variant::Full => {
                let mut moments: Option<WindowMoments> = None;
                for a in iv.lo..=iv.hi {
                    for b in a..=iv.hi {
                        if Self::repeats_prefix(iv, a, b, Variant::Full)
                            || self.split_bound(iv, a, b) + margin < threshold
                        {
                            continue;
                        }
                        let w = moments.get_or_insert_with(|| self.moments(iv));
                        let q = self.split_q(w, a, b, scale);
                        if q > threshold {
                            best = Some((q, a, b));
                            threshold = q;
                        }
                    }
                }
            }
            Variant::Dyadic => {
                let w = self.moments(iv);
                for (a, b) in Self::dyadic_candidates(iv) {
                    if Self::repeats_prefix(iv, a, b, Variant::Dyadic) {
                        continue;
                    }
                    let q = self.split_q(&w, a, b, scale);
                    if q > threshold {
                        best = Some((q, a, b));
                        threshold = q;
                    }
                }
            }
        }
        best
    }

    /// First split in scan order whose gain reaches `target`.
    fn first_reaching(&self, iv: IntInterval, target: f64) -> Option<(usize, usize)> {
        let scale = self.zero_scale(iv);
        let margin = PRUNE_RTOL * self.energy(iv);
        match self.variant {
            Variant::Full => {
                let mut moments: Option<WindowMoments> = None;
                for a in iv.lo..=iv.hi {
                    for b in a..=iv.hi {
                        if Self::repeats_prefix(iv, a, b, Variant::Full)
                            || self.split_bound(iv, a, b) + margin < target
                        {
                            continue;
                        }
                        let w = moments.get_or_insert_with(|| self.moments(iv));
                        if self.split_q(w, a, b, scale) >= target {
                            return Some((a, b));
                        }
                    }
                }
                None
            }
            Variant::Dyadic => {
                let w = self.moments(iv);
                Self::dyadic_candidates(iv)
                    .into_iter()
                    .filter(|&(a, b)| !Self::repeats_prefix(iv, a, b, Variant::Dyadic))
                    .find(|&(a, b)| self.split_q(&w, a, b, scale) >= target)
            }
        }
    }

    /// Largest split gain on a window (zero for windows of at most `r + 1` points).
    fn max_q(&self, iv: IntInterval) -> f64 {
        if iv.len() <= self.degree + 1 {
            return 0.0;
        }
        self.max_split(iv, 0.0).map_or(0.0, |(q, _, _)| q)
    }

    /// `T` on a window together with its maximizing split.
    ///
    /// The reported split is the first in (start, length) order whose gain is
    /// within a relative [`TIE_RTOL`] of the maximum, so mathematically tied
    /// splits resolve the same way regardless of rounding.
    pub fn t_stat(&self, iv: IntInterval) -> Result<DiscrepancyResult> {
        self.check_window(iv)?;
        let q = self.max_q(iv);
        let (a, b) = if q == 0.0 {
            (iv.lo, iv.lo)
        } else {
            self.first_reaching(iv, q * (1.0 - TIE_RTOL)).expect("maximizer reaches the target")
        };
        let inner = IntInterval { lo: a, hi: b };
        Ok(DiscrepancyResult {
            t_value: q.sqrt(),
            argmax_split: Split {
                inner,
                outer: IndexSet::difference(iv, inner, self.len()).expect("split lies in window"),
            },
            n_splits_scanned: self.n_splits(iv),
            variant: self.variant,
        })
    }

    /// `T` on a window, memoized for windows touching either end of the signal.
    pub fn t_value(&self, iv: IntInterval) -> f64 {
        let n = self.len();
        let compute = || self.max_q(iv).sqrt();
        if iv.lo == 1 {
            *self.prefix_t[iv.hi - 1].get_or_init(compute)
        } else if iv.hi == n {
            *self.suffix_t[iv.lo - 1].get_or_init(compute)
        } else {
            compute()
        }
    }

    /// Whether `T(I) > lambda`, stopping at the first violating split.
    ///
    /// `hint` carries a split that violated on a previously tested window.
    pub fn exceeds(&self, iv: IntInterval, lambda: f64, hint: &mut Option<(usize, usize)>) -> bool {
        let n = self.len();
        if iv.len() <= self.degree + 1 {
            return 0.0 > lambda;
        }
        if iv.lo == 1 || iv.hi == n {
            return self.t_value(iv) > lambda;
        }
        let scale = self.zero_scale(iv);
        let violates = |q: f64| q.sqrt() > lambda;
        match self.variant {
            Variant::Full => {
                let target = lambda * lambda;
                let margin = PRUNE_RTOL * self.energy(iv);
                let mut moments: Option<WindowMoments> = None;
                if let Some((a, b)) = *hint {
                    let (a, b) = (a.max(iv.lo), b.min(iv.hi));
                    if a <= b {
                        let w = moments.get_or_insert_with(|| self.moments(iv));
                        if violates(self.split_q(w, a, b, scale)) {
                            *hint = Some((a, b));
                            return true;
                        }
                    }
                }
                for a in iv.lo..=iv.hi {
                    for b in a..=iv.hi {
                        if Self::repeats_prefix(iv, a, b, Variant::Full)
                            || self.split_bound(iv, a, b) + margin < target
                        {
                            continue;
                        }
                        let w = moments.get_or_insert_with(|| self.moments(iv));
                        if violates(self.split_q(w, a, b, scale)) {
                            *hint = Some((a, b));
                            return true;
                        }
                    }
                }
                false
            }
            Variant::Dyadic => {
                let w = self.moments(iv);
                Self::dyadic_candidates(iv)
                    .into_iter()
                    .any(|(a, b)| violates(self.split_q(&w, a, b, scale)))
            }
        }
    }

    /// Maximum of `T` over the variant's window family.
    ///
    /// Full: every sub-interval of `[1, n]`. Dyadic: the intervals
    /// `[k 2^j + 1, (k + 1) 2^j]`.
    pub fn max_t_over_windows(&self) -> f64 {
        let n = self.len();
        match self.variant {
            Variant::Dyadic => dyadic_intervals(n)
                .into_iter()
                .map(|iv| self.max_q(iv).sqrt())
                .fold(0.0, f64::max),
            Variant::Full => {
                let mut best = 0.0_f64;
                for len in (self.degree + 2..=n).rev() {
                    for lo in 1..=n + 1 - len {
                        let iv = IntInterval { lo, hi: lo + len - 1 };
                        // T(I)^2 never exceeds the residual energy of I.
                        if self.centred_energy(iv) * (1.0 + 1e-9) <= best {
                            continue;
                        }
                        if let Some((q, _, _)) = self.max_split(iv, best) {
                            best = best.max(q);
                        }
                    }
                }
                best.sqrt()
            }
        }
    }
}

/// All dyadic intervals `[k 2^j + 1, (k + 1) 2^j]` inside `[1, n]`.
pub fn dyadic_intervals(n: usize) -> Vec<IntInterval> {
    let mut out = Vec::new();
    let mut len = 1;
    while len <= n {
        let mut lo = 1;
        while lo + len - 1 <= n {
            out.push(IntInterval { lo, hi: lo + len - 1 });
            lo += len;
        }
        len *= 2;
    }
    out
}

/// `z^T G^{-1} z` via an in-place LDL^T factorization of the packed upper
/// triangle of `g`. Returns `None` when a pivot falls below [`PIVOT_TOL`].
#[inline]
fn ldl_norm(g: &mut [f64; MAX_P], z: &mut [f64; MAX_D], d: usize) -> Option<f64> {
    // Packed row-major upper triangle: entry (k, l), l >= k.
    let at = |k: usize, l: usize| k * d - k * (k + 1) / 2 + l;
    let mut lmat = [0.0; MAX_D * MAX_D];
    let mut diag = [0.0; MAX_D];
    for j in 0..d {
        let mut djj = g[at(j, j)];
        for k in 0..j {
            djj -= lmat[j * MAX_D + k] * lmat[j * MAX_D + k] * diag[k];
        }
        if !(djj > PIVOT_TOL) {
            return None;
        }
        diag[j] = djj;
        for i in j + 1..d {
            let mut v = g[at(j, i)];
            for k in 0..j {
                v -= lmat[i * MAX_D + k] * lmat[j * MAX_D + k] * diag[k];
            }
            lmat[i * MAX_D + j] = v / djj;
        }
    }
    let mut acc = 0.0;
    for i in 0..d {
        let mut v = z[i];
        for k in 0..i {
            v -= lmat[i * MAX_D + k] * z[k];
        }
        z[i] = v;
        acc += v * v / diag[i];
    }
    Some(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ldl_matches_explicit_inverse() {
        // G = [[4, 2], [2, 3]], z = (1, 2): z^T G^{-1} z = (3 - 8 + 16) / 8.
        let mut g = [0.0; MAX_P];
        g[0] = 4.0;
        g[1] = 2.0;
        g[2] = 3.0;
        let mut z = [0.0; MAX_D];
        z[0] = 1.0;
        z[1] = 2.0;
        let v = ldl_norm(&mut g, &mut z, 2).unwrap();
        assert!((v - 11.0 / 8.0).abs() < 1e-14);
    }

    #[test]
    fn ldl_rejects_singular() {
        let mut g = [0.0; MAX_P];
        g[0] = 1.0;
        g[1] = 1.0;
        g[2] = 1.0;
        let mut z = [0.0; MAX_D];
        assert!(ldl_norm(&mut g, &mut z, 2).is_none());
    }

    #[test]
    fn dyadic_candidate_grid() {
        let c = DiscrepancyEngine::dyadic_candidates(IntInterval { lo: 3, hi: 7 });
        // lengths 1 (5 blocks), 2 (blocks [3,4],[5,6] + suffix [6,7]), 4 ([3,6] + suffix [4,7])
        assert_eq!(
            c,
            vec![(3, 3), (3, 4), (3, 6), (4, 4), (4, 7), (5, 5), (5, 6), (6, 6), (6, 7), (7, 7)]
        );
    }

    #[test]
    fn dyadic_interval_family() {
        let v = dyadic_intervals(5);
        assert_eq!(v.len(), 5 + 2 + 1);
        assert!(v.contains(&IntInterval { lo: 1, hi: 4 }));
        assert!(!v.contains(&IntInterval { lo: 2, hi: 3 }));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(DiscrepancyEngine::new(&[], 0, Variant::Full).is_err());
        assert!(DiscrepancyEngine::new(&[1.0, f64::NAN], 0, Variant::Full).is_err());
        assert!(DiscrepancyEngine::new(&[1.0, 2.0], MAX_DEGREE + 1, Variant::Full).is_err());
        let design = Design::from_abscissae(vec![0.1, 0.1]).unwrap();
        assert!(DiscrepancyEngine::with_design(&[1.0, 2.0], design, 0, Variant::Full).is_err());
    }
}
