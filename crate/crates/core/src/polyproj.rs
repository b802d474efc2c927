//! Discrete polynomial subspaces on index sets.
//!
//! A [`PolyBasis`] holds an orthonormal basis of the degree-`r` polynomial
//! vectors restricted to an [`IndexSet`]. Abscissae are mapped to `[-1, 1]`
//! before a Vandermonde matrix is orthonormalized by modified Gram-Schmidt with
//! one reorthogonalization pass. The projection matrix is never formed; every
//! operation goes through the thin `|I| x d` column factor.

use crate::error::{LaserError, Result};

/// Relative norm below which a Vandermonde column is treated as dependent.
const DROP_RTOL: f64 = 1e-12;

/// Abscissae `x_1, ..., x_n` of the design points.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    x: Vec<f64>,
    equispaced: bool,
}

impl Design {
    /// The grid `x_i = i / n`.
    pub fn equispaced(n: usize) -> Self {
        let nf = n as f64;
        Design {
            x: (1..=n).map(|i| i as f64 / nf).collect(),
            equispaced: true,
        }
    }

    /// Arbitrary finite, non-decreasing abscissae.
    pub fn from_abscissae(x: Vec<f64>) -> Result<Self> {
        if x.is_empty() {
            return Err(LaserError::domain("design must contain at least one point"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(LaserError::domain("design abscissae must be finite"));
        }
        if x.windows(2).any(|w| w[1] < w[0]) {
            return Err(LaserError::domain("design abscissae must be non-decreasing"));
        }
        Ok(Design { x, equispaced: false })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Abscissa of the 1-based index `i`.
    pub fn x(&self, i: usize) -> f64 {
        self.x[i - 1]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.x
    }

    /// True for the `i / n` grid built by [`Design::equispaced`].
    pub fn is_equispaced(&self) -> bool {
        self.equispaced
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.x.windows(2).all(|w| w[1] > w[0])
    }
}

/// Closed integer interval `[lo, hi]` of 1-based indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub struct IntInterval {
    pub lo: usize,
    pub hi: usize,
}

impl IntInterval {
    /// Checked constructor enforcing `1 <= lo <= hi <= n`.
    pub fn new(lo: usize, hi: usize, n: usize) -> Result<Self> {
        if lo == 0 || lo > hi || hi > n {
            return Err(LaserError::domain(format!(
                "interval [{lo}, {hi}] is not a sub-interval of [1, {n}]"
            )));
        }
        Ok(IntInterval { lo, hi })
    }

    /// The truncated symmetric window `[(i0 - h) v 1, (i0 + h) ^ n]`.
    pub fn around(i0: usize, h: usize, n: usize) -> Self {
        debug_assert!(i0 >= 1 && i0 <= n);
        IntInterval {
            lo: i0.saturating_sub(h).max(1),
            hi: i0.saturating_add(h).min(n),
        }
    }

    pub fn len(&self) -> usize {
        self.hi - self.lo + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, i: usize) -> bool {
        self.lo <= i && i <= self.hi
    }

    pub fn contains_interval(&self, other: &IntInterval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn iter(&self) -> std::ops::RangeInclusive<usize> {
        self.lo..=self.hi
    }
}

impl std::fmt::Display for IntInterval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Non-empty, strictly increasing set of 1-based indices in `[1, n]`.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct IndexSet {
    indices: Vec<usize>,
    n: usize,
    contiguous: bool,
}

impl IndexSet {
    pub fn new(indices: Vec<usize>, n: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(LaserError::domain("index set must be non-empty"));
        }
        if indices[0] == 0 || *indices.last().unwrap() > n {
            return Err(LaserError::domain(format!("index set leaves the range [1, {n}]")));
        }
        if indices.windows(2).any(|w| w[1] <= w[0]) {
            return Err(LaserError::domain("index set must be strictly increasing"));
        }
        let contiguous = indices.last().unwrap() - indices[0] + 1 == indices.len();
        Ok(IndexSet { indices, n, contiguous })
    }

    pub fn from_interval(iv: IntInterval, n: usize) -> Result<Self> {
        IntInterval::new(iv.lo, iv.hi, n)?;
        Ok(IndexSet {
            indices: iv.iter().collect(),
            n,
            contiguous: true,
        })
    }

    /// `outer \ inner`, or `None` when the difference is empty.
    pub fn difference(outer: IntInterval, inner: IntInterval, n: usize) -> Result<Option<Self>> {
        if !outer.contains_interval(&inner) {
            return Err(LaserError::domain(format!("{inner} is not contained in {outer}")));
        }
        let indices: Vec<usize> = (outer.lo..inner.lo).chain(inner.hi + 1..=outer.hi).collect();
        if indices.is_empty() {
            return Ok(None);
        }
        IndexSet::new(indices, n).map(Some)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn ambient_len(&self) -> usize {
        self.n
    }

    pub fn is_contiguous(&self) -> bool {
        self.contiguous
    }

    /// Position of `i` within the set.
    pub fn position(&self, i: usize) -> Option<usize> {
        self.indices.binary_search(&i).ok()
    }
}

/// Thin orthonormal factor of a centered, scaled Vandermonde matrix.
#[derive(Debug, Clone)]
pub(crate) struct Factor {
    m: usize,
    dim: usize,
    /// Column-major `m x dim`.
    q: Vec<f64>,
    /// Upper-triangular `dim x dim` with `V_kept = Q R`.
    r: Vec<f64>,
    powers: Vec<usize>,
    mid: f64,
    half: f64,
}

impl Factor {
    pub(crate) fn new(xs: &[f64], degree: usize) -> Factor {
        let m = xs.len();
        let (lo, hi) = xs
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        let mid = 0.5 * (lo + hi);
        let half = if hi > lo { 0.5 * (hi - lo) } else { 1.0 };
        let t: Vec<f64> = xs.iter().map(|&x| (x - mid) / half).collect();

        let max_cols = (degree + 1).min(m);
        let mut q: Vec<f64> = Vec::with_capacity(m * max_cols);
        let mut r_cols: Vec<Vec<f64>> = Vec::with_capacity(max_cols);
        let mut powers = Vec::with_capacity(max_cols);
        let mut v = vec![0.0; m];

        for k in 0..=degree {
            if powers.len() == max_cols {
                break;
            }
            for (vj, &tj) in v.iter_mut().zip(&t) {
                *vj = tj.powi(k as i32);
            }
            let pre = norm(&v);
            if pre == 0.0 {
                continue;
            }
            let dim = powers.len();
            let mut coeffs = vec![0.0; dim + 1];
            for _pass in 0..2 {
                for (c, col) in coeffs.iter_mut().zip(q.chunks_exact(m)) {
                    let proj = dot(col, &v);
                    *c += proj;
                    for (vj, qj) in v.iter_mut().zip(col) {
                        *vj -= proj * qj;
                    }
                }
            }
            let post = norm(&v);
            if post < DROP_RTOL * pre {
                continue;
            }
            coeffs[dim] = post;
            q.extend(v.iter().map(|vj| vj / post));
            r_cols.push(coeffs);
            powers.push(k);
        }

        let dim = powers.len();
        let mut r = vec![0.0; dim * dim];
        for (k, col) in r_cols.iter().enumerate() {
            for (j, &c) in col.iter().enumerate() {
                r[j * dim + k] = c;
            }
        }
        Factor { m, dim, q, r, powers, mid, half }
    }

    pub(crate) fn dim(&self) -> usize {
        self.dim
    }

    pub(crate) fn column(&self, k: usize) -> &[f64] {
        &self.q[k * self.m..(k + 1) * self.m]
    }

    pub(crate) fn value(&self, j: usize, k: usize) -> f64 {
        self.q[k * self.m + j]
    }

    /// `Q^T v`.
    pub(crate) fn coefficients(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim).map(|k| dot(self.column(k), v)).collect()
    }

    /// Values of the orthonormal polynomials at an arbitrary abscissa.
    pub(crate) fn basis_at(&self, x: f64) -> Vec<f64> {
        let t = (x - self.mid) / self.half;
        let d = self.dim;
        // Solve phi^T R = mono^T, i.e. R^T phi = mono (forward substitution).
        let mono: Vec<f64> = self.powers.iter().map(|&p| t.powi(p as i32)).collect();
        let mut phi = vec![0.0; d];
        for k in 0..d {
            let mut s = mono[k];
            for j in 0..k {
                s -= self.r[j * d + k] * phi[j];
            }
            phi[k] = s / self.r[k * d + k];
        }
        phi
    }
}

/// Orthonormal basis of degree-`r` discrete polynomials on an index set.
#[derive(Debug, Clone)]
pub struct PolyBasis {
    index_set: IndexSet,
    degree: usize,
    factor: Factor,
    abscissae: Vec<f64>,
}

/// A fitted polynomial evaluated at a query abscissa.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitValue {
    pub value: f64,
    /// The query lies outside the hull of the fitted abscissae.
    pub extrapolated: bool,
}

impl PolyBasis {
    pub fn index_set(&self) -> &IndexSet {
        &self.index_set
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Dimension of the subspace, `min(r + 1, |I|)` for distinct abscissae.
    pub fn effective_dim(&self) -> usize {
        self.factor.dim
    }

    /// Centre and half-width of the coordinate map onto `[-1, 1]`.
    pub fn centering(&self) -> (f64, f64) {
        (self.factor.mid, self.factor.half)
    }

    pub fn column(&self, k: usize) -> &[f64] {
        self.factor.column(k)
    }

    fn is_identity(&self) -> bool {
        self.factor.dim == self.index_set.len()
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.index_set.len() {
            return Err(LaserError::domain(format!(
                "vector of length {} does not match index set of size {}",
                v.len(),
                self.index_set.len()
            )));
        }
        Ok(())
    }

    /// Squared norm of the projection, `||P v||^2`.
    pub fn projected_norm2(&self, v: &[f64]) -> Result<f64> {
        self.check_len(v)?;
        if self.is_identity() {
            return Ok(dot(v, v));
        }
        Ok(self.factor.coefficients(v).iter().map(|c| c * c).sum())
    }
}

/// Builds the basis for `index_set` using the design's abscissae.
pub fn build_basis(index_set: &IndexSet, degree: usize, design: &Design) -> Result<PolyBasis> {
    if index_set.is_empty() {
        return Err(LaserError::domain("cannot build a basis on an empty index set"));
    }
    if design.len() != index_set.ambient_len() {
        return Err(LaserError::domain(format!(
            "design has {} points but the index set lives in [1, {}]",
            design.len(),
            index_set.ambient_len()
        )));
    }
    let abscissae: Vec<f64> = index_set.indices().iter().map(|&i| design.x(i)).collect();
    let factor = Factor::new(&abscissae, degree);
    Ok(PolyBasis {
        index_set: index_set.clone(),
        degree,
        factor,
        abscissae,
    })
}

/// Orthogonal projection of `v` (indexed like the basis' index set).
pub fn project(basis: &PolyBasis, v: &[f64]) -> Result<Vec<f64>> {
    basis.check_len(v)?;
    if basis.is_identity() {
        return Ok(v.to_vec());
    }
    let coeffs = basis.factor.coefficients(v);
    let mut out = vec![0.0; v.len()];
    for (k, c) in coeffs.iter().enumerate() {
        for (o, q) in out.iter_mut().zip(basis.factor.column(k)) {
            *o += c * q;
        }
    }
    Ok(out)
}

/// Residual sum of squares `||v - P v||^2`.
pub fn rss(basis: &PolyBasis, v: &[f64]) -> Result<f64> {
    if basis.is_identity() {
        basis.check_len(v)?;
        return Ok(0.0);
    }
    let p = project(basis, v)?;
    Ok(v.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum())
}

/// Diagonal entry of the projection at member index `i`.
pub fn leverage(basis: &PolyBasis, i: usize) -> Result<f64> {
    let j = basis
        .index_set
        .position(i)
        .ok_or_else(|| LaserError::domain(format!("index {i} is not in the index set")))?;
    if basis.is_identity() {
        return Ok(1.0);
    }
    Ok((0..basis.factor.dim)
        .map(|k| basis.factor.value(j, k).powi(2))
        .sum())
}

/// Evaluates the least-squares polynomial fitted to `v` at abscissa `x`.
pub fn eval_fit_at(basis: &PolyBasis, v: &[f64], x: f64) -> Result<FitValue> {
    basis.check_len(v)?;
    let coeffs = basis.factor.coefficients(v);
    let phi = basis.factor.basis_at(x);
    let value = coeffs.iter().zip(&phi).map(|(c, p)| c * p).sum();
    let (lo, hi) = (basis.abscissae[0], *basis.abscissae.last().unwrap());
    Ok(FitValue {
        value,
        extrapolated: x < lo || x > hi,
    })
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
