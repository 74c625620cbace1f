//! Dense linear algebra in an emulated precision.
//!
//! Every multiply, add and divide inside `matvec`, `residual`, `lu_factor`
//! and the triangular solves is rounded to the requested format. Sums are
//! accumulated left to right. Norms and the condition estimate run at full
//! double precision.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fpemu::{quantize_matrix, Arith, Format};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            entries: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    /// Builds a matrix from row-major entries, rejecting wrong lengths and
    /// non-finite values.
    pub fn from_row_major(n_rows: usize, n_cols: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n_rows * n_cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {n_rows}x{n_cols} matrix",
                entries.len()
            )));
        }
        if let Some(pos) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::Dimension(format!(
                "non-finite entry at ({}, {})",
                pos / n_cols.max(1),
                pos % n_cols.max(1)
            )));
        }
        Ok(Self {
            n_rows,
            n_cols,
            entries,
        })
    }

    /// Panics on ragged input; intended for literals and tests.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == n_cols), "ragged rows");
        Self {
            n_rows,
            n_cols,
            entries: rows.concat(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n_cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.entries[i * self.n_cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            entries: self.entries.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n_cols, self.n_rows);
        for i in 0..self.n_rows {
            for j in 0..self.n_cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|v| v.is_finite())
    }

    pub fn nnz(&self) -> usize {
        self.entries.iter().filter(|&&v| v != 0.0).count()
    }

    /// Unrounded double-precision product.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub(crate) fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.n_rows, self.n_cols, &self.entries)
    }

    pub(crate) fn from_nalgebra(m: &nalgebra::DMatrix<f64>) -> Self {
        let mut out = Self::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out.set(i, j, m[(i, j)]);
            }
        }
        out
    }
}

/// Why an emulated LU factorization could not be used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorFailureReason {
    ZeroPivot,
    Overflow,
    Nan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FactorFailure {
    pub reason: FactorFailureReason,
    /// Elimination step at which the failure was detected.
    pub step: usize,
}

impl fmt::Display for FactorFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.reason {
            FactorFailureReason::ZeroPivot => "zero pivot",
            FactorFailureReason::Overflow => "overflow",
            FactorFailureReason::Nan => "NaN",
        };
        write!(f, "{what} at elimination step {}", self.step)
    }
}

impl std::error::Error for FactorFailure {}

/// Packed `PA = LU` factors: unit lower `L` below the diagonal, `U` on and
/// above it. Row `i` of `PA` is row `pivot[i]` of `A`.
#[derive(Debug, Clone)]
pub struct LuFactors {
    lu: DenseMatrix,
    pivot: Vec<usize>,
    format: Format,
}

impl LuFactors {
    pub fn n(&self) -> usize {
        self.lu.n_rows()
    }

    pub fn packed(&self) -> &DenseMatrix {
        &self.lu
    }

    pub fn pivot(&self) -> &[usize] {
        &self.pivot
    }

    pub fn format(&self) -> Format {
        self.format
    }
}

fn check_dims(a: &DenseMatrix, len: usize, what: &str) {
    assert_eq!(a.n_cols(), len, "{what}: dimension mismatch");
}

/// `y = A x` with every product and partial sum rounded to `fmt`.
pub fn matvec(a: &DenseMatrix, x: &[f64], fmt: impl Into<Arith>) -> Vec<f64> {
    let ar = fmt.into();
    check_dims(a, x.len(), "matvec");
    (0..a.n_rows())
        .map(|i| {
            a.row(i)
                .iter()
                .zip(x)
                .fold(0.0, |acc, (&aij, &xj)| ar.add(acc, ar.mul(aij, xj)))
        })
        .collect()
}

/// `r = b - A x` in `fmt`: the rounded product followed by one rounded subtraction.
pub fn residual(a: &DenseMatrix, b: &[f64], x: &[f64], fmt: impl Into<Arith>) -> Vec<f64> {
    let ar = fmt.into();
    matvec(a, x, ar)
        .into_iter()
        .zip(b)
        .map(|(ax, &bi)| ar.sub(bi, ax))
        .collect()
}

/// LU with partial pivoting; `A` is quantized to `fmt` on entry and every
/// elimination operation is rounded to `fmt`.
pub fn lu_factor(a: &DenseMatrix, fmt: impl Into<Arith>) -> Result<LuFactors, FactorFailure> {
    let ar = fmt.into();
    assert!(a.is_square(), "lu_factor needs a square matrix");
    let n = a.n_rows();
    let mut lu = quantize_matrix(a, ar);
    if let Some(pos) = lu.entries.iter().position(|v| !v.is_finite()) {
        let reason = if lu.entries[pos].is_nan() {
            FactorFailureReason::Nan
        } else {
            FactorFailureReason::Overflow
        };
        return Err(FactorFailure { reason, step: 0 });
    }
    let mut pivot: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let mut p = k;
        let mut best = lu.get(k, k).abs();
        for i in k + 1..n {
            let v = lu.get(i, k).abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best == 0.0 {
            return Err(FactorFailure {
                reason: FactorFailureReason::ZeroPivot,
                step: k,
            });
        }
        if p != k {
            for j in 0..n {
                lu.entries.swap(k * n + j, p * n + j);
            }
            pivot.swap(k, p);
        }
        let piv = lu.get(k, k);
        let (head, tail) = lu.entries.split_at_mut((k + 1) * n);
        let pivot_row = &head[k * n..];
        for row in tail.chunks_exact_mut(n) {
            let l = ar.div(row[k], piv);
            row[k] = l;
            if l == 0.0 {
                continue;
            }
            if !l.is_finite() {
                return Err(classify(l, k));
            }
            for j in k + 1..n {
                let v = ar.sub(row[j], ar.mul(l, pivot_row[j]));
                if !v.is_finite() {
                    return Err(classify(v, k));
                }
                row[j] = v;
            }
        }
    }
    Ok(LuFactors {
        lu,
        pivot,
        format: ar.format,
    })
}

fn classify(v: f64, step: usize) -> FactorFailure {
    let reason = if v.is_nan() {
        FactorFailureReason::Nan
    } else {
        FactorFailureReason::Overflow
    };
    FactorFailure { reason, step }
}

/// Solves `A x = b` from the packed factors, rounding every operation to `fmt`.
pub fn lu_solve(f: &LuFactors, b: &[f64], fmt: impl Into<Arith>) -> Vec<f64> {
    let ar = fmt.into();
    let n = f.n();
    assert_eq!(b.len(), n, "lu_solve: dimension mismatch");
    let lu = &f.lu;
    let mut y: Vec<f64> = f.pivot.iter().map(|&p| ar.round(b[p])).collect();
    for i in 0..n {
        let row = lu.row(i);
        let mut acc = y[i];
        for j in 0..i {
            acc = ar.sub(acc, ar.mul(row[j], y[j]));
        }
        y[i] = acc;
    }
    for i in (0..n).rev() {
        let row = lu.row(i);
        let mut acc = y[i];
        for j in i + 1..n {
            acc = ar.sub(acc, ar.mul(row[j], y[j]));
        }
        y[i] = ar.div(acc, row[i]);
    }
    y
}

/// Solves `A^T y = c` from the same factors (`A^T = U^T L^T P`).
pub fn lu_solve_transpose(f: &LuFactors, c: &[f64], fmt: impl Into<Arith>) -> Vec<f64> {
    let ar = fmt.into();
    let n = f.n();
    assert_eq!(c.len(), n, "lu_solve_transpose: dimension mismatch");
    let lu = &f.lu;
    let mut w: Vec<f64> = c.iter().map(|&v| ar.round(v)).collect();
    for i in 0..n {
        let mut acc = w[i];
        for j in 0..i {
            acc = ar.sub(acc, ar.mul(lu.get(j, i), w[j]));
        }
        w[i] = ar.div(acc, lu.get(i, i));
    }
    for i in (0..n).rev() {
        let mut acc = w[i];
        for j in i + 1..n {
            acc = ar.sub(acc, ar.mul(lu.get(j, i), w[j]));
        }
        w[i] = acc;
    }
    let mut y = vec![0.0; n];
    for (i, &p) in f.pivot.iter().enumerate() {
        y[p] = w[i];
    }
    y
}

/// Maximum absolute row sum.
pub fn norm_inf(a: &DenseMatrix) -> f64 {
    (0..a.n_rows())
        .map(|i| a.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Maximum absolute column sum.
pub fn norm_1(a: &DenseMatrix) -> f64 {
    let mut sums = vec![0.0; a.n_cols()];
    for i in 0..a.n_rows() {
        for (s, v) in sums.iter_mut().zip(a.row(i)) {
            *s += v.abs();
        }
    }
    sums.into_iter().fold(0.0, f64::max)
}

pub fn norm_inf_vec(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

pub fn norm_1_vec(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

const CONDEST_MAX_ITER: usize = 5;

/// Hager–Higham lower-bound estimate of `kappa_1(A) = ||A||_1 ||A^-1||_1`.
///
/// Returns `+inf` when the double-precision factorization fails.
pub fn condest_1(a: &DenseMatrix) -> f64 {
    match lu_factor(a, Format::Fp64) {
        Ok(f) => norm_1(a) * inverse_norm1_estimate(&f),
        Err(_) => f64::INFINITY,
    }
}

/// Estimate of `||A^-1||_1` from double-precision factors of `A`.
pub fn inverse_norm1_estimate(f: &LuFactors) -> f64 {
    let n = f.n();
    if n == 0 {
        return 0.0;
    }
    let solve = |v: &[f64]| lu_solve(f, v, Format::Fp64);
    let solve_t = |v: &[f64]| lu_solve_transpose(f, v, Format::Fp64);

    let mut x = vec![1.0 / n as f64; n];
    let mut est = 0.0;
    let mut prev_sign: Option<Vec<f64>> = None;
    for k in 0..CONDEST_MAX_ITER {
        let y = solve(&x);
        if y.iter().any(|v| !v.is_finite()) {
            return f64::INFINITY;
        }
        let y_norm = norm_1_vec(&y);
        if k > 0 && y_norm <= est {
            break;
        }
        est = y_norm;
        let sign: Vec<f64> = y.iter().map(|&v| if v >= 0.0 { 1.0 } else { -1.0 }).collect();
        if prev_sign.as_deref() == Some(sign.as_slice()) {
            break;
        }
        let z = solve_t(&sign);
        let (j, z_max) = z
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bj, bv), (i, &v)| {
                if v.abs() > bv {
                    (i, v.abs())
                } else {
                    (bj, bv)
                }
            });
        let zx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
        if k > 0 && z_max <= zx {
            break;
        }
        x = vec![0.0; n];
        x[j] = 1.0;
        prev_sign = Some(sign);
    }

    // Higham's alternating-sign test vector, ||x||_1 = 3n/2.
    if n > 1 {
        let alt: Vec<f64> = (0..n)
            .map(|i| {
                let mag = 1.0 + i as f64 / (n - 1) as f64;
                if i % 2 == 0 {
                    mag
                } else {
                    -mag
                }
            })
            .collect();
        let y = solve(&alt);
        if y.iter().all(|v| v.is_finite()) {
            est = est.max(2.0 * norm_1_vec(&y) / (3.0 * n as f64));
        }
    }
    est
}

/// Exact 2-norm condition number from the singular values.
pub fn cond_2_exact(a: &DenseMatrix) -> f64 {
    let sv = a.to_nalgebra().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}
