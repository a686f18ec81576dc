use std::ops::{Index, IndexMut};
use std::sync::OnceLock;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Default cap on the side length of a dense matrix (8192² complex doubles is
/// 1 GiB).
pub const DEFAULT_MAX_DENSE_DIM: usize = 8192;

/// Environment variable overriding [`DEFAULT_MAX_DENSE_DIM`].
pub const MAX_DENSE_DIM_ENV: &str = "SPECTRA_MAX_DENSE_DIM";

/// Largest side length any dense construction in this crate may allocate.
///
/// Read once from `SPECTRA_MAX_DENSE_DIM`; unparsable values fall back to the
/// default.
pub fn max_dense_dim() -> usize {
    static LIMIT: OnceLock<usize> = OnceLock::new();
    *LIMIT.get_or_init(|| {
        std::env::var(MAX_DENSE_DIM_ENV)
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .filter(|&v: &usize| v > 0)
            .unwrap_or(DEFAULT_MAX_DENSE_DIM)
    })
}

pub(crate) fn check_dense_dim(dim: usize) -> Result<()> {
    let limit = max_dense_dim();
    if dim > limit {
        return Err(Error::DenseLimit { requested: dim, limit });
    }
    Ok(())
}

/// Dense complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter("matrix dimensions must be positive".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|z| !z.is_finite()) {
            return Err(Error::NonFinite { row: pos / cols, col: pos % cols });
        }
        Ok(Self { rows, cols, data })
    }

    pub(crate) fn from_vec_unchecked(rows: usize, cols: usize, data: Vec<C64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(v, 0.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Entry-wise complex conjugate (not the adjoint).
    pub fn entrywise_conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    /// Maximum entry magnitude of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).fold(0.0, |acc, (a, b)| acc.max((a - b).norm()))
    }

    pub fn frobenius_norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn trace(&self) -> Result<C64> {
        if !self.is_square() {
            return Err(Error::NotSquare { rows: self.rows, cols: self.cols });
        }
        Ok((0..self.rows).map(|i| self[(i, i)]).sum())
    }

    /// `(1/dim) · tr(self)`.
    pub fn normalized_trace(&self) -> Result<C64> {
        Ok(self.trace()? / self.rows as f64)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * c).collect() }
    }

    pub fn scale_complex(&self, c: C64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * c).collect() }
    }

    /// `self += c · other`.
    pub fn add_scaled(&mut self, c: f64, other: &Self) -> Result<()> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::DimensionMismatch(format!(
                "cannot add {}x{} to {}x{}",
                other.rows, other.cols, self.rows, self.cols
            )));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * c;
        }
        Ok(())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.add_scaled(-1.0, other)?;
        Ok(out)
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} for a {}x{} matrix",
                v.len(),
                self.rows,
                self.cols
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Row-major vectorization: `vec(X)[i·cols + j] = X[i, j]`.
    pub fn vectorize(&self) -> Vec<C64> {
        self.data.clone()
    }

    pub fn unvectorize(n: usize, v: &[C64]) -> Result<Self> {
        if v.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} is not an {n}x{n} matrix",
                v.len()
            )));
        }
        Ok(Self::from_vec_unchecked(n, n, v.to_vec()))
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Kronecker product `a ⊗ b`, with
/// `result[i·b.rows + k, j·b.cols + l] = a[i, j] · b[k, l]`.
///
/// Fails when either side of the result would exceed [`max_dense_dim`].
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let rows = a.rows.checked_mul(b.rows).ok_or(Error::DenseLimit {
        requested: usize::MAX,
        limit: max_dense_dim(),
    })?;
    let cols = a.cols.checked_mul(b.cols).ok_or(Error::DenseLimit {
        requested: usize::MAX,
        limit: max_dense_dim(),
    })?;
    check_dense_dim(rows.max(cols))?;
    let mut out = ComplexMatrix::zeros(rows, cols);
    accumulate_kron(&mut out, 1.0, a, b);
    Ok(out)
}

/// `out += coeff · (a ⊗ b)`; `out` must already have the product's shape.
pub(crate) fn accumulate_kron(out: &mut ComplexMatrix, coeff: f64, a: &ComplexMatrix, b: &ComplexMatrix) {
    debug_assert_eq!(out.rows, a.rows * b.rows);
    debug_assert_eq!(out.cols, a.cols * b.cols);
    let (br, bc) = (b.rows, b.cols);
    let out_cols = out.cols;
    for i in 0..a.rows {
        for k in 0..br {
            let row = i * br + k;
            let out_row = &mut out.data[row * out_cols..(row + 1) * out_cols];
            let b_row = b.row(k);
            for j in 0..a.cols {
                let s = a[(i, j)] * coeff;
                if s == C64::new(0.0, 0.0) {
                    continue;
                }
                for (o, &bv) in out_row[j * bc..(j + 1) * bc].iter_mut().zip(b_row) {
                    *o += s * bv;
                }
            }
        }
    }
}

/// Relative Hermiticity tolerance: `max|A − A*| ≤ 1e-10 · max(1, max|A|)`.
pub const HERMITIAN_TOLERANCE: f64 = 1e-10;

/// Square matrix equal to its adjoint within [`HERMITIAN_TOLERANCE`].
///
/// Inputs outside the tolerance are rejected, never symmetrized.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix {
    base: ComplexMatrix,
}

impl HermitianMatrix {
    pub fn new(base: ComplexMatrix) -> Result<Self> {
        if !base.is_square() {
            return Err(Error::NotSquare { rows: base.rows, cols: base.cols });
        }
        let defect = hermiticity_defect(&base);
        let tolerance = HERMITIAN_TOLERANCE * base.max_abs().max(1.0);
        if defect > tolerance {
            return Err(Error::NotHermitian { defect, tolerance });
        }
        Ok(Self { base })
    }

    /// `(A + A*) / 2`, for callers that average noisy Hermitian estimates.
    pub fn hermitian_part(a: &ComplexMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::NotSquare { rows: a.rows, cols: a.cols });
        }
        let n = a.rows;
        let base = ComplexMatrix::from_fn(n, n, |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5);
        Ok(Self { base })
    }

    pub(crate) fn from_base_unchecked(base: ComplexMatrix) -> Self {
        debug_assert!(base.is_square());
        Self { base }
    }

    pub fn identity(n: usize) -> Self {
        Self { base: ComplexMatrix::identity(n) }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        Self { base: ComplexMatrix::from_real_diagonal(diag) }
    }

    pub fn dim(&self) -> usize {
        self.base.rows
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.base
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.base
    }

    pub fn normalized_trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.base[(i, i)].re).sum::<f64>() / self.dim() as f64
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { base: self.base.scale(c) }
    }
}

impl Index<(usize, usize)> for HermitianMatrix {
    type Output = C64;

    fn index(&self, idx: (usize, usize)) -> &C64 {
        &self.base[idx]
    }
}

impl TryFrom<ComplexMatrix> for HermitianMatrix {
    type Error = Error;

    fn try_from(m: ComplexMatrix) -> Result<Self> {
        Self::new(m)
    }
}

/// `max |A − A*|` over entries.
pub fn hermiticity_defect(a: &ComplexMatrix) -> f64 {
    let n = a.rows.min(a.cols);
    let mut defect: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            defect = defect.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    defect
}
