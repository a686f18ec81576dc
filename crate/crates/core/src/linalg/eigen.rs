//! Dense Hermitian eigenvalues.
//!
//! The decompositions themselves are delegated to faer (Householder
//! tridiagonalization followed by an implicit QR sweep). This module adds the
//! crate's contract around them: ascending order, and a trace / trace-of-square
//! check on every result.
//!
//! Channel-like operators on `C^n ⊗ C^n` get a faster route. If `h` commutes
//! with the antiunitary `J: vec(X) ↦ vec(X*)` (equivalently, the map
//! `X ↦ unvec(h·vec(X))` sends Hermitian matrices to Hermitian matrices), then
//! in the orthonormal basis of Hermitian matrix units
//!
//! ```text
//! E_kk,   (E_kl + E_lk)/√2,   i(E_kl − E_lk)/√2     (k < l)
//! ```
//!
//! `h` is a real symmetric matrix with the same spectrum. When `h` is real as
//! well, that matrix is block diagonal (symmetric vs antisymmetric units) and
//! the two blocks are solved separately.

use faer::{Mat, Side};
use num_complex::Complex64 as C64;

use super::matrix::{ComplexMatrix, HermitianMatrix, HERMITIAN_TOLERANCE};
use crate::error::{Error, Result};

/// Real eigenvalues in nondecreasing order.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    values: Vec<f64>,
}

impl Spectrum {
    /// Sorts `values` ascending. Panics on NaN.
    pub fn new(mut values: Vec<f64>) -> Self {
        values.sort_by(|a, b| a.partial_cmp(b).expect("NaN eigenvalue"));
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

pub fn hermitian_eigenvalues(h: &HermitianMatrix) -> Result<Spectrum> {
    let dim = h.dim();
    let m = h.as_matrix();
    let mat = Mat::<C64>::from_fn(dim, dim, |i, j| if i >= j { m[(i, j)] } else { C64::new(0.0, 0.0) });
    let values = mat
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| Error::EigenNoConvergence { dim })?;
    let spectrum = Spectrum::new(values);
    check_spectrum(m, &spectrum)?;
    Ok(spectrum)
}

/// Eigenvalues of a real symmetric matrix given by its lower triangle.
pub(crate) fn real_symmetric_eigenvalues(lower: Mat<f64>) -> Result<Vec<f64>> {
    let dim = lower.nrows();
    if dim == 0 {
        return Ok(Vec::new());
    }
    lower
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| Error::EigenNoConvergence { dim })
}

fn check_spectrum(m: &ComplexMatrix, spectrum: &Spectrum) -> Result<()> {
    let dim = m.rows();
    let trace: f64 = (0..dim).map(|i| m[(i, i)].re).sum();
    let sum: f64 = spectrum.values.iter().sum();
    let scale = m.max_abs().max(1.0);
    if (sum - trace).abs() > 1e-8 * dim as f64 * scale {
        return Err(Error::EigenCheck {
            dim,
            detail: format!("eigenvalue sum {sum} vs trace {trace}"),
        });
    }
    let frob = m.frobenius_norm_sqr();
    let sum_sq: f64 = spectrum.values.iter().map(|v| v * v).sum();
    if (sum_sq - frob).abs() > 1e-8 * frob.max(f64::MIN_POSITIVE) {
        return Err(Error::EigenCheck {
            dim,
            detail: format!("sum of squared eigenvalues {sum_sq} vs tr(h^2) {frob}"),
        });
    }
    Ok(())
}

/// Side length `n` with `n² = dim`, if any.
fn exact_sqrt(dim: usize) -> Option<usize> {
    let n = (dim as f64).sqrt().round() as usize;
    (n * n == dim).then_some(n)
}

/// `max |h[(i,j),(k,l)] − conj(h[(j,i),(l,k)])|`: how far `h` is from
/// commuting with `vec(X) ↦ vec(X*)`.
pub fn hermiticity_preservation_defect(h: &ComplexMatrix) -> Option<f64> {
    if !h.is_square() {
        return None;
    }
    let n = exact_sqrt(h.rows())?;
    let mut defect: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let row = i * n + j;
            let row_t = j * n + i;
            for k in 0..n {
                for l in 0..n {
                    let a = h[(row, k * n + l)];
                    let b = h[(row_t, l * n + k)].conj();
                    defect = defect.max((a - b).norm());
                }
            }
        }
    }
    Some(defect)
}

/// Support of one Hermitian matrix unit, as (vec index, coefficient) pairs.
#[derive(Clone, Copy)]
struct Unit {
    entries: [(usize, C64); 2],
    len: usize,
}

impl Unit {
    fn iter(&self) -> impl Iterator<Item = (usize, C64)> + '_ {
        self.entries[..self.len].iter().copied()
    }
}

/// Symmetric units first (diagonal then pairs), antisymmetric units after.
fn hermitian_units(n: usize) -> (Vec<Unit>, usize) {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let zero = (0, C64::new(0.0, 0.0));
    let mut units = Vec::with_capacity(n * n);
    for k in 0..n {
        units.push(Unit { entries: [(k * n + k, C64::new(1.0, 0.0)), zero], len: 1 });
    }
    for k in 0..n {
        for l in k + 1..n {
            units.push(Unit {
                entries: [(k * n + l, C64::new(r, 0.0)), (l * n + k, C64::new(r, 0.0))],
                len: 2,
            });
        }
    }
    let n_sym = units.len();
    for k in 0..n {
        for l in k + 1..n {
            units.push(Unit {
                entries: [(k * n + l, C64::new(0.0, r)), (l * n + k, C64::new(0.0, -r))],
                len: 2,
            });
        }
    }
    (units, n_sym)
}

fn real_form_entry(h: &ComplexMatrix, a: &Unit, b: &Unit) -> f64 {
    let mut acc = C64::new(0.0, 0.0);
    for (p, cp) in a.iter() {
        let row = h.row(p);
        for (q, cq) in b.iter() {
            acc += cp.conj() * row[q] * cq;
        }
    }
    acc.re
}

/// Eigenvalues of a Hermitian `h` on `C^n ⊗ C^n` that commutes with
/// `vec(X) ↦ vec(X*)`, computed through its real symmetric form.
///
/// Errors with [`Error::InvalidParameter`] when `h` does not have that
/// symmetry (within the Hermiticity tolerance); callers can then fall back to
/// [`hermitian_eigenvalues`].
pub fn hermiticity_preserving_eigenvalues(h: &HermitianMatrix) -> Result<Spectrum> {
    let m = h.as_matrix();
    let n = exact_sqrt(h.dim()).ok_or_else(|| {
        Error::InvalidParameter(format!("dimension {} is not a perfect square", h.dim()))
    })?;
    let defect = hermiticity_preservation_defect(m).unwrap_or(f64::INFINITY);
    let tolerance = HERMITIAN_TOLERANCE * m.max_abs().max(1.0);
    if defect > tolerance {
        return Err(Error::InvalidParameter(format!(
            "operator does not preserve Hermiticity (defect {defect:.3e})"
        )));
    }

    let (units, n_sym) = hermitian_units(n);
    let n_anti = units.len() - n_sym;

    let mut coupling: f64 = 0.0;
    for a in &units[n_sym..] {
        for b in &units[..n_sym] {
            coupling = coupling.max(real_form_entry(m, a, b).abs());
        }
    }

    let build_block = |offset: usize, size: usize| {
        Mat::<f64>::from_fn(size, size, |i, j| {
            if i >= j {
                real_form_entry(m, &units[offset + i], &units[offset + j])
            } else {
                0.0
            }
        })
    };

    let values = if coupling <= 1e-14 * m.max_abs() {
        let mut values = real_symmetric_eigenvalues(build_block(0, n_sym))?;
        values.extend(real_symmetric_eigenvalues(build_block(n_sym, n_anti))?);
        values
    } else {
        real_symmetric_eigenvalues(build_block(0, n * n))?
    };
    let spectrum = Spectrum::new(values);
    check_spectrum(m, &spectrum)?;
    Ok(spectrum)
}
