//! Matrix-free operators on `C^n ⊗ C^n` and stochastic trace estimation.
//!
//! Vectors are row-major vectorized `n × n` matrices, so each Kronecker term
//! acts through `(A ⊗ B)·vec(X) = vec(A·X·Bᵀ)` in `O(n³)` instead of `O(n⁴)`.

use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::{accumulate_kron, check_dense_dim, ComplexMatrix, HermitianMatrix};
use crate::error::{Error, Result};
use crate::rng::Seed;

/// One `coeff · (left ⊗ right)` term.
#[derive(Clone, Debug)]
pub struct KronTerm {
    pub coeff: f64,
    pub left: ComplexMatrix,
    pub right: ComplexMatrix,
}

/// Unitarily covariant superoperator
/// `X ↦ identity·X + trace·tr(X)·Id + transpose·Xᵀ + diagonal·diag(X)`.
///
/// On vectorized matrices the four pieces are `Id`, `n·ψψ*`, the flip `F` and
/// `diag(F)`, with `ψ = Σ_k e_k ⊗ e_k / √n`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StructuredShift {
    pub identity: f64,
    pub trace: f64,
    pub transpose: f64,
    pub diagonal: f64,
}

impl StructuredShift {
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            identity: self.identity * c,
            trace: self.trace * c,
            transpose: self.transpose * c,
            diagonal: self.diagonal * c,
        }
    }

    /// Applies the map to `X`.
    pub fn apply_matrix(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let n = x.rows();
        let tr: C64 = (0..n).map(|i| x[(i, i)]).sum();
        ComplexMatrix::from_fn(n, n, |i, j| {
            let mut v = x[(i, j)] * self.identity + x[(j, i)] * self.transpose;
            if i == j {
                v += tr * self.trace + x[(i, i)] * self.diagonal;
            }
            v
        })
    }

    pub fn to_dense(&self, n: usize) -> Result<HermitianMatrix> {
        check_dense_dim(n * n)?;
        let mut m = ComplexMatrix::zeros(n * n, n * n);
        self.add_to_dense(&mut m, 1.0);
        Ok(HermitianMatrix::from_base_unchecked(m))
    }

    /// `m += c · self` for a dense `n² × n²` matrix `m`.
    pub(crate) fn add_to_dense(&self, m: &mut ComplexMatrix, c: f64) {
        let n = (m.rows() as f64).sqrt().round() as usize;
        for i in 0..n {
            for j in 0..n {
                let row = i * n + j;
                m[(row, row)] += c * self.identity;
                m[(row, j * n + i)] += c * self.transpose;
            }
            m[(i * n + i, i * n + i)] += c * self.diagonal;
            for k in 0..n {
                m[(i * n + i, k * n + k)] += c * self.trace;
            }
        }
    }
}

#[derive(Clone, Debug)]
pub enum Shift {
    Dense(HermitianMatrix),
    Structured(StructuredShift),
}

/// `Σ coeff·(left ⊗ right) + shift` on vectors of length `n²`.
#[derive(Clone, Debug)]
pub struct MatFreeOperator {
    n: usize,
    terms: Vec<KronTerm>,
    shift: Option<Shift>,
}

impl MatFreeOperator {
    pub fn new(n: usize, terms: Vec<KronTerm>, shift: Option<Shift>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("operator side length must be positive".into()));
        }
        for (idx, t) in terms.iter().enumerate() {
            for m in [&t.left, &t.right] {
                if m.rows() != n || m.cols() != n {
                    return Err(Error::DimensionMismatch(format!(
                        "term {idx} has a {}x{} factor, expected {n}x{n}",
                        m.rows(),
                        m.cols()
                    )));
                }
            }
        }
        if let Some(Shift::Dense(s)) = &shift {
            if s.dim() != n * n {
                return Err(Error::DimensionMismatch(format!(
                    "dense shift has dimension {}, expected {}",
                    s.dim(),
                    n * n
                )));
            }
        }
        Ok(Self { n, terms, shift })
    }

    pub fn identity(n: usize) -> Self {
        let id = ComplexMatrix::identity(n);
        Self { n, terms: vec![KronTerm { coeff: 1.0, left: id.clone(), right: id }], shift: None }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.n * self.n
    }

    pub fn terms(&self) -> &[KronTerm] {
        &self.terms
    }

    pub fn shift(&self) -> Option<&Shift> {
        self.shift.as_ref()
    }

    pub fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        let n = self.n;
        if v.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} for an operator on C^{n} ⊗ C^{n}",
                v.len()
            )));
        }
        let x = ComplexMatrix::unvectorize(n, v)?;
        let mut out = ComplexMatrix::zeros(n, n);
        for t in &self.terms {
            // A·X·Bᵀ
            let ax = t.left.matmul(&x)?;
            let axbt = ax.matmul(&t.right.transpose())?;
            out.add_scaled(t.coeff, &axbt)?;
        }
        let mut out = out.into_vec();
        match &self.shift {
            None => {}
            Some(Shift::Dense(s)) => {
                for (o, sv) in out.iter_mut().zip(s.as_matrix().matvec(v)?) {
                    *o += sv;
                }
            }
            Some(Shift::Structured(s)) => {
                for (o, sv) in out.iter_mut().zip(s.apply_matrix(&x).into_vec()) {
                    *o += sv;
                }
            }
        }
        Ok(out)
    }

    /// Dense `n² × n²` form, subject to the dense-size guard.
    pub fn to_dense(&self) -> Result<ComplexMatrix> {
        let dim = self.dim();
        check_dense_dim(dim)?;
        let mut m = ComplexMatrix::zeros(dim, dim);
        for t in &self.terms {
            accumulate_kron(&mut m, t.coeff, &t.left, &t.right);
        }
        match &self.shift {
            None => {}
            Some(Shift::Dense(s)) => m.add_scaled(1.0, s.as_matrix())?,
            Some(Shift::Structured(s)) => s.add_to_dense(&mut m, 1.0),
        }
        Ok(m)
    }
}

/// Mean and standard error of a Monte Carlo estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let k = xs.len();
        let mean = xs.iter().sum::<f64>() / k as f64;
        let std_err = if k > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
            (var / k as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std_err, samples: k }
    }
}

fn sign_probe(dim: usize, rng: &mut impl Rng) -> Vec<C64> {
    (0..dim)
        .map(|_| C64::new(if rng.random::<bool>() { 1.0 } else { -1.0 }, 0.0))
        .collect()
}

fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Estimates `τ(op^p) = tr(op^p)/n²` for `p = 1..=p_max` from `probes`
/// Rademacher sign vectors shared across orders.
///
/// Per probe, `z*·op^p·z = ⟨op^a z, op^b z⟩` with `a + b = p`, so only
/// `⌈p_max/2⌉` applications are needed; this relies on `op` being Hermitian.
pub fn hutchinson_moments(op: &MatFreeOperator, p_max: usize, probes: usize, seed: Seed) -> Result<Vec<Estimate>> {
    if p_max == 0 || probes == 0 {
        return Err(Error::InvalidParameter("p_max and probes must be positive".into()));
    }
    let dim = op.dim();
    let half = p_max.div_ceil(2);
    let mut rng = seed.rng();
    let mut samples = vec![Vec::with_capacity(probes); p_max];
    for _ in 0..probes {
        let mut powers = Vec::with_capacity(half + 1);
        powers.push(sign_probe(dim, &mut rng));
        for k in 0..half {
            let next = op.apply(&powers[k])?;
            powers.push(next);
        }
        for p in 1..=p_max {
            let a = p / 2;
            let b = p - a;
            samples[p - 1].push(inner(&powers[a], &powers[b]).re / dim as f64);
        }
    }
    Ok(samples.iter().map(|s| Estimate::from_samples(s)).collect())
}

/// Single-order version of [`hutchinson_moments`].
pub fn hutchinson_normalized_trace_power(op: &MatFreeOperator, p: usize, probes: usize, seed: Seed) -> Result<Estimate> {
    if p == 0 {
        return Err(Error::InvalidParameter("power must be at least 1".into()));
    }
    let all = hutchinson_moments(op, p, probes, seed)?;
    Ok(all[p - 1])
}
