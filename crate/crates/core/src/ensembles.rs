//! Seeded random-matrix ensembles for Kraus operators.
//!
//! All Hermitian samplers are normalized so that `E τ(W) = 0` and
//! `E τ(W²) = 1`, where `τ` is the normalized trace.

use faer::Mat;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, HermitianMatrix};
use crate::rng::Seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EnsembleKind {
    /// `U·diag(ε)·U*` with i.i.d. uniform signs `ε` and Haar `U`.
    RotatedRademacher,
    /// Wigner matrix with real Gaussian entries of variance `1/n`.
    Gue,
    /// Wigner matrix with complex Gaussian off-diagonal entries of variance `1/n`.
    ComplexGue,
    /// `X·X* − Id` with `X` Ginibre.
    WishartCentered,
    /// `U·diag(spectrum)·U*` with Haar `U`.
    RotatedDeterministic { spectrum: Vec<f64> },
    /// Non-Hermitian; usable for Haar construction and tests, not as a Kraus ensemble.
    Ginibre,
}

impl EnsembleKind {
    pub fn label(&self) -> &'static str {
        match self {
            Self::RotatedRademacher => "rotated-rademacher",
            Self::Gue => "gue",
            Self::ComplexGue => "complex-gue",
            Self::WishartCentered => "wishart-centered",
            Self::RotatedDeterministic { .. } => "rotated-deterministic",
            Self::Ginibre => "ginibre",
        }
    }

    pub fn is_hermitian(&self) -> bool {
        !matches!(self, Self::Ginibre)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    #[serde(flatten)]
    pub kind: EnsembleKind,
    pub n: usize,
}

impl EnsembleSpec {
    pub fn new(kind: EnsembleKind, n: usize) -> Result<Self> {
        let spec = Self { kind, n };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("ensemble dimension must be at least 1".into()));
        }
        if let EnsembleKind::RotatedDeterministic { spectrum } = &self.kind {
            if spectrum.len() != self.n {
                return Err(Error::InvalidParameter(format!(
                    "spectrum has {} values for dimension {}",
                    spectrum.len(),
                    self.n
                )));
            }
            if spectrum.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter("spectrum contains non-finite values".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub enum SampleMatrix {
    Hermitian(HermitianMatrix),
    General(ComplexMatrix),
}

#[derive(Clone, Debug)]
pub struct MatrixSample {
    pub matrix: SampleMatrix,
    pub spec: EnsembleSpec,
    pub seed: Seed,
}

fn check_dim(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::InvalidParameter("dimension must be at least 1".into()))
    } else {
        Ok(())
    }
}

fn gaussian(rng: &mut impl Rng, sd: f64) -> f64 {
    sd * rng.sample::<f64, _>(StandardNormal)
}

fn ginibre_from(n: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let sd = (0.5 / n as f64).sqrt();
    let data = (0..n * n).map(|_| C64::new(gaussian(rng, sd), gaussian(rng, sd))).collect();
    ComplexMatrix::from_vec_unchecked(n, n, data)
}

/// Makes a matrix exactly Hermitian by mirroring its upper triangle.
fn mirror_upper(mut m: ComplexMatrix) -> HermitianMatrix {
    let n = m.rows();
    for i in 0..n {
        m[(i, i)] = C64::new(m[(i, i)].re, 0.0);
        for j in i + 1..n {
            m[(j, i)] = m[(i, j)].conj();
        }
    }
    HermitianMatrix::from_base_unchecked(m)
}

/// `U·diag(values)·U*`.
fn rotate_diagonal(u: &ComplexMatrix, values: &[f64]) -> Result<HermitianMatrix> {
    let n = u.rows();
    let ud = ComplexMatrix::from_fn(n, n, |i, k| u[(i, k)] * values[k]);
    Ok(mirror_upper(ud.matmul(&u.adjoint())?))
}

/// Complex Ginibre matrix: i.i.d. entries with `E z = 0`, `E|z|² = 1/n`.
pub fn sample_ginibre(n: usize, seed: Seed) -> Result<ComplexMatrix> {
    check_dim(n)?;
    Ok(ginibre_from(n, &mut seed.rng()))
}

fn haar_from(n: usize, rng: &mut impl Rng) -> Result<ComplexMatrix> {
    let mut min_diag = 0.0;
    for _ in 0..2 {
        let g = ginibre_from(n, rng);
        let qr = Mat::<C64>::from_fn(n, n, |i, j| g[(i, j)]).qr();
        let r = qr.R();
        let phases: Vec<C64> = (0..n).map(|k| r[(k, k)]).collect();
        min_diag = phases.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        if !(min_diag > 1e-300) {
            continue;
        }
        let q = qr.compute_Q();
        return Ok(ComplexMatrix::from_fn(n, n, |i, j| q[(i, j)] * (phases[j] / phases[j].norm())));
    }
    Err(Error::SingularDraw { min_diag })
}

/// Haar unitary: QR of a Ginibre draw, with `Q`'s columns rephased so that
/// `R` has a positive real diagonal.
pub fn sample_haar_unitary(n: usize, seed: Seed) -> Result<ComplexMatrix> {
    check_dim(n)?;
    haar_from(n, &mut seed.rng())
}

pub fn sample_rotated_rademacher(n: usize, seed: Seed) -> Result<HermitianMatrix> {
    check_dim(n)?;
    let mut rng = seed.rng();
    let signs: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
    let u = haar_from(n, &mut rng)?;
    rotate_diagonal(&u, &signs)
}

/// Real Wigner matrix: symmetric with i.i.d. `N(0, 1/n)` entries on and above
/// the diagonal.
pub fn sample_gue(n: usize, seed: Seed) -> Result<HermitianMatrix> {
    check_dim(n)?;
    let mut rng = seed.rng();
    let sd = (1.0 / n as f64).sqrt();
    let mut m = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            m[(i, j)] = C64::new(gaussian(&mut rng, sd), 0.0);
        }
    }
    Ok(mirror_upper(m))
}

/// Complex Wigner matrix: real `N(0, 1/n)` diagonal, complex off-diagonal
/// entries with `E|W_kl|² = 1/n`.
pub fn sample_complex_gue(n: usize, seed: Seed) -> Result<HermitianMatrix> {
    check_dim(n)?;
    let mut rng = seed.rng();
    let sd = (1.0 / n as f64).sqrt();
    let half = (0.5 / n as f64).sqrt();
    let mut m = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = C64::new(gaussian(&mut rng, sd), 0.0);
        for j in i + 1..n {
            m[(i, j)] = C64::new(gaussian(&mut rng, half), gaussian(&mut rng, half));
        }
    }
    Ok(mirror_upper(m))
}

/// `X·X* − Id` with `X` square Ginibre. For complex Gaussian `X`,
/// `E τ(W²) = 1` holds exactly at every `n`.
pub fn sample_wishart_centered(n: usize, seed: Seed) -> Result<HermitianMatrix> {
    check_dim(n)?;
    let x = ginibre_from(n, &mut seed.rng());
    let mut xx = x.matmul(&x.adjoint())?;
    for i in 0..n {
        xx[(i, i)] -= 1.0;
    }
    Ok(mirror_upper(xx))
}

pub fn sample_rotated_deterministic(spectrum: &[f64], seed: Seed) -> Result<HermitianMatrix> {
    if spectrum.is_empty() {
        return Err(Error::InvalidParameter("spectrum must be nonempty".into()));
    }
    if spectrum.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("spectrum contains non-finite values".into()));
    }
    let u = sample_haar_unitary(spectrum.len(), seed)?;
    rotate_diagonal(&u, spectrum)
}

pub fn sample(spec: &EnsembleSpec, seed: Seed) -> Result<MatrixSample> {
    spec.validate()?;
    let n = spec.n;
    let matrix = match &spec.kind {
        EnsembleKind::RotatedRademacher => SampleMatrix::Hermitian(sample_rotated_rademacher(n, seed)?),
        EnsembleKind::Gue => SampleMatrix::Hermitian(sample_gue(n, seed)?),
        EnsembleKind::ComplexGue => SampleMatrix::Hermitian(sample_complex_gue(n, seed)?),
        EnsembleKind::WishartCentered => SampleMatrix::Hermitian(sample_wishart_centered(n, seed)?),
        EnsembleKind::RotatedDeterministic { spectrum } => {
            SampleMatrix::Hermitian(sample_rotated_deterministic(spectrum, seed)?)
        }
        EnsembleKind::Ginibre => SampleMatrix::General(sample_ginibre(n, seed)?),
    };
    Ok(MatrixSample { matrix, spec: spec.clone(), seed })
}

pub fn sample_hermitian(spec: &EnsembleSpec, seed: Seed) -> Result<HermitianMatrix> {
    match sample(spec, seed)?.matrix {
        SampleMatrix::Hermitian(h) => Ok(h),
        SampleMatrix::General(_) => Err(Error::InvalidParameter(format!(
            "ensemble {} does not produce Hermitian matrices",
            spec.kind.label()
        ))),
    }
}

/// `d` i.i.d. Hermitian samples on streams `seed.stream·d + i`, `i < d`.
pub fn sample_family(spec: &EnsembleSpec, d: usize, seed: Seed) -> Result<Vec<HermitianMatrix>> {
    if d == 0 {
        return Err(Error::InvalidParameter("family size d must be at least 1".into()));
    }
    let base = seed
        .stream
        .checked_mul(d as u64)
        .ok_or_else(|| Error::InvalidParameter("stream index overflows for this family size".into()))?;
    (0..d as u64)
        .map(|i| sample_hermitian(spec, seed.with_stream(base + i)))
        .collect()
}
