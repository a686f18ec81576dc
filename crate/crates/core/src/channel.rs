//! Kraus sets, channel matrices, expectation models and the centered operator
//! `Δ = d^{-1/2} Σ (W_i ⊗ conj(W_i) − E[W_i ⊗ conj(W_i)])`.

use log::warn;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensembles::{sample_family, EnsembleKind, EnsembleSpec};
use crate::error::{Error, Result};
use crate::linalg::matfree::{hutchinson_moments, Estimate, KronTerm, MatFreeOperator, Shift, StructuredShift};
use crate::linalg::matrix::{accumulate_kron, check_dense_dim};
use crate::linalg::{hermitian_eigenvalues, hermiticity_preserving_eigenvalues, ComplexMatrix, HermitianMatrix, Spectrum};
use crate::rng::{domain, Seed};

/// Splits a square `k` as `K_R + i·K_I` with both parts Hermitian.
pub fn hermitian_split(k: &ComplexMatrix) -> Result<(HermitianMatrix, HermitianMatrix)> {
    if !k.is_square() {
        return Err(Error::NotSquare { rows: k.rows(), cols: k.cols() });
    }
    let n = k.rows();
    let re = ComplexMatrix::from_fn(n, n, |i, j| (k[(i, j)] + k[(j, i)].conj()) * 0.5);
    let im = ComplexMatrix::from_fn(n, n, |i, j| (k[(i, j)] - k[(j, i)].conj()) * C64::new(0.0, -0.5));
    Ok((HermitianMatrix::from_base_unchecked(re), HermitianMatrix::from_base_unchecked(im)))
}

#[derive(Clone, Debug)]
pub struct KrausSet {
    n: usize,
    operators: Vec<HermitianMatrix>,
    source: Option<EnsembleSpec>,
    seed: Option<Seed>,
}

impl KrausSet {
    pub fn new(operators: Vec<HermitianMatrix>) -> Result<Self> {
        let n = common_dim(&operators)?;
        Ok(Self { n, operators, source: None, seed: None })
    }

    /// `K_i = W_i / √d`.
    pub fn from_family(family: &[HermitianMatrix]) -> Result<Self> {
        let c = 1.0 / (family.len() as f64).sqrt();
        Self::new(family.iter().map(|w| w.scale(c)).collect())
    }

    pub fn sample(spec: &EnsembleSpec, d: usize, seed: Seed) -> Result<Self> {
        let family = sample_family(spec, d, seed)?;
        let mut ks = Self::from_family(&family)?;
        ks.source = Some(spec.clone());
        ks.seed = Some(seed);
        Ok(ks)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.operators.len()
    }

    pub fn operators(&self) -> &[HermitianMatrix] {
        &self.operators
    }

    pub fn source(&self) -> Option<&EnsembleSpec> {
        self.source.as_ref()
    }

    pub fn seed(&self) -> Option<Seed> {
        self.seed
    }
}

fn common_dim(ops: &[HermitianMatrix]) -> Result<usize> {
    let first = ops
        .first()
        .ok_or_else(|| Error::InvalidParameter("at least one operator is required".into()))?;
    let n = first.dim();
    if let Some(bad) = ops.iter().find(|w| w.dim() != n) {
        return Err(Error::DimensionMismatch(format!(
            "operators of dimension {n} and {} in one family",
            bad.dim()
        )));
    }
    Ok(n)
}

/// `M = Σ K_i ⊗ conj(K_i)` on `C^n ⊗ C^n`.
#[derive(Clone, Debug)]
pub struct ChannelMatrix {
    pub n: usize,
    pub matrix: HermitianMatrix,
}

pub fn build_channel_matrix(ks: &KrausSet) -> Result<ChannelMatrix> {
    let n = ks.n;
    check_dense_dim(n * n)?;
    let mut m = ComplexMatrix::zeros(n * n, n * n);
    for k in &ks.operators {
        accumulate_kron(&mut m, 1.0, k.as_matrix(), &k.as_matrix().entrywise_conj());
    }
    Ok(ChannelMatrix { n, matrix: HermitianMatrix::new(m)? })
}

/// `Φ(X) = Σ K_i X K_i`.
pub fn apply_channel(ks: &KrausSet, x: &ComplexMatrix) -> Result<ComplexMatrix> {
    if x.rows() != ks.n || x.cols() != ks.n {
        return Err(Error::DimensionMismatch(format!(
            "input is {}x{}, channel acts on {n}x{n}",
            x.rows(),
            x.cols(),
            n = ks.n
        )));
    }
    let mut out = ComplexMatrix::zeros(ks.n, ks.n);
    for k in &ks.operators {
        let kxk = k.as_matrix().matmul(x)?.matmul(k.as_matrix())?;
        out.add_scaled(1.0, &kxk)?;
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KrausDefects {
    /// `max|Σ K_i* K_i − Id|`
    pub trace_preserving: f64,
    /// `max|Σ K_i K_i* − Id|`
    pub unital: f64,
}

pub fn kraus_defects(ks: &KrausSet) -> Result<KrausDefects> {
    let n = ks.n;
    let mut tp = ComplexMatrix::zeros(n, n);
    let mut un = ComplexMatrix::zeros(n, n);
    for k in &ks.operators {
        let k = k.as_matrix();
        tp.add_scaled(1.0, &k.adjoint().matmul(k)?)?;
        un.add_scaled(1.0, &k.matmul(&k.adjoint())?)?;
    }
    let id = ComplexMatrix::identity(n);
    Ok(KrausDefects { trace_preserving: tp.max_abs_diff(&id), unital: un.max_abs_diff(&id) })
}

/// Structured form of `ψψ* + (F − diag F)/n`.
pub fn gue_shift(n: usize) -> StructuredShift {
    let c = 1.0 / n as f64;
    StructuredShift { identity: 0.0, trace: c, transpose: c, diagonal: -c }
}

/// Coefficients `(α, β)` of `α·Id + β·(n ψψ*)`, the Haar twirl of
/// `E[A ⊗ conj(A)]`, given `E|tr A|²` and `E tr(A²)`.
pub fn twirl_coefficients(n: usize, mean_trace_squared: f64, mean_trace_of_square: f64) -> Result<(f64, f64)> {
    if n < 2 {
        return Err(Error::InvalidParameter("the twirl system is singular for n = 1".into()));
    }
    // n²α + nβ = E|trA|², nα + n²β = E tr(A²)
    let nf = n as f64;
    let det = nf.powi(4) - nf * nf;
    let alpha = (nf * nf * mean_trace_squared - nf * mean_trace_of_square) / det;
    let beta = (nf * nf * mean_trace_of_square - nf * mean_trace_squared) / det;
    Ok((alpha, beta))
}

pub fn twirl_shift(n: usize, mean_trace_squared: f64, mean_trace_of_square: f64) -> Result<StructuredShift> {
    let (alpha, beta) = twirl_coefficients(n, mean_trace_squared, mean_trace_of_square)?;
    Ok(StructuredShift { identity: alpha, trace: beta, transpose: 0.0, diagonal: 0.0 })
}

/// `E[W ⊗ conj(W)] = ψψ* + (F − diag F)/n` for real Wigner `W`.
pub fn expected_tensor_gue(n: usize) -> Result<ChannelMatrix> {
    if n == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    Ok(ChannelMatrix { n, matrix: gue_shift(n).to_dense(n)? })
}

/// Haar-twirled expectation `α·Id + β·(n ψψ*)`.
pub fn expected_tensor_twirl(n: usize, mean_trace_squared: f64, mean_trace_of_square: f64) -> Result<ChannelMatrix> {
    Ok(ChannelMatrix { n, matrix: twirl_shift(n, mean_trace_squared, mean_trace_of_square)?.to_dense(n)? })
}

fn empirical_samples(spec: &EnsembleSpec, trials: usize, seed: Seed) -> Result<Vec<HermitianMatrix>> {
    if trials == 0 {
        return Err(Error::InvalidParameter("empirical expectation needs at least one trial".into()));
    }
    let base = seed
        .stream
        .checked_mul(trials as u64)
        .ok_or_else(|| Error::InvalidParameter("stream index overflows for this trial count".into()))?;
    // sampled in parallel, merged in trial order
    let draws: Vec<Result<HermitianMatrix>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| sample_family(spec, 1, seed.with_stream(base + t)).map(|mut v| v.remove(0)))
        .collect();
    draws.into_iter().collect()
}

/// Monte Carlo mean of `W ⊗ conj(W)` over `trials` draws.
pub fn expected_tensor_empirical(spec: &EnsembleSpec, trials: usize, seed: Seed) -> Result<ChannelMatrix> {
    let n = spec.n;
    check_dense_dim(n * n)?;
    let samples = empirical_samples(spec, trials, seed)?;
    let mut m = ComplexMatrix::zeros(n * n, n * n);
    let c = 1.0 / trials as f64;
    for w in &samples {
        accumulate_kron(&mut m, c, w.as_matrix(), &w.as_matrix().entrywise_conj());
    }
    Ok(ChannelMatrix { n, matrix: HermitianMatrix::hermitian_part(&m)? })
}

/// `X ↦ tr(X)·Id/n + (Xᵀ − diag X)/n`, the mean channel of the real Wigner
/// ensemble before the `1/d` Kraus scaling is summed out.
pub fn expected_channel_map_gue(x: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !x.is_square() {
        return Err(Error::NotSquare { rows: x.rows(), cols: x.cols() });
    }
    Ok(gue_shift(x.rows()).apply_matrix(x))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum ExpectationModel {
    AnalyticGue,
    AnalyticTwirl { trace_squared_mean: f64, trace_square_mean: f64 },
    Empirical { trials: usize },
    Zero,
}

/// Trial count used when the empirical model is chosen by default.
pub const DEFAULT_EMPIRICAL_TRIALS: usize = 256;

impl ExpectationModel {
    pub fn label(&self) -> &'static str {
        match self {
            Self::AnalyticGue => "analytic-gue",
            Self::AnalyticTwirl { .. } => "analytic-twirl",
            Self::Empirical { .. } => "empirical",
            Self::Zero => "zero",
        }
    }

    /// The model used when none is configured: the exact expectation where one
    /// is known, Monte Carlo otherwise.
    pub fn default_for(spec: &EnsembleSpec) -> Result<Self> {
        let n = spec.n as f64;
        Ok(match &spec.kind {
            EnsembleKind::Gue => Self::AnalyticGue,
            EnsembleKind::RotatedRademacher => Self::AnalyticTwirl { trace_squared_mean: n, trace_square_mean: n },
            EnsembleKind::ComplexGue => Self::AnalyticTwirl { trace_squared_mean: 1.0, trace_square_mean: n },
            EnsembleKind::RotatedDeterministic { spectrum } => Self::AnalyticTwirl {
                trace_squared_mean: spectrum.iter().sum::<f64>().powi(2),
                trace_square_mean: spectrum.iter().map(|x| x * x).sum(),
            },
            EnsembleKind::WishartCentered => Self::Empirical { trials: DEFAULT_EMPIRICAL_TRIALS },
            EnsembleKind::Ginibre => {
                return Err(Error::InvalidParameter("Ginibre matrices are not Hermitian Kraus operators".into()))
            }
        })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Empirical { trials: 0 } => {
                Err(Error::InvalidParameter("empirical expectation needs at least one trial".into()))
            }
            Self::AnalyticTwirl { trace_squared_mean, trace_square_mean }
                if !trace_squared_mean.is_finite() || !trace_square_mean.is_finite() =>
            {
                Err(Error::InvalidParameter("twirl moments must be finite".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug)]
enum CenteringTerm {
    None,
    Structured(StructuredShift),
    /// Draws whose `W ⊗ conj(W)` average is the expectation.
    Samples(Vec<HermitianMatrix>),
}

/// An [`ExpectationModel`] made concrete for one dimension.
#[derive(Clone, Debug)]
pub struct Centering {
    n: usize,
    model: ExpectationModel,
    term: CenteringTerm,
}

impl Centering {
    /// Resolves an analytic or zero model; the empirical model needs
    /// [`Centering::resolve`].
    pub fn analytic(model: &ExpectationModel, n: usize) -> Result<Self> {
        model.validate()?;
        let term = match model {
            ExpectationModel::Zero => CenteringTerm::None,
            ExpectationModel::AnalyticGue => CenteringTerm::Structured(gue_shift(n)),
            ExpectationModel::AnalyticTwirl { trace_squared_mean, trace_square_mean } => {
                CenteringTerm::Structured(twirl_shift(n, *trace_squared_mean, *trace_square_mean)?)
            }
            ExpectationModel::Empirical { .. } => {
                return Err(Error::InvalidParameter(
                    "the empirical expectation needs an ensemble to sample from".into(),
                ))
            }
        };
        Ok(Self { n, model: model.clone(), term })
    }

    /// Empirical draws come from `seed.derive(EXPECTATION)`, so they never
    /// coincide with the Kraus operators being centered.
    pub fn resolve(model: &ExpectationModel, spec: &EnsembleSpec, seed: Seed) -> Result<Self> {
        match model {
            ExpectationModel::Empirical { trials } => {
                model.validate()?;
                let samples = empirical_samples(spec, *trials, seed.derive(domain::EXPECTATION).with_stream(0))?;
                Ok(Self { n: spec.n, model: model.clone(), term: CenteringTerm::Samples(samples) })
            }
            _ => Self::analytic(model, spec.n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn model(&self) -> &ExpectationModel {
        &self.model
    }

    /// The expectation as a dense `n² × n²` matrix.
    pub fn expected_tensor(&self) -> Result<ChannelMatrix> {
        let n = self.n;
        check_dense_dim(n * n)?;
        let mut m = ComplexMatrix::zeros(n * n, n * n);
        self.subtract_dense(&mut m, -1.0);
        Ok(ChannelMatrix { n, matrix: HermitianMatrix::new(m)? })
    }

    /// `m −= c·E`.
    fn subtract_dense(&self, m: &mut ComplexMatrix, c: f64) {
        match &self.term {
            CenteringTerm::None => {}
            CenteringTerm::Structured(s) => s.add_to_dense(m, -c),
            CenteringTerm::Samples(ws) => {
                let coeff = -c / ws.len() as f64;
                for w in ws {
                    accumulate_kron(m, coeff, w.as_matrix(), &w.as_matrix().entrywise_conj());
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Representation {
    /// Dense when `n²` is within the dense limit, matrix-free otherwise.
    #[default]
    Auto,
    Dense,
    MatFree,
    Both,
}

/// The centered, rescaled channel operator.
#[derive(Clone, Debug)]
pub struct DeltaOperator {
    n: usize,
    d: usize,
    dense: Option<HermitianMatrix>,
    matfree: Option<MatFreeOperator>,
    expectation: ExpectationModel,
    warnings: Vec<String>,
}

pub fn build_delta(family: &[HermitianMatrix], centering: &Centering, repr: Representation) -> Result<DeltaOperator> {
    let n = common_dim(family)?;
    if centering.n != n {
        return Err(Error::DimensionMismatch(format!(
            "centering built for dimension {}, family has dimension {n}",
            centering.n
        )));
    }
    let d = family.len();
    let sqrt_d = (d as f64).sqrt();
    let mut warnings = Vec::new();
    if let ExpectationModel::Zero = centering.model {
        let msg = format!(
            "no centering applied: E[W⊗conj(W)] is kept, adding an outlier of size about √d = {sqrt_d:.3} \
             in the maximally entangled direction"
        );
        warn!("{msg}");
        warnings.push(msg);
    }

    let (want_dense, want_matfree) = match repr {
        Representation::Dense => (true, false),
        Representation::MatFree => (false, true),
        Representation::Both => (true, true),
        Representation::Auto => {
            let dense = check_dense_dim(n * n).is_ok();
            (dense, !dense)
        }
    };

    let dense = if want_dense {
        check_dense_dim(n * n)?;
        let mut m = ComplexMatrix::zeros(n * n, n * n);
        for w in family {
            accumulate_kron(&mut m, 1.0 / sqrt_d, w.as_matrix(), &w.as_matrix().entrywise_conj());
        }
        centering.subtract_dense(&mut m, sqrt_d);
        Some(HermitianMatrix::new(m)?)
    } else {
        None
    };

    let matfree = if want_matfree {
        let mut terms: Vec<KronTerm> = family
            .iter()
            .map(|w| KronTerm {
                coeff: 1.0 / sqrt_d,
                left: w.as_matrix().clone(),
                right: w.as_matrix().entrywise_conj(),
            })
            .collect();
        let shift = match &centering.term {
            CenteringTerm::None => None,
            CenteringTerm::Structured(s) => Some(Shift::Structured(s.scaled(-sqrt_d))),
            CenteringTerm::Samples(ws) => {
                let coeff = -sqrt_d / ws.len() as f64;
                terms.extend(ws.iter().map(|w| KronTerm {
                    coeff,
                    left: w.as_matrix().clone(),
                    right: w.as_matrix().entrywise_conj(),
                }));
                None
            }
        };
        Some(MatFreeOperator::new(n, terms, shift)?)
    } else {
        None
    };

    Ok(DeltaOperator { n, d, dense, matfree, expectation: centering.model.clone(), warnings })
}

impl DeltaOperator {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn dense(&self) -> Option<&HermitianMatrix> {
        self.dense.as_ref()
    }

    pub fn matfree(&self) -> Option<&MatFreeOperator> {
        self.matfree.as_ref()
    }

    pub fn expectation(&self) -> &ExpectationModel {
        &self.expectation
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        match (&self.matfree, &self.dense) {
            (Some(op), _) => op.apply(v),
            (None, Some(m)) => m.as_matrix().matvec(v),
            (None, None) => unreachable!("a DeltaOperator always carries one representation"),
        }
    }

    /// Eigenvalues of the dense form.
    pub fn spectrum(&self) -> Result<Spectrum> {
        let m = self.dense.as_ref().ok_or_else(|| {
            Error::InvalidParameter("the spectrum needs the dense representation of Δ".into())
        })?;
        match hermiticity_preserving_eigenvalues(m) {
            Err(Error::InvalidParameter(_)) => hermitian_eigenvalues(m),
            other => other,
        }
    }

    /// Stochastic estimates of `τ(Δ^p)`, `p = 1..=p_max`.
    pub fn hutchinson_moments(&self, p_max: usize, probes: usize, seed: Seed) -> Result<Vec<Estimate>> {
        match (&self.matfree, &self.dense) {
            (Some(op), _) => hutchinson_moments(op, p_max, probes, seed),
            (None, Some(m)) => {
                let op = MatFreeOperator::new(self.n, Vec::new(), Some(Shift::Dense(m.clone())))?;
                hutchinson_moments(&op, p_max, probes, seed)
            }
            (None, None) => unreachable!("a DeltaOperator always carries one representation"),
        }
    }

    /// `τ(Δ)` and `τ(Δ²)` from the dense entries, without diagonalizing.
    pub fn low_moments(&self) -> Result<[f64; 2]> {
        let m = self.dense.as_ref().ok_or_else(|| {
            Error::InvalidParameter("exact moments need the dense representation of Δ".into())
        })?;
        let dim = m.dim() as f64;
        Ok([m.normalized_trace(), m.as_matrix().frobenius_norm_sqr() / dim])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{sample_gue, sample_hermitian, sample_rotated_rademacher};
    use crate::linalg::kron;

    fn lcg(state: &mut u64) -> f64 {
        *state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*state >> 11) as f64) / (1u64 << 53) as f64 - 0.5
    }

    fn random_matrix(n: usize, s: &mut u64) -> ComplexMatrix {
        ComplexMatrix::from_fn(n, n, |_, _| C64::new(lcg(s), lcg(s)))
    }

    fn random_hermitian(n: usize, s: &mut u64) -> HermitianMatrix {
        HermitianMatrix::hermitian_part(&random_matrix(n, s)).unwrap()
    }

    fn spec(kind: EnsembleKind, n: usize) -> EnsembleSpec {
        EnsembleSpec::new(kind, n).unwrap()
    }

    /// Entrywise Monte Carlo mean and standard error of `W ⊗ conj(W)`.
    fn monte_carlo_tensor(spec: &EnsembleSpec, draws: u64, root: u64) -> (Vec<C64>, Vec<f64>, Vec<f64>) {
        let dim = spec.n * spec.n;
        let mut sum = vec![C64::new(0.0, 0.0); dim * dim];
        let mut sq_re = vec![0.0; dim * dim];
        let mut sq_im = vec![0.0; dim * dim];
        for t in 0..draws {
            let w = sample_hermitian(spec, Seed::new(root, t)).unwrap();
            let k = kron(w.as_matrix(), &w.as_matrix().entrywise_conj()).unwrap();
            for (idx, z) in k.as_slice().iter().enumerate() {
                sum[idx] += z;
                sq_re[idx] += z.re * z.re;
                sq_im[idx] += z.im * z.im;
            }
        }
        let k = draws as f64;
        let mean: Vec<C64> = sum.iter().map(|z| z / k).collect();
        let se = |sq: &[f64], part: fn(&C64) -> f64| -> Vec<f64> {
            sq.iter()
                .zip(&mean)
                .map(|(s, m)| ((s / k - part(m).powi(2)).max(0.0) * k / (k - 1.0) / k).sqrt())
                .collect()
        };
        let se_re = se(&sq_re, |z| z.re);
        let se_im = se(&sq_im, |z| z.im);
        (mean, se_re, se_im)
    }

    fn count_outside_3se(mean: &[C64], se_re: &[f64], se_im: &[f64], expected: &ComplexMatrix) -> usize {
        expected
            .as_slice()
            .iter()
            .enumerate()
            .filter(|(i, e)| {
                (mean[*i].re - e.re).abs() > 3.0 * se_re[*i] + 1e-14 || (mean[*i].im - e.im).abs() > 3.0 * se_im[*i] + 1e-14
            })
            .count()
    }

    #[test]
    fn hermitian_split_cases() {
        let mut s = 1;
        let h = random_hermitian(3, &mut s);
        let (r, i) = hermitian_split(h.as_matrix()).unwrap();
        assert!(r.as_matrix().max_abs_diff(h.as_matrix()) <= 1e-15);
        assert!(i.as_matrix().max_abs() <= 1e-15);

        let ih = h.as_matrix().scale_complex(C64::new(0.0, 1.0));
        let (r, i) = hermitian_split(&ih).unwrap();
        assert!(r.as_matrix().max_abs() <= 1e-15);
        assert!(i.as_matrix().max_abs_diff(h.as_matrix()) <= 1e-15);

        let k = random_matrix(3, &mut s);
        let (r, i) = hermitian_split(&k).unwrap();
        assert!(HermitianMatrix::new(r.as_matrix().clone()).is_ok());
        assert!(HermitianMatrix::new(i.as_matrix().clone()).is_ok());
        let mut back = r.as_matrix().clone();
        back.add_scaled(1.0, &i.as_matrix().scale_complex(C64::new(0.0, 1.0))).unwrap();
        assert!(back.max_abs_diff(&k) <= 1e-12);

        let rect = ComplexMatrix::zeros(2, 3);
        assert!(matches!(hermitian_split(&rect), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn channel_matrix_small_cases() {
        let ks = KrausSet::new(vec![HermitianMatrix::identity(3)]).unwrap();
        let m = build_channel_matrix(&ks).unwrap();
        assert_eq!(m.matrix.as_matrix(), &ComplexMatrix::identity(9));

        let ks = KrausSet::new(vec![HermitianMatrix::from_real_diagonal(&[1.0, -1.0])]).unwrap();
        let m = build_channel_matrix(&ks).unwrap();
        assert_eq!(m.matrix.as_matrix(), &ComplexMatrix::from_real_diagonal(&[1.0, -1.0, -1.0, 1.0]));
    }

    #[test]
    fn channel_matrix_matches_channel_action() {
        let mut s = 2;
        let family: Vec<HermitianMatrix> = (0..3).map(|_| random_hermitian(4, &mut s)).collect();
        let ks = KrausSet::from_family(&family).unwrap();
        assert_eq!(ks.d(), 3);
        let m = build_channel_matrix(&ks).unwrap();
        for _ in 0..3 {
            let x = random_matrix(4, &mut s);
            let direct = apply_channel(&ks, &x).unwrap();
            let via = m.matrix.as_matrix().matvec(&x.vectorize()).unwrap();
            let err = via.iter().zip(direct.as_slice()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(err <= 1e-12 * direct.max_abs().max(1.0));
        }
    }

    #[test]
    fn apply_channel_properties() {
        let mut s = 3;
        let x = random_matrix(5, &mut s);
        let id = KrausSet::new(vec![HermitianMatrix::identity(5)]).unwrap();
        assert_eq!(apply_channel(&id, &x).unwrap(), x);
        assert!(apply_channel(&id, &ComplexMatrix::zeros(4, 4)).is_err());

        let ks = KrausSet::sample(&spec(EnsembleKind::RotatedRademacher, 6), 4, Seed::new(3, 0)).unwrap();
        let x = random_matrix(6, &mut s);
        let y = apply_channel(&ks, &x).unwrap();
        assert!((y.trace().unwrap() - x.trace().unwrap()).norm() <= 1e-9);

        // X = A·A* is positive semidefinite
        let a = random_matrix(6, &mut s);
        let psd = HermitianMatrix::hermitian_part(&a.matmul(&a.adjoint()).unwrap()).unwrap();
        let out = HermitianMatrix::hermitian_part(&apply_channel(&ks, psd.as_matrix()).unwrap()).unwrap();
        assert!(hermitian_eigenvalues(&out).unwrap().values()[0] >= -1e-9);
    }

    #[test]
    fn kraus_defects_cases() {
        let id = KrausSet::new(vec![HermitianMatrix::identity(4)]).unwrap();
        assert_eq!(kraus_defects(&id).unwrap(), KrausDefects { trace_preserving: 0.0, unital: 0.0 });
        for (n, d) in [(8, 3), (16, 2)] {
            let ks = KrausSet::sample(&spec(EnsembleKind::RotatedRademacher, n), d, Seed::new(4, 0)).unwrap();
            let def = kraus_defects(&ks).unwrap();
            assert!(def.trace_preserving <= 1e-9 && def.unital <= 1e-9, "{def:?}");
        }
        let ks = KrausSet::sample(&spec(EnsembleKind::Gue, 8), 3, Seed::new(4, 1)).unwrap();
        let def = kraus_defects(&ks).unwrap();
        assert!((def.trace_preserving - def.unital).abs() <= 1e-12);
    }

    #[test]
    fn gue_defect_shrinks_with_d() {
        let sp = spec(EnsembleKind::Gue, 64);
        let mean_defect = |d: usize| -> f64 {
            (0..50)
                .map(|t| kraus_defects(&KrausSet::sample(&sp, d, Seed::new(5, t)).unwrap()).unwrap().trace_preserving)
                .sum::<f64>()
                / 50.0
        };
        assert!(mean_defect(16) < 0.9 * mean_defect(4));
    }

    #[test]
    fn expected_gue_tensor_structure() {
        let e1 = expected_tensor_gue(1).unwrap();
        assert_eq!(e1.matrix.as_matrix(), &ComplexMatrix::identity(1));
        for n in 2..=5 {
            let e = expected_tensor_gue(n).unwrap();
            assert!((e.matrix.as_matrix().trace().unwrap().re - 1.0).abs() <= 1e-12);
            let ev = hermitian_eigenvalues(&e.matrix).unwrap();
            let top = ev.values()[n * n - 1];
            assert!((top - 1.0).abs() <= 1e-12);
            let inv_n = 1.0 / n as f64;
            let bulk = &ev.values()[..n * n - 1];
            let near = |v: f64| bulk.iter().filter(|x| (*x - v).abs() <= 1e-12).count();
            assert_eq!(near(inv_n), n * (n - 1) / 2);
            assert_eq!(near(-inv_n), n * (n - 1) / 2);
            assert_eq!(near(0.0), n - 1);
        }
    }

    #[test]
    fn expected_gue_channel_map() {
        let n = 4;
        let id = ComplexMatrix::identity(n);
        assert!(expected_channel_map_gue(&id).unwrap().max_abs_diff(&id) <= 1e-15);
        let mut e12 = ComplexMatrix::zeros(n, n);
        e12[(0, 1)] = C64::new(1.0, 0.0);
        let mut e21 = ComplexMatrix::zeros(n, n);
        e21[(1, 0)] = C64::new(0.25, 0.0);
        assert_eq!(expected_channel_map_gue(&e12).unwrap(), e21);

        let mut s = 6;
        let e = expected_tensor_gue(3).unwrap();
        for _ in 0..3 {
            let x = random_matrix(3, &mut s);
            let a = expected_channel_map_gue(&x).unwrap().vectorize();
            let b = e.matrix.as_matrix().matvec(&x.vectorize()).unwrap();
            let err = a.iter().zip(&b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
            assert!(err <= 1e-10);
        }
    }

    #[test]
    fn twirl_coefficients_cases() {
        for n in [2, 4, 9] {
            let nf = n as f64;
            let (a, b) = twirl_coefficients(n, nf, nf).unwrap();
            assert!((a - 1.0 / (nf + 1.0)).abs() <= 1e-14);
            assert!((b - 1.0 / (nf + 1.0)).abs() <= 1e-14);
            let e = expected_tensor_twirl(n, nf * nf, nf).unwrap();
            assert!(e.matrix.as_matrix().max_abs_diff(&ComplexMatrix::identity(n * n)) <= 1e-12);
        }
        assert!(twirl_coefficients(1, 1.0, 1.0).is_err());
    }

    #[test]
    fn twirl_matches_monte_carlo_for_rotated_rademacher() {
        let n = 4;
        let sp = spec(EnsembleKind::RotatedRademacher, n);
        let (mean, se_re, se_im) = monte_carlo_tensor(&sp, 50_000, 7);
        let e = expected_tensor_twirl(n, n as f64, n as f64).unwrap();
        assert_eq!(count_outside_3se(&mean, &se_re, &se_im, e.matrix.as_matrix()), 0);
    }

    #[test]
    fn twirl_moments_vanish_as_n_grows() {
        let tau_pow = |n: usize, p: i32| -> f64 {
            let e = expected_tensor_twirl(n, n as f64, n as f64).unwrap();
            let ev = hermitian_eigenvalues(&e.matrix).unwrap();
            ev.values().iter().map(|x| x.powi(p)).sum::<f64>() / (n * n) as f64
        };
        for p in 1..=4 {
            let v: Vec<f64> = [8, 16, 32].iter().map(|&n| tau_pow(n, p)).collect();
            assert!(v[0] > v[1] && v[1] > v[2], "p={p}: {v:?}");
        }
    }

    #[test]
    fn gue_formula_matches_monte_carlo() {
        let n = 4;
        let (mean, se_re, se_im) = monte_carlo_tensor(&spec(EnsembleKind::Gue, n), 20_000, 8);
        let e = expected_tensor_gue(n).unwrap();
        assert_eq!(count_outside_3se(&mean, &se_re, &se_im, e.matrix.as_matrix()), 0);
    }

    #[test]
    fn complex_wigner_and_wishart_expectations_are_twirls() {
        let n = 3;
        let e = expected_tensor_twirl(n, 1.0, n as f64).unwrap();
        for kind in [EnsembleKind::ComplexGue, EnsembleKind::WishartCentered] {
            let (mean, se_re, se_im) = monte_carlo_tensor(&spec(kind, n), 20_000, 9);
            assert_eq!(count_outside_3se(&mean, &se_re, &se_im, e.matrix.as_matrix()), 0);
        }
    }

    #[test]
    fn empirical_expectation() {
        let sp = spec(EnsembleKind::Gue, 3);
        let seed = Seed::new(10, 2);
        let one = expected_tensor_empirical(&sp, 1, seed).unwrap();
        let w = sample_family(&sp, 1, seed).unwrap().remove(0);
        let k = kron(w.as_matrix(), &w.as_matrix().entrywise_conj()).unwrap();
        assert!(one.matrix.as_matrix().max_abs_diff(&k) <= 1e-15);
        assert!(expected_tensor_empirical(&sp, 0, seed).is_err());

        let many = expected_tensor_empirical(&sp, 20_000, Seed::new(10, 0)).unwrap();
        let exact = expected_tensor_gue(3).unwrap();
        assert!(many.matrix.as_matrix().max_abs_diff(exact.matrix.as_matrix()) <= 0.05);

        let spectrum = vec![1.5, -0.5, 0.25, 2.0];
        let sp = spec(EnsembleKind::RotatedDeterministic { spectrum: spectrum.clone() }, 4);
        let many = expected_tensor_empirical(&sp, 20_000, Seed::new(10, 1)).unwrap();
        let sum: f64 = spectrum.iter().sum();
        let sq: f64 = spectrum.iter().map(|x| x * x).sum();
        let twirl = expected_tensor_twirl(4, sum * sum, sq).unwrap();
        assert!(many.matrix.as_matrix().max_abs_diff(twirl.matrix.as_matrix()) <= 0.05);
    }

    #[test]
    fn default_models() {
        let m = ExpectationModel::default_for(&spec(EnsembleKind::Gue, 4)).unwrap();
        assert_eq!(m, ExpectationModel::AnalyticGue);
        let m = ExpectationModel::default_for(&spec(EnsembleKind::RotatedRademacher, 4)).unwrap();
        assert_eq!(m, ExpectationModel::AnalyticTwirl { trace_squared_mean: 4.0, trace_square_mean: 4.0 });
        assert!(ExpectationModel::default_for(&spec(EnsembleKind::Ginibre, 4)).is_err());
        assert!(ExpectationModel::Empirical { trials: 0 }.validate().is_err());
        assert!(Centering::analytic(&ExpectationModel::Empirical { trials: 3 }, 4).is_err());
        let text = toml::to_string(&ExpectationModel::AnalyticTwirl { trace_squared_mean: 1.0, trace_square_mean: 2.0 }).unwrap();
        assert!(text.contains("analytic-twirl"));
    }

    #[test]
    fn delta_of_identity_without_centering_is_identity() {
        let c = Centering::analytic(&ExpectationModel::Zero, 3).unwrap();
        let delta = build_delta(&[HermitianMatrix::identity(3)], &c, Representation::Dense).unwrap();
        assert_eq!(delta.dense().unwrap().as_matrix(), &ComplexMatrix::identity(9));
        assert_eq!(delta.warnings().len(), 1);
    }

    #[test]
    fn delta_representations_agree() {
        let mut s = 11;
        let n = 5;
        let family: Vec<HermitianMatrix> =
            (0..3).map(|k| sample_rotated_rademacher(n, Seed::new(11, k)).unwrap()).collect();
        let sp = spec(EnsembleKind::RotatedRademacher, n);
        let models = [
            ExpectationModel::Zero,
            ExpectationModel::AnalyticGue,
            ExpectationModel::default_for(&sp).unwrap(),
            ExpectationModel::Empirical { trials: 7 },
        ];
        for model in models {
            let c = Centering::resolve(&model, &sp, Seed::new(11, 0)).unwrap();
            let delta = build_delta(&family, &c, Representation::Both).unwrap();
            let dense = delta.dense().unwrap();
            let op = delta.matfree().unwrap();
            assert!(op.to_dense().unwrap().max_abs_diff(dense.as_matrix()) <= 1e-12);
            for _ in 0..3 {
                let v: Vec<C64> = (0..n * n).map(|_| C64::new(lcg(&mut s), lcg(&mut s))).collect();
                let a = op.apply(&v).unwrap();
                let b = dense.as_matrix().matvec(&v).unwrap();
                let err = a.iter().zip(&b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
                assert!(err <= 1e-9, "{model:?}: {err}");
            }
            // the expectation subtracted equals the dense expectation matrix
            let e = c.expected_tensor().unwrap();
            let mut raw = ComplexMatrix::zeros(n * n, n * n);
            for w in &family {
                accumulate_kron(&mut raw, 1.0 / 3f64.sqrt(), w.as_matrix(), &w.as_matrix().entrywise_conj());
            }
            raw.add_scaled(-3f64.sqrt(), e.matrix.as_matrix()).unwrap();
            assert!(raw.max_abs_diff(dense.as_matrix()) <= 1e-12);
        }
    }

    #[test]
    fn delta_scale_covariance_without_centering() {
        let fam: Vec<HermitianMatrix> = (0..3).map(|k| sample_gue(4, Seed::new(12, k)).unwrap()).collect();
        let c = 1.7;
        let scaled: Vec<HermitianMatrix> = fam.iter().map(|w| w.scale(c)).collect();
        let zero = Centering::analytic(&ExpectationModel::Zero, 4).unwrap();
        let a = build_delta(&fam, &zero, Representation::Dense).unwrap();
        let b = build_delta(&scaled, &zero, Representation::Dense).unwrap();
        let expected = a.dense().unwrap().as_matrix().scale(c * c);
        assert!(b.dense().unwrap().as_matrix().max_abs_diff(&expected) <= 1e-12);
    }

    #[test]
    fn gue_delta_is_centered() {
        let n = 8;
        let d = 4;
        let sp = spec(EnsembleKind::Gue, n);
        let c = Centering::analytic(&ExpectationModel::AnalyticGue, n).unwrap();
        let xs: Vec<f64> = (0..400)
            .map(|t| {
                let fam = sample_family(&sp, d, Seed::new(13, t)).unwrap();
                build_delta(&fam, &c, Representation::Dense).unwrap().low_moments().unwrap()[0]
            })
            .collect();
        let k = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / k;
        let se = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt();
        assert!(mean.abs() <= 3.0 * se, "{mean} ± {se}");
    }

    #[test]
    fn empirical_centering_is_centered() {
        let n = 6;
        let d = 2;
        let sp = spec(EnsembleKind::WishartCentered, n);
        let c = Centering::resolve(&ExpectationModel::Empirical { trials: 4000 }, &sp, Seed::new(14, 0)).unwrap();
        let xs: Vec<f64> = (0..400)
            .map(|t| {
                let fam = sample_family(&sp, d, Seed::new(14, t)).unwrap();
                build_delta(&fam, &c, Representation::Dense).unwrap().low_moments().unwrap()[0]
            })
            .collect();
        let k = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / k;
        let se = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt();
        assert!(mean.abs() <= 4.0 * se, "{mean} ± {se}");
    }

    #[test]
    fn rademacher_delta_second_moment_is_one() {
        let n = 64;
        let sp = spec(EnsembleKind::RotatedRademacher, n);
        let c = Centering::analytic(&ExpectationModel::default_for(&sp).unwrap(), n).unwrap();
        let fam = sample_family(&sp, 2, Seed::new(15, 0)).unwrap();
        let delta = build_delta(&fam, &c, Representation::Dense).unwrap();
        let m2 = delta.low_moments().unwrap()[1];
        assert!((m2 - 1.0).abs() <= 0.05, "{m2}");
    }

    #[test]
    fn auto_representation_follows_the_dense_limit() {
        let c = Centering::analytic(&ExpectationModel::AnalyticGue, 4).unwrap();
        let fam = vec![HermitianMatrix::identity(4)];
        let delta = build_delta(&fam, &c, Representation::Auto).unwrap();
        assert!(delta.dense().is_some() && delta.matfree().is_none());
        let big = Centering::analytic(&ExpectationModel::AnalyticGue, 100).unwrap();
        let fam = vec![HermitianMatrix::identity(100)];
        let delta = build_delta(&fam, &big, Representation::Auto).unwrap();
        assert!(delta.dense().is_none() && delta.matfree().is_some());
        assert!(matches!(
            build_delta(&fam, &big, Representation::Dense),
            Err(Error::DenseLimit { requested: 10_000, .. })
        ));
        assert!(delta.spectrum().is_err());
    }

    #[test]
    fn spectrum_and_hutchinson_agree_at_n8() {
        let n = 8;
        let sp = spec(EnsembleKind::Gue, n);
        let c = Centering::analytic(&ExpectationModel::AnalyticGue, n).unwrap();
        let fam = sample_family(&sp, 3, Seed::new(16, 0)).unwrap();
        let delta = build_delta(&fam, &c, Representation::Both).unwrap();
        let spec_vals = delta.spectrum().unwrap();
        let exact: f64 = spec_vals.values().iter().map(|x| x.powi(4)).sum::<f64>() / (n * n) as f64;
        let est = delta.hutchinson_moments(4, 256, Seed::new(16, 1)).unwrap()[3];
        assert!((est.mean - exact).abs() <= 3.0 * est.std_err, "{est:?} vs {exact}");
        let low = delta.low_moments().unwrap();
        let m2: f64 = spec_vals.values().iter().map(|x| x * x).sum::<f64>() / (n * n) as f64;
        assert!((low[1] - m2).abs() <= 1e-10);
    }
}
