//! Marginal laws and the moment / free-cumulant transform.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::partitions::catalan;

/// A compactly supported law on the real line, known through its moments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum MarginalLaw {
    /// Uniform on `{−1, +1}`.
    Rademacher,
    /// Standard semicircle on `[−2, 2]`.
    Semicircle,
    /// Marchenko–Pastur law of ratio 1 shifted to mean 0 (the limit of
    /// `X·X* − Id`).
    CenteredMp,
    /// Explicit moments `m₁, m₂, …`.
    FromMoments { moments: Vec<f64> },
}

impl MarginalLaw {
    pub fn from_moments(moments: Vec<f64>) -> Result<Self> {
        if moments.len() < 2 {
            return Err(Error::InvalidParameter("at least two moments are required".into()));
        }
        if moments.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidParameter("moments must be finite".into()));
        }
        Ok(Self::FromMoments { moments })
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Rademacher => "rademacher",
            Self::Semicircle => "semicircle",
            Self::CenteredMp => "centered-mp",
            Self::FromMoments { .. } => "from-moments",
        }
    }

    /// `m₁, …, m_p`.
    pub fn moments(&self, p: usize) -> Result<Vec<f64>> {
        Ok(match self {
            Self::Rademacher => (1..=p).map(|k| if k % 2 == 0 { 1.0 } else { 0.0 }).collect(),
            Self::Semicircle => (1..=p).map(|k| if k % 2 == 0 { catalan(k / 2) as f64 } else { 0.0 }).collect(),
            Self::CenteredMp => {
                // free cumulants (0, 1, 1, 1, …)
                let kappas: Vec<f64> = (1..=p).map(|k| if k == 1 { 0.0 } else { 1.0 }).collect();
                free_cumulants_to_moments(&CumulantSequence { kappas })
            }
            Self::FromMoments { moments } => {
                if p > moments.len() {
                    return Err(Error::InvalidParameter(format!(
                        "law has {} moments, order {p} requested",
                        moments.len()
                    )));
                }
                moments[..p].to_vec()
            }
        })
    }

    pub fn is_centered(&self) -> bool {
        self.moments(1).map(|m| m[0].abs() <= 1e-12).unwrap_or(false)
    }

    /// `m₁ = 0` and `m₂ = 1`.
    pub fn is_normalized(&self) -> bool {
        self.moments(2).map(|m| m[0].abs() <= 1e-12 && (m[1] - 1.0).abs() <= 1e-12).unwrap_or(false)
    }

    pub fn free_cumulants(&self, p: usize) -> Result<CumulantSequence> {
        Ok(moments_to_free_cumulants(&self.moments(p)?))
    }
}

/// Free cumulants `κ₁, …, κ_p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CumulantSequence {
    pub kappas: Vec<f64>,
}

impl CumulantSequence {
    pub fn len(&self) -> usize {
        self.kappas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kappas.is_empty()
    }

    /// `κ_k` for `k ≥ 1`.
    pub fn kappa(&self, k: usize) -> f64 {
        self.kappas[k - 1]
    }
}

/// `coef[s][k] = Σ m_{i₁}⋯m_{i_s}` over `i₁ + … + i_s = k`, with `m₀ = 1`.
fn composition_sums(m: &[f64], s_max: usize, k_max: usize) -> Vec<Vec<f64>> {
    let moment = |j: usize| if j == 0 { 1.0 } else { m[j - 1] };
    let mut coef = vec![vec![0.0; k_max + 1]; s_max + 1];
    coef[0][0] = 1.0;
    for s in 1..=s_max {
        for k in 0..=k_max {
            coef[s][k] = (0..=k).map(|j| moment(j) * coef[s - 1][k - j]).sum();
        }
    }
    coef
}

/// Splitting off the block containing the first point gives
/// `m_p = Σ_{s=1}^{p} κ_s Σ_{i₁+…+i_s = p−s} m_{i₁}⋯m_{i_s}`, which is
/// triangular in `κ_p`.
pub fn moments_to_free_cumulants(m: &[f64]) -> CumulantSequence {
    let p = m.len();
    let mut kappas = vec![0.0; p];
    for q in 1..=p {
        let coef = composition_sums(&m[..q - 1], q, q - 1);
        let lower: f64 = (1..q).map(|s| kappas[s - 1] * coef[s][q - s]).sum();
        kappas[q - 1] = m[q - 1] - lower;
    }
    CumulantSequence { kappas }
}

pub fn free_cumulants_to_moments(k: &CumulantSequence) -> Vec<f64> {
    let p = k.len();
    let mut m: Vec<f64> = Vec::with_capacity(p);
    for q in 1..=p {
        let coef = composition_sums(&m, q, q - 1);
        let value = (1..=q).map(|s| k.kappas[s - 1] * coef[s][q - s]).sum();
        m.push(value);
    }
    m
}
