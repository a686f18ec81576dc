//! Mixed moments of free variables and moments of tensor convolutions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::cumulants::{CumulantSequence, MarginalLaw};
use super::partitions::{catalan, enumerate_partitions, falling_factorial, SetPartition};

/// Largest moment order for tensor-convolution predictions.
pub const MAX_MOMENT_ORDER: usize = 10;

/// Cap on the number of injective block colorings visited for one
/// heterogeneous moment.
const MAX_COLORINGS: u128 = 50_000_000;

/// `τ(a_{c₀} a_{c₁} ⋯ a_{c_{p−1}})` for free `a_c` with free cumulants
/// `cumulants[c]`: the sum over noncrossing partitions with monochromatic
/// blocks of `Π_V κ^{(c(V))}_{|V|}`.
///
/// Evaluated by splitting off the block of the leftmost point; the gaps
/// between consecutive elements of that block are independent intervals.
pub fn free_word_moment_from_cumulants(colors: &[usize], cumulants: &[CumulantSequence]) -> Result<f64> {
    let p = colors.len();
    if p == 0 {
        return Ok(1.0);
    }
    for &c in colors {
        let k = cumulants
            .get(c)
            .ok_or_else(|| Error::InvalidParameter(format!("color {c} has no law")))?;
        if k.len() < p {
            return Err(Error::InvalidParameter(format!(
                "cumulants of color {c} known to order {}, word has length {p}",
                k.len()
            )));
        }
    }
    // f[i][j]: sum over the interval [i, j)
    let mut f = vec![vec![0.0; p + 1]; p + 1];
    for (i, row) in f.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    // t[a][s]: a block currently ending at a with s more elements to place
    // in (a, j), including the closing gap up to j
    let mut t = vec![vec![0.0; p + 1]; p + 1];
    for j in 1..=p {
        for a in (0..j).rev() {
            t[a][0] = f[a + 1][j];
            for s in 1..j - a {
                let mut acc = 0.0;
                for b in a + 1..j {
                    if colors[b] == colors[a] {
                        acc += f[a + 1][b] * t[b][s - 1];
                    }
                }
                t[a][s] = acc;
            }
            let k = &cumulants[colors[a]];
            f[a][j] = (0..j - a).map(|s| k.kappa(s + 1) * t[a][s]).sum();
        }
    }
    Ok(f[0][p])
}

/// [`free_word_moment_from_cumulants`] with `laws[c]` the law of color `c`.
pub fn free_word_moment(colors: &[usize], laws: &[MarginalLaw]) -> Result<f64> {
    let p = colors.len();
    let cumulants = laws.iter().map(|l| l.free_cumulants(p)).collect::<Result<Vec<_>>>()?;
    free_word_moment_from_cumulants(colors, &cumulants)
}

fn check_order(p: usize) -> Result<()> {
    if p > MAX_MOMENT_ORDER {
        Err(Error::OrderGuard { order: p, max: MAX_MOMENT_ORDER })
    } else {
        Ok(())
    }
}

/// A singleton block of a centered law makes the word moment vanish.
fn has_centered_singleton(pi: &SetPartition, kappa1_zero: impl Fn(usize) -> bool) -> bool {
    pi.block_sizes().iter().enumerate().any(|(b, &s)| s == 1 && kappa1_zero(b))
}

/// `p`-th moment of `Σ_i a_i ⊗ a_i` for free `a_i ~ laws[i]`,
/// i.e. `Σ_{i ∈ [d]^p} τ(a_{i₁}⋯a_{i_p})²`, divided by `d^{p/2}` when
/// `dilated`.
///
/// `laws` has either one entry (i.i.d. family of size `d`) or `d` entries.
pub fn tensor_convolution_moment(p: usize, d: usize, laws: &[MarginalLaw], dilated: bool) -> Result<f64> {
    check_order(p)?;
    if d == 0 {
        return Err(Error::InvalidParameter("d must be at least 1".into()));
    }
    if laws.len() != 1 && laws.len() != d {
        return Err(Error::InvalidParameter(format!(
            "expected 1 or {d} laws, got {}",
            laws.len()
        )));
    }
    let scale = if dilated { (d as f64).powf(-(p as f64) / 2.0) } else { 1.0 };
    if p == 0 {
        return Ok(d as f64 * scale);
    }
    let cumulants = laws.iter().map(|l| l.free_cumulants(p)).collect::<Result<Vec<_>>>()?;
    let partitions = enumerate_partitions(p)?;

    let total = if laws.len() == 1 {
        let k = &cumulants[0];
        let k1_zero = k.kappa(1).abs() <= 1e-15;
        let mut total = 0.0;
        for pi in &partitions {
            let count = falling_factorial(d, pi.num_blocks());
            if count == 0 || (k1_zero && has_centered_singleton(pi, |_| true)) {
                continue;
            }
            let per_block = vec![k.clone(); pi.num_blocks()];
            let colors: Vec<usize> = pi.labels().iter().map(|&l| l as usize).collect();
            let tau = free_word_moment_from_cumulants(&colors, &per_block)?;
            total += count as f64 * tau * tau;
        }
        total
    } else {
        let mut visited: u128 = 0;
        let mut total = 0.0;
        for pi in &partitions {
            let blocks = pi.num_blocks();
            if blocks > d {
                continue;
            }
            visited += falling_factorial(d, blocks);
            if visited > MAX_COLORINGS {
                return Err(Error::InvalidParameter(format!(
                    "heterogeneous moment of order {p} with d = {d} needs more than {MAX_COLORINGS} colorings"
                )));
            }
            let colors: Vec<usize> = pi.labels().iter().map(|&l| l as usize).collect();
            let mut assignment = Vec::with_capacity(blocks);
            let mut used = vec![false; d];
            total += sum_injective(&colors, blocks, &cumulants, &mut assignment, &mut used)?;
        }
        total
    };
    Ok(total * scale)
}

/// Sum of `τ²` over injective maps from blocks to laws.
fn sum_injective(
    colors: &[usize],
    blocks: usize,
    cumulants: &[CumulantSequence],
    assignment: &mut Vec<usize>,
    used: &mut Vec<bool>,
) -> Result<f64> {
    if assignment.len() == blocks {
        let per_block: Vec<CumulantSequence> = assignment.iter().map(|&i| cumulants[i].clone()).collect();
        let tau = free_word_moment_from_cumulants(colors, &per_block)?;
        return Ok(tau * tau);
    }
    let mut acc = 0.0;
    for i in 0..used.len() {
        if !used[i] {
            used[i] = true;
            assignment.push(i);
            acc += sum_injective(colors, blocks, cumulants, assignment, used)?;
            assignment.pop();
            used[i] = false;
        }
    }
    Ok(acc)
}

/// Which limit a prediction refers to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "kebab-case")]
pub enum Regime {
    /// Fixed number of Kraus operators: the dilated tensor convolution.
    FixedD { d: usize, laws: Vec<MarginalLaw> },
    /// `d → ∞` with `n`: the semicircle law. `laws` may name the common
    /// marginal; more than one distinct law is refused.
    GrowingD {
        #[serde(default)]
        laws: Vec<MarginalLaw>,
    },
}

impl Regime {
    pub fn label(&self) -> &'static str {
        match self {
            Self::FixedD { .. } => "fixed-d",
            Self::GrowingD { .. } => "growing-d",
        }
    }
}

/// Limiting moments `p = 1..=p_max` of `Δ`.
pub fn predict_limit_moments(regime: &Regime, p_max: usize) -> Result<Vec<f64>> {
    check_order(p_max)?;
    match regime {
        Regime::FixedD { d, laws } => (1..=p_max).map(|p| tensor_convolution_moment(p, *d, laws, true)).collect(),
        Regime::GrowingD { laws } => {
            if let Some(first) = laws.first() {
                if laws.iter().any(|l| l != first) {
                    return Err(Error::InvalidParameter(
                        "the growing-d limit needs identically distributed Kraus operators".into(),
                    ));
                }
                if !first.is_normalized() {
                    return Err(Error::InvalidParameter(
                        "the growing-d limit needs a centered law with unit variance".into(),
                    ));
                }
            }
            Ok((1..=p_max).map(|p| if p % 2 == 0 { catalan(p / 2) as f64 } else { 0.0 }).collect())
        }
    }
}
