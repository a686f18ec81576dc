//! Empirical spectral distributions, moments, Kolmogorov–Smirnov distances
//! and trial aggregation.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::free_moments::DensitySpec;
use crate::linalg::Spectrum;
use crate::rng::Seed;

/// Empirical spectral distribution: a sorted sample of eigenvalues.
#[derive(Clone, Debug, PartialEq)]
pub struct Esd {
    eigenvalues: Vec<f64>,
    /// Seeds of the trials pooled into this sample.
    seeds: Vec<Seed>,
}

impl Esd {
    pub fn new(mut eigenvalues: Vec<f64>, seeds: Vec<Seed>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::InvalidParameter("an ESD needs at least one eigenvalue".into()));
        }
        if eigenvalues.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("eigenvalues must be finite".into()));
        }
        eigenvalues.sort_by(f64::total_cmp);
        Ok(Self { eigenvalues, seeds })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn seeds(&self) -> &[Seed] {
        &self.seeds
    }
}

pub fn esd_from_spectrum(s: Spectrum, seed: Seed) -> Esd {
    Esd { eigenvalues: s.into_values(), seeds: vec![seed] }
}

/// `(1/N) Σ λ^p` for `p = 1..=p_max`.
pub fn empirical_moments(e: &Esd, p_max: usize) -> Result<Vec<f64>> {
    if p_max == 0 {
        return Err(Error::InvalidParameter("p_max must be at least 1".into()));
    }
    let mut sums = vec![0.0; p_max];
    for &x in &e.eigenvalues {
        let mut pow = 1.0;
        for s in sums.iter_mut() {
            pow *= x;
            *s += pow;
        }
    }
    let n = e.len() as f64;
    Ok(sums.into_iter().map(|s| s / n).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsReport {
    pub statistic: f64,
    pub target: DensitySpec,
    pub sample_size: usize,
}

/// `sup_x |F_emp(x) − F(x)|`, checked on both sides of every jump.
pub fn ks_distance(e: &Esd, target: &DensitySpec) -> Result<KsReport> {
    let xs = &e.eigenvalues;
    let n = xs.len() as f64;
    let mut stat: f64 = 0.0;
    let mut i = 0;
    while i < xs.len() {
        let mut j = i;
        while j < xs.len() && xs[j] == xs[i] {
            j += 1;
        }
        let f = target.cdf(xs[i])?;
        stat = stat.max((f - i as f64 / n).abs()).max((j as f64 / n - f).abs());
        i = j;
    }
    Ok(KsReport { statistic: stat, target: *target, sample_size: xs.len() })
}

/// Pooled sample and per-trial moment statistics.
#[derive(Clone, Debug)]
pub struct TrialAggregate {
    pub pooled: Esd,
    /// `per_trial[t][p−1] = τ(Δ_t^p)`.
    pub per_trial: Vec<Vec<f64>>,
    /// Across-trial sample variance of each moment.
    pub variance: Vec<f64>,
}

/// Across-trial mean and sample variance (zero for a single trial).
pub fn moment_statistics(per_trial: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let k = per_trial.len() as f64;
    let p = per_trial.first().map_or(0, Vec::len);
    let mean: Vec<f64> = (0..p).map(|i| per_trial.iter().map(|m| m[i]).sum::<f64>() / k).collect();
    let var = (0..p)
        .map(|i| {
            if per_trial.len() < 2 {
                0.0
            } else {
                per_trial.iter().map(|m| (m[i] - mean[i]).powi(2)).sum::<f64>() / (k - 1.0)
            }
        })
        .collect();
    (mean, var)
}

pub fn aggregate_trials(esds: &[Esd], p_max: usize) -> Result<TrialAggregate> {
    if esds.len() < 2 {
        return Err(Error::InvalidParameter("aggregation needs at least two trials".into()));
    }
    let per_trial = esds.iter().map(|e| empirical_moments(e, p_max)).collect::<Result<Vec<_>>>()?;
    let (_, variance) = moment_statistics(&per_trial);
    let pooled = pool(esds)?;
    Ok(TrialAggregate { pooled, per_trial, variance })
}

pub fn pool(esds: &[Esd]) -> Result<Esd> {
    let values: Vec<f64> = esds.iter().flat_map(|e| e.eigenvalues.iter().copied()).collect();
    let seeds = esds.iter().flat_map(|e| e.seeds.iter().copied()).collect();
    Esd::new(values, seeds)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub orders: Vec<usize>,
    pub empirical: Vec<f64>,
    pub empirical_std_err: Vec<f64>,
    pub predicted: Vec<f64>,
    pub regime: String,
}

impl MomentReport {
    /// Mean over trials with standard error `√(var/k)`.
    pub fn from_trials(per_trial: &[Vec<f64>], predicted: Vec<f64>, regime: &str) -> Result<Self> {
        if per_trial.is_empty() {
            return Err(Error::InvalidParameter("no trials to report".into()));
        }
        let (mean, var) = moment_statistics(per_trial);
        if predicted.len() != mean.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} predicted moments for {} empirical ones",
                predicted.len(),
                mean.len()
            )));
        }
        let k = per_trial.len() as f64;
        Ok(Self {
            orders: (1..=mean.len()).collect(),
            empirical_std_err: var.iter().map(|v| (v / k).sqrt()).collect(),
            empirical: mean,
            predicted,
            regime: regime.to_string(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderVerdict {
    pub order: usize,
    pub empirical: f64,
    pub predicted: f64,
    pub std_err: f64,
    pub tolerance: f64,
    pub deviation: f64,
    pub pass: bool,
}

/// Order `p` passes iff `|empirical − predicted| ≤ tolerance_p + 3·stderr_p`.
pub fn compare_report(m: &MomentReport, tolerances: &[f64]) -> Result<Vec<OrderVerdict>> {
    if tolerances.len() != m.orders.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} tolerances for {} orders",
            tolerances.len(),
            m.orders.len()
        )));
    }
    Ok((0..m.orders.len())
        .map(|i| {
            let deviation = (m.empirical[i] - m.predicted[i]).abs();
            OrderVerdict {
                order: m.orders[i],
                empirical: m.empirical[i],
                predicted: m.predicted[i],
                std_err: m.empirical_std_err[i],
                tolerance: tolerances[i],
                deviation,
                pass: deviation <= tolerances[i] + 3.0 * m.empirical_std_err[i],
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_left: f64,
    pub bin_right: f64,
    pub count: usize,
    pub density: f64,
}

/// Equal-width histogram on `[lo, hi]`; values outside are clamped into the
/// end bins.
pub fn histogram(values: &[f64], bins: usize, lo: f64, hi: f64) -> Result<Vec<HistogramBin>> {
    if bins == 0 || !(hi > lo) {
        return Err(Error::InvalidParameter("histogram needs bins ≥ 1 and hi > lo".into()));
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in values {
        let b = ((x - lo) / width).floor();
        let b = if b < 0.0 { 0 } else { (b as usize).min(bins - 1) };
        counts[b] += 1;
    }
    let total = values.len().max(1) as f64;
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(b, count)| HistogramBin {
            bin_left: lo + b as f64 * width,
            bin_right: lo + (b + 1) as f64 * width,
            count,
            density: count as f64 / (total * width),
        })
        .collect())
}

pub fn write_histogram_csv<W: Write>(out: W, bins: &[HistogramBin]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for b in bins {
        w.serialize(b)?;
    }
    w.flush()?;
    Ok(())
}
