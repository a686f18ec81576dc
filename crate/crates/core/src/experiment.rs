//! Reproducible experiments: configuration, trial execution and report files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{build_delta, Centering, ExpectationModel, Representation};
use crate::ensembles::{sample_family, EnsembleKind, EnsembleSpec};
use crate::error::{Error, Result};
use crate::free_moments::{predict_limit_moments, write_moment_table, DensitySpec, MarginalLaw, Regime, MAX_MOMENT_ORDER};
use crate::linalg::max_dense_dim;
use crate::rng::{domain, Seed};
use crate::stats::{
    compare_report, empirical_moments, esd_from_spectrum, histogram, ks_distance, pool, write_histogram_csv, Esd,
    KsReport, MomentReport, OrderVerdict,
};

pub const REPORT_FILE: &str = "report.json";
pub const HISTOGRAM_FILE: &str = "histogram.csv";
pub const MOMENTS_FILE: &str = "moments.csv";
pub const COMPARISON_FILE: &str = "comparison.json";
pub const DENSITY_FILE: &str = "density.csv";

/// Memory allowed for dense trials running at the same time.
const DENSE_MEMORY_BUDGET: usize = 2 << 30;

/// Number of Kraus operators, possibly tied to `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "DRuleRepr", into = "DRuleRepr")]
pub enum DRule {
    Fixed(usize),
    EqualToN,
    /// `⌈√n⌉`.
    SqrtN,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum DRuleRepr {
    Fixed(usize),
    Named(String),
}

impl TryFrom<DRuleRepr> for DRule {
    type Error = String;

    fn try_from(r: DRuleRepr) -> std::result::Result<Self, String> {
        match r {
            DRuleRepr::Fixed(0) => Err("d must be at least 1".into()),
            DRuleRepr::Fixed(k) => Ok(Self::Fixed(k)),
            DRuleRepr::Named(s) => match s.as_str() {
                "n" => Ok(Self::EqualToN),
                "sqrt-n" => Ok(Self::SqrtN),
                other => Err(format!("unknown d rule {other:?}; expected an integer, \"n\" or \"sqrt-n\"")),
            },
        }
    }
}

impl From<DRule> for DRuleRepr {
    fn from(r: DRule) -> Self {
        match r {
            DRule::Fixed(k) => Self::Fixed(k),
            DRule::EqualToN => Self::Named("n".into()),
            DRule::SqrtN => Self::Named("sqrt-n".into()),
        }
    }
}

impl DRule {
    pub fn resolve(&self, n: usize) -> Result<usize> {
        let d = match *self {
            Self::Fixed(k) => k,
            Self::EqualToN => n,
            Self::SqrtN => {
                let mut r = (n as f64).sqrt() as usize;
                while r * r < n {
                    r += 1;
                }
                while r > 0 && (r - 1) * (r - 1) >= n {
                    r -= 1;
                }
                r
            }
        };
        if d == 0 {
            return Err(Error::Config("d resolves to 0".into()));
        }
        Ok(d)
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self, Self::Fixed(_))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default = "default_output_dir")]
    pub dir: PathBuf,
}

impl Default for Outputs {
    fn default() -> Self {
        Self { dir: default_output_dir() }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_trials() -> usize {
    1
}

fn default_p_max() -> usize {
    6
}

fn default_bins() -> usize {
    50
}

fn default_probes() -> usize {
    64
}

fn default_tolerance() -> f64 {
    0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub ensemble: EnsembleKind,
    pub n: usize,
    pub d: DRule,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed_root: u64,
    /// Defaults to [`ExpectationModel::default_for`] the ensemble.
    #[serde(default)]
    pub expectation: Option<ExpectationModel>,
    #[serde(default = "default_p_max")]
    pub p_max: usize,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
    #[serde(default)]
    pub representation: Representation,
    /// Hutchinson probes per trial on the matrix-free path.
    #[serde(default = "default_probes")]
    pub probes: usize,
    /// Order `p` passes a comparison when the deviation is within
    /// `tolerance·max(1, |predicted_p|)` plus three standard errors.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: Error| Error::Config(e.to_string());
        self.spec().map_err(cfg_err)?;
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.p_max == 0 || self.p_max > MAX_MOMENT_ORDER {
            return Err(Error::Config(format!("p_max must be in 1..={MAX_MOMENT_ORDER}, got {}", self.p_max)));
        }
        if self.histogram_bins == 0 {
            return Err(Error::Config("histogram_bins must be at least 1".into()));
        }
        if self.probes == 0 {
            return Err(Error::Config("probes must be at least 1".into()));
        }
        if !(self.tolerance >= 0.0 && self.tolerance.is_finite()) {
            return Err(Error::Config("tolerance must be a finite non-negative number".into()));
        }
        self.d.resolve(self.n)?;
        self.expectation_model().map_err(cfg_err)?.validate().map_err(cfg_err)?;
        Ok(())
    }

    pub fn spec(&self) -> Result<EnsembleSpec> {
        if !self.ensemble.is_hermitian() {
            return Err(Error::InvalidParameter(format!(
                "ensemble {} does not produce Hermitian Kraus operators",
                self.ensemble.label()
            )));
        }
        EnsembleSpec::new(self.ensemble.clone(), self.n)
    }

    pub fn resolved_d(&self) -> Result<usize> {
        self.d.resolve(self.n)
    }

    pub fn expectation_model(&self) -> Result<ExpectationModel> {
        match &self.expectation {
            Some(m) => Ok(m.clone()),
            None => ExpectationModel::default_for(&self.spec()?),
        }
    }

    /// Fixed `d` predicts the dilated tensor convolution, a `d` that grows
    /// with `n` predicts the semicircle.
    pub fn regime(&self) -> Result<Regime> {
        let law = limit_law(&self.ensemble)?;
        Ok(if self.d.is_fixed() {
            Regime::FixedD { d: self.resolved_d()?, laws: vec![law] }
        } else {
            Regime::GrowingD { laws: vec![law] }
        })
    }

    /// Limiting density to test the pooled ESD against, when one is known.
    pub fn ks_target(&self) -> Result<Option<DensitySpec>> {
        Ok(match self.regime()? {
            Regime::GrowingD { .. } => Some(DensitySpec::Semicircle),
            Regime::FixedD { d, laws } => match laws.as_slice() {
                [MarginalLaw::Rademacher] if d >= 2 => Some(DensitySpec::DilatedKestenMcKay { d }),
                _ => None,
            },
        })
    }

    fn with_defaults(&self) -> Result<Self> {
        let mut c = self.clone();
        c.expectation = Some(self.expectation_model()?);
        Ok(c)
    }
}

/// Large-`n` spectral law of one Kraus operator.
pub fn limit_law(kind: &EnsembleKind) -> Result<MarginalLaw> {
    Ok(match kind {
        EnsembleKind::RotatedRademacher => MarginalLaw::Rademacher,
        EnsembleKind::Gue | EnsembleKind::ComplexGue => MarginalLaw::Semicircle,
        EnsembleKind::WishartCentered => MarginalLaw::CenteredMp,
        EnsembleKind::RotatedDeterministic { spectrum } => {
            let k = spectrum.len() as f64;
            let moments = (1..=MAX_MOMENT_ORDER as i32)
                .map(|p| spectrum.iter().map(|x| x.powi(p)).sum::<f64>() / k)
                .collect();
            MarginalLaw::from_moments(moments)?
        }
        EnsembleKind::Ginibre => {
            return Err(Error::InvalidParameter("Ginibre matrices have no real spectral law".into()))
        }
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub order: usize,
    pub empirical: f64,
    pub std_err: f64,
    pub predicted: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub regime: String,
    pub ensemble: EnsembleSpec,
    pub n: usize,
    pub d: usize,
    pub trials: usize,
    pub seed_root: u64,
    pub expectation: ExpectationModel,
    /// `"dense"` (eigenvalues) or `"matrix-free"` (Hutchinson estimates).
    pub method: String,
    pub moments: Vec<MomentRow>,
    pub ks: Option<KsReport>,
    pub warnings: Vec<String>,
    pub config: ExperimentConfig,
}

impl SimulationReport {
    /// The moment table as a [`MomentReport`]; needs predictions.
    pub fn moment_report(&self) -> Result<MomentReport> {
        let predicted = self
            .moments
            .iter()
            .map(|r| r.predicted)
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| Error::InvalidParameter("the report has no predicted moments".into()))?;
        Ok(MomentReport {
            orders: self.moments.iter().map(|r| r.order).collect(),
            empirical: self.moments.iter().map(|r| r.empirical).collect(),
            empirical_std_err: self.moments.iter().map(|r| r.std_err).collect(),
            predicted,
            regime: self.regime.clone(),
        })
    }
}

#[derive(Clone, Debug)]
pub struct Simulation {
    pub report: SimulationReport,
    /// Pooled ESD; `None` on the matrix-free path.
    pub esd: Option<Esd>,
    pub per_trial: Vec<Vec<f64>>,
}

fn dense_trial_bytes(n: usize) -> usize {
    // complex Δ plus real form and eigensolver workspace
    40usize.saturating_mul(n.saturating_pow(4))
}

/// Runs all trials. Trials run in parallel on the current rayon pool, a few at
/// a time when dense matrices are large, and are merged in trial order.
pub fn run_simulation(cfg: &ExperimentConfig) -> Result<Simulation> {
    cfg.validate()?;
    let cfg = cfg.with_defaults()?;
    let spec = cfg.spec()?;
    let n = cfg.n;
    let d = cfg.resolved_d()?;
    let model = cfg.expectation_model()?;
    let root = Seed::new(cfg.seed_root, 0);

    let dense = match cfg.representation {
        Representation::Auto => n * n <= max_dense_dim(),
        Representation::Dense | Representation::Both => true,
        Representation::MatFree => false,
    };
    let repr = if dense { Representation::Dense } else { Representation::MatFree };
    if dense {
        crate::linalg::matrix::check_dense_dim(n * n)?;
    }

    let centering = Centering::resolve(&model, &spec, root)?;
    let family_seed = root.derive(domain::FAMILY);
    let probe_seed = root.derive(domain::PROBES);

    let run_trial = |t: usize| -> Result<(Vec<f64>, Option<Esd>, Vec<String>)> {
        let family = sample_family(&spec, d, family_seed.with_stream(t as u64))?;
        let delta = build_delta(&family, &centering, repr)?;
        let warnings = delta.warnings().to_vec();
        if dense {
            let esd = esd_from_spectrum(delta.spectrum()?, family_seed.with_stream(t as u64));
            Ok((empirical_moments(&esd, cfg.p_max)?, Some(esd), warnings))
        } else {
            let est = delta.hutchinson_moments(cfg.p_max, cfg.probes, probe_seed.with_stream(t as u64))?;
            Ok((est.iter().map(|e| e.mean).collect(), None, warnings))
        }
    };

    let width = if dense {
        (DENSE_MEMORY_BUDGET / dense_trial_bytes(n).max(1)).clamp(1, rayon::current_num_threads())
    } else {
        rayon::current_num_threads()
    };
    info!("{} trials of n={n}, d={d} ({}), {width} at a time", cfg.trials, if dense { "dense" } else { "matrix-free" });
    let indices: Vec<usize> = (0..cfg.trials).collect();
    let mut results = Vec::with_capacity(cfg.trials);
    for chunk in indices.chunks(width) {
        let part: Vec<_> = chunk.par_iter().map(|&t| run_trial(t)).collect::<Result<_>>()?;
        results.extend(part);
    }

    let mut warnings: Vec<String> = Vec::new();
    let mut per_trial = Vec::with_capacity(cfg.trials);
    let mut esds = Vec::new();
    for (m, e, w) in results {
        per_trial.push(m);
        esds.extend(e);
        for msg in w {
            if !warnings.contains(&msg) {
                warnings.push(msg);
            }
        }
    }

    let regime = cfg.regime()?;
    let predicted = match predict_limit_moments(&regime, cfg.p_max) {
        Ok(p) => Some(p),
        Err(e) => {
            let msg = format!("no prediction: {e}");
            warn!("{msg}");
            warnings.push(msg);
            None
        }
    };
    let summary = MomentReport::from_trials(&per_trial, predicted.clone().unwrap_or(vec![0.0; cfg.p_max]), regime.label())?;
    let moments = (0..cfg.p_max)
        .map(|i| MomentRow {
            order: i + 1,
            empirical: summary.empirical[i],
            std_err: summary.empirical_std_err[i],
            predicted: predicted.as_ref().map(|p| p[i]),
        })
        .collect();

    let esd = if esds.is_empty() { None } else { Some(pool(&esds)?) };
    let ks = match (&esd, cfg.ks_target()?) {
        (Some(e), Some(target)) => Some(ks_distance(e, &target)?),
        _ => None,
    };

    let report = SimulationReport {
        regime: regime.label().to_string(),
        ensemble: spec,
        n,
        d,
        trials: cfg.trials,
        seed_root: cfg.seed_root,
        expectation: model,
        method: if dense { "dense" } else { "matrix-free" }.to_string(),
        moments,
        ks,
        warnings,
        config: cfg.clone(),
    };
    Ok(Simulation { report, esd, per_trial })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

fn histogram_range(esd: &Esd, target: Option<DensitySpec>) -> (f64, f64) {
    let xs = esd.eigenvalues();
    let (mut lo, mut hi) = (xs[0], xs[xs.len() - 1]);
    if let Some(t) = target {
        let (a, b) = t.support();
        lo = lo.min(a);
        hi = hi.max(b);
    }
    if hi - lo <= f64::EPSILON * lo.abs().max(1.0) {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// Runs the simulation and writes `report.json` plus, on the dense path,
/// `histogram.csv` into `out_dir` (default: the configured output directory).
pub fn cmd_simulate(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<Simulation> {
    let sim = run_simulation(cfg)?;
    let dir = out_dir.unwrap_or(&cfg.outputs.dir);
    fs::create_dir_all(dir)?;
    if let Some(esd) = &sim.esd {
        let (lo, hi) = histogram_range(esd, cfg.ks_target()?);
        let bins = histogram(esd.eigenvalues(), cfg.histogram_bins, lo, hi)?;
        write_histogram_csv(fs::File::create(dir.join(HISTOGRAM_FILE))?, &bins)?;
    }
    write_json(&dir.join(REPORT_FILE), &sim.report)?;
    Ok(sim)
}

/// Writes `moments.csv` with the predicted limit moments.
pub fn cmd_predict(regime: &Regime, p_max: usize, out_dir: &Path) -> Result<Vec<f64>> {
    let moments = predict_limit_moments(regime, p_max)?;
    fs::create_dir_all(out_dir)?;
    write_moment_table(fs::File::create(out_dir.join(MOMENTS_FILE))?, regime.label(), &moments)?;
    Ok(moments)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub regime: String,
    pub passed: bool,
    pub orders: Vec<OrderVerdict>,
    pub ks: Option<KsReport>,
    pub simulation: SimulationReport,
}

/// Simulation, prediction and per-order verdicts; also writes
/// `comparison.json`.
pub fn cmd_compare(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<ComparisonReport> {
    let sim = cmd_simulate(cfg, out_dir)?;
    let dir = out_dir.unwrap_or(&cfg.outputs.dir);
    let regime = cfg.regime()?;
    cmd_predict(&regime, cfg.p_max, dir)?;
    let report = sim.report.moment_report()?;
    let tolerances: Vec<f64> = report.predicted.iter().map(|p| cfg.tolerance * p.abs().max(1.0)).collect();
    let orders = compare_report(&report, &tolerances)?;
    let comparison = ComparisonReport {
        regime: regime.label().to_string(),
        passed: orders.iter().all(|v| v.pass),
        orders,
        ks: sim.report.ks.clone(),
        simulation: sim.report,
    };
    write_json(&dir.join(COMPARISON_FILE), &comparison)?;
    Ok(comparison)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityRow {
    pub x: f64,
    pub density: f64,
    pub cdf: f64,
}

#[derive(Clone, Debug)]
pub struct DensityTable {
    pub spec: DensitySpec,
    pub rows: Vec<DensityRow>,
    /// Total mass by a fine trapezoid rule in the angle variable.
    pub mass: f64,
}

/// Node count of the mass check in [`cmd_densities`].
pub const MASS_CHECK_POINTS: usize = 1025;
pub const MASS_TOLERANCE: f64 = 1e-6;

pub fn density_table(spec: &DensitySpec, grid_points: usize) -> Result<DensityTable> {
    spec.validate()?;
    if grid_points < 2 {
        return Err(Error::InvalidParameter("grid_points must be at least 2".into()));
    }
    let (lo, hi) = spec.support();
    let rows = (0..grid_points)
        .map(|k| {
            let x = if k + 1 == grid_points { hi } else { lo + (hi - lo) * k as f64 / (grid_points - 1) as f64 };
            Ok(DensityRow { x, density: spec.density(x), cdf: spec.cdf(x)? })
        })
        .collect::<Result<Vec<_>>>()?;
    let mass = spec.trapezoid_mass(MASS_CHECK_POINTS);
    if (mass - 1.0).abs() > MASS_TOLERANCE {
        return Err(Error::Numerical(format!("density mass {mass} differs from 1")));
    }
    Ok(DensityTable { spec: *spec, rows, mass })
}

/// Writes `density.csv` with columns `x,density,cdf`.
pub fn cmd_densities(spec: &DensitySpec, grid_points: usize, out_dir: &Path) -> Result<DensityTable> {
    let table = density_table(spec, grid_points)?;
    fs::create_dir_all(out_dir)?;
    let mut w = csv::Writer::from_writer(fs::File::create(out_dir.join(DENSITY_FILE))?);
    for r in &table.rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(table)
}

pub mod exit_code {
    pub const SUCCESS: i32 = 0;
    pub const COMPARISON_FAILED: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const RESOURCE_GUARD: i32 = 3;
    pub const RUNTIME: i32 = 4;
}

pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidParameter(_) | Error::OrderGuard { .. } => exit_code::CONFIG,
        Error::DenseLimit { .. } => exit_code::RESOURCE_GUARD,
        _ => exit_code::RUNTIME,
    }
}

/// Runs `f` on a dedicated pool of `threads` workers (all cores if `None`).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        b = b.num_threads(t);
    }
    let pool = b.build().map_err(|e| Error::Config(e.to_string()))?;
    Ok(pool.install(f))
}
