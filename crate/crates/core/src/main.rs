use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{error, info};

use kraus_spectra::channel::Representation;
use kraus_spectra::experiment::{
    cmd_compare, cmd_densities, cmd_predict, cmd_simulate, exit_code, exit_code_for, with_threads, ExperimentConfig,
};
use kraus_spectra::free_moments::{DensitySpec, MarginalLaw, Regime};
use kraus_spectra::{Error, Result};

#[derive(Parser)]
#[command(name = "kraus-spectra", version, about = "Spectra of random quantum channels with Hermitian Kraus operators")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample channels and write `report.json` and `histogram.csv`.
    Simulate(RunArgs),
    /// Simulate, predict and compare order by order; exits 1 on any failure.
    Compare(RunArgs),
    /// Write predicted limit moments to `moments.csv`.
    Predict(PredictArgs),
    /// Write a density/CDF grid to `density.csv`.
    Densities(DensityArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Force dense eigenvalues.
    #[arg(long, conflicts_with = "matfree")]
    dense: bool,
    /// Force matrix-free moment estimates.
    #[arg(long)]
    matfree: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegimeArg {
    FixedD,
    GrowingD,
}

#[derive(Clone, Copy, ValueEnum)]
enum LawArg {
    Rademacher,
    Semicircle,
    CenteredMp,
}

impl From<LawArg> for MarginalLaw {
    fn from(l: LawArg) -> Self {
        match l {
            LawArg::Rademacher => Self::Rademacher,
            LawArg::Semicircle => Self::Semicircle,
            LawArg::CenteredMp => Self::CenteredMp,
        }
    }
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long, value_enum)]
    regime: RegimeArg,
    /// Marginal law; give one (shared) or `d` of them.
    #[arg(long = "law", value_enum)]
    laws: Vec<LawArg>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, default_value_t = 6)]
    p_max: usize,
    #[arg(long, default_value = "out")]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum DensityKind {
    Semicircle,
    KestenMckay,
    DilatedKestenMckay,
}

#[derive(Args)]
struct DensityArgs {
    #[arg(long, value_enum)]
    kind: DensityKind,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, default_value_t = 201)]
    grid_points: usize,
    #[arg(long, default_value = "out")]
    output: PathBuf,
}

fn load(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if args.dense {
        cfg.representation = Representation::Dense;
    } else if args.matfree {
        cfg.representation = Representation::MatFree;
    }
    Ok(cfg)
}

fn run(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Simulate(args) => {
            let cfg = load(&args)?;
            let sim = cmd_simulate(&cfg, args.output.as_deref())?;
            for row in &sim.report.moments {
                info!("p={} empirical={:.6} ± {:.6}", row.order, row.empirical, row.std_err);
            }
            Ok(exit_code::SUCCESS)
        }
        Command::Compare(args) => {
            let cfg = load(&args)?;
            let cmp = cmd_compare(&cfg, args.output.as_deref())?;
            for v in &cmp.orders {
                println!(
                    "p={:<2} empirical={:+.6} predicted={:+.6} stderr={:.6} {}",
                    v.order,
                    v.empirical,
                    v.predicted,
                    v.std_err,
                    if v.pass { "PASS" } else { "FAIL" }
                );
            }
            if let Some(ks) = &cmp.ks {
                println!("KS vs {}: {:.6} (N={})", ks.target.label(), ks.statistic, ks.sample_size);
            }
            Ok(if cmp.passed { exit_code::SUCCESS } else { exit_code::COMPARISON_FAILED })
        }
        Command::Predict(args) => {
            let laws: Vec<MarginalLaw> = args.laws.iter().map(|&l| l.into()).collect();
            let regime = match args.regime {
                RegimeArg::FixedD => {
                    let d = args.d.ok_or_else(|| Error::Config("--d is required for the fixed-d regime".into()))?;
                    let laws = if laws.is_empty() { vec![MarginalLaw::Semicircle] } else { laws };
                    Regime::FixedD { d, laws }
                }
                RegimeArg::GrowingD => Regime::GrowingD { laws },
            };
            let m = cmd_predict(&regime, args.p_max, &args.output)?;
            for (i, x) in m.iter().enumerate() {
                println!("{},{}", i + 1, x);
            }
            Ok(exit_code::SUCCESS)
        }
        Command::Densities(args) => {
            let spec = match args.kind {
                DensityKind::Semicircle => DensitySpec::Semicircle,
                DensityKind::KestenMckay | DensityKind::DilatedKestenMckay => {
                    let d = args.d.ok_or_else(|| Error::Config("--d is required for Kesten–McKay".into()))?;
                    DensitySpec::new_kesten_mckay(d, matches!(args.kind, DensityKind::DilatedKestenMckay))?
                }
            };
            let t = cmd_densities(&spec, args.grid_points, &args.output)?;
            info!("{}: {} grid points, mass {:.9}", spec.label(), t.rows.len(), t.mass);
            Ok(exit_code::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let code = match with_threads(cli.threads, || run(cli.command)) {
        Ok(Ok(code)) => code,
        Ok(Err(e)) | Err(e) => {
            error!("{e}");
            exit_code_for(&e)
        }
    };
    ExitCode::from(code as u8)
}
