//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Criteria run one after another so that at most one large
//! dense operator is alive at a time.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use kraus_spectra::channel::{
    build_delta, expected_tensor_gue, kraus_defects, Centering, ExpectationModel, KrausSet, Representation,
};
use kraus_spectra::ensembles::{sample_family, sample_gue, EnsembleKind, EnsembleSpec};
use kraus_spectra::experiment::{run_simulation, with_threads, ExperimentConfig, Simulation};
use kraus_spectra::free_moments::{
    catalan, free_word_moment, km_dilated_density, nc2_count, tensor_convolution_moment, MarginalLaw,
};
use kraus_spectra::linalg::{hermitian_eigenvalues, ComplexMatrix, HermitianMatrix};
use kraus_spectra::rng::{domain, Seed};
use kraus_spectra::stats::{empirical_moments, moment_statistics};
use kraus_spectra::{Result, C64};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Result<Verdict> {
    Ok(Verdict { pass, detail })
}

fn simulate(toml: &str) -> Result<Simulation> {
    let cfg = ExperimentConfig::from_toml_str(toml)?;
    with_threads(Some(1), || run_simulation(&cfg))?
}

fn pooled_moments(sim: &Simulation, p_max: usize) -> Result<Vec<f64>> {
    empirical_moments(sim.esd.as_ref().expect("dense run"), p_max)
}

// 1

/// All pairings of `0..p` by matching the first free point with each later one.
fn brute_force_pairings(points: &[usize]) -> Vec<Vec<(usize, usize)>> {
    if points.is_empty() {
        return vec![Vec::new()];
    }
    let first = points[0];
    let mut out = Vec::new();
    for k in 1..points.len() {
        let rest: Vec<usize> = points[1..].iter().copied().filter(|&x| x != points[k]).collect();
        for mut tail in brute_force_pairings(&rest) {
            tail.push((first, points[k]));
            out.push(tail);
        }
    }
    out
}

fn crosses(pairs: &[(usize, usize)]) -> bool {
    pairs.iter().any(|&(a, b)| pairs.iter().any(|&(c, d)| a < c && c < b && b < d))
}

fn c01_noncrossing_pairings() -> Result<Verdict> {
    let mut ok = true;
    let mut counts = Vec::new();
    for (p, expected) in [(2, 1u128), (4, 2), (6, 5), (8, 14)] {
        let points: Vec<usize> = (0..p).collect();
        let brute = brute_force_pairings(&points).iter().filter(|pr| !crosses(pr)).count() as u128;
        let fast = nc2_count(p);
        ok &= brute == expected && fast == expected;
        counts.push(format!("p={p}:{fast}/{brute}"));
    }
    verdict(ok, counts.join(" "))
}

// 2

type Word = Vec<(usize, usize)>;

/// Merges adjacent letters of equal color into powers.
fn normalize(word: &[(usize, usize)]) -> Word {
    let mut out: Word = Vec::new();
    for &(c, k) in word {
        match out.last_mut() {
            Some(last) if last.0 == c => last.1 += k,
            _ => out.push((c, k)),
        }
    }
    out
}

/// `τ(b₁⋯b_m)` for free variables via `τ(Π (b_j − τ(b_j))) = 0` on
/// alternating words, expanded over subsets.
fn alternating_expansion(word: &[(usize, usize)], moments: &[Vec<f64>], memo: &mut HashMap<Word, f64>) -> f64 {
    let w = normalize(word);
    match w.len() {
        0 => return 1.0,
        1 => return moments[w[0].0][w[0].1 - 1],
        _ => {}
    }
    if let Some(&v) = memo.get(&w) {
        return v;
    }
    let m = w.len();
    let taus: Vec<f64> = w.iter().map(|&(c, k)| moments[c][k - 1]).collect();
    let mut acc = 0.0;
    for mask in 0..(1u32 << m) - 1 {
        let sub: Word = (0..m).filter(|j| mask & (1 << j) != 0).map(|j| w[j]).collect();
        let coeff: f64 = (0..m).filter(|j| mask & (1 << j) == 0).map(|j| -taus[j]).product();
        acc += coeff * alternating_expansion(&sub, moments, memo);
    }
    let v = -acc;
    memo.insert(w, v);
    v
}

fn c02_free_word_oracle() -> Result<Verdict> {
    let stock = [MarginalLaw::Rademacher, MarginalLaw::Semicircle];
    let mut worst: f64 = 0.0;
    let mut words = 0;
    for a in &stock {
        for b in &stock {
            let laws = [a.clone(), b.clone()];
            let moments: Vec<Vec<f64>> = laws.iter().map(|l| l.moments(6)).collect::<Result<_>>()?;
            let mut memo = HashMap::new();
            for p in 1..=6 {
                for code in 0..(1usize << p) {
                    let colors: Vec<usize> = (0..p).map(|i| (code >> i) & 1).collect();
                    let letters: Word = colors.iter().map(|&c| (c, 1)).collect();
                    let oracle = alternating_expansion(&letters, &moments, &mut memo);
                    let fast = free_word_moment(&colors, &laws)?;
                    worst = worst.max((fast - oracle).abs());
                    words += 1;
                }
            }
        }
    }
    verdict(worst <= 1e-12, format!("{words} words, max deviation {worst:.2e}"))
}

// 3

fn c03_rademacher_fixed_d() -> Result<Verdict> {
    let sim = simulate(
        "n = 64\nd = 2\ntrials = 20\nseed_root = 3\np_max = 4\nrepresentation = \"dense\"\n\
         [ensemble]\nkind = \"rotated-rademacher\"\n\
         [expectation]\nmode = \"analytic-twirl\"\ntrace_squared_mean = 64.0\ntrace_square_mean = 64.0\n",
    )?;
    let m = pooled_moments(&sim, 4)?;
    let ks = sim.report.ks.as_ref().expect("KS target").statistic;
    let ok = (m[1] - 1.0).abs() <= 0.05 && (m[3] - 1.5).abs() <= 0.1 && ks <= 0.08;
    verdict(ok, format!("m2={:.4} m4={:.4} KS(dilated KM(2))={ks:.4}", m[1], m[3]))
}

// 4

fn c04_dilated_km_at_zero() -> Result<Verdict> {
    let target = 1.0 / std::f64::consts::PI;
    let mut gaps = Vec::new();
    let mut closed_form = true;
    for d in [4usize, 16, 64] {
        let f = km_dilated_density(d, 0.0)?;
        closed_form &= (f - (1.0 - 1.0 / d as f64).sqrt() / std::f64::consts::PI).abs() <= 1e-15;
        gaps.push((f - target).abs());
    }
    let ok = closed_form && gaps[0] > gaps[1] && gaps[1] > gaps[2] && gaps[2] < 0.01;
    verdict(ok, format!("gaps {:.5} {:.5} {:.5}", gaps[0], gaps[1], gaps[2]))
}

// 5

fn c05_gue_growing_d() -> Result<Verdict> {
    let sim = simulate(
        "n = 64\nd = \"n\"\ntrials = 10\nseed_root = 5\np_max = 4\nrepresentation = \"dense\"\n\
         [ensemble]\nkind = \"gue\"\n",
    )?;
    let m = pooled_moments(&sim, 4)?;
    let ks = sim.report.ks.as_ref().expect("KS target").statistic;
    let ok = (m[3] - 2.0).abs() <= 0.15 && ks <= 0.05;
    verdict(ok, format!("m4={:.4} KS(semicircle)={ks:.4}", m[3]))
}

// 6

fn c06_gue_fixed_d() -> Result<Verdict> {
    let d = 4;
    let predicted = tensor_convolution_moment(4, d, &[MarginalLaw::Semicircle], true)?;
    let sim = simulate(
        "n = 64\nd = 4\ntrials = 30\nseed_root = 6\np_max = 4\nrepresentation = \"dense\"\n\
         [ensemble]\nkind = \"gue\"\n",
    )?;
    let m = pooled_moments(&sim, 4)?;
    let ok = (predicted - (2.0 + 2.0 / d as f64)).abs() <= 1e-12 && (m[3] - predicted).abs() <= 0.15;
    verdict(ok, format!("m4={:.4} predicted={predicted:.4}", m[3]))
}

// 7

fn c07_centering_irrelevant_at_d1() -> Result<Verdict> {
    let base = "n = 64\nd = 1\ntrials = 8\nseed_root = 7\np_max = 4\nrepresentation = \"dense\"\n\
                [ensemble]\nkind = \"gue\"\n";
    let zero = simulate(&format!("{base}[expectation]\nmode = \"zero\"\n"))?;
    let centered = simulate(&format!("{base}[expectation]\nmode = \"analytic-gue\"\n"))?;
    let limit = (catalan(2) as f64).powi(2);
    let (z, c) = (&zero.report.moments[3], &centered.report.moments[3]);
    let near = |m: f64, se: f64| (m - limit).abs() <= 0.1 * limit + 3.0 * se;
    let diff = (z.empirical - c.empirical).abs();
    let ok = diff < 0.1 && near(z.empirical, z.std_err) && near(c.empirical, c.std_err);
    verdict(
        ok,
        format!(
            "m4 zero={:.4}±{:.4} centered={:.4}±{:.4} diff={diff:.4}",
            z.empirical, z.std_err, c.empirical, c.std_err
        ),
    )
}

// 8

fn c08_channel_exactness() -> Result<Verdict> {
    let rad = EnsembleSpec::new(EnsembleKind::RotatedRademacher, 64)?;
    let mut worst: f64 = 0.0;
    for t in 0..5 {
        let ks = KrausSet::sample(&rad, 8, Seed::new(8, t))?;
        let def = kraus_defects(&ks)?;
        worst = worst.max(def.trace_preserving).max(def.unital);
    }
    let gue = EnsembleSpec::new(EnsembleKind::Gue, 64)?;
    let mean_defect = |d: usize| -> Result<f64> {
        let mut s = 0.0;
        for t in 0..50 {
            let def = kraus_defects(&KrausSet::sample(&gue, d, Seed::new(80 + d as u64, t))?)?;
            s += def.trace_preserving.max(def.unital);
        }
        Ok(s / 50.0)
    };
    let (d4, d32) = (mean_defect(4)?, mean_defect(32)?);
    verdict(worst <= 1e-9 && d32 < d4, format!("rademacher max {worst:.2e}; GUE mean d=4 {d4:.4} d=32 {d32:.4}"))
}

// 9

fn c09_gue_expectation() -> Result<Verdict> {
    let n = 4;
    let draws = 20_000;
    let dim = n * n;
    let mut sum = vec![C64::new(0.0, 0.0); dim * dim];
    let mut sum_sq = vec![(0.0f64, 0.0f64); dim * dim];
    for k in 0..draws {
        let w = sample_gue(n, Seed::new(9, k))?;
        let w = w.as_matrix();
        for (r, (i, j)) in (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).enumerate() {
            for (c, (a, b)) in (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).enumerate() {
                let x = w[(i, a)] * w[(j, b)].conj();
                sum[r * dim + c] += x;
                sum_sq[r * dim + c].0 += x.re * x.re;
                sum_sq[r * dim + c].1 += x.im * x.im;
            }
        }
    }
    let expected = expected_tensor_gue(n)?;
    let e = expected.matrix.as_matrix();
    let nd = draws as f64;
    let within = |mean: f64, sq: f64, target: f64| {
        let var = (sq / nd - mean * mean).max(0.0) * nd / (nd - 1.0);
        let sigma = (var / nd).sqrt();
        if sigma == 0.0 {
            (mean - target).abs() <= 1e-12
        } else {
            (mean - target).abs() <= 3.0 * sigma
        }
    };
    let mut outside = 0;
    for r in 0..dim {
        for c in 0..dim {
            let mean = sum[r * dim + c] / nd;
            let (sq_re, sq_im) = sum_sq[r * dim + c];
            if !within(mean.re, sq_re, e[(r, c)].re) || !within(mean.im, sq_im, e[(r, c)].im) {
                outside += 1;
            }
        }
    }

    // n·E − n·ψψ* is the flip with its diagonal removed
    let flip = ComplexMatrix::from_fn(dim, dim, |r, c| {
        let (i, j, a, b) = (r / n, r % n, c / n, c % n);
        let psi = if i == j && a == b { 1.0 } else { 0.0 };
        e[(r, c)] * n as f64 - psi
    });
    let spectrum = hermitian_eigenvalues(&HermitianMatrix::new(flip)?)?;
    let count = |v: f64| spectrum.values().iter().filter(|x| (*x - v).abs() <= 1e-9).count();
    let (plus, minus, zero) = (count(1.0), count(-1.0), count(0.0));
    let half = n * (n - 1) / 2;
    let ok = outside == 0 && plus == half && minus == half && zero == n;
    verdict(ok, format!("{outside} of {} entries outside 3σ; flip multiplicities +1:{plus} −1:{minus} 0:{zero}", dim * dim))
}

// 10

fn c10_hutchinson_vs_dense() -> Result<Verdict> {
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for (kind, d) in [(EnsembleKind::RotatedRademacher, 2), (EnsembleKind::Gue, 4)] {
        let spec = EnsembleSpec::new(kind, 16)?;
        let root = Seed::new(10, 0);
        let family = sample_family(&spec, d, root.derive(domain::FAMILY))?;
        let centering = Centering::resolve(&ExpectationModel::default_for(&spec)?, &spec, root)?;
        let delta = build_delta(&family, &centering, Representation::Both)?;
        let spectrum = delta.spectrum()?;
        let exact: Vec<f64> = (1..=4)
            .map(|p| spectrum.values().iter().map(|x| x.powi(p)).sum::<f64>() / spectrum.dim() as f64)
            .collect();
        let est = delta.hutchinson_moments(4, 256, root.derive(domain::PROBES))?;
        for (e, x) in est.iter().zip(&exact) {
            let z = (e.mean - x).abs() / e.std_err;
            worst = worst.max(z);
            ok &= (e.mean - x).abs() <= 3.0 * e.std_err;
        }
    }
    verdict(ok, format!("max |z| = {worst:.2}"))
}

// 11

fn c11_variance_decreases() -> Result<Verdict> {
    let mut variances = Vec::new();
    for n in [16usize, 32, 64] {
        let spec = EnsembleSpec::new(EnsembleKind::Gue, n)?;
        let centering = Centering::analytic(&ExpectationModel::AnalyticGue, n)?;
        let family_seed = Seed::new(11, 0).derive(domain::FAMILY);
        let mut second = Vec::new();
        for t in 0..30 {
            let family = sample_family(&spec, 8, family_seed.with_stream(t))?;
            let delta = build_delta(&family, &centering, Representation::Dense)?;
            second.push(vec![delta.low_moments()?[1]]);
        }
        variances.push(moment_statistics(&second).1[0]);
    }
    let ok = variances[0] > variances[1] && variances[1] > variances[2];
    verdict(ok, format!("var τ(Δ²): {:.3e} {:.3e} {:.3e}", variances[0], variances[1], variances[2]))
}

// 12

fn run_cli(config: &Path, out: &Path, threads: usize) -> Result<bool> {
    let status = Command::new(env!("CARGO_BIN_EXE_kraus-spectra"))
        .args(["--threads", &threads.to_string(), "simulate", "--config"])
        .arg(config)
        .arg("--output")
        .arg(out)
        .env("RUST_LOG", "warn")
        .status()?;
    Ok(status.success())
}

fn snapshot(dir: &Path) -> Result<Vec<(String, Vec<u8>)>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        files.push((entry.file_name().to_string_lossy().into_owned(), fs::read(entry.path())?));
    }
    files.sort();
    Ok(files)
}

fn c12_reproducibility() -> Result<Verdict> {
    let configs = [
        "n = 16\nd = 2\ntrials = 4\nseed_root = 12\n[ensemble]\nkind = \"rotated-rademacher\"\n",
        "n = 8\nd = \"sqrt-n\"\ntrials = 3\nseed_root = 12\n[ensemble]\nkind = \"wishart-centered\"\n",
        "n = 12\nd = 3\ntrials = 3\nseed_root = 12\nrepresentation = \"mat-free\"\nprobes = 16\n\
         [ensemble]\nkind = \"complex-gue\"\n",
    ];
    let tmp = tempfile::tempdir()?;
    let mut ok = true;
    let mut files = 0;
    for (i, cfg) in configs.iter().enumerate() {
        let path = tmp.path().join(format!("c{i}.toml"));
        fs::write(&path, cfg)?;
        let mut outputs = Vec::new();
        for (run, threads) in [1, 1, 8, 8].into_iter().enumerate() {
            let out = tmp.path().join(format!("c{i}-r{run}"));
            ok &= run_cli(&path, &out, threads)?;
            outputs.push(snapshot(&out)?);
        }
        files += outputs[0].len();
        ok &= !outputs[0].is_empty() && outputs.iter().all(|o| *o == outputs[0]);
    }
    verdict(ok, format!("{} configs × 4 runs (1,1,8,8 threads), {files} files compared", configs.len()))
}

fn main() {
    type Check = fn() -> Result<Verdict>;
    let criteria: [(&str, Check, Option<f64>); 12] = [
        ("noncrossing pairing counts", c01_noncrossing_pairings, Some(1.0)),
        ("free word moments vs alternating expansion", c02_free_word_oracle, Some(10.0)),
        ("rotated Rademacher, n=64, d=2: ESD vs dilated Kesten-McKay", c03_rademacher_fixed_d, Some(120.0)),
        ("dilated Kesten-McKay density at 0 tends to 1/π", c04_dilated_km_at_zero, None),
        ("GUE, n=d=64: ESD vs semicircle", c05_gue_growing_d, Some(300.0)),
        ("GUE, n=64, d=4: fourth moment", c06_gue_fixed_d, None),
        ("GUE, d=1: zero vs analytic centering", c07_centering_irrelevant_at_d1, None),
        ("Kraus defects", c08_channel_exactness, None),
        ("GUE tensor expectation vs Monte Carlo", c09_gue_expectation, None),
        ("Hutchinson vs dense moments", c10_hutchinson_vs_dense, None),
        ("variance of τ(Δ²) decreases in n", c11_variance_decreases, None),
        ("byte-identical simulate outputs at 1 and 8 threads", c12_reproducibility, None),
    ];
    let mut failed = Vec::new();
    for (i, (name, check, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        let (pass, detail) = match result {
            Ok(v) => (v.pass, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let in_time = limit.is_none_or(|l| secs < l);
        let timing = match limit {
            Some(l) => format!("{secs:.1} s, limit {l:.0} s"),
            None => format!("{secs:.1} s"),
        };
        let pass = pass && in_time;
        println!("{} {:>2} {name}: {detail} ({timing})", if pass { "PASS" } else { "FAIL" }, i + 1);
        if !pass {
            failed.push(i + 1);
        }
    }
    if failed.is_empty() {
        println!("all {} criteria passed", criteria.len());
    } else {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
