//! C ABI over `kraus-spectra`.
//!
//! Every fallible function returns a [`KsStatus`]; on failure the message is
//! kept per thread and can be fetched with [`ks_last_error_message`]. Strings
//! handed out by this library must be released with [`ks_string_free`],
//! handles with their matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use kraus_spectra::experiment::{run_simulation, with_threads, ExperimentConfig, Simulation};
use kraus_spectra::free_moments::{nc2_count, predict_limit_moments, DensitySpec, MarginalLaw, Regime};
use kraus_spectra::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    DenseLimit = 4,
    Numerical = 5,
    Io = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KsLaw {
    Rademacher = 0,
    Semicircle = 1,
    CenteredMp = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KsDensity {
    Semicircle = 0,
    KestenMckay = 1,
    DilatedKestenMckay = 2,
}

/// Parsed experiment configuration.
pub struct KsExperiment {
    config: ExperimentConfig,
}

/// Finished simulation.
pub struct KsSimulation {
    sim: Simulation,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> KsStatus {
    match e {
        Error::Config(_) => KsStatus::Config,
        Error::DenseLimit { .. } => KsStatus::DenseLimit,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => KsStatus::Io,
        Error::EigenNoConvergence { .. } | Error::EigenCheck { .. } | Error::Numerical(_) | Error::SingularDraw { .. } => {
            KsStatus::Numerical
        }
        _ => KsStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (KsStatus, String)>) -> KsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => KsStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            KsStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (KsStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (KsStatus, String) {
    (KsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn out_slice<'a>(ptr: *mut f64, len: usize, need: usize) -> Result<&'a mut [f64], (KsStatus, String)> {
    if ptr.is_null() {
        return Err(null("output buffer"));
    }
    if len < need {
        return Err((KsStatus::InvalidArgument, format!("buffer holds {len} values, {need} needed")));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, need))
}

/// Message of the last failure on this thread, or null. Free with
/// [`ks_string_free`].
#[no_mangle]
pub extern "C" fn ks_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null_mut(), |c| c.clone().into_raw()))
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ks_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn ks_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a TOML experiment configuration.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ks_experiment_from_toml(toml: *const c_char, out: *mut *mut KsExperiment) -> KsStatus {
    guard(|| {
        if toml.is_null() {
            return Err(null("toml"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(toml)
            .to_str()
            .map_err(|e| (KsStatus::InvalidArgument, format!("configuration is not UTF-8: {e}")))?;
        let config = ExperimentConfig::from_toml_str(text).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(KsExperiment { config }));
        Ok(())
    })
}

/// # Safety
/// `exp` must be null or a handle from [`ks_experiment_from_toml`].
#[no_mangle]
pub unsafe extern "C" fn ks_experiment_free(exp: *mut KsExperiment) {
    if !exp.is_null() {
        drop(Box::from_raw(exp));
    }
}

/// Runs all trials on `threads` workers (0 = all cores).
///
/// # Safety
/// `exp` must be a live experiment handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ks_experiment_run(
    exp: *const KsExperiment,
    threads: usize,
    out: *mut *mut KsSimulation,
) -> KsStatus {
    guard(|| {
        let exp = exp.as_ref().ok_or_else(|| null("experiment"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let threads = (threads > 0).then_some(threads);
        let sim = with_threads(threads, || run_simulation(&exp.config)).map_err(lib_err)?.map_err(lib_err)?;
        *out = Box::into_raw(Box::new(KsSimulation { sim }));
        Ok(())
    })
}

/// # Safety
/// `sim` must be null or a handle from [`ks_experiment_run`].
#[no_mangle]
pub unsafe extern "C" fn ks_simulation_free(sim: *mut KsSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Number of moment orders in the report (0 for a null handle).
///
/// # Safety
/// `sim` must be null or a live simulation handle.
#[no_mangle]
pub unsafe extern "C" fn ks_simulation_moment_count(sim: *const KsSimulation) -> usize {
    sim.as_ref().map_or(0, |s| s.sim.report.moments.len())
}

/// Copies across-trial mean moments and their standard errors; either output
/// may be null.
///
/// # Safety
/// Non-null outputs must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ks_simulation_moments(
    sim: *const KsSimulation,
    empirical: *mut f64,
    std_err: *mut f64,
    len: usize,
) -> KsStatus {
    guard(|| {
        let sim = sim.as_ref().ok_or_else(|| null("simulation"))?;
        let rows = &sim.sim.report.moments;
        if !empirical.is_null() {
            for (o, r) in out_slice(empirical, len, rows.len())?.iter_mut().zip(rows) {
                *o = r.empirical;
            }
        }
        if !std_err.is_null() {
            for (o, r) in out_slice(std_err, len, rows.len())?.iter_mut().zip(rows) {
                *o = r.std_err;
            }
        }
        Ok(())
    })
}

/// Size of the pooled eigenvalue sample (0 on the matrix-free path).
///
/// # Safety
/// `sim` must be null or a live simulation handle.
#[no_mangle]
pub unsafe extern "C" fn ks_simulation_eigenvalue_count(sim: *const KsSimulation) -> usize {
    sim.as_ref().and_then(|s| s.sim.esd.as_ref()).map_or(0, |e| e.len())
}

/// Copies the sorted pooled eigenvalues.
///
/// # Safety
/// `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ks_simulation_eigenvalues(sim: *const KsSimulation, out: *mut f64, len: usize) -> KsStatus {
    guard(|| {
        let sim = sim.as_ref().ok_or_else(|| null("simulation"))?;
        let esd = sim
            .sim
            .esd
            .as_ref()
            .ok_or_else(|| (KsStatus::InvalidArgument, "no eigenvalues on the matrix-free path".to_string()))?;
        out_slice(out, len, esd.len())?.copy_from_slice(esd.eigenvalues());
        Ok(())
    })
}

/// The report as JSON. Free with [`ks_string_free`].
///
/// # Safety
/// `sim` must be a live simulation handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ks_simulation_report_json(sim: *const KsSimulation, out: *mut *mut c_char) -> KsStatus {
    guard(|| {
        let sim = sim.as_ref().ok_or_else(|| null("simulation"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let json = serde_json::to_string_pretty(&sim.sim.report).map_err(|e| lib_err(e.into()))?;
        *out = CString::new(json).map_err(|e| (KsStatus::Io, e.to_string()))?.into_raw();
        Ok(())
    })
}

fn law(l: KsLaw) -> MarginalLaw {
    match l {
        KsLaw::Rademacher => MarginalLaw::Rademacher,
        KsLaw::Semicircle => MarginalLaw::Semicircle,
        KsLaw::CenteredMp => MarginalLaw::CenteredMp,
    }
}

/// Predicted limit moments `p = 1..=p_max` into `out`. `d = 0` selects the
/// growing-`d` (semicircle) limit, otherwise the fixed-`d` limit with `d`
/// copies of `law`.
///
/// # Safety
/// `out` must hold `len ≥ p_max` doubles.
#[no_mangle]
pub unsafe extern "C" fn ks_predict_moments(d: usize, law_kind: KsLaw, p_max: usize, out: *mut f64, len: usize) -> KsStatus {
    guard(|| {
        let regime = if d == 0 {
            Regime::GrowingD { laws: vec![law(law_kind)] }
        } else {
            Regime::FixedD { d, laws: vec![law(law_kind)] }
        };
        let m = predict_limit_moments(&regime, p_max).map_err(lib_err)?;
        out_slice(out, len, m.len())?.copy_from_slice(&m);
        Ok(())
    })
}

/// Density and CDF at `x`; `d` is ignored for the semicircle.
///
/// # Safety
/// `density` and `cdf` must be writable or null.
#[no_mangle]
pub unsafe extern "C" fn ks_density(kind: KsDensity, d: usize, x: f64, density: *mut f64, cdf: *mut f64) -> KsStatus {
    guard(|| {
        let spec = match kind {
            KsDensity::Semicircle => DensitySpec::Semicircle,
            KsDensity::KestenMckay => DensitySpec::new_kesten_mckay(d, false).map_err(lib_err)?,
            KsDensity::DilatedKestenMckay => DensitySpec::new_kesten_mckay(d, true).map_err(lib_err)?,
        };
        if !density.is_null() {
            *density = spec.density(x);
        }
        if !cdf.is_null() {
            *cdf = spec.cdf(x).map_err(lib_err)?;
        }
        Ok(())
    })
}

/// Largest `p` whose pairing count fits in `u64`.
pub const KS_MAX_NC2_ORDER: usize = 73;

/// Number of noncrossing pairings of `p` points.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ks_nc2_count(p: usize, out: *mut u64) -> KsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if p > KS_MAX_NC2_ORDER {
            return Err((KsStatus::InvalidArgument, format!("count for p={p} overflows u64")));
        }
        *out = nc2_count(p) as u64;
        Ok(())
    })
}
