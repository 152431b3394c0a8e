//! C ABI over the `split_hmc` library.
//!
//! Every function returns a [`ShmcStatus`]; outputs go through pointer
//! arguments. On failure, [`shmc_last_error`] returns a message for the
//! calling thread. Handles are opaque and must be released with their
//! `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use split_hmc::diagnostics::iac;
use split_hmc::integrators::{Dynamics, IntegratorKind, IntegratorSpec};
use split_hmc::model::{self, Scheme};
use split_hmc::precompute::{build_reference, QuadraticReference};
use split_hmc::rng::{RngStream, STREAM_DATA};
use split_hmc::sampler::{run_chain, ChainConfig, ChainOutput};
use split_hmc::targets::{generate_simdata, load_dataset, LogisticPosterior, Target};
use split_hmc::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShmcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NotPositiveDefinite = 4,
    NoConvergence = 5,
    NonFinite = 6,
    Unstable = 7,
    Io = 8,
    Parse = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShmcMethod {
    Kdk = 0,
    UncondKrk = 1,
    PrecondVerlet = 2,
    PrecondKrk = 3,
    PrecondRkr = 4,
}

impl From<ShmcMethod> for IntegratorKind {
    fn from(m: ShmcMethod) -> Self {
        match m {
            ShmcMethod::Kdk => IntegratorKind::Kdk,
            ShmcMethod::UncondKrk => IntegratorKind::UncondKrk,
            ShmcMethod::PrecondVerlet => IntegratorKind::PrecondVerlet,
            ShmcMethod::PrecondKrk => IntegratorKind::PrecondKrk,
            ShmcMethod::PrecondRkr => IntegratorKind::PrecondRkr,
        }
    }
}

/// One-step schemes of the scalar model problem.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShmcScheme {
    Krk = 0,
    Rkr = 1,
    Kdk = 2,
}

impl From<ShmcScheme> for Scheme {
    fn from(s: ShmcScheme) -> Self {
        match s {
            ShmcScheme::Krk => Scheme::Krk,
            ShmcScheme::Rkr => Scheme::Rkr,
            ShmcScheme::Kdk => Scheme::Kdk,
        }
    }
}

/// Logistic-regression posterior.
pub struct ShmcTarget(LogisticPosterior);

/// Quadratic reference at the posterior mode.
pub struct ShmcReference(QuadraticReference);

/// Recorded chain.
pub struct ShmcChain(ChainOutput);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> ShmcStatus {
    match e {
        Error::DimensionMismatch { .. } => ShmcStatus::DimensionMismatch,
        Error::NotSpd { .. } => ShmcStatus::NotPositiveDefinite,
        Error::EigenNoConvergence { .. } | Error::MapNoConvergence { .. } | Error::ProtocolSearch { .. } => {
            ShmcStatus::NoConvergence
        }
        Error::NonFinite(_) => ShmcStatus::NonFinite,
        Error::Unstable { .. } => ShmcStatus::Unstable,
        Error::Io(_) => ShmcStatus::Io,
        Error::Parse { .. } | Error::Json(_) => ShmcStatus::Parse,
        _ => ShmcStatus::InvalidArgument,
    }
}

enum Fail {
    Status(ShmcStatus, String),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn null(what: &str) -> Fail {
    Fail::Status(ShmcStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> ShmcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            ShmcStatus::Ok
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Status(s, m))) => {
            set_error(&m);
            s
        }
        Err(_) => {
            set_error("internal panic");
            ShmcStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn write_out<T>(out: *mut T, v: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

fn copy_into<T: Copy>(src: &[T], dst: &mut [T]) -> Result<(), Fail> {
    if dst.len() < src.len() {
        return Err(Fail::Status(
            ShmcStatus::BufferTooSmall,
            format!("buffer holds {} values, {} needed", dst.len(), src.len()),
        ));
    }
    dst[..src.len()].copy_from_slice(src);
    Ok(())
}

/// Message for the last failed call on this thread; empty after success.
/// Valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn shmc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Simulated logistic-regression posterior with `n` rows and `d_minus_1`
/// features.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn shmc_target_simdata(
    seed: u64,
    n: usize,
    d_minus_1: usize,
    gamma2: f64,
    prior_variance: f64,
    out: *mut *mut ShmcTarget,
) -> ShmcStatus {
    guard(|| {
        let sim = generate_simdata(&mut RngStream::new(seed, STREAM_DATA), n, d_minus_1, gamma2)?;
        let t = LogisticPosterior::new(sim.dataset, prior_variance)?;
        write_out(out, Box::into_raw(Box::new(ShmcTarget(t))), "out")
    })
}

/// Posterior for a CSV file or JSON manifest.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` as for [`shmc_target_simdata`].
#[no_mangle]
pub unsafe extern "C" fn shmc_target_from_file(
    path: *const c_char,
    prior_variance: f64,
    out: *mut *mut ShmcTarget,
) -> ShmcStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        let p = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Fail::Status(ShmcStatus::InvalidArgument, "path is not UTF-8".into()))?;
        let t = LogisticPosterior::new(load_dataset(Path::new(p))?, prior_variance)?;
        write_out(out, Box::into_raw(Box::new(ShmcTarget(t))), "out")
    })
}

/// Parameter dimension `d` (features plus intercept), or 0 for null.
///
/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn shmc_target_dim(t: *const ShmcTarget) -> usize {
    t.as_ref().map_or(0, |t| t.0.dim())
}

/// Number of data rows, or 0 for null.
///
/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn shmc_target_rows(t: *const ShmcTarget) -> usize {
    t.as_ref().map_or(0, |t| t.0.dataset().n())
}

/// Potential `U(θ)`.
///
/// # Safety
/// `theta` must point to `len` doubles; `out` to one.
#[no_mangle]
pub unsafe extern "C" fn shmc_target_potential(
    t: *const ShmcTarget,
    theta: *const f64,
    len: usize,
    out: *mut f64,
) -> ShmcStatus {
    guard(|| {
        let t = handle(t, "target")?;
        let th = slice(theta, len, "theta")?;
        write_out(out, t.0.potential(th)?, "out")
    })
}

/// Gradient `∇U(θ)` into `grad` (length `len`).
///
/// # Safety
/// `theta` and `grad` must each point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn shmc_target_gradient(
    t: *const ShmcTarget,
    theta: *const f64,
    len: usize,
    grad: *mut f64,
) -> ShmcStatus {
    guard(|| {
        let t = handle(t, "target")?;
        let th = slice(theta, len, "theta")?;
        let g = t.0.gradient(th)?;
        copy_into(&g, slice_mut(grad, len, "grad")?)
    })
}

/// # Safety
/// `t` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn shmc_target_free(t: *mut ShmcTarget) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// MAP point, Hessian and factorizations, starting the search at zero.
///
/// # Safety
/// `t` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn shmc_reference_build(t: *const ShmcTarget, out: *mut *mut ShmcReference) -> ShmcStatus {
    guard(|| {
        let t = handle(t, "target")?;
        let (r, _) = build_reference(&t.0, &vec![0.0; t.0.dim()])?;
        write_out(out, Box::into_raw(Box::new(ShmcReference(r))), "out")
    })
}

/// # Safety
/// `r` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn shmc_reference_dim(r: *const ShmcReference) -> usize {
    r.as_ref().map_or(0, |r| r.0.dim())
}

/// Ascending rotation frequencies into `out` (capacity `len`).
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn shmc_reference_frequencies(r: *const ShmcReference, out: *mut f64, len: usize) -> ShmcStatus {
    guard(|| {
        let r = handle(r, "reference")?;
        copy_into(r.0.frequencies(), slice_mut(out, len, "out")?)
    })
}

/// MAP point into `out` (capacity `len`).
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn shmc_reference_mode(r: *const ShmcReference, out: *mut f64, len: usize) -> ShmcStatus {
    guard(|| {
        let r = handle(r, "reference")?;
        copy_into(r.0.theta_star(), slice_mut(out, len, "out")?)
    })
}

/// # Safety
/// `r` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn shmc_reference_free(r: *mut ShmcReference) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Runs `n_samples` HMC transitions from the mode. `reference` may be null
/// only for [`ShmcMethod::Kdk`], which then starts at zero.
///
/// # Safety
/// Handles must be live (or `reference` null); `out` writable.
#[no_mangle]
pub unsafe extern "C" fn shmc_chain_run(
    t: *const ShmcTarget,
    reference: *const ShmcReference,
    method: ShmcMethod,
    eps_bar: f64,
    steps: usize,
    n_samples: usize,
    seed: u64,
    out: *mut *mut ShmcChain,
) -> ShmcStatus {
    guard(|| {
        let t = handle(t, "target")?;
        let r = reference.as_ref().map(|r| &r.0);
        let dynamics = Dynamics::new(&t.0, r)?;
        let spec = IntegratorSpec::new(method.into(), eps_bar, steps)?;
        let chain = run_chain(&dynamics, &ChainConfig::new(spec, n_samples, seed))?;
        write_out(out, Box::into_raw(Box::new(ShmcChain(chain))), "out")
    })
}

/// # Safety
/// `c` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn shmc_chain_samples_count(c: *const ShmcChain) -> usize {
    c.as_ref().map_or(0, |c| c.0.n_samples())
}

/// # Safety
/// `c` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn shmc_chain_dim(c: *const ShmcChain) -> usize {
    c.as_ref().map_or(0, |c| c.0.dim)
}

/// # Safety
/// `c` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn shmc_chain_acceptance_rate(c: *const ShmcChain) -> f64 {
    c.as_ref().map_or(f64::NAN, |c| c.0.acceptance_rate())
}

/// # Safety
/// `c` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn shmc_chain_grad_evals(c: *const ShmcChain) -> u64 {
    c.as_ref().map_or(0, |c| c.0.grad_evals)
}

/// Row-major `samples × dim` values into `out` (capacity `len`).
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn shmc_chain_samples(c: *const ShmcChain, out: *mut f64, len: usize) -> ShmcStatus {
    guard(|| {
        let c = handle(c, "chain")?;
        copy_into(&c.0.samples, slice_mut(out, len, "out")?)
    })
}

/// Per-sample accept flags (0/1) into `out` (capacity `len`).
///
/// # Safety
/// `out` must point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn shmc_chain_accepted(c: *const ShmcChain, out: *mut u8, len: usize) -> ShmcStatus {
    guard(|| {
        let c = handle(c, "chain")?;
        let flags: Vec<u8> = c.0.accepted.iter().map(|a| u8::from(*a)).collect();
        copy_into(&flags, slice_mut(out, len, "out")?)
    })
}

/// Per-sample energy errors into `out` (capacity `len`); divergences are `+inf`.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn shmc_chain_energy_errors(c: *const ShmcChain, out: *mut f64, len: usize) -> ShmcStatus {
    guard(|| {
        let c = handle(c, "chain")?;
        copy_into(&c.0.energy_errors, slice_mut(out, len, "out")?)
    })
}

/// # Safety
/// `c` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn shmc_chain_free(c: *mut ShmcChain) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Integrated autocorrelation time of a series (window constant 5).
///
/// # Safety
/// `values` must point to `len` doubles; `out` to one.
#[no_mangle]
pub unsafe extern "C" fn shmc_iac(values: *const f64, len: usize, out: *mut f64) -> ShmcStatus {
    guard(|| {
        let v = slice(values, len, "values")?;
        write_out(out, iac(v)?, "out")
    })
}

/// `ρ(ε, κ)` of the scalar model problem.
///
/// # Safety
/// `out` must point to one writable double.
#[no_mangle]
pub unsafe extern "C" fn shmc_model_rho(scheme: ShmcScheme, eps: f64, kappa: f64, out: *mut f64) -> ShmcStatus {
    guard(|| write_out(out, model::rho(&scheme.into(), eps, kappa)?, "out"))
}

/// Largest stable step of the scalar model problem (`+inf` if unbounded).
///
/// # Safety
/// `out` must point to one writable double.
#[no_mangle]
pub unsafe extern "C" fn shmc_model_stability_limit(scheme: ShmcScheme, kappa: f64, out: *mut f64) -> ShmcStatus {
    guard(|| write_out(out, model::stability_limit(&scheme.into(), kappa)?, "out"))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn shmc_version() -> *const c_char {
    static V: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    V.as_ptr().cast()
}
