//! C ABI for `quasiprob`.
//!
//! Objects are opaque handles created by `*_new`/`*_simulate`/`*_load` and
//! released with the matching `*_free`. Every fallible call returns a
//! [`QpStatus`]; on failure `qp_last_error_message` describes the error for
//! the calling thread until the next failing call on that thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use quasiprob::dataset_io::{load_dataset, save_dataset};
use quasiprob::estimator::PreparedSamples;
use quasiprob::gaussian_sim::simulate_quadratures;
use quasiprob::pattern::Kernel;
use quasiprob::{Complex64, Error, GaussianStateSpec, Oracle, PatternKernel, PhaseGrid, QuadratureDataset};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    EmptyDataset = 3,
    NonEquispacedGrid = 4,
    Parse = 5,
    Io = 6,
    Metadata = 7,
    Accuracy = 8,
    OscillationResolution = 9,
    ZeroStdErr = 10,
    GridMismatch = 11,
    Panic = 12,
}

impl From<&Error> for QpStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidArgument(_) => QpStatus::InvalidArgument,
            Error::EmptyDataset => QpStatus::EmptyDataset,
            Error::NonEquispacedGrid => QpStatus::NonEquispacedGrid,
            Error::Parse { .. } => QpStatus::Parse,
            Error::Io { .. } => QpStatus::Io,
            Error::Metadata { .. } => QpStatus::Metadata,
            Error::Accuracy(_) => QpStatus::Accuracy,
            Error::OscillationResolution { .. } => QpStatus::OscillationResolution,
            Error::ZeroStdErr { .. } => QpStatus::ZeroStdErr,
            Error::GridMismatch(_) => QpStatus::GridMismatch,
        }
    }
}

/// Quadrature dataset.
pub struct QpDataset(QuadratureDataset);

/// Pattern kernel for one filter width.
pub struct QpKernel(Kernel);

/// Reference evaluator for Gaussian states at one filter width.
pub struct QpOracle(Oracle);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct QpPointEstimate {
    pub value: f64,
    pub std_err: f64,
    pub n: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: QpStatus, msg: impl Into<String>) -> QpStatus {
    set_error(msg.into());
    status
}

fn guard(f: impl FnOnce() -> Result<(), QpStatus>) -> QpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QpStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(QpStatus::Panic, "internal panic"),
    }
}

fn lib(e: Error) -> QpStatus {
    let s = QpStatus::from(&e);
    fail(s, e.to_string())
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, QpStatus> {
    if p.is_null() {
        return Err(fail(QpStatus::NullPointer, "path is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| fail(QpStatus::InvalidArgument, "path is not valid UTF-8"))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, QpStatus> {
    p.as_mut().ok_or_else(|| fail(QpStatus::NullPointer, format!("{name} is null")))
}

unsafe fn in_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, QpStatus> {
    p.as_ref().ok_or_else(|| fail(QpStatus::NullPointer, format!("{name} is null")))
}

fn state(v_x: f64, v_p: f64, squeeze_angle: f64) -> Result<GaussianStateSpec, QpStatus> {
    Ok(GaussianStateSpec::new(v_x, v_p).map_err(lib)?.with_squeeze_angle(squeeze_angle))
}

/// Message for the last failing call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version, a static nul-terminated string.
#[no_mangle]
pub extern "C" fn qp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Simulates `n_per_phase` samples at each of `n_phases` equispaced phases.
///
/// # Safety
/// `out` must be a valid pointer; on success it receives a handle to free with
/// `qp_dataset_free`.
#[no_mangle]
pub unsafe extern "C" fn qp_dataset_simulate(
    v_x: f64,
    v_p: f64,
    squeeze_angle: f64,
    n_phases: usize,
    n_per_phase: usize,
    seed: u64,
    out: *mut *mut QpDataset,
) -> QpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let s = state(v_x, v_p, squeeze_angle)?;
        let grid = PhaseGrid::equispaced(n_phases).map_err(lib)?;
        let d = simulate_quadratures(&s, &grid, n_per_phase, seed).map_err(lib)?;
        *out = Box::into_raw(Box::new(QpDataset(d)));
        Ok(())
    })
}

/// Loads a `phi_rad,x` CSV and its sidecar.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qp_dataset_load(path: *const c_char, out: *mut *mut QpDataset) -> QpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let d = load_dataset(&path_arg(path)?).map_err(lib)?;
        *out = Box::into_raw(Box::new(QpDataset(d)));
        Ok(())
    })
}

/// # Safety
/// `dataset` must be a live handle and `path` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn qp_dataset_save(dataset: *const QpDataset, path: *const c_char) -> QpStatus {
    guard(|| {
        let d = in_arg(dataset, "dataset")?;
        save_dataset(&d.0, &path_arg(path)?).map_err(lib)
    })
}

/// Number of samples; 0 for a null handle.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qp_dataset_len(dataset: *const QpDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.0.len())
}

/// Number of phases; 0 for a null handle.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qp_dataset_n_phases(dataset: *const QpDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.0.phase_grid().n_phases())
}

/// # Safety
/// `dataset` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qp_dataset_free(dataset: *mut QpDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Builds the pattern kernel for filter width `width`; `fast` selects the
/// dense cubic lookup over the sinc series.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qp_kernel_new(width: f64, fast: bool, out: *mut *mut QpKernel) -> QpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if !(width.is_finite() && width > 0.0) {
            return Err(fail(QpStatus::InvalidArgument, format!("width must be positive, got {width}")));
        }
        let k = Kernel::build(width, fast).map_err(lib)?;
        *out = Box::into_raw(Box::new(QpKernel(k)));
        Ok(())
    })
}

/// `chi(xi; w)`; NaN for a null handle.
///
/// # Safety
/// `kernel` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qp_kernel_chi(kernel: *const QpKernel, xi: f64) -> f64 {
    kernel.as_ref().map_or(f64::NAN, |k| k.0.chi(xi))
}

/// Sup-norm deviation of the sinc series from direct quadrature measured at
/// build time; NaN for a null handle.
///
/// # Safety
/// `kernel` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qp_kernel_accuracy(kernel: *const QpKernel) -> f64 {
    kernel.as_ref().map_or(f64::NAN, |k| k.0.table().accuracy())
}

/// # Safety
/// `kernel` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qp_kernel_free(kernel: *mut QpKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}

/// Estimates `P_Omega` at `n` points `re[i] + i im[i]`, writing one estimate
/// per point to `out`.
///
/// # Safety
/// `re`, `im` and `out` must each point to `n` elements; handles must be live.
#[no_mangle]
pub unsafe extern "C" fn qp_estimate(
    dataset: *const QpDataset,
    kernel: *const QpKernel,
    re: *const f64,
    im: *const f64,
    n: usize,
    dither_seed: u64,
    out: *mut QpPointEstimate,
) -> QpStatus {
    guard(|| {
        let d = in_arg(dataset, "dataset")?;
        let k = in_arg(kernel, "kernel")?;
        if n == 0 {
            return Ok(());
        }
        if re.is_null() || im.is_null() || out.is_null() {
            return Err(fail(QpStatus::NullPointer, "point or output array is null"));
        }
        let re = std::slice::from_raw_parts(re, n);
        let im = std::slice::from_raw_parts(im, n);
        let out = std::slice::from_raw_parts_mut(out, n);
        let prepared = PreparedSamples::new(&d.0, dither_seed).map_err(lib)?;
        use rayon::prelude::*;
        out.par_iter_mut().enumerate().for_each(|(i, o)| {
            let e = prepared.estimate(&k.0, Complex64::new(re[i], im[i]));
            *o = QpPointEstimate {
                value: e.value,
                std_err: e.std_err,
                n: e.n as u64,
            };
        });
        Ok(())
    })
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qp_oracle_new(width: f64, out: *mut *mut QpOracle) -> QpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if !(width.is_finite() && width > 0.0) {
            return Err(fail(QpStatus::InvalidArgument, format!("width must be positive, got {width}")));
        }
        let o = Oracle::with_width(width).map_err(lib)?;
        *out = Box::into_raw(Box::new(QpOracle(o)));
        Ok(())
    })
}

/// Continuous-phase `P_Omega(re + i im)` for the Gaussian state `(v_x, v_p)`.
///
/// # Safety
/// `oracle` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qp_oracle_quasiprob(
    oracle: *const QpOracle,
    v_x: f64,
    v_p: f64,
    squeeze_angle: f64,
    re: f64,
    im: f64,
    out: *mut f64,
) -> QpStatus {
    guard(|| {
        let o = in_arg(oracle, "oracle")?;
        let out = out_arg(out, "out")?;
        *out = o.0.quasiprob(&state(v_x, v_p, squeeze_angle)?, Complex64::new(re, im)).map_err(lib)?;
        Ok(())
    })
}

/// Discrete-phase approximation with `n_phases` equispaced phases.
///
/// # Safety
/// `oracle` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qp_oracle_discrete_phase(
    oracle: *const QpOracle,
    v_x: f64,
    v_p: f64,
    squeeze_angle: f64,
    re: f64,
    im: f64,
    n_phases: usize,
    out: *mut f64,
) -> QpStatus {
    guard(|| {
        let o = in_arg(oracle, "oracle")?;
        let out = out_arg(out, "out")?;
        let s = state(v_x, v_p, squeeze_angle)?;
        *out = o.0.discrete_phase(&s, Complex64::new(re, im), n_phases).map_err(lib)?;
        Ok(())
    })
}

/// # Safety
/// `oracle` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qp_oracle_free(oracle: *mut QpOracle) {
    if !oracle.is_null() {
        drop(Box::from_raw(oracle));
    }
}
