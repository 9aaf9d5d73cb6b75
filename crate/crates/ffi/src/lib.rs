//! C ABI over `nougat-core`.
//!
//! A detector is an opaque `NougatDetector*` created by
//! [`nougat_detector_new`] or [`nougat_detector_new_fixed`] and released by
//! [`nougat_detector_free`]. Every fallible call returns a [`NougatStatus`];
//! the message of the last failure on the calling thread is available via
//! [`nougat_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use nougat_core::detectors::{AlarmRule, DetectorKind, DetectorSet, DictionaryMode, StreamDetector};
use nougat_core::{Dictionary, Error, KernelParams, WindowConfig};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NougatStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    DataError = 4,
    NumericalError = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NougatKind {
    Nougat = 0,
    Drulsif = 1,
    Ma = 2,
    Gma = 3,
    Knn = 4,
}

impl From<NougatKind> for DetectorKind {
    fn from(k: NougatKind) -> Self {
        match k {
            NougatKind::Nougat => DetectorKind::Nougat,
            NougatKind::Drulsif => DetectorKind::Drulsif,
            NougatKind::Ma => DetectorKind::Ma,
            NougatKind::Gma => DetectorKind::Gma,
            NougatKind::Knn => DetectorKind::Knn,
        }
    }
}

/// Detector parameters. Start from [`nougat_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct NougatConfig {
    pub kind: NougatKind,
    pub n_ref: usize,
    pub n_test: usize,
    /// Gaussian kernel bandwidth.
    pub sigma: f64,
    pub mu: f64,
    pub nu: f64,
    /// Alarm threshold on the detector score.
    pub xi: f64,
    /// Coherence threshold for online dictionary growth.
    pub eta0: f64,
    /// Maximum dictionary size; 0 means unbounded.
    pub max_dict: usize,
    /// Non-zero selects the `|g|` alarm rule instead of `|g + 1|`.
    pub abs_rule: i32,
    pub knn_k: usize,
    pub gma_alpha: f64,
}

/// Result of one call to [`nougat_detector_step`].
///
/// `value` and `score` are NaN until the windows are full.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct NougatStep {
    /// 0-based index of the sample just processed.
    pub t: u64,
    pub warm: bool,
    pub alarm: bool,
    pub dict_len: usize,
    pub value: f64,
    pub score: f64,
}

/// Opaque detector handle.
pub struct NougatDetector {
    inner: StreamDetector,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> NougatStatus {
    match err {
        Error::Validation(_) => NougatStatus::InvalidArgument,
        Error::DimensionMismatch { .. } => NougatStatus::DimensionMismatch,
        Error::Data(_) | Error::Io(_) => NougatStatus::DataError,
        Error::Numerical(_) | Error::Unstable { .. } => NougatStatus::NumericalError,
    }
}

fn guard<F>(f: F) -> NougatStatus
where
    F: FnOnce() -> Result<(), (NougatStatus, String)>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NougatStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            NougatStatus::Panic
        }
    }
}

fn core_err(e: Error) -> (NougatStatus, String) {
    (status_of(&e), e.to_string())
}

fn null_err(what: &str) -> (NougatStatus, String) {
    (NougatStatus::NullPointer, format!("{what} is null"))
}

fn build(cfg: &NougatConfig, dict: Option<Dictionary>) -> Result<NougatDetector, Error> {
    let window = WindowConfig::new(cfg.n_ref, cfg.n_test)?;
    let params = KernelParams::new(cfg.sigma)?;
    let mut set = DetectorSet::new(vec![cfg.kind.into()], cfg.mu, cfg.nu, cfg.xi);
    set.rule = if cfg.abs_rule != 0 { AlarmRule::TwoSided } else { AlarmRule::Shifted };
    set.knn_k = cfg.knn_k;
    set.gma_alpha = cfg.gma_alpha;
    let mode = match dict {
        Some(d) => DictionaryMode::Fixed(d),
        None => DictionaryMode::Online { params, eta0: cfg.eta0, max_len: (cfg.max_dict > 0).then_some(cfg.max_dict) },
    };
    Ok(NougatDetector { inner: StreamDetector::new(set, window, mode)? })
}

/// Default parameters: NOUGAT, N_ref = N_test = 64, σ = 1, μ = 0.047,
/// ν = 0.01, ξ = 1, η0 = 0.7.
#[no_mangle]
pub extern "C" fn nougat_config_default() -> NougatConfig {
    NougatConfig {
        kind: NougatKind::Nougat,
        n_ref: 64,
        n_test: 64,
        sigma: 1.0,
        mu: 0.047,
        nu: 0.01,
        xi: 1.0,
        eta0: 0.7,
        max_dict: 0,
        abs_rule: 0,
        knn_k: 10,
        gma_alpha: 0.05,
    }
}

/// Creates a detector whose dictionary grows online from the stream.
///
/// # Safety
/// `cfg` must point to a valid `NougatConfig`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nougat_detector_new(cfg: *const NougatConfig, out: *mut *mut NougatDetector) -> NougatStatus {
    guard(|| {
        let cfg = unsafe { cfg.as_ref() }.ok_or_else(|| null_err("cfg"))?;
        if out.is_null() {
            return Err(null_err("out"));
        }
        let det = build(cfg, None).map_err(core_err)?;
        unsafe { *out = Box::into_raw(Box::new(det)) };
        Ok(())
    })
}

/// Creates a detector with a fixed dictionary of `n_atoms` atoms of
/// dimension `dim`, stored row-major in `atoms`.
///
/// # Safety
/// `atoms` must point to `n_atoms * dim` doubles; `cfg` and `out` as for
/// [`nougat_detector_new`].
#[no_mangle]
pub unsafe extern "C" fn nougat_detector_new_fixed(
    cfg: *const NougatConfig,
    atoms: *const f64,
    n_atoms: usize,
    dim: usize,
    out: *mut *mut NougatDetector,
) -> NougatStatus {
    guard(|| {
        let cfg = unsafe { cfg.as_ref() }.ok_or_else(|| null_err("cfg"))?;
        if out.is_null() {
            return Err(null_err("out"));
        }
        if atoms.is_null() {
            return Err(null_err("atoms"));
        }
        let len = n_atoms
            .checked_mul(dim)
            .ok_or_else(|| (NougatStatus::InvalidArgument, "atom buffer too large".to_string()))?;
        let flat = unsafe { slice::from_raw_parts(atoms, len) };
        let rows: Vec<Vec<f64>> = flat.chunks(dim.max(1)).map(<[f64]>::to_vec).collect();
        let params = KernelParams::new(cfg.sigma).map_err(core_err)?;
        let dict = Dictionary::from_atoms(rows, params, 1.0).map_err(core_err)?;
        let det = build(cfg, Some(dict)).map_err(core_err)?;
        unsafe { *out = Box::into_raw(Box::new(det)) };
        Ok(())
    })
}

/// Feeds one sample of length `dim`.
///
/// # Safety
/// `det` must come from a constructor above and not be freed; `y` must point
/// to `dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nougat_detector_step(
    det: *mut NougatDetector,
    y: *const f64,
    dim: usize,
    out: *mut NougatStep,
) -> NougatStatus {
    guard(|| {
        let det = unsafe { det.as_mut() }.ok_or_else(|| null_err("det"))?;
        if y.is_null() {
            return Err(null_err("y"));
        }
        if out.is_null() {
            return Err(null_err("out"));
        }
        let y = unsafe { slice::from_raw_parts(y, dim) };
        let rec = det.inner.step(y).map_err(core_err)?;
        let step = NougatStep {
            t: rec.t,
            warm: rec.warm,
            alarm: rec.alarms[0],
            dict_len: rec.dict_len,
            value: rec.values[0].unwrap_or(f64::NAN),
            score: rec.scores[0].unwrap_or(f64::NAN),
        };
        unsafe { *out = step };
        Ok(())
    })
}

/// Current dictionary size, or 0 for a null handle or an empty dictionary.
///
/// # Safety
/// `det` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nougat_detector_dict_len(det: *const NougatDetector) -> usize {
    unsafe { det.as_ref() }.and_then(|d| d.inner.dictionary()).map_or(0, Dictionary::len)
}

/// Releases a detector. Null is ignored.
///
/// # Safety
/// `det` must be null or a live handle not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nougat_detector_free(det: *mut NougatDetector) {
    if !det.is_null() {
        drop(unsafe { Box::from_raw(det) });
    }
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn nougat_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Gaussian kernel between two vectors of length `dim`.
///
/// # Safety
/// `a` and `b` must point to `dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nougat_kappa(
    a: *const f64,
    b: *const f64,
    dim: usize,
    sigma: f64,
    out: *mut f64,
) -> NougatStatus {
    guard(|| {
        if a.is_null() || b.is_null() || out.is_null() {
            return Err(null_err("argument"));
        }
        let (a, b) = unsafe { (slice::from_raw_parts(a, dim), slice::from_raw_parts(b, dim)) };
        let params = KernelParams::new(sigma).map_err(core_err)?;
        let k = nougat_core::kappa(a, b, params).map_err(core_err)?;
        unsafe { *out = k };
        Ok(())
    })
}
