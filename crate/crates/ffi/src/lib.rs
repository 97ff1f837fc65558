//! C ABI over `reggkm`.
//!
//! Every entry point returns an [`RgkmStatus`]; on failure a message is kept
//! per thread and can be read with [`rgkm_last_error_message`]. Handles are
//! opaque and owned by the caller, who releases them with the matching
//! `*_free` function. Matrices are passed row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use nalgebra::DMatrix;
use reggkm::fitter::{fit, FitConfig, FittedModel, RiskModel};
use reggkm::metrics::{auc_integrated, c_statistic};
use reggkm::simgen::{generate, SettingSpec};
use reggkm::{Error, LambdaTriple, SurvivalDataset};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RgkmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DataError = 3,
    NumericalError = 4,
    IoError = 5,
    Panic = 6,
}

/// Survival data: times, event indicators and the two covariate blocks.
pub struct RgkmDataset {
    inner: SurvivalDataset,
}

/// A fitted kernel Cox model.
pub struct RgkmModel {
    inner: FittedModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> RgkmStatus {
    match e {
        _ if e.is_numerical() => RgkmStatus::NumericalError,
        Error::Io(_) => RgkmStatus::IoError,
        Error::InvalidConfig(_) => RgkmStatus::InvalidArgument,
        _ => RgkmStatus::DataError,
    }
}

fn guard<F: FnOnce() -> Result<(), RgkmStatus>>(f: F) -> RgkmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RgkmStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            RgkmStatus::Panic
        }
    }
}

fn fail(e: Error) -> RgkmStatus {
    set_error(e.to_string());
    status_of(&e)
}

fn null(what: &str) -> RgkmStatus {
    set_error(format!("null pointer: {what}"));
    RgkmStatus::NullPointer
}

/// Borrows `len` elements, allowing a null pointer when `len` is zero.
unsafe fn view<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], RgkmStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn rgkm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a dataset. `status` entries must be 0 or 1; `x` is `n * p` and
/// `z` is `n * q`, both row-major.
///
/// # Safety
/// Pointers must reference arrays of the stated lengths; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rgkm_dataset_new(
    time: *const f64,
    status: *const i32,
    n: usize,
    x: *const f64,
    p: usize,
    z: *const f64,
    q: usize,
    out: *mut *mut RgkmDataset,
) -> RgkmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let time = view(time, n, "time")?;
        let status = view(status, n, "status")?;
        let x = view(x, n * p, "x")?;
        let z = view(z, n * q, "z")?;
        if status.iter().any(|s| *s != 0 && *s != 1) {
            return Err(fail(Error::SchemaMismatch("status must be 0 or 1".into())));
        }
        let ds = SurvivalDataset::new(
            time.to_vec(),
            status.iter().map(|s| *s == 1).collect(),
            DMatrix::from_row_slice(n, p, x),
            DMatrix::from_row_slice(n, q, z),
        )
        .map_err(fail)?;
        *out = Box::into_raw(Box::new(RgkmDataset { inner: ds }));
        Ok(())
    })
}

/// # Safety
/// `ds` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rgkm_dataset_free(ds: *mut RgkmDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Dimensions of a dataset; any output pointer may be null.
///
/// # Safety
/// `ds` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rgkm_dataset_dims(ds: *const RgkmDataset, n: *mut usize, p: *mut usize, q: *mut usize) -> RgkmStatus {
    guard(|| {
        let ds = ds.as_ref().ok_or_else(|| null("ds"))?;
        if let Some(n) = n.as_mut() {
            *n = ds.inner.n();
        }
        if let Some(p) = p.as_mut() {
            *p = ds.inner.p();
        }
        if let Some(q) = q.as_mut() {
            *q = ds.inner.q();
        }
        Ok(())
    })
}

/// Standardizes every covariate column in place (sample SD).
///
/// # Safety
/// `ds` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rgkm_dataset_standardize(ds: *mut RgkmDataset) -> RgkmStatus {
    guard(|| {
        let ds = ds.as_mut().ok_or_else(|| null("ds"))?;
        ds.inner = ds.inner.standardize().map_err(fail)?;
        Ok(())
    })
}

/// Simulated raw dataset for setting 1 to 7; `censor_rate` is a fraction.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rgkm_simulate(setting: u8, censor_rate: f64, seed: u64, out: *mut *mut RgkmDataset) -> RgkmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let spec = SettingSpec::builtin(setting, censor_rate, seed).map_err(fail)?;
        let ds = generate(&spec).map_err(fail)?;
        *out = Box::into_raw(Box::new(RgkmDataset { inner: ds }));
        Ok(())
    })
}

/// Fits the Gaussian garrote model on a standardized dataset.
/// `max_cycles == 0` selects the default budget.
///
/// # Safety
/// `ds` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rgkm_fit(
    ds: *const RgkmDataset,
    lambda1: f64,
    lambda2: f64,
    lambda3: f64,
    max_cycles: u32,
    out: *mut *mut RgkmModel,
) -> RgkmStatus {
    guard(|| {
        let ds = ds.as_ref().ok_or_else(|| null("ds"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let lam = LambdaTriple::new(lambda1, lambda2, lambda3).map_err(fail)?;
        let mut cfg = FitConfig::default();
        if max_cycles > 0 {
            cfg.max_outer_cycles = max_cycles as usize;
        }
        let m = fit(&ds.inner, &lam, &cfg).map_err(fail)?;
        *out = Box::into_raw(Box::new(RgkmModel { inner: m }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rgkm_model_free(model: *mut RgkmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Risk scores for `rows` subjects with raw covariates; `x` is `rows * P`,
/// `z` is `rows * Q`, `out` receives `rows` values.
///
/// # Safety
/// Pointers must reference arrays of the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn rgkm_predict(
    model: *const RgkmModel,
    x: *const f64,
    z: *const f64,
    rows: usize,
    out: *mut f64,
) -> RgkmStatus {
    guard(|| {
        let m = &model.as_ref().ok_or_else(|| null("model"))?.inner;
        let (p, q) = (m.beta.len(), m.delta.len());
        let x = view(x, rows * p, "x")?;
        let z = view(z, rows * q, "z")?;
        if rows > 0 && out.is_null() {
            return Err(null("out"));
        }
        let scores = m
            .predict(&DMatrix::from_row_slice(rows, p, x), &DMatrix::from_row_slice(rows, q, z))
            .map_err(fail)?;
        if rows > 0 {
            slice::from_raw_parts_mut(out, rows).copy_from_slice(&scores);
        }
        Ok(())
    })
}

/// Model as a JSON string; release it with [`rgkm_string_free`].
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rgkm_model_to_json(model: *const RgkmModel, out: *mut *mut c_char) -> RgkmStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let s = m.inner.to_json().map_err(fail)?;
        *out = CString::new(s).map_err(|_| fail(Error::Model("interior NUL".into())))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rgkm_model_from_json(json: *const c_char, out: *mut *mut RgkmModel) -> RgkmStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|_| fail(Error::Model("model JSON is not UTF-8".into())))?;
        let m = FittedModel::from_json(text).map_err(fail)?;
        *out = Box::into_raw(Box::new(RgkmModel { inner: m }));
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rgkm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

type Metric = fn(&[f64], &[bool], &[f64], Option<f64>) -> reggkm::Result<f64>;

unsafe fn metric(
    f: Metric,
    time: *const f64,
    status: *const i32,
    risk: *const f64,
    n: usize,
    horizon: f64,
    out: *mut f64,
) -> RgkmStatus {
    guard(|| {
        let time = view(time, n, "time")?;
        let status = view(status, n, "status")?;
        let risk = view(risk, n, "risk")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let status: Vec<bool> = status.iter().map(|s| *s != 0).collect();
        let h = if horizon.is_finite() && horizon > 0.0 { Some(horizon) } else { None };
        *out = f(time, &status, risk, h).map_err(fail)?;
        Ok(())
    })
}

/// Uno's C-statistic. A non-positive or NaN `horizon` selects the default
/// (70th percentile of the times).
///
/// # Safety
/// Arrays must hold `n` elements and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rgkm_c_statistic(
    time: *const f64,
    status: *const i32,
    risk: *const f64,
    n: usize,
    horizon: f64,
    out: *mut f64,
) -> RgkmStatus {
    metric(c_statistic, time, status, risk, n, horizon, out)
}

/// Integrated incident/dynamic AUC. A non-positive or NaN `horizon`
/// selects the default (90% of the largest time).
///
/// # Safety
/// Arrays must hold `n` elements and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rgkm_auc(
    time: *const f64,
    status: *const i32,
    risk: *const f64,
    n: usize,
    horizon: f64,
    out: *mut f64,
) -> RgkmStatus {
    metric(auc_integrated, time, status, risk, n, horizon, out)
}
