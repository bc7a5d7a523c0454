//! C interface to `fairprice`.
//!
//! Every fallible function returns an [`FpStatus`]; on failure the message is
//! available from [`fp_last_error`] on the same thread. Strings returned
//! through `out` parameters are owned by the caller and released with
//! [`fp_string_free`]. Datasets are opaque handles released with
//! [`fp_dataset_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fairprice::dataset::numeric_columns;
use fairprice::{gaussian_eo, report, transport, Dataset, EmpiricalMeasure1D, Error, Schema};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Data = 4,
    InvalidArgument = 5,
    Numerical = 6,
    Panic = 7,
}

/// Opaque dataset handle.
pub struct FpDataset {
    inner: Dataset,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> FpStatus {
    match e {
        Error::Io { .. } => FpStatus::Io,
        Error::Csv(_)
        | Error::Json(_)
        | Error::MissingColumn { .. }
        | Error::MissingValue { .. }
        | Error::Parse { .. }
        | Error::DegenerateSensitive { .. }
        | Error::EmptyDataset
        | Error::LengthMismatch { .. }
        | Error::NonBinaryLabel { .. } => FpStatus::Data,
        Error::InvalidArgument(_) => FpStatus::InvalidArgument,
        _ => FpStatus::Numerical,
    }
}

struct Failure(FpStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FpStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            FpStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(FpStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(FpStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn optional_text<'a>(p: *const c_char, name: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        text(p, name).map(Some)
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(FpStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

unsafe fn emit_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|_| Failure(FpStatus::Data, "output contains a NUL byte".into()))?;
    *out = c.into_raw();
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Load a CSV file.
///
/// `features` is a comma-separated column list, or null for every numeric
/// column other than `sensitive` and `target`. `target` may be null.
///
/// # Safety
/// String arguments must be null or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fp_dataset_load(
    path: *const c_char,
    features: *const c_char,
    sensitive: *const c_char,
    target: *const c_char,
    out: *mut *mut FpDataset,
) -> FpStatus {
    guard(|| {
        non_null(out, "out")?;
        let path = text(path, "path")?;
        let sensitive = text(sensitive, "sensitive")?;
        let target = optional_text(target, "target")?;
        let features: Vec<String> = match optional_text(features, "features")? {
            Some(list) => list
                .split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect(),
            None => {
                let mut exclude = vec![sensitive];
                exclude.extend(target);
                numeric_columns(path, &exclude)?
            }
        };
        let schema = Schema::new(features, sensitive, target.map(str::to_string));
        let inner = fairprice::load_dataset(path, &schema)?;
        *out = Box::into_raw(Box::new(FpDataset { inner }));
        Ok(())
    })
}

/// Release a dataset; null is ignored.
///
/// # Safety
/// `ds` must come from [`fp_dataset_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fp_dataset_free(ds: *mut FpDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// # Safety
/// `ds` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fp_dataset_n_rows(ds: *const FpDataset, out: *mut usize) -> FpStatus {
    guard(|| {
        non_null(ds, "ds")?;
        non_null(out, "out")?;
        *out = (*ds).inner.n_rows();
        Ok(())
    })
}

/// Fairness audit of the 0/1 column `pred` against the dataset target, as a
/// JSON object written to `*out_json`.
///
/// # Safety
/// `ds` must be a live handle, `pred` NUL-terminated and `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn fp_audit_json(
    ds: *const FpDataset,
    pred: *const c_char,
    out_json: *mut *mut c_char,
) -> FpStatus {
    guard(|| {
        non_null(ds, "ds")?;
        non_null(out_json, "out_json")?;
        let pred = text(pred, "pred")?;
        let ds = &(*ds).inner;
        let truth = ds.binary_target()?;
        let predicted = ds.column_binary(pred)?;
        let r = report::audit(&truth, &predicted, ds.groups(), ds.group_labels(), None, 10)?;
        emit_string(out_json, serde_json::to_string(&r).map_err(Error::from)?)
    })
}

/// Squared Wasserstein-2 distance between two equally weighted samples.
///
/// # Safety
/// `a` and `b` must point to `na` and `nb` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fp_wasserstein2(
    a: *const f64,
    na: usize,
    b: *const f64,
    nb: usize,
    out: *mut f64,
) -> FpStatus {
    guard(|| {
        non_null(a, "a")?;
        non_null(b, "b")?;
        non_null(out, "out")?;
        let p = EmpiricalMeasure1D::from_samples(std::slice::from_raw_parts(a, na))?;
        let q = EmpiricalMeasure1D::from_samples(std::slice::from_raw_parts(b, nb))?;
        *out = transport::wasserstein2_1d(&p, &q);
        Ok(())
    })
}

/// Equality-of-odds fair linear predictor estimated from the dataset
/// (numeric sensitive column and real target), as JSON.
///
/// # Safety
/// `ds` must be a live handle and `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn fp_gaussian_eo_fit(ds: *const FpDataset, out_json: *mut *mut c_char) -> FpStatus {
    guard(|| {
        non_null(ds, "ds")?;
        non_null(out_json, "out_json")?;
        let ds = &(*ds).inner;
        let y = ds
            .target()
            .ok_or_else(|| Failure(FpStatus::InvalidArgument, "dataset has no target column".into()))?;
        let s = ds.sensitive_values()?;
        let est = gaussian_eo::estimate_covariance(ds.features(), &s, y)?;
        let pred = gaussian_eo::fit_eo_fair_linear(&est.model)?;
        let doc = serde_json::json!({
            "features": ds.schema().features,
            "predictor": pred,
            "constraint_residual": gaussian_eo::constraint_residual(&est.model, &pred),
        });
        emit_string(out_json, doc.to_string())
    })
}

/// Release a string returned by this library; null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
