//! C ABI for loading a trained ddosnet model and scaler, scoring flow
//! records, and computing evaluation metrics.
//!
//! Every function returns a status code (`DDOSNET_OK` on success). On
//! failure, `ddosnet_last_error` returns a message for the calling thread.
//! Handles are opaque and must be released with the matching `_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ddosnet::catalog::LabelClass;
use ddosnet::error::Error;
use ddosnet::metrics::{auc, per_class_report, roc_curve};
use ddosnet::model::{predict, AutoencoderModel};
use ddosnet::persist::{load_model, load_scaler};
use ddosnet::preprocess::{ScalerParams, SequenceBatch};

pub const DDOSNET_OK: i32 = 0;
pub const DDOSNET_ERR_NULL_POINTER: i32 = 1;
pub const DDOSNET_ERR_CONFIG: i32 = 2;
pub const DDOSNET_ERR_DATA: i32 = 3;
pub const DDOSNET_ERR_NUMERIC: i32 = 4;
pub const DDOSNET_ERR_INVALID_ARGUMENT: i32 = 5;
pub const DDOSNET_ERR_PANIC: i32 = 6;

/// Class codes used in label arrays.
pub const DDOSNET_LABEL_BENIGN: u8 = 0;
pub const DDOSNET_LABEL_ATTACK: u8 = 1;

/// A loaded model.
pub struct DdosnetModel {
    inner: AutoencoderModel,
}

/// A loaded min-max scaler.
pub struct DdosnetScaler {
    inner: ScalerParams,
}

/// Per-class precision, recall and F-score with Attack as the positive class.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DdosnetMetrics {
    pub precision_attack: f64,
    pub recall_attack: f64,
    pub f1_attack: f64,
    pub precision_benign: f64,
    pub recall_benign: f64,
    pub f1_benign: f64,
    pub accuracy: f64,
    pub true_positive: u64,
    pub false_positive: u64,
    pub true_negative: u64,
    pub false_negative: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

struct Failure(i32, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e.exit_code() {
            2 => DDOSNET_ERR_CONFIG,
            4 => DDOSNET_ERR_NUMERIC,
            _ => DDOSNET_ERR_DATA,
        };
        Failure(code, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(DDOSNET_ERR_NULL_POINTER, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(DDOSNET_ERR_INVALID_ARGUMENT, msg.into())
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> i32 {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => DDOSNET_OK,
        Ok(Err(Failure(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic".into());
            DDOSNET_ERR_PANIC
        }
    }
}

unsafe fn path_arg(path: *const c_char) -> Result<String, Failure> {
    if path.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(path)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| invalid("path is not valid UTF-8"))
}

unsafe fn slice_arg<'a, T>(data: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn slice_mut_arg<'a, T>(data: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(data, len))
}

fn labels_from(codes: &[u8], what: &str) -> Result<Vec<LabelClass>, Failure> {
    codes
        .iter()
        .map(|&c| LabelClass::from_code(c).ok_or_else(|| invalid(format!("{what}: label code {c} is not 0 or 1"))))
        .collect()
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ddosnet_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads a model file. On success `*out` owns a new handle.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ddosnet_model_load(path: *const c_char, out: *mut *mut DdosnetModel) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let loaded = load_model(path_arg(path)?, None)?;
        *out = Box::into_raw(Box::new(DdosnetModel { inner: loaded.model }));
        Ok(())
    })
}

/// Releases a model handle. Null is ignored.
///
/// # Safety
/// `model` must come from `ddosnet_model_load` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ddosnet_model_free(model: *mut DdosnetModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of input features per record (sequence length × step width), or 0 for null.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ddosnet_model_feature_count(model: *const DdosnetModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.seq_len * m.inner.step_dim)
}

/// Scores `n_records` scaled records laid out row-major in `features`.
/// Writes the attack probability to `scores` and the 0/1 label to `labels`
/// (either output may be null).
///
/// # Safety
/// `features` must hold `n_records * n_features` values; non-null outputs
/// must hold `n_records` elements.
#[no_mangle]
pub unsafe extern "C" fn ddosnet_model_predict(
    model: *const DdosnetModel,
    features: *const f64,
    n_records: usize,
    n_features: usize,
    scores: *mut f64,
    labels: *mut u8,
) -> i32 {
    guard(|| {
        let model = &model.as_ref().ok_or_else(|| null("model"))?.inner;
        let width = model.seq_len * model.step_dim;
        if n_features != width {
            return Err(invalid(format!("model expects {width} features, got {n_features}")));
        }
        let total = n_records.checked_mul(n_features).ok_or_else(|| invalid("size overflow"))?;
        let values = slice_arg(features, total, "features")?.to_vec();
        let batch = SequenceBatch::from_flat(
            values,
            vec![LabelClass::Benign; n_records],
            model.seq_len,
            model.step_dim,
        )?;
        let (s, l) = if n_records == 0 { (Vec::new(), Vec::new()) } else { predict(model, &batch)? };
        if !scores.is_null() {
            slice_mut_arg(scores, n_records, "scores")?.copy_from_slice(&s);
        }
        if !labels.is_null() {
            for (dst, src) in slice_mut_arg(labels, n_records, "labels")?.iter_mut().zip(&l) {
                *dst = src.code();
            }
        }
        Ok(())
    })
}

/// Loads a scaler file. On success `*out` owns a new handle.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ddosnet_scaler_load(path: *const c_char, out: *mut *mut DdosnetScaler) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let inner = load_scaler(path_arg(path)?, None)?;
        *out = Box::into_raw(Box::new(DdosnetScaler { inner }));
        Ok(())
    })
}

/// Releases a scaler handle. Null is ignored.
///
/// # Safety
/// `scaler` must come from `ddosnet_scaler_load` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ddosnet_scaler_free(scaler: *mut DdosnetScaler) {
    if !scaler.is_null() {
        drop(Box::from_raw(scaler));
    }
}

/// Number of features the scaler was fitted on, or 0 for null.
///
/// # Safety
/// `scaler` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ddosnet_scaler_feature_count(scaler: *const DdosnetScaler) -> usize {
    scaler.as_ref().map_or(0, |s| s.inner.len())
}

/// Min-max scales `n_records` row-major records in place.
///
/// # Safety
/// `features` must hold `n_records * n_features` values.
#[no_mangle]
pub unsafe extern "C" fn ddosnet_scaler_apply(
    scaler: *const DdosnetScaler,
    features: *mut f64,
    n_records: usize,
    n_features: usize,
) -> i32 {
    guard(|| {
        let scaler = &scaler.as_ref().ok_or_else(|| null("scaler"))?.inner;
        if n_features != scaler.len() {
            return Err(invalid(format!("scaler expects {} features, got {n_features}", scaler.len())));
        }
        let total = n_records.checked_mul(n_features).ok_or_else(|| invalid("size overflow"))?;
        let values = slice_mut_arg(features, total, "features")?;
        for row in values.chunks_mut(n_features.max(1)) {
            scaler.transform(row);
        }
        Ok(())
    })
}

/// Area under the ROC curve for 0/1 labels and attack scores.
///
/// # Safety
/// `labels` and `scores` must hold `n` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ddosnet_auc(labels: *const u8, scores: *const f64, n: usize, out: *mut f64) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let labels = labels_from(slice_arg(labels, n, "labels")?, "labels")?;
        let scores = slice_arg(scores, n, "scores")?;
        let curve = roc_curve(&labels, scores)?;
        *out = auc(&curve);
        Ok(())
    })
}

/// Confusion counts and per-class metrics for predicted against true labels.
///
/// # Safety
/// `labels_true` and `labels_pred` must hold `n` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ddosnet_metrics(
    labels_true: *const u8,
    labels_pred: *const u8,
    n: usize,
    out: *mut DdosnetMetrics,
) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let truth = labels_from(slice_arg(labels_true, n, "labels_true")?, "labels_true")?;
        let pred = labels_from(slice_arg(labels_pred, n, "labels_pred")?, "labels_pred")?;
        let r = per_class_report(&truth, &pred, None)?;
        *out = DdosnetMetrics {
            precision_attack: r.attack.precision,
            recall_attack: r.attack.recall,
            f1_attack: r.attack.f_score,
            precision_benign: r.benign.precision,
            recall_benign: r.benign.recall,
            f1_benign: r.benign.f_score,
            accuracy: r.accuracy,
            true_positive: r.confusion.tp,
            false_positive: r.confusion.fp,
            true_negative: r.confusion.tn,
            false_negative: r.confusion.fn_,
        };
        Ok(())
    })
}
