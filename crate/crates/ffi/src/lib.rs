//! C ABI over the sentipipe core.
//!
//! Every function returns an [`SpStatus`]; on failure the message is
//! available from [`sp_last_error`] on the same thread until the next call.
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `_free` function. Strings returned through `out` parameters are
//! released with [`sp_string_free`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ndarray::ArrayView2;
use sentipipe::classifiers::TrainedModel;
use sentipipe::corpus::clean_text;
use sentipipe::embedding::{load_embeddings, pseudo_embed, EmbeddedDataset};
use sentipipe::metrics::{format_report, ClassificationReport};
use sentipipe::Error;

/// Result of every call. Codes 2 to 5 match the command-line exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpStatus {
    Ok = 0,
    /// A required pointer was null or a length was zero.
    NullArgument = 1,
    Config = 2,
    Format = 3,
    Numerical = 4,
    Transport = 5,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 6,
    /// The caller's buffer length does not match the required size.
    BufferSize = 7,
    /// A Rust panic was caught.
    Internal = 8,
}

/// Embedded dataset loaded from an EMB1 or EMB1-jsonl file.
pub struct SpDataset(EmbeddedDataset);

/// Trained model loaded from its JSON file.
pub struct SpModel(TrainedModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(message));
}

fn fail(status: SpStatus, message: impl Into<String>) -> SpStatus {
    set_error(message.into());
    status
}

fn from_error(e: Error) -> SpStatus {
    let status = match e.exit_code() {
        2 => SpStatus::Config,
        3 => SpStatus::Format,
        4 => SpStatus::Numerical,
        5 => SpStatus::Transport,
        _ => SpStatus::Internal,
    };
    fail(status, e.to_string())
}

/// Clears the last error, runs `body` and converts panics.
fn guard(body: impl FnOnce() -> Result<(), SpStatus>) -> SpStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => SpStatus::Ok,
        Ok(Err(status)) => status,
        Err(payload) => {
            let what = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(SpStatus::Internal, format!("internal error: {what}"))
        }
    }
}

fn check<T>(r: sentipipe::Result<T>) -> Result<T, SpStatus> {
    r.map_err(from_error)
}

/// # Safety
/// `p` is null or a NUL-terminated string.
unsafe fn text_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, SpStatus> {
    if p.is_null() {
        return Err(fail(SpStatus::NullArgument, format!("`{name}` is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(SpStatus::InvalidUtf8, format!("`{name}` is not valid UTF-8")))
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), SpStatus> {
    if p.is_null() {
        Err(fail(SpStatus::NullArgument, format!("`{name}` is null")))
    } else {
        Ok(())
    }
}

fn out_string(text: String, out: *mut *mut c_char) -> Result<(), SpStatus> {
    let s = CString::new(text).map_err(|_| fail(SpStatus::Format, "result contains a NUL byte"))?;
    // SAFETY: `out` was checked non-null by the caller of this helper.
    unsafe { *out = s.into_raw() };
    Ok(())
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn sp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn sp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` is null or came from this library and has not been freed.
#[no_mangle]
pub unsafe extern "C" fn sp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads an embedding file; `.jsonl` paths use the JSON twin.
///
/// # Safety
/// `path` is a NUL-terminated string and `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sp_dataset_load(path: *const c_char, out: *mut *mut SpDataset) -> SpStatus {
    guard(|| {
        non_null(out, "out")?;
        let path = text_arg(path, "path")?;
        let ds = check(load_embeddings(Path::new(path)))?;
        *out = Box::into_raw(Box::new(SpDataset(ds)));
        Ok(())
    })
}

/// # Safety
/// `ds` is null or a live handle from [`sp_dataset_load`].
#[no_mangle]
pub unsafe extern "C" fn sp_dataset_free(ds: *mut SpDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Row count, or 0 for a null handle.
///
/// # Safety
/// `ds` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sp_dataset_rows(ds: *const SpDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.len())
}

/// Embedding width, or 0 for a null handle.
///
/// # Safety
/// `ds` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sp_dataset_dim(ds: *const SpDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.dim())
}

/// Copies the row-major feature matrix into `out`, which holds exactly
/// `rows × dim` values.
///
/// # Safety
/// `ds` is a live handle and `out` points to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sp_dataset_features(ds: *const SpDataset, out: *mut f64, len: usize) -> SpStatus {
    guard(|| {
        non_null(ds, "ds")?;
        non_null(out, "out")?;
        let ds = &(*ds).0;
        let need = ds.len() * ds.dim();
        if len != need {
            return Err(fail(SpStatus::BufferSize, format!("buffer holds {len} values, need {need}")));
        }
        let dst = std::slice::from_raw_parts_mut(out, len);
        for (d, s) in dst.iter_mut().zip(ds.features().iter()) {
            *d = *s;
        }
        Ok(())
    })
}

/// Copies the class codes into `out` (`rows` bytes). Fails with
/// `SP_STATUS_FORMAT` for an unlabeled dataset.
///
/// # Safety
/// `ds` is a live handle and `out` points to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn sp_dataset_labels(ds: *const SpDataset, out: *mut u8, len: usize) -> SpStatus {
    guard(|| {
        non_null(ds, "ds")?;
        non_null(out, "out")?;
        let labels = check((*ds).0.require_labels())?;
        if len != labels.len() {
            return Err(fail(SpStatus::BufferSize, format!("buffer holds {len} labels, need {}", labels.len())));
        }
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(labels);
        Ok(())
    })
}

/// Loads a model JSON file written by `train` or `run`.
///
/// # Safety
/// `path` is a NUL-terminated string and `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sp_model_load(path: *const c_char, out: *mut *mut SpModel) -> SpStatus {
    guard(|| {
        non_null(out, "out")?;
        let path = text_arg(path, "path")?;
        let model = check(TrainedModel::load(Path::new(path)))?;
        *out = Box::into_raw(Box::new(SpModel(model)));
        Ok(())
    })
}

/// # Safety
/// `model` is null or a live handle from [`sp_model_load`].
#[no_mangle]
pub unsafe extern "C" fn sp_model_free(model: *mut SpModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Input width the model expects, or 0 for a null handle.
///
/// # Safety
/// `model` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sp_model_dim(model: *const SpModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.metadata.dim)
}

/// Number of classes, or 0 for a null handle.
///
/// # Safety
/// `model` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sp_model_n_classes(model: *const SpModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.n_classes())
}

/// # Safety
/// `features` points to `rows × dim` readable doubles.
unsafe fn matrix<'a>(features: *const f64, rows: usize, dim: usize) -> Result<ArrayView2<'a, f64>, SpStatus> {
    non_null(features, "features")?;
    if rows == 0 || dim == 0 {
        return Err(fail(SpStatus::NullArgument, "rows and dim must be positive"));
    }
    let len = rows
        .checked_mul(dim)
        .ok_or_else(|| fail(SpStatus::BufferSize, "rows × dim overflows"))?;
    Ok(ArrayView2::from_shape((rows, dim), std::slice::from_raw_parts(features, len)).expect("length matches shape"))
}

/// Predicts class codes for a row-major `rows × dim` matrix into `out`
/// (`rows` bytes).
///
/// # Safety
/// `model` is a live handle, `features` points to `rows × dim` doubles and
/// `out` to `rows` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn sp_model_predict(
    model: *const SpModel,
    features: *const f64,
    rows: usize,
    dim: usize,
    out: *mut u8,
) -> SpStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(out, "out")?;
        let x = matrix(features, rows, dim)?;
        let codes = check((*model).0.predict(x))?;
        std::slice::from_raw_parts_mut(out, rows).copy_from_slice(&codes);
        Ok(())
    })
}

/// Per-class scores, row-major `rows × n_classes`, into `out`, which holds
/// exactly `out_len` values.
///
/// # Safety
/// `model` is a live handle, `features` points to `rows × dim` doubles and
/// `out` to `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sp_model_predict_scores(
    model: *const SpModel,
    features: *const f64,
    rows: usize,
    dim: usize,
    out: *mut f64,
    out_len: usize,
) -> SpStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(out, "out")?;
        let model = &(*model).0;
        let need = rows * model.n_classes();
        if out_len != need {
            return Err(fail(SpStatus::BufferSize, format!("buffer holds {out_len} values, need {need}")));
        }
        let scores = check(model.predict_scores(matrix(features, rows, dim)?))?;
        let dst = std::slice::from_raw_parts_mut(out, out_len);
        for (d, s) in dst.iter_mut().zip(scores.iter()) {
            *d = *s;
        }
        Ok(())
    })
}

/// Deterministic offline embedding of `text` into `out` (`dim` doubles).
///
/// # Safety
/// `text` is a NUL-terminated string and `out` points to `dim` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn sp_pseudo_embed(text: *const c_char, dim: usize, seed: u64, out: *mut f64) -> SpStatus {
    guard(|| {
        non_null(out, "out")?;
        let text = text_arg(text, "text")?;
        if dim == 0 {
            return Err(fail(SpStatus::Config, "dim must be positive"));
        }
        let v = pseudo_embed(text, dim, seed);
        std::slice::from_raw_parts_mut(out, dim).copy_from_slice(&v);
        Ok(())
    })
}

/// Normalized review text as a new string in `*out`.
///
/// # Safety
/// `text` is a NUL-terminated string and `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sp_clean_text(text: *const c_char, out: *mut *mut c_char) -> SpStatus {
    guard(|| {
        non_null(out, "out")?;
        out_string(clean_text(text_arg(text, "text")?), out)
    })
}

/// Renders a report JSON document as the fixed-width table.
///
/// # Safety
/// `json` is a NUL-terminated string and `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sp_report_format(json: *const c_char, out: *mut *mut c_char) -> SpStatus {
    guard(|| {
        non_null(out, "out")?;
        let report = check(ClassificationReport::from_json(text_arg(json, "json")?, "<report>"))?;
        out_string(format_report(&report), out)
    })
}
