//! C ABI over the engae library.
//!
//! Models are opaque `EngaeModel` handles created by one of the
//! `engae_model_load*` functions and released with `engae_model_free`.
//! Every fallible function returns an `EngaeStatus`; on failure the message
//! is available from `engae_last_error` on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use engae::detect::{pr_auc, roc_auc, ScoreSet};
use engae::io::{Label, NormStats, Sample};
use engae::models::{load_checkpoint, reconstruction_error, Model};
use engae::seqnn::{Mat, SeqTensor};
use engae::Error;

/// Result codes shared by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EngaeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Input = 5,
    Config = 6,
    Protocol = 7,
    Usage = 8,
    Panic = 9,
}

/// A trained model, optionally with the normalization statistics it was
/// trained with.
pub struct EngaeModel {
    model: Model,
    stats: Option<NormStats>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> EngaeStatus {
    match err {
        Error::Config(_) => EngaeStatus::Config,
        Error::Input(_) => EngaeStatus::Input,
        Error::Protocol(_) => EngaeStatus::Protocol,
        Error::Format(_) => EngaeStatus::Format,
        Error::Usage(_) => EngaeStatus::Usage,
        Error::Io { .. } => EngaeStatus::Io,
    }
}

fn fail(status: EngaeStatus, msg: impl Into<String>) -> EngaeStatus {
    set_error(msg);
    status
}

/// Runs `f`, recording errors and turning panics into `Panic`.
fn guard(f: impl FnOnce() -> Result<(), EngaeStatus>) -> EngaeStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EngaeStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(EngaeStatus::Panic, "internal panic"),
    }
}

fn lib_err(e: Error) -> EngaeStatus {
    let s = status_of(&e);
    fail(s, e.to_string())
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a Path, EngaeStatus> {
    if p.is_null() {
        return Err(fail(EngaeStatus::NullPointer, "path is null"));
    }
    let s = unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| fail(EngaeStatus::InvalidArgument, "path is not valid UTF-8"))?;
    Ok(Path::new(s))
}

fn emit(out: *mut *mut EngaeModel, model: EngaeModel) {
    unsafe { *out = Box::into_raw(Box::new(model)) };
}

/// Loads a checkpoint file. The handle scores inputs as given, without
/// normalization.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn engae_model_load(path: *const c_char, out: *mut *mut EngaeModel) -> EngaeStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(EngaeStatus::NullPointer, "out is null"));
        }
        let path = unsafe { path_arg(path) }?;
        let bytes = std::fs::read(path).map_err(|e| lib_err(Error::Io { path: path.into(), source: e }))?;
        let model = load_checkpoint(&bytes).map_err(lib_err)?;
        emit(out, EngaeModel { model, stats: None });
        Ok(())
    })
}

/// Loads a checkpoint from memory.
///
/// # Safety
/// `data` must point to `len` readable bytes and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn engae_model_load_bytes(
    data: *const u8,
    len: usize,
    out: *mut *mut EngaeModel,
) -> EngaeStatus {
    guard(|| {
        if out.is_null() || data.is_null() {
            return Err(fail(EngaeStatus::NullPointer, "data or out is null"));
        }
        let bytes = unsafe { std::slice::from_raw_parts(data, len) };
        let model = load_checkpoint(bytes).map_err(lib_err)?;
        emit(out, EngaeModel { model, stats: None });
        Ok(())
    })
}

/// Loads `model.ckpt` and `stats.json` from a directory written by
/// `engae train`. Scoring then normalizes raw features first.
///
/// # Safety
/// `dir` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn engae_model_load_dir(dir: *const c_char, out: *mut *mut EngaeModel) -> EngaeStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(EngaeStatus::NullPointer, "out is null"));
        }
        let dir = unsafe { path_arg(dir) }?;
        let ckpt = dir.join("model.ckpt");
        let bytes = std::fs::read(&ckpt).map_err(|e| lib_err(Error::Io { path: ckpt, source: e }))?;
        let model = load_checkpoint(&bytes).map_err(lib_err)?;
        let stats = NormStats::read(&dir.join("stats.json")).map_err(lib_err)?;
        if stats.mean.len() != model.config().n {
            return Err(fail(
                EngaeStatus::Format,
                format!("statistics cover {} features, model expects {}", stats.mean.len(), model.config().n),
            ));
        }
        emit(
            out,
            EngaeModel {
                model,
                stats: Some(stats),
            },
        );
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `model` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn engae_model_free(model: *mut EngaeModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Expected input shape: `steps` rows of `channels` features.
///
/// # Safety
/// All pointers must be valid; `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn engae_model_input_shape(
    model: *const EngaeModel,
    steps: *mut usize,
    channels: *mut usize,
) -> EngaeStatus {
    guard(|| {
        if model.is_null() || steps.is_null() || channels.is_null() {
            return Err(fail(EngaeStatus::NullPointer, "null argument"));
        }
        let c = unsafe { &*model }.model.config();
        unsafe {
            *steps = c.t;
            *channels = c.n;
        }
        Ok(())
    })
}

/// Writes 1 for autoencoders and 0 for classifiers.
///
/// # Safety
/// All pointers must be valid; `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn engae_model_is_autoencoder(model: *const EngaeModel, out: *mut i32) -> EngaeStatus {
    guard(|| {
        if model.is_null() || out.is_null() {
            return Err(fail(EngaeStatus::NullPointer, "null argument"));
        }
        unsafe { *out = i32::from((*model).model.is_autoencoder()) };
        Ok(())
    })
}

/// Disengagement score of one row-major `steps × channels` sequence:
/// reconstruction error for autoencoders, probability for classifiers.
///
/// # Safety
/// `data` must point to `steps * channels` doubles; other pointers valid.
#[no_mangle]
pub unsafe extern "C" fn engae_model_score(
    model: *const EngaeModel,
    data: *const f64,
    steps: usize,
    channels: usize,
    out: *mut f64,
) -> EngaeStatus {
    guard(|| {
        if model.is_null() || data.is_null() || out.is_null() {
            return Err(fail(EngaeStatus::NullPointer, "null argument"));
        }
        let handle = unsafe { &*model };
        let len = steps
            .checked_mul(channels)
            .ok_or_else(|| fail(EngaeStatus::InvalidArgument, "shape overflows"))?;
        let values = unsafe { std::slice::from_raw_parts(data, len) }.to_vec();
        let m = Mat::from_shape_vec((steps, channels), values)
            .map_err(|e| fail(EngaeStatus::InvalidArgument, e.to_string()))?;
        let x = SeqTensor::new(m).map_err(lib_err)?;
        let mut sample = Sample::new("input", x, Label::Engaged);
        if let Some(stats) = &handle.stats {
            stats.apply(&mut sample).map_err(lib_err)?;
        }
        let score = if handle.model.is_autoencoder() {
            let y = handle.model.forward_ae(&sample.data).map_err(lib_err)?;
            reconstruction_error(sample.data.as_mat(), y.as_mat()).map_err(lib_err)?
        } else {
            handle.model.forward_bc(&sample.data).map_err(lib_err)?
        };
        unsafe { *out = score };
        Ok(())
    })
}

unsafe fn score_set(scores: *const f64, labels: *const u8, len: usize) -> Result<ScoreSet, EngaeStatus> {
    if scores.is_null() || labels.is_null() {
        return Err(fail(EngaeStatus::NullPointer, "null argument"));
    }
    let s = unsafe { std::slice::from_raw_parts(scores, len) };
    let l: Vec<Label> = unsafe { std::slice::from_raw_parts(labels, len) }
        .iter()
        .map(|&b| if b != 0 { Label::Disengaged } else { Label::Engaged })
        .collect();
    ScoreSet::from_pairs(s, &l).map_err(lib_err)
}

/// ROC AUC of `len` scores; `labels[i] != 0` marks a disengaged sample.
///
/// # Safety
/// `scores` and `labels` must each hold `len` elements; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn engae_roc_auc(
    scores: *const f64,
    labels: *const u8,
    len: usize,
    out: *mut f64,
) -> EngaeStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(EngaeStatus::NullPointer, "out is null"));
        }
        let set = unsafe { score_set(scores, labels, len) }?;
        unsafe { *out = roc_auc(&set).map_err(lib_err)? };
        Ok(())
    })
}

/// Average precision of `len` scores; `labels[i] != 0` marks a disengaged
/// sample.
///
/// # Safety
/// `scores` and `labels` must each hold `len` elements; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn engae_pr_auc(
    scores: *const f64,
    labels: *const u8,
    len: usize,
    out: *mut f64,
) -> EngaeStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(EngaeStatus::NullPointer, "out is null"));
        }
        let set = unsafe { score_set(scores, labels, len) }?;
        unsafe { *out = pr_auc(&set).map_err(lib_err)? };
        Ok(())
    })
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn engae_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn engae_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
