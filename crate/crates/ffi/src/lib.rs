//! C ABI over `spams-core`.
//!
//! Every fallible function returns a [`SpamsStatus`]. On failure a message is
//! stored per thread and can be read with [`spams_last_error`]. Handles are
//! opaque and must be released with their matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use spams_core::config::KvConfig;
use spams_core::data::{load_dataset_dir, LabeledDataset, MultiVarSequence, WindowConfig};
use spams_core::model_io::{load_model, save_model};
use spams_core::training::{self, TrainConfig, TrainedModel};
use spams_core::SpamsError;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpamsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Data = 4,
    Config = 5,
    Model = 6,
    Training = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

/// Opaque labeled dataset.
pub struct SpamsDataset {
    inner: LabeledDataset,
}

/// Opaque trained model.
pub struct SpamsModel {
    inner: TrainedModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Failure(SpamsStatus, String);

impl From<SpamsError> for Failure {
    fn from(e: SpamsError) -> Self {
        let status = match &e {
            SpamsError::Io { .. } => SpamsStatus::Io,
            SpamsError::Config(_) => SpamsStatus::Config,
            SpamsError::Model { .. } => SpamsStatus::Model,
            SpamsError::Divergence { .. } | SpamsError::ClassEmpty { .. } | SpamsError::Split(_) => {
                SpamsStatus::Training
            }
            _ => SpamsStatus::Data,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: SpamsStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

/// Runs `f`, converting errors and panics into a status plus message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SpamsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SpamsStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SpamsStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(fail(SpamsStatus::NullPointer, format!("{what} is null")));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(SpamsStatus::InvalidArgument, format!("{what} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| fail(SpamsStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| fail(SpamsStatus::NullPointer, format!("{what} is null")))
}

unsafe fn sequence_arg(values: *const f64, steps: usize, dims: usize) -> Result<MultiVarSequence, Failure> {
    if values.is_null() {
        return Err(fail(SpamsStatus::NullPointer, "values is null"));
    }
    let n = steps
        .checked_mul(dims)
        .ok_or_else(|| fail(SpamsStatus::InvalidArgument, "steps * dims overflows"))?;
    let data = std::slice::from_raw_parts(values, n).to_vec();
    Ok(MultiVarSequence::new(steps, dims, data)?)
}

/// Message of the last failed call on this thread, or null if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn spams_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Loads a dataset directory (`sequences.csv`, `labels.csv`, optional
/// `contexts.csv`).
///
/// # Safety
/// `dir` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn spams_dataset_load(dir: *const c_char, out: *mut *mut SpamsDataset) -> SpamsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let inner = load_dataset_dir(&path_arg(dir, "dir")?)?;
        *out = Box::into_raw(Box::new(SpamsDataset { inner }));
        Ok(())
    })
}

/// # Safety
/// `ds` must be null or a handle from [`spams_dataset_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn spams_dataset_free(ds: *mut SpamsDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Number of samples, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn spams_dataset_len(ds: *const SpamsDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.len())
}

/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn spams_dataset_num_classes(ds: *const SpamsDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.num_classes())
}

/// Trains a model. `config` is optional `key=value` text using the same keys
/// as the command-line config file; window and stride default to 5 and 1.
///
/// # Safety
/// `train` and `val` must be live dataset handles, `config` null or a
/// NUL-terminated string, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn spams_model_train(
    train: *const SpamsDataset,
    val: *const SpamsDataset,
    config: *const c_char,
    out: *mut *mut SpamsModel,
) -> SpamsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let train = &ref_arg(train, "train")?.inner;
        let val = &ref_arg(val, "val")?.inner;
        let mut cfg = TrainConfig::default();
        let (mut w, mut s) = (5, 1);
        if !config.is_null() {
            let text = CStr::from_ptr(config)
                .to_str()
                .map_err(|_| fail(SpamsStatus::InvalidArgument, "config is not UTF-8"))?;
            let (cw, cs) = cfg.apply_kv(&KvConfig::parse("config", text)?)?;
            w = cw.unwrap_or(w);
            s = cs.unwrap_or(s);
        }
        let k = train.num_classes().max(val.num_classes());
        let train = train.clone().with_num_classes(k)?;
        let val = val.clone().with_num_classes(k)?;
        let inner = training::train(&train, &val, WindowConfig::new(w, s)?, &cfg)?;
        *out = Box::into_raw(Box::new(SpamsModel { inner }));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn spams_model_load(path: *const c_char, out: *mut *mut SpamsModel) -> SpamsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let inner = load_model(&path_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(SpamsModel { inner }));
        Ok(())
    })
}

/// # Safety
/// `model` must be a live model handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn spams_model_save(model: *const SpamsModel, path: *const c_char) -> SpamsStatus {
    guard(|| {
        save_model(&ref_arg(model, "model")?.inner, &path_arg(path, "path")?)?;
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn spams_model_free(model: *mut SpamsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn spams_model_num_classes(model: *const SpamsModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.num_classes())
}

/// Number of features per time step the model expects.
///
/// # Safety
/// `model` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn spams_model_input_dims(model: *const SpamsModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.input_features())
}

/// Classifies one sequence stored row-major (`steps` rows of `dims` values).
/// Writes `num_classes` posteriors; `t_star` (may be null) receives the
/// 1-based start window of each class's best block.
///
/// # Safety
/// `values` must hold `steps * dims` doubles; `posterior` and a non-null
/// `t_star` must hold `num_classes` elements.
#[no_mangle]
pub unsafe extern "C" fn spams_predict(
    model: *const SpamsModel,
    values: *const f64,
    steps: usize,
    dims: usize,
    posterior: *mut f64,
    t_star: *mut usize,
    num_classes: usize,
) -> SpamsStatus {
    guard(|| {
        let model = &ref_arg(model, "model")?.inner;
        if posterior.is_null() {
            return Err(fail(SpamsStatus::NullPointer, "posterior is null"));
        }
        let k = model.num_classes();
        if num_classes < k {
            return Err(fail(SpamsStatus::BufferTooSmall, format!("need {k} classes, got {num_classes}")));
        }
        let r = training::predict(model, &sequence_arg(values, steps, dims)?)?;
        std::slice::from_raw_parts_mut(posterior, k).copy_from_slice(&r.posterior);
        if !t_star.is_null() {
            std::slice::from_raw_parts_mut(t_star, k).copy_from_slice(&r.t_star);
        }
        Ok(())
    })
}

/// Temporal profile of one sequence, window-major (`num_windows` rows of
/// `num_classes` probabilities). The required window count is always stored
/// in `num_windows`; if `capacity` is below `num_windows * num_classes`
/// nothing else is written and `BufferTooSmall` is returned.
///
/// # Safety
/// `values` must hold `steps * dims` doubles, `out` `capacity` doubles (or be
/// null when `capacity` is 0), `num_windows` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn spams_profile(
    model: *const SpamsModel,
    values: *const f64,
    steps: usize,
    dims: usize,
    out: *mut f64,
    capacity: usize,
    num_windows: *mut usize,
) -> SpamsStatus {
    guard(|| {
        let model = &ref_arg(model, "model")?.inner;
        let n_out = out_arg(num_windows, "num_windows")?;
        let p = model.profile(&sequence_arg(values, steps, dims)?)?;
        *n_out = p.num_windows();
        let need = p.values().len();
        if capacity < need {
            return Err(fail(SpamsStatus::BufferTooSmall, format!("need {need} values, got {capacity}")));
        }
        if out.is_null() {
            return Err(fail(SpamsStatus::NullPointer, "out is null"));
        }
        std::slice::from_raw_parts_mut(out, need).copy_from_slice(p.values());
        Ok(())
    })
}
