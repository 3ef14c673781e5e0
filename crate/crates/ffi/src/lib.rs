//! C interface to geosplit.
//!
//! Objects cross the boundary as opaque handles created by `*_load` and
//! released with the matching `*_free`. Every fallible call returns a
//! [`GsStatus`]; on failure, [`gs_last_error`] describes the problem for
//! the calling thread. Undefined ratios and scores come back as NaN.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use geosplit::ingest::{self, FrameElements, IngestError, SampleFormat};
use geosplit::leakage::{self, LeakageError, SplitAssignment};
use geosplit::mapeval::{self, MapEvalError, Mask};
use geosplit::Dataset;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GsStatus {
    Ok = 0,
    NullPointer = 1,
    Io = 2,
    Parse = 3,
    InvalidArgument = 4,
    Domain = 5,
    Panic = 6,
}

/// Sample file format for [`gs_dataset_load`].
pub const GS_FORMAT_AUTO: i32 = 0;
pub const GS_FORMAT_JSONL: i32 = 1;
pub const GS_FORMAT_CSV: i32 = 2;

pub struct GsDataset {
    inner: Dataset,
}

pub struct GsSplit {
    inner: SplitAssignment,
}

pub struct GsFrames {
    inner: FrameElements,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: GsStatus, msg: impl Into<String>) -> GsStatus {
    set_error(msg);
    status
}

fn ingest_status(e: &IngestError) -> GsStatus {
    match e {
        IngestError::Io(_) => GsStatus::Io,
        IngestError::InvalidArgument(_) => GsStatus::InvalidArgument,
        _ => GsStatus::Parse,
    }
}

fn leakage_status(e: &LeakageError) -> GsStatus {
    match e {
        LeakageError::Io(_) => GsStatus::Io,
        LeakageError::Parse { .. } => GsStatus::Parse,
        LeakageError::InvalidThresholds(_) | LeakageError::InvalidArgument(_) => GsStatus::InvalidArgument,
        _ => GsStatus::Domain,
    }
}

fn eval_status(e: &MapEvalError) -> GsStatus {
    match e {
        MapEvalError::InvalidArgument(_) | MapEvalError::InvalidRaster(_) | MapEvalError::ShapeMismatch { .. } => {
            GsStatus::InvalidArgument
        }
        _ => GsStatus::Domain,
    }
}

/// Run `f`, turning panics into [`GsStatus::Panic`].
fn guard(f: impl FnOnce() -> GsStatus) -> GsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(GsStatus::Panic, "internal panic"),
    }
}

unsafe fn path_arg<'a>(path: *const c_char) -> Result<&'a Path, GsStatus> {
    if path.is_null() {
        return Err(fail(GsStatus::NullPointer, "path is null"));
    }
    CStr::from_ptr(path)
        .to_str()
        .map(Path::new)
        .map_err(|_| fail(GsStatus::InvalidArgument, "path is not valid UTF-8"))
}

fn nan_or(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

/// Last error message on this thread, or null. Valid until the next call
/// into this library from the same thread.
#[no_mangle]
pub extern "C" fn gs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Load pose samples. `format` is one of the `GS_FORMAT_*` constants.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gs_dataset_load(path: *const c_char, format: i32, out: *mut *mut GsDataset) -> GsStatus {
    guard(|| {
        if out.is_null() {
            return fail(GsStatus::NullPointer, "out is null");
        }
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let format = match format {
            GS_FORMAT_AUTO => SampleFormat::from_path(path),
            GS_FORMAT_JSONL => SampleFormat::Jsonl,
            GS_FORMAT_CSV => SampleFormat::Csv,
            other => return fail(GsStatus::InvalidArgument, format!("unknown format {other}")),
        };
        match ingest::load_samples(path, format) {
            Ok(ds) => {
                *out = Box::into_raw(Box::new(GsDataset { inner: ds }));
                GsStatus::Ok
            }
            Err(e) => fail(ingest_status(&e), e.to_string()),
        }
    })
}

/// Number of samples, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a handle from [`gs_dataset_load`].
#[no_mangle]
pub unsafe extern "C" fn gs_dataset_len(ds: *const GsDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.len())
}

/// # Safety
/// `ds` must be null or a handle from [`gs_dataset_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gs_dataset_free(ds: *mut GsDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Load a `sample_id,set` split file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gs_split_load(path: *const c_char, out: *mut *mut GsSplit) -> GsStatus {
    guard(|| {
        if out.is_null() {
            return fail(GsStatus::NullPointer, "out is null");
        }
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match leakage::load_split_csv(path) {
            Ok(split) => {
                *out = Box::into_raw(Box::new(GsSplit { inner: split }));
                GsStatus::Ok
            }
            Err(e) => fail(leakage_status(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `split` must be null or a handle from [`gs_split_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gs_split_free(split: *mut GsSplit) {
    if !split.is_null() {
        drop(Box::from_raw(split));
    }
}

/// Share of val and test samples strictly closer than `threshold` meters
/// to a train sample. NaN when a set has nothing to evaluate.
///
/// # Safety
/// Handles must be live; `val_ratio` and `test_ratio` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn gs_audit(
    ds: *const GsDataset,
    split: *const GsSplit,
    threshold: f64,
    val_ratio: *mut f64,
    test_ratio: *mut f64,
) -> GsStatus {
    guard(|| {
        let (Some(ds), Some(split)) = (ds.as_ref(), split.as_ref()) else {
            return fail(GsStatus::NullPointer, "null handle");
        };
        if val_ratio.is_null() || test_ratio.is_null() {
            return fail(GsStatus::NullPointer, "null output pointer");
        }
        match leakage::audit(&ds.inner, &split.inner, &[threshold]) {
            Ok(r) => {
                *val_ratio = nan_or(r.val.ratios[0]);
                *test_ratio = nan_or(r.test.ratios[0]);
                GsStatus::Ok
            }
            Err(e) => fail(leakage_status(&e), e.to_string()),
        }
    })
}

unsafe fn points(xy: *const f64, n: usize) -> Option<Vec<[f64; 2]>> {
    if xy.is_null() {
        return None;
    }
    let flat: &[f64] = std::slice::from_raw_parts(xy, 2 * n);
    Some(flat.chunks_exact(2).map(|c| [c[0], c[1]]).collect())
}

/// Symmetric Chamfer distance between two polylines given as interleaved
/// `x0, y0, x1, y1, ...` arrays of `na` and `nb` points.
///
/// # Safety
/// `a` and `b` must point to `2 * na` and `2 * nb` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gs_chamfer(
    a: *const f64,
    na: usize,
    b: *const f64,
    nb: usize,
    resample_interval: f64,
    out: *mut f64,
) -> GsStatus {
    guard(|| {
        let (Some(a), Some(b)) = (points(a, na), points(b, nb)) else {
            return fail(GsStatus::NullPointer, "null polyline");
        };
        if out.is_null() {
            return fail(GsStatus::NullPointer, "out is null");
        }
        match mapeval::chamfer(&a, &b, resample_interval) {
            Ok(d) => {
                *out = d;
                GsStatus::Ok
            }
            Err(e) => fail(eval_status(&e), e.to_string()),
        }
    })
}

/// Intersection over union of two equally sized byte masks (non-zero is set).
///
/// # Safety
/// `pred` and `gt` must point to `len` bytes; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gs_iou(pred: *const u8, gt: *const u8, len: usize, out: *mut f64) -> GsStatus {
    guard(|| {
        if pred.is_null() || gt.is_null() || out.is_null() {
            return fail(GsStatus::NullPointer, "null pointer");
        }
        let to_mask = |p: *const u8| Mask {
            width: len,
            height: 1,
            data: std::slice::from_raw_parts(p, len).iter().map(|&b| b != 0).collect(),
        };
        match mapeval::iou(&to_mask(pred), &to_mask(gt)) {
            Ok(v) => {
                *out = v;
                GsStatus::Ok
            }
            Err(e) => fail(eval_status(&e), e.to_string()),
        }
    })
}

/// Load map elements (JSON lines). Predictions need `require_confidence`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gs_frames_load(
    path: *const c_char,
    require_confidence: bool,
    out: *mut *mut GsFrames,
) -> GsStatus {
    guard(|| {
        if out.is_null() {
            return fail(GsStatus::NullPointer, "out is null");
        }
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match ingest::load_map_elements(path, require_confidence) {
            Ok(frames) => {
                *out = Box::into_raw(Box::new(GsFrames { inner: frames }));
                GsStatus::Ok
            }
            Err(e) => fail(ingest_status(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `frames` must be null or a handle from [`gs_frames_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gs_frames_free(frames: *mut GsFrames) {
    if !frames.is_null() {
        drop(Box::from_raw(frames));
    }
}

/// Chamfer mAP. Writes the overall mean to `overall` and, when `class_map`
/// is non-null, the divider, boundary and crossing mAPs to `class_map[0..3]`.
///
/// # Safety
/// Handles must be live; `thresholds` must point to `n_thresholds` doubles;
/// `overall` must be valid; `class_map` null or room for 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn gs_evaluate(
    preds: *const GsFrames,
    gts: *const GsFrames,
    thresholds: *const f64,
    n_thresholds: usize,
    resample_interval: f64,
    overall: *mut f64,
    class_map: *mut f64,
) -> GsStatus {
    guard(|| {
        let (Some(preds), Some(gts)) = (preds.as_ref(), gts.as_ref()) else {
            return fail(GsStatus::NullPointer, "null handle");
        };
        if thresholds.is_null() || overall.is_null() {
            return fail(GsStatus::NullPointer, "null pointer");
        }
        let ts = std::slice::from_raw_parts(thresholds, n_thresholds);
        match mapeval::evaluate(&preds.inner, &gts.inner, ts, resample_interval) {
            Ok(r) => {
                *overall = nan_or(r.overall);
                if !class_map.is_null() {
                    for class in geosplit::ElementClass::ALL {
                        *class_map.add(class.index()) = nan_or(r.classes[&class].map);
                    }
                }
                GsStatus::Ok
            }
            Err(e) => fail(eval_status(&e), e.to_string()),
        }
    })
}
