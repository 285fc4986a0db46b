//! C ABI over the refdiff engine.
//!
//! Every fallible function returns a [`RefdiffStatus`] and writes its result
//! through an out-pointer. On failure the message is available from
//! [`refdiff_last_error`] on the same thread until the next failing call.
//! Handles returned through out-pointers are owned by the caller and must be
//! released with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use refdiff::config::{BiasProfile, Mode, RunConfig, ThresholdMode};
use refdiff::refexpr::{resolve_conflicts, Direction, DirectionSet};
use refdiff::scoring::build_positional_bias;
use refdiff::{Dataset, Error, EvalReport, Map, Mask, Tensor};

/// Result codes. Values from 10 upward equal the CLI exit status of the
/// same failure class.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RefdiffStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Panic = 3,
    IoFailure = 10,
    BadMagic = 11,
    UnsupportedVersion = 12,
    UnsupportedDtype = 13,
    TruncatedPayload = 14,
    DimOverflow = 15,
    InvalidJson = 16,
    InvalidTensor = 17,
    MissingField = 20,
    DimMismatch = 21,
    RootIndexOutOfRange = 22,
    NonBinaryMask = 23,
    EmptyExpression = 30,
    IndexOutOfRange = 31,
    NoValidProposal = 40,
    DegenerateMask = 41,
    ZeroVector = 42,
    LengthMismatch = 43,
    EmptyProposalSet = 44,
    MissingInput = 50,
    EmptyDataset = 51,
    InvalidConfig = 52,
}

impl From<&Error> for RefdiffStatus {
    fn from(e: &Error) -> Self {
        use RefdiffStatus as S;
        match e {
            Error::Io { .. } => S::IoFailure,
            Error::BadMagic(_) => S::BadMagic,
            Error::UnsupportedVersion(_) => S::UnsupportedVersion,
            Error::UnsupportedDtype(_) => S::UnsupportedDtype,
            Error::TruncatedPayload { .. } => S::TruncatedPayload,
            Error::DimOverflow(_) => S::DimOverflow,
            Error::InvalidTensor(_) => S::InvalidTensor,
            Error::Json { .. } => S::InvalidJson,
            Error::MissingField(_) => S::MissingField,
            Error::DimMismatch(_) => S::DimMismatch,
            Error::RootIndexOutOfRange { .. } => S::RootIndexOutOfRange,
            Error::NonBinaryMask(_) => S::NonBinaryMask,
            Error::EmptyExpression => S::EmptyExpression,
            Error::IndexOutOfRange { .. } => S::IndexOutOfRange,
            Error::NoValidProposal => S::NoValidProposal,
            Error::DegenerateMask => S::DegenerateMask,
            Error::ZeroVector => S::ZeroVector,
            Error::LengthMismatch { .. } => S::LengthMismatch,
            Error::EmptyProposalSet => S::EmptyProposalSet,
            Error::MissingInput { .. } => S::MissingInput,
            Error::EmptyDataset => S::EmptyDataset,
            Error::InvalidConfig(_) => S::InvalidConfig,
        }
    }
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RefdiffMode {
    G = 0,
    GS = 1,
    DS = 2,
    Full = 3,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RefdiffDtype {
    F32 = 0,
    U8 = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RefdiffBiasProfile {
    Linear = 0,
    Cosine = 1,
}

pub const REFDIFF_DIRECTION_LEFT: u32 = 1;
pub const REFDIFF_DIRECTION_RIGHT: u32 = 2;
pub const REFDIFF_DIRECTION_TOP: u32 = 4;
pub const REFDIFF_DIRECTION_BOTTOM: u32 = 8;

/// Scoring configuration. Obtain defaults from [`refdiff_config_default`].
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct RefdiffConfig {
    pub mode: RefdiffMode,
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    /// Non-zero: thresholds are pixel-value quantiles.
    pub percentile: u8,
    /// Non-zero: discriminative score is the raw dot product.
    pub raw_dot: u8,
}

impl From<&RefdiffConfig> for RunConfig {
    fn from(c: &RefdiffConfig) -> Self {
        let mode = match c.mode {
            RefdiffMode::G => Mode::G,
            RefdiffMode::GS => Mode::GS,
            RefdiffMode::DS => Mode::DS,
            RefdiffMode::Full => Mode::FULL,
        };
        RunConfig {
            alpha: c.alpha,
            beta: c.beta,
            epsilon: c.epsilon,
            threshold_mode: if c.percentile != 0 {
                ThresholdMode::Percentile
            } else {
                ThresholdMode::Absolute
            },
            raw_dot: c.raw_dot != 0,
            ..RunConfig::with_mode(mode)
        }
    }
}

/// An RDTF tensor.
pub struct RefdiffTensor(Tensor);

/// A real-valued `width × height` map (correlation map, positional bias).
pub struct RefdiffMap(Map);

/// Result of segmenting one sample.
pub struct RefdiffSelection {
    index: usize,
    score: f64,
    mask: Mask,
}

/// Evaluation report over a dataset.
pub struct RefdiffReport(EvalReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

/// Message of the most recent failure on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn refdiff_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

struct Fail(RefdiffStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(RefdiffStatus::from(&e), format!("{}: {e}", e.code()))
    }
}

fn null(what: &str) -> Fail {
    Fail(RefdiffStatus::NullArgument, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RefdiffStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RefdiffStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            RefdiffStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| Fail(RefdiffStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn put_box<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    out.write(Box::into_raw(Box::new(value)));
    Ok(())
}

unsafe fn release<T>(handle: *mut T) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Release a handle. Null is ignored.
///
/// # Safety
/// `handle` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn refdiff_tensor_free(handle: *mut RefdiffTensor) {
    release(handle)
}

/// Release a handle. Null is ignored.
///
/// # Safety
/// `handle` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn refdiff_map_free(handle: *mut RefdiffMap) {
    release(handle)
}

/// Release a handle. Null is ignored.
///
/// # Safety
/// `handle` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn refdiff_selection_free(handle: *mut RefdiffSelection) {
    release(handle)
}

/// Release a handle. Null is ignored.
///
/// # Safety
/// `handle` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn refdiff_report_free(handle: *mut RefdiffReport) {
    release(handle)
}

/// Default configuration for `mode`.
#[no_mangle]
pub extern "C" fn refdiff_config_default(mode: RefdiffMode) -> RefdiffConfig {
    let d = RunConfig::default();
    RefdiffConfig {
        mode,
        alpha: d.alpha,
        beta: d.beta,
        epsilon: d.epsilon,
        percentile: 0,
        raw_dot: 0,
    }
}

/// Load an RDTF file.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn refdiff_tensor_load(
    path: *const c_char,
    out: *mut *mut RefdiffTensor,
) -> RefdiffStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        let t = refdiff::load_tensor(path)?;
        put_box(out, RefdiffTensor(t))
    })
}

/// Write a tensor as RDTF.
///
/// # Safety
/// `tensor` must be a live handle; `path` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn refdiff_tensor_save(
    tensor: *const RefdiffTensor,
    path: *const c_char,
) -> RefdiffStatus {
    guard(|| {
        let t = deref(tensor, "tensor")?;
        let path = path_arg(path, "path")?;
        Ok(refdiff::save_tensor(&t.0, path)?)
    })
}

/// Build an f32 tensor from `dims` (row-major, first axis slowest) and a copy
/// of `data`.
///
/// # Safety
/// `dims` must point to `ndim` values and `data` to their product.
#[no_mangle]
pub unsafe extern "C" fn refdiff_tensor_from_f32(
    dims: *const usize,
    ndim: usize,
    data: *const f32,
    len: usize,
    out: *mut *mut RefdiffTensor,
) -> RefdiffStatus {
    guard(|| {
        let dims = slice_arg(dims, ndim, "dims")?.to_vec();
        let data = slice_arg(data, len, "data")?.to_vec();
        put_box(out, RefdiffTensor(Tensor::from_f32(dims, data)?))
    })
}

/// # Safety
/// `tensor` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn refdiff_tensor_ndim(tensor: *const RefdiffTensor) -> usize {
    tensor.as_ref().map_or(0, |t| t.0.dims().len())
}

/// Copy up to `cap` dimension sizes into `dims`; returns the tensor's ndim.
///
/// # Safety
/// `tensor` must be a live handle; `dims` must have room for `cap` values.
#[no_mangle]
pub unsafe extern "C" fn refdiff_tensor_dims(
    tensor: *const RefdiffTensor,
    dims: *mut usize,
    cap: usize,
) -> usize {
    let Some(t) = tensor.as_ref() else { return 0 };
    let d = t.0.dims();
    if !dims.is_null() {
        for (i, &v) in d.iter().take(cap).enumerate() {
            dims.add(i).write(v);
        }
    }
    d.len()
}

/// # Safety
/// `tensor` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn refdiff_tensor_dtype(tensor: *const RefdiffTensor) -> RefdiffDtype {
    match tensor.as_ref().map(|t| t.0.dtype()) {
        Some(refdiff::tensor::DType::U8) => RefdiffDtype::U8,
        _ => RefdiffDtype::F32,
    }
}

/// Borrow the f32 payload; null for u8 tensors. Valid while the handle lives.
///
/// # Safety
/// `tensor` must be a live handle; `len` may be null.
#[no_mangle]
pub unsafe extern "C" fn refdiff_tensor_data_f32(
    tensor: *const RefdiffTensor,
    len: *mut usize,
) -> *const f32 {
    borrow(tensor.as_ref().and_then(|t| t.0.as_f32()), len)
}

/// Borrow the u8 payload; null for f32 tensors. Valid while the handle lives.
///
/// # Safety
/// `tensor` must be a live handle; `len` may be null.
#[no_mangle]
pub unsafe extern "C" fn refdiff_tensor_data_u8(
    tensor: *const RefdiffTensor,
    len: *mut usize,
) -> *const u8 {
    borrow(tensor.as_ref().and_then(|t| t.0.as_u8()), len)
}

unsafe fn borrow<T>(data: Option<&[T]>, len: *mut usize) -> *const T {
    if !len.is_null() {
        len.write(data.map_or(0, <[T]>::len));
    }
    data.map_or(ptr::null(), <[T]>::as_ptr)
}

/// Correlation map of token `k` from a `w × h × l × N` attention tensor,
/// resized to `width × height`.
///
/// # Safety
/// `attention` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn refdiff_correlation_matrix(
    attention: *const RefdiffTensor,
    k: usize,
    width: usize,
    height: usize,
    epsilon: f64,
    out: *mut *mut RefdiffMap,
) -> RefdiffStatus {
    guard(|| {
        let t = deref(attention, "attention")?;
        let stack = refdiff::AttentionStack::from_tensor(&t.0)?;
        let c = refdiff::correlation_matrix(&stack, k, width, height, epsilon)?;
        put_box(out, RefdiffMap(c.map))
    })
}

/// Positional bias for a bitwise OR of `REFDIFF_DIRECTION_*` flags.
/// Conflicting flags on one axis cancel.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn refdiff_positional_bias(
    directions: u32,
    width: usize,
    height: usize,
    profile: RefdiffBiasProfile,
    out: *mut *mut RefdiffMap,
) -> RefdiffStatus {
    guard(|| {
        let flags = [
            (REFDIFF_DIRECTION_LEFT, Direction::Left),
            (REFDIFF_DIRECTION_RIGHT, Direction::Right),
            (REFDIFF_DIRECTION_TOP, Direction::Top),
            (REFDIFF_DIRECTION_BOTTOM, Direction::Bottom),
        ];
        let set: DirectionSet = flags
            .iter()
            .filter(|(bit, _)| directions & bit != 0)
            .map(|&(_, d)| d)
            .collect();
        let profile = match profile {
            RefdiffBiasProfile::Linear => BiasProfile::Linear,
            RefdiffBiasProfile::Cosine => BiasProfile::Cosine,
        };
        let bias = build_positional_bias(&resolve_conflicts(set), width, height, profile);
        put_box(out, RefdiffMap(bias.0))
    })
}

/// # Safety
/// `map` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn refdiff_map_width(map: *const RefdiffMap) -> usize {
    map.as_ref().map_or(0, |m| m.0.width())
}

/// # Safety
/// `map` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn refdiff_map_height(map: *const RefdiffMap) -> usize {
    map.as_ref().map_or(0, |m| m.0.height())
}

/// Borrow the `width·height` values, indexed `x·height + y`.
///
/// # Safety
/// `map` must be a live handle; `len` may be null.
#[no_mangle]
pub unsafe extern "C" fn refdiff_map_data(map: *const RefdiffMap, len: *mut usize) -> *const f64 {
    borrow(map.as_ref().map(|m| m.0.as_slice()), len)
}

unsafe fn mask_arg(data: *const u8, len: usize, w: usize, h: usize) -> Result<Mask, Fail> {
    let mask = Mask::from_vec(w, h, slice_arg(data, len, "mask")?.to_vec())?;
    if !mask.is_binary() {
        return Err(Error::NonBinaryMask("mask".into()).into());
    }
    Ok(mask)
}

/// Mean of `map` inside the mask minus the mean outside it. `mask` holds
/// `len` bytes laid out like the map.
///
/// # Safety
/// `map` must be a live handle, `mask` must point to `len` bytes and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn refdiff_generative_score(
    map: *const RefdiffMap,
    mask: *const u8,
    len: usize,
    out: *mut f64,
) -> RefdiffStatus {
    guard(|| {
        let m = &deref(map, "map")?.0;
        let mask = mask_arg(mask, len, m.width(), m.height())?;
        put(out, refdiff::scoring::generative_score(m, &mask)?, "out")
    })
}

/// IoU of two `width × height` masks.
///
/// # Safety
/// `pred` and `gt` must each point to `width·height` bytes; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn refdiff_iou(
    pred: *const u8,
    gt: *const u8,
    width: usize,
    height: usize,
    out: *mut f64,
) -> RefdiffStatus {
    guard(|| {
        let n = width * height;
        let p = mask_arg(pred, n, width, height)?;
        let g = mask_arg(gt, n, width, height)?;
        put(out, refdiff::iou(&p, &g)?, "out")
    })
}

/// Segment the sample described by a manifest file.
///
/// # Safety
/// `manifest_path` must be a nul-terminated string, `config` a valid
/// pointer and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn refdiff_segment(
    manifest_path: *const c_char,
    config: *const RefdiffConfig,
    out: *mut *mut RefdiffSelection,
) -> RefdiffStatus {
    guard(|| {
        let path = path_arg(manifest_path, "manifest_path")?;
        let config = RunConfig::from(deref(config, "config")?);
        let manifest = refdiff::SampleManifest::parse(path)?;
        let outcome = refdiff::segment(&manifest, &config)?;
        let sel = RefdiffSelection {
            index: outcome.selected_origin(),
            score: outcome.selection.best_score(),
            mask: outcome.selection.selected_mask,
        };
        put_box(out, sel)
    })
}

/// Index of the selected proposal in the input stack (or threshold list for
/// weight-free proposals).
///
/// # Safety
/// `sel` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn refdiff_selection_index(sel: *const RefdiffSelection) -> usize {
    sel.as_ref().map_or(0, |s| s.index)
}

/// # Safety
/// `sel` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn refdiff_selection_score(sel: *const RefdiffSelection) -> f64 {
    sel.as_ref().map_or(f64::NAN, |s| s.score)
}

/// Borrow the selected mask, indexed `x·height + y`.
///
/// # Safety
/// `sel` must be a live handle; `width` and `height` may be null.
#[no_mangle]
pub unsafe extern "C" fn refdiff_selection_mask(
    sel: *const RefdiffSelection,
    width: *mut usize,
    height: *mut usize,
) -> *const u8 {
    let Some(s) = sel.as_ref() else {
        return ptr::null();
    };
    if !width.is_null() {
        width.write(s.mask.width());
    }
    if !height.is_null() {
        height.write(s.mask.height());
    }
    s.mask.as_slice().as_ptr()
}

/// Evaluate a dataset (directory or `dataset.json`) with up to `jobs` worker
/// threads.
///
/// # Safety
/// `dataset_path` must be a nul-terminated string, `config` a valid pointer
/// and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn refdiff_evaluate(
    dataset_path: *const c_char,
    config: *const RefdiffConfig,
    jobs: usize,
    out: *mut *mut RefdiffReport,
) -> RefdiffStatus {
    guard(|| {
        let path = path_arg(dataset_path, "dataset_path")?;
        let config = RunConfig::from(deref(config, "config")?);
        let dataset = Dataset::load(path)?;
        let report = refdiff::evaluate_dataset(&dataset, &config, jobs)?;
        put_box(out, RefdiffReport(report))
    })
}

/// # Safety
/// `report` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn refdiff_report_miou(report: *const RefdiffReport) -> f64 {
    report.as_ref().map_or(f64::NAN, |r| r.0.miou)
}

/// # Safety
/// `report` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn refdiff_report_oiou(report: *const RefdiffReport) -> f64 {
    report.as_ref().map_or(f64::NAN, |r| r.0.oiou)
}

/// # Safety
/// `report` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn refdiff_report_len(report: *const RefdiffReport) -> usize {
    report.as_ref().map_or(0, |r| r.0.per_sample.len())
}

/// Per-sample IoU, NaN when `i` is out of range.
///
/// # Safety
/// `report` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn refdiff_report_sample_iou(report: *const RefdiffReport, i: usize) -> f64 {
    report
        .as_ref()
        .and_then(|r| r.0.per_sample.get(i))
        .map_or(f64::NAN, |s| s.iou)
}

/// Write the report as JSON, byte-identical to the CLI's `--report` output.
///
/// # Safety
/// `report` must be a live handle; `path` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn refdiff_report_write(
    report: *const RefdiffReport,
    path: *const c_char,
) -> RefdiffStatus {
    guard(|| {
        let r = deref(report, "report")?;
        let path = path_arg(path, "path")?;
        Ok(refdiff::emit_report(&r.0, path)?)
    })
}
