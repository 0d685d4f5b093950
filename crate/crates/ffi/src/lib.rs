//! C interface to the prescient engine.
//!
//! Every fallible function returns a [`PrescientStatus`]. On failure the
//! message is available from [`prescient_last_error`] on the same thread.
//! Handles are opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use prescient::cli::Checkpoint;
use prescient::data::{denormalize, normalize, TimeSeries};
use prescient::metrics::{f1_at_k, f1_composite, f1_point, f1_range};
use prescient::models::Model;
use prescient::scoring::{StreamDetector, StreamEvent};
use prescient::tensor::Tensor;
use prescient::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrescientStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Data = 4,
    Checkpoint = 5,
    Io = 6,
    Numeric = 7,
    Panic = 8,
}

impl From<&Error> for PrescientStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Config(_) => PrescientStatus::Config,
            Error::Parse { .. } | Error::Data(_) => PrescientStatus::Data,
            Error::Checkpoint(_) => PrescientStatus::Checkpoint,
            Error::Io { .. } => PrescientStatus::Io,
            _ => PrescientStatus::Numeric,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("interior nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn fail(status: PrescientStatus, msg: impl Into<String>) -> PrescientStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> Result<(), PrescientStatus>) -> PrescientStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PrescientStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(PrescientStatus::Panic, "internal panic"),
    }
}

fn lift<T>(r: prescient::Result<T>) -> Result<T, PrescientStatus> {
    r.map_err(|e| fail(PrescientStatus::from(&e), e.to_string()))
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), PrescientStatus> {
    if p.is_null() {
        Err(fail(PrescientStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

/// Borrows `len` elements; a null pointer is accepted only when `len` is zero.
unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], PrescientStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, what)?;
    Ok(std::slice::from_raw_parts(p, len))
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn prescient_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// A loaded checkpoint.
pub struct PrescientModel {
    checkpoint: Checkpoint,
    model: Model,
}

/// Loads a checkpoint file into `*out`.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn prescient_model_load(path: *const c_char, out: *mut *mut PrescientModel) -> PrescientStatus {
    guard(|| {
        non_null(path, "path")?;
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let path =
            CStr::from_ptr(path).to_str().map_err(|_| fail(PrescientStatus::InvalidArgument, "path is not UTF-8"))?;
        let checkpoint = lift(Checkpoint::load(Path::new(path)))?;
        let model = lift(checkpoint.model())?;
        *out = Box::into_raw(Box::new(PrescientModel { checkpoint, model }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`prescient_model_load`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn prescient_model_free(model: *mut PrescientModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of feature columns `D`, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn prescient_model_features(model: *const PrescientModel) -> usize {
    model.as_ref().map_or(0, |m| m.checkpoint.spec.n_features())
}

/// Rows the model reads: `W` for a forward model, `H` for a backward one.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn prescient_model_input_rows(model: *const PrescientModel) -> usize {
    model.as_ref().map_or(0, |m| m.checkpoint.spec.input_rows())
}

/// Rows the model writes: `H` for a forward model, `W` for a backward one.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn prescient_model_output_rows(model: *const PrescientModel) -> usize {
    model.as_ref().map_or(0, |m| m.checkpoint.spec.output_rows())
}

/// Runs the model on a row-major `[input_rows, D]` window in original
/// units and writes the row-major `[output_rows, D]` result to `out`.
/// Continuous columns are in original units, discrete columns are
/// probabilities.
///
/// # Safety
/// `input` must hold `input_len` doubles and `out` room for `out_len`.
#[no_mangle]
pub unsafe extern "C" fn prescient_model_forecast(
    model: *const PrescientModel,
    input: *const f64,
    input_len: usize,
    out: *mut f64,
    out_len: usize,
) -> PrescientStatus {
    guard(|| {
        non_null(model, "model")?;
        let m = &*model;
        let spec = &m.checkpoint.spec;
        let d = spec.n_features();
        let (rows_in, rows_out) = (spec.input_rows(), spec.output_rows());
        if input_len != rows_in * d {
            return Err(fail(
                PrescientStatus::InvalidArgument,
                format!("input has {input_len} values, expected {rows_in} x {d}"),
            ));
        }
        if out_len < rows_out * d {
            return Err(fail(
                PrescientStatus::InvalidArgument,
                format!("output buffer holds {out_len} values, needs {rows_out} x {d}"),
            ));
        }
        non_null(out, "out")?;
        let values = slice(input, input_len, "input")?.to_vec();
        let schema = &m.checkpoint.schema;
        let raw = lift(Tensor::new(vec![rows_in, d], values).and_then(|t| TimeSeries::new(t, None)))?;
        let x = lift(normalize(&raw, schema))?;
        let mut predictor = lift(m.model.predictor(&m.checkpoint.params))?;
        let pred = lift(predictor.predict(x.values()))?.assemble(spec, true);
        let result = lift(TimeSeries::new(pred, None).and_then(|p| denormalize(&p, schema)))?;
        std::slice::from_raw_parts_mut(out, rows_out * d).copy_from_slice(result.values().data());
        Ok(())
    })
}

/// Online proactive detector over one row stream.
pub struct PrescientStream {
    detector: StreamDetector<'static>,
}

/// One emitted judgement. `valid` is 0 when nothing was emitted.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PrescientEvent {
    pub valid: u8,
    pub flag: u8,
    pub timestamp: u64,
    pub score: f64,
}

impl From<Option<StreamEvent>> for PrescientEvent {
    fn from(e: Option<StreamEvent>) -> Self {
        e.map_or_else(Default::default, |e| PrescientEvent {
            valid: 1,
            flag: e.flag as u8,
            timestamp: e.timestamp as u64,
            score: e.score,
        })
    }
}

/// Everything one pushed row produces.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PrescientStep {
    /// The next timestamp, judged from its forecast alone.
    pub proactive: PrescientEvent,
    /// The row just pushed, judged against the forecast made for it.
    pub reactive: PrescientEvent,
}

/// Starts a stream over a forward model with a calibrated checkpoint.
///
/// # Safety
/// `model` must be a live handle that outlives the stream; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn prescient_stream_new(
    model: *const PrescientModel,
    out: *mut *mut PrescientStream,
) -> PrescientStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let m: &'static PrescientModel = &*model;
        let calibration = m
            .checkpoint
            .calibration
            .clone()
            .ok_or_else(|| fail(PrescientStatus::Checkpoint, "checkpoint has no calibration"))?;
        let detector =
            lift(StreamDetector::new(&m.model, &m.checkpoint.params, m.checkpoint.schema.clone(), calibration))?;
        *out = Box::into_raw(Box::new(PrescientStream { detector }));
        Ok(())
    })
}

/// Pushes one row of `len == D` values in original units.
///
/// # Safety
/// `row` must hold `len` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn prescient_stream_push(
    stream: *mut PrescientStream,
    row: *const f64,
    len: usize,
    out: *mut PrescientStep,
) -> PrescientStatus {
    guard(|| {
        non_null(stream, "stream")?;
        non_null(out, "out")?;
        let row = slice(row, len, "row")?;
        let step = lift((*stream).detector.push(row))?;
        *out = PrescientStep { proactive: step.proactive.into(), reactive: step.reactive.into() };
        Ok(())
    })
}

/// # Safety
/// `stream` must come from [`prescient_stream_new`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn prescient_stream_free(stream: *mut PrescientStream) {
    if !stream.is_null() {
        drop(Box::from_raw(stream));
    }
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PrescientF1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

unsafe fn with_pairs(
    flags: *const u8,
    labels: *const u8,
    len: usize,
    out: *mut PrescientF1,
    f: impl FnOnce(&[u8], &[u8]) -> prescient::Result<PrescientF1>,
) -> PrescientStatus {
    guard(|| {
        non_null(out, "out")?;
        let flags = slice(flags, len, "flags")?;
        let labels = slice(labels, len, "labels")?;
        *out = lift(f(flags, labels))?;
        Ok(())
    })
}

/// Point-wise F1 of `flags` against `labels`.
///
/// # Safety
/// `flags` and `labels` must hold `len` bytes each; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn prescient_f1_point(
    flags: *const u8,
    labels: *const u8,
    len: usize,
    out: *mut PrescientF1,
) -> PrescientStatus {
    with_pairs(flags, labels, len, out, |f, l| {
        let s = f1_point(f, l)?;
        Ok(PrescientF1 { precision: s.precision, recall: s.recall, f1: s.f1 })
    })
}

/// Composite F1: point-wise precision with event-wise recall.
///
/// # Safety
/// As for [`prescient_f1_point`].
#[no_mangle]
pub unsafe extern "C" fn prescient_f1_composite(
    flags: *const u8,
    labels: *const u8,
    len: usize,
    out: *mut PrescientF1,
) -> PrescientStatus {
    with_pairs(flags, labels, len, out, |f, l| {
        let s = f1_composite(f, l)?;
        Ok(PrescientF1 { precision: s.precision, recall: s.recall, f1: s.f1 })
    })
}

/// Range-based F1.
///
/// # Safety
/// As for [`prescient_f1_point`].
#[no_mangle]
pub unsafe extern "C" fn prescient_f1_range(
    flags: *const u8,
    labels: *const u8,
    len: usize,
    out: *mut PrescientF1,
) -> PrescientStatus {
    with_pairs(flags, labels, len, out, |f, l| {
        let s = f1_range(f, l)?;
        Ok(PrescientF1 { precision: s.precision, recall: s.recall, f1: s.f1 })
    })
}

/// F1 of the Top-K flags, `K` being the number of positive labels.
///
/// # Safety
/// `scores` must hold `len` doubles, `labels` `len` bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn prescient_f1_at_k(
    scores: *const f64,
    labels: *const u8,
    len: usize,
    out: *mut f64,
) -> PrescientStatus {
    guard(|| {
        non_null(out, "out")?;
        let scores = slice(scores, len, "scores")?;
        let labels = slice(labels, len, "labels")?;
        *out = lift(f1_at_k(scores, labels))?;
        Ok(())
    })
}
