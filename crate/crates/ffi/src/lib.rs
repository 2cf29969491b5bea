//! C ABI over `psod-eval`.
//!
//! Masks cross the boundary as opaque `PsodMask` handles. Every fallible call
//! returns a `PsodStatus`; on failure a description is available from
//! `psod_last_error_message` on the same thread until the next failing call.
//! Panics never unwind into the caller; they are reported as `PSOD_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use psod_eval::losses::{mask_loss, normalize_quality_level, LossConfig};
use psod_eval::mask::{load_manifest, load_mask, save_mask, SaliencyMap};
use psod_eval::metrics::{match_score, MetricConfig, MetricSet};
use psod_eval::pluralistic::{evaluate, f1_harmonic, image_precision, image_recall, MatchMatrix};
use psod_eval::preference::{alignment_accuracy, PreferencePair, Superior, TiePolicy};
use psod_eval::Error;

/// Default weight on the cross-entropy term of the mask loss.
pub const PSOD_DEFAULT_LAMBDA_CE: f64 = 2.5;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsodStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    EmptyGroundTruth = 4,
    Io = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsodTiePolicy {
    /// Exact ties count as half correct.
    Half = 0,
    Wrong = 1,
}

/// Opaque saliency map with values in `[0, 1]`.
pub struct PsodMask(SaliencyMap);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PsodMetrics {
    pub f_max: f64,
    pub f_avg: f64,
    pub s_measure: f64,
    pub e_mean: f64,
    pub mae: f64,
    pub match_score: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PsodLoss {
    pub ce: f64,
    pub dice: f64,
    pub total: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PsodEvalSummary {
    pub threshold: f64,
    pub ap: f64,
    pub ar: f64,
    pub f1: f64,
    pub n_images: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(PsodStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::DimensionMismatch { .. } => PsodStatus::DimensionMismatch,
            Error::EmptyGroundTruth => PsodStatus::EmptyGroundTruth,
            e if e.is_io() => PsodStatus::Io,
            _ => PsodStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PsodStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PsodStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            PsodStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(PsodStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(PsodStatus::InvalidArgument, msg.into())
}

unsafe fn mask_ref<'a>(m: *const PsodMask, what: &str) -> Result<&'a SaliencyMap, Failure> {
    m.as_ref().map(|m| &m.0).ok_or_else(|| null(what))
}

unsafe fn out_ref<'a, T>(out: *mut T) -> Result<&'a mut T, Failure> {
    out.as_mut().ok_or_else(|| null("output pointer"))
}

unsafe fn input_slice<'a, T>(data: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(data, len))
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

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn psod_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the most recent failure on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn psod_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Creates a mask from `len == width * height` row-major values in `[0, 1]`.
///
/// # Safety
/// `values` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn psod_mask_new(
    width: usize,
    height: usize,
    values: *const f64,
    len: usize,
    out: *mut *mut PsodMask,
) -> PsodStatus {
    guard(|| {
        let out = out_ref(out)?;
        let expected = width.checked_mul(height).ok_or_else(|| invalid("mask size overflows"))?;
        if len != expected {
            return Err(invalid(format!("expected {expected} values, got {len}")));
        }
        let values = input_slice(values, len, "values")?.to_vec();
        let mask = SaliencyMap::new(width, height, values)?;
        *out = Box::into_raw(Box::new(PsodMask(mask)));
        Ok(())
    })
}

/// Loads an 8-bit grayscale or color PNG.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn psod_mask_load(path: *const c_char, out: *mut *mut PsodMask) -> PsodStatus {
    guard(|| {
        let out = out_ref(out)?;
        let mask = load_mask(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(PsodMask(mask)));
        Ok(())
    })
}

/// Writes an 8-bit grayscale PNG.
///
/// # Safety
/// `mask` must be a live handle; `path` must be a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn psod_mask_save(mask: *const PsodMask, path: *const c_char) -> PsodStatus {
    guard(|| {
        let m = mask_ref(mask, "mask")?;
        save_mask(m, path_arg(path)?)?;
        Ok(())
    })
}

/// Releases a handle. NULL is ignored.
///
/// # Safety
/// `mask` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn psod_mask_free(mask: *mut PsodMask) {
    if !mask.is_null() {
        drop(Box::from_raw(mask));
    }
}

/// # Safety
/// `mask` must be NULL or a live handle. Returns 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn psod_mask_width(mask: *const PsodMask) -> usize {
    mask.as_ref().map_or(0, |m| m.0.width())
}

/// # Safety
/// `mask` must be NULL or a live handle. Returns 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn psod_mask_height(mask: *const PsodMask) -> usize {
    mask.as_ref().map_or(0, |m| m.0.height())
}

/// Copies the row-major values into `out`, which must hold `len` doubles.
///
/// # Safety
/// `mask` must be a live handle; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn psod_mask_values(mask: *const PsodMask, out: *mut f64, len: usize) -> PsodStatus {
    guard(|| {
        let m = mask_ref(mask, "mask")?;
        if len != m.len() {
            return Err(invalid(format!("buffer holds {len} values, mask has {}", m.len())));
        }
        if out.is_null() {
            return Err(null("output buffer"));
        }
        slice::from_raw_parts_mut(out, len).copy_from_slice(m.values());
        Ok(())
    })
}

/// All classical metrics of `pred` against `gt` (binarized at 0.5).
///
/// # Safety
/// Both handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn psod_metrics(pred: *const PsodMask, gt: *const PsodMask, out: *mut PsodMetrics) -> PsodStatus {
    guard(|| {
        let (p, g, out) = (mask_ref(pred, "pred")?, mask_ref(gt, "gt")?, out_ref(out)?);
        let s = MetricSet::compute(p, g, &MetricConfig::default())?;
        *out = PsodMetrics {
            f_max: s.f_max,
            f_avg: s.f_avg,
            s_measure: s.s_measure,
            e_mean: s.e_mean,
            mae: s.mae,
            match_score: s.match_score,
        };
        Ok(())
    })
}

/// Mean of the average F-measure and the S-measure.
///
/// # Safety
/// Both handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn psod_match_score(pred: *const PsodMask, gt: *const PsodMask, out: *mut f64) -> PsodStatus {
    guard(|| {
        let (p, g, out) = (mask_ref(pred, "pred")?, mask_ref(gt, "gt")?, out_ref(out)?);
        *out = match_score(p, g, &MetricConfig::default())?;
        Ok(())
    })
}

/// `total = lambda_ce * ce + dice`.
///
/// # Safety
/// Both handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn psod_mask_loss(
    pred: *const PsodMask,
    gt: *const PsodMask,
    lambda_ce: f64,
    out: *mut PsodLoss,
) -> PsodStatus {
    guard(|| {
        let (p, g, out) = (mask_ref(pred, "pred")?, mask_ref(gt, "gt")?, out_ref(out)?);
        let cfg = LossConfig {
            lambda_ce,
            ..LossConfig::default()
        };
        cfg.validate()?;
        let l = mask_loss(p, g, &cfg)?;
        *out = PsodLoss {
            ce: l.ce,
            dice: l.dice,
            total: l.total,
        };
        Ok(())
    })
}

/// Harmonic mean of AP and AR; 0 when both are 0.
#[no_mangle]
pub extern "C" fn psod_f1_harmonic(ap: f64, ar: f64) -> f64 {
    f1_harmonic(ap, ar)
}

/// Maps a quality level in 1..=4 to {0, 0.33, 0.67, 1}.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn psod_normalize_quality_level(level: u8, out: *mut f64) -> PsodStatus {
    guard(|| {
        *out_ref(out)? = normalize_quality_level(level)?;
        Ok(())
    })
}

unsafe fn matrix_arg(scores: *const f64, n_preds: usize, n_gts: usize) -> Result<MatchMatrix, Failure> {
    let len = n_preds.checked_mul(n_gts).ok_or_else(|| invalid("matrix size overflows"))?;
    if len == 0 {
        return Err(invalid("match matrix needs at least one prediction and one ground truth"));
    }
    let flat = input_slice(scores, len, "scores")?;
    Ok(MatchMatrix::new(flat.chunks(n_gts).map(<[f64]>::to_vec).collect())?)
}

/// Image precision from a row-major `n_preds x n_gts` match-score matrix.
///
/// # Safety
/// `scores` must point to `n_preds * n_gts` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn psod_image_precision(
    scores: *const f64,
    n_preds: usize,
    n_gts: usize,
    out: *mut f64,
) -> PsodStatus {
    guard(|| {
        let out = out_ref(out)?;
        *out = image_precision(&matrix_arg(scores, n_preds, n_gts)?);
        Ok(())
    })
}

/// Image recall from a row-major `n_preds x n_gts` match-score matrix.
///
/// # Safety
/// `scores` must point to `n_preds * n_gts` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn psod_image_recall(
    scores: *const f64,
    n_preds: usize,
    n_gts: usize,
    out: *mut f64,
) -> PsodStatus {
    guard(|| {
        let out = out_ref(out)?;
        *out = image_recall(&matrix_arg(scores, n_preds, n_gts)?);
        Ok(())
    })
}

/// Evaluates a manifest at quality threshold `tau`.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn psod_evaluate_manifest(path: *const c_char, tau: f64, out: *mut PsodEvalSummary) -> PsodStatus {
    guard(|| {
        let out = out_ref(out)?;
        let (_, records) = load_manifest(path_arg(path)?)?;
        let report = evaluate(&records, tau, &MetricConfig::default())?;
        *out = PsodEvalSummary {
            threshold: report.threshold,
            ap: report.ap,
            ar: report.ar,
            f1: report.f1,
            n_images: records.len(),
        };
        Ok(())
    })
}

/// Fraction of pairs where the labeled superior side scores higher.
/// `a_superior[i]` is nonzero when side A of pair `i` is the preferred one.
///
/// # Safety
/// The three arrays must each hold `n` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn psod_alignment_accuracy(
    scores_a: *const f64,
    scores_b: *const f64,
    a_superior: *const u8,
    n: usize,
    tie_policy: PsodTiePolicy,
    out: *mut f64,
) -> PsodStatus {
    guard(|| {
        let out = out_ref(out)?;
        let a = input_slice(scores_a, n, "scores_a")?;
        let b = input_slice(scores_b, n, "scores_b")?;
        let labels = input_slice(a_superior, n, "a_superior")?;
        let pairs: Vec<PreferencePair> = (0..n)
            .map(|i| PreferencePair {
                id: i.to_string(),
                score_a: a[i],
                score_b: b[i],
                label: if labels[i] != 0 { Superior::A } else { Superior::B },
            })
            .collect();
        let policy = match tie_policy {
            PsodTiePolicy::Half => TiePolicy::Half,
            PsodTiePolicy::Wrong => TiePolicy::Wrong,
        };
        *out = alignment_accuracy(&pairs, policy)?;
        Ok(())
    })
}
