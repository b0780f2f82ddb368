//! C ABI over the ocr-noise toolkit.
//!
//! Every function returns an [`OcrnStatus`]; results travel through out
//! pointers. On failure a description is available from
//! [`ocrn_last_error_message`] on the same thread. Strings returned by the
//! library are owned by the caller and released with [`ocrn_string_free`].
//! Models and language models are opaque handles released with their
//! `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ocr_noise::confusion::estimate_confusion;
use ocr_noise::noise::record_rng;
use ocr_noise::reuse::read_clusters;
use ocr_noise::{CharLM, ConfusionModel, DecoderParams, Error, EvalReport, GroupingParams};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OcrnStatus {
    Ok = 0,
    NullPointer = 1,
    Validation = 2,
    Io = 3,
    InvalidUtf8 = 4,
    Panic = 5,
}

/// Opaque confusion model handle.
pub struct OcrnModel(ConfusionModel);

/// Opaque character language model handle.
pub struct OcrnLm(CharLM);

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct OcrnDecoderParams {
    pub beam_width: usize,
    pub lambda: f64,
    pub candidate_floor: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct OcrnEvalReport {
    pub cer: f64,
    pub wer: f64,
    pub char_edits: u64,
    pub char_ref_total: u64,
    pub word_edits: u64,
    pub word_ref_total: u64,
    pub pair_count: u64,
}

impl From<EvalReport> for OcrnEvalReport {
    fn from(r: EvalReport) -> Self {
        OcrnEvalReport {
            cer: r.cer,
            wer: r.wer,
            char_edits: r.char_edits,
            char_ref_total: r.char_ref_total,
            word_edits: r.word_edits,
            word_ref_total: r.word_ref_total,
            pair_count: r.pair_count,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(OcrnStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = if e.is_io() { OcrnStatus::Io } else { OcrnStatus::Validation };
        Failure(status, e.to_string())
    }
}

type FfiResult<T> = Result<T, Failure>;

fn set_last_error(msg: String) {
    let msg = CString::new(msg.replace('\0', "\\0")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(msg));
}

fn guard(f: impl FnOnce() -> FfiResult<()>) -> OcrnStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => OcrnStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_owned());
            set_last_error(format!("internal panic: {msg}"));
            OcrnStatus::Panic
        }
    }
}

fn null(name: &str) -> Failure {
    Failure(OcrnStatus::NullPointer, format!("{name} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|e| Failure(OcrnStatus::InvalidUtf8, format!("{name}: {e}")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> FfiResult<&'a T> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn write_out<T>(out: *mut T, value: T, name: &str) -> FfiResult<()> {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(value);
    Ok(())
}

fn to_c_string(s: String) -> FfiResult<*mut c_char> {
    CString::new(s).map(CString::into_raw).map_err(|_| Failure(OcrnStatus::Validation, "result contains NUL".to_owned()))
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn ocrn_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ocrn_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Codepoint-level Levenshtein distance.
///
/// # Safety
/// `a` and `b` must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ocrn_edit_distance(a: *const c_char, b: *const c_char, out: *mut usize) -> OcrnStatus {
    guard(|| {
        let d = ocr_noise::edit_distance(str_arg(a, "a")?, str_arg(b, "b")?);
        write_out(out, d, "out")
    })
}

/// Micro-averaged CER and WER over `n` hypothesis/reference pairs.
///
/// # Safety
/// `hyps` and `refs` must point to `n` NUL-terminated strings each.
#[no_mangle]
pub unsafe extern "C" fn ocrn_evaluate(
    hyps: *const *const c_char,
    refs: *const *const c_char,
    n: usize,
    out: *mut OcrnEvalReport,
) -> OcrnStatus {
    guard(|| {
        let collect = |p: *const *const c_char, name: &str| -> FfiResult<Vec<&str>> {
            if n == 0 {
                return Ok(Vec::new());
            }
            if p.is_null() {
                return Err(null(name));
            }
            std::slice::from_raw_parts(p, n).iter().map(|&s| str_arg(s, name)).collect()
        };
        let report = ocr_noise::evaluate(&collect(hyps, "hyps")?, &collect(refs, "refs")?)?;
        write_out(out, report.into(), "out")
    })
}

/// Loads a confusion model from its JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ocrn_model_load(path: *const c_char, out: *mut *mut OcrnModel) -> OcrnStatus {
    guard(|| {
        let model = ConfusionModel::load(str_arg(path, "path")?)?;
        write_out(out, Box::into_raw(Box::new(OcrnModel(model))), "out")
    })
}

/// Estimates a confusion model from a clusters JSONL file with the
/// default grouping thresholds.
///
/// # Safety
/// `clusters_path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ocrn_model_estimate(clusters_path: *const c_char, out: *mut *mut OcrnModel) -> OcrnStatus {
    guard(|| {
        let clusters = read_clusters(str_arg(clusters_path, "clusters_path")?)?;
        let model = estimate_confusion(&clusters, &GroupingParams::default());
        write_out(out, Box::into_raw(Box::new(OcrnModel(model))), "out")
    })
}

/// # Safety
/// `model` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ocrn_model_save(model: *const OcrnModel, path: *const c_char) -> OcrnStatus {
    guard(|| Ok(ref_arg(model, "model")?.0.save(str_arg(path, "path")?)?))
}

/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ocrn_model_average_cer(model: *const OcrnModel, out: *mut f64) -> OcrnStatus {
    guard(|| write_out(out, ref_arg(model, "model")?.0.avg_cer(), "out"))
}

/// P(observed | clean) for two Unicode scalar values.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ocrn_model_prob(model: *const OcrnModel, clean: u32, observed: u32, out: *mut f64) -> OcrnStatus {
    guard(|| {
        let m = ref_arg(model, "model")?;
        let scalar =
            |c: u32| char::from_u32(c).ok_or_else(|| Failure(OcrnStatus::InvalidUtf8, format!("{c:#x} is not a Unicode scalar value")));
        write_out(out, m.0.prob(scalar(clean)?, scalar(observed)?), "out")
    })
}

/// Releases a model handle. Null is ignored.
///
/// # Safety
/// `model` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ocrn_model_free(model: *mut OcrnModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Loads a character language model from its JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ocrn_lm_load(path: *const c_char, out: *mut *mut OcrnLm) -> OcrnStatus {
    guard(|| {
        let lm = CharLM::load(str_arg(path, "path")?)?;
        write_out(out, Box::into_raw(Box::new(OcrnLm(lm))), "out")
    })
}

/// Releases a language model handle. Null is ignored.
///
/// # Safety
/// `lm` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ocrn_lm_free(lm: *mut OcrnLm) {
    if !lm.is_null() {
        drop(Box::from_raw(lm));
    }
}

#[no_mangle]
pub extern "C" fn ocrn_decoder_params_default() -> OcrnDecoderParams {
    let d = DecoderParams::default();
    OcrnDecoderParams { beam_width: d.beam_width, lambda: d.lambda, candidate_floor: d.candidate_floor }
}

/// Corrects one token. `params` may be null for the defaults.
///
/// # Safety
/// Handles must be live; `noisy` a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ocrn_correct_token(
    model: *const OcrnModel,
    lm: *const OcrnLm,
    params: *const OcrnDecoderParams,
    noisy: *const c_char,
    out: *mut *mut c_char,
) -> OcrnStatus {
    guard(|| {
        let params = match params.as_ref() {
            Some(p) => DecoderParams { beam_width: p.beam_width, lambda: p.lambda, candidate_floor: p.candidate_floor },
            None => DecoderParams::default(),
        };
        let text = ocr_noise::correct_token(str_arg(noisy, "noisy")?, &ref_arg(model, "model")?.0, &ref_arg(lm, "lm")?.0, &params)?;
        write_out(out, to_c_string(text)?, "out")
    })
}

/// Uniform noise on one word, drawing from `replacement_set` (null for
/// ASCII letters and digits). The random stream is selected by
/// `(seed, index)`, matching record `index` of a seeded synthesis run.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ocrn_apply_uniform(
    word: *const c_char,
    rate: f64,
    replacement_set: *const c_char,
    seed: u64,
    index: u64,
    out: *mut *mut c_char,
) -> OcrnStatus {
    guard(|| {
        let set: Vec<char> = if replacement_set.is_null() {
            ocr_noise::noise::default_replacement_set()
        } else {
            str_arg(replacement_set, "replacement_set")?.chars().collect()
        };
        let mut rng = record_rng(seed, index);
        let noisy = ocr_noise::apply_uniform(str_arg(word, "word")?, rate, &set, &mut rng)?;
        write_out(out, to_c_string(noisy)?, "out")
    })
}

/// Realistic noise on one word from a confusion model, with the random
/// stream selected by `(seed, index)`.
///
/// # Safety
/// `model` must be a live handle; `word` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ocrn_apply_realistic(
    model: *const OcrnModel,
    word: *const c_char,
    seed: u64,
    index: u64,
    out: *mut *mut c_char,
) -> OcrnStatus {
    guard(|| {
        let mut rng = record_rng(seed, index);
        let noisy = ocr_noise::apply_realistic(str_arg(word, "word")?, &ref_arg(model, "model")?.0, &mut rng);
        write_out(out, to_c_string(noisy)?, "out")
    })
}
