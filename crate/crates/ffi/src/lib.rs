//! C ABI over `squad-mt`.
//!
//! Datasets cross the boundary as opaque [`SqmtDataset`] handles; everything
//! else (configuration, reports, predictions) as UTF-8 JSON strings. Every
//! fallible function returns a [`SqmtStatus`]; on failure the message is
//! available from [`sqmt_last_error`] on the same thread. Strings returned
//! through `char **` out-parameters belong to the caller and must be released
//! with [`sqmt_string_free`]; handles with [`sqmt_dataset_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use serde::Deserialize;
use squad_mt::backend::{BackendConfig, Translator};
use squad_mt::cache::{CachedTranslator, TranslationCache};
use squad_mt::dataset::{dataset_stats, parse_dataset};
use squad_mt::eval::{score, LangProfile, PredictionSet};
use squad_mt::pipeline::{translate_dataset, PipelineOptions, StripMode};
use squad_mt::{serialize_dataset, Lang, QaDataset};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqmtStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidDataset = 3,
    InvalidConfig = 4,
    Backend = 5,
    Pipeline = 6,
    Io = 7,
    Panic = 8,
}

/// A parsed and validated dataset.
pub struct SqmtDataset {
    inner: QaDataset,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

type Failure = (SqmtStatus, String);

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SqmtStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SqmtStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            SqmtStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    (SqmtStatus::NullArgument, format!("{what} is NULL"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (SqmtStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn dataset_arg<'a>(p: *const SqmtDataset) -> Result<&'a QaDataset, Failure> {
    p.as_ref().map(|d| &d.inner).ok_or_else(|| null("dataset"))
}

fn into_c_string(s: String) -> *mut c_char {
    // JSON output never contains NUL
    CString::new(s).map_or(ptr::null_mut(), CString::into_raw)
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn sqmt_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sqmt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sqmt_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses and validates SQuAD2.0 JSON.
///
/// # Safety
/// `json` must point to `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sqmt_dataset_parse(json: *const u8, len: usize, out: *mut *mut SqmtDataset) -> SqmtStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let bytes = std::slice::from_raw_parts(json, len);
        let inner = parse_dataset(bytes).map_err(|e| (SqmtStatus::InvalidDataset, e.to_string()))?;
        inner.validate().map_err(|e| (SqmtStatus::InvalidDataset, e.to_string()))?;
        *out = Box::into_raw(Box::new(SqmtDataset { inner }));
        Ok(())
    })
}

/// # Safety
/// `d` must be NULL or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sqmt_dataset_free(d: *mut SqmtDataset) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Serializes to JSON; `extended` keeps `answer_pieces`.
///
/// # Safety
/// `d` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sqmt_dataset_to_json(d: *const SqmtDataset, extended: bool, out: *mut *mut c_char) -> SqmtStatus {
    guard(|| {
        let d = dataset_arg(d)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let json = String::from_utf8(serialize_dataset(d, extended)).expect("serde_json emits UTF-8");
        *out = into_c_string(json);
        Ok(())
    })
}

/// Number of questions, answerable or not.
///
/// # Safety
/// `d` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sqmt_dataset_question_count(d: *const SqmtDataset, out: *mut usize) -> SqmtStatus {
    guard(|| {
        let d = dataset_arg(d)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = d.qas().count();
        Ok(())
    })
}

/// Summary statistics as a JSON object.
///
/// # Safety
/// `d` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sqmt_dataset_stats(d: *const SqmtDataset, out: *mut *mut c_char) -> SqmtStatus {
    guard(|| {
        let d = dataset_arg(d)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = into_c_string(serde_json::to_string(&dataset_stats(d)).expect("stats serialize"));
        Ok(())
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TranslateConfig {
    source_lang: Lang,
    target_lang: Lang,
    #[serde(default)]
    jobs: Option<usize>,
    #[serde(default)]
    batch_size: Option<usize>,
    #[serde(default)]
    strip: Option<StripMode>,
    #[serde(default)]
    backend: BackendConfig,
    #[serde(default)]
    cache_dir: Option<PathBuf>,
}

/// Translates a dataset. `config_json` holds `source_lang`, `target_lang`
/// and optionally `jobs`, `batch_size`, `strip` ("all" or "added"),
/// `cache_dir` and `backend` (same keys as the CLI config file's `[backend]`
/// table). On success `*out` receives a new handle and, when `report` is not
/// NULL, `*report` the transfer report as JSON.
///
/// # Safety
/// `d` must be a live handle, `config_json` a NUL-terminated string, `out`
/// writable, and `report` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn sqmt_translate(
    d: *const SqmtDataset,
    config_json: *const c_char,
    out: *mut *mut SqmtDataset,
    report: *mut *mut c_char,
) -> SqmtStatus {
    guard(|| {
        let d = dataset_arg(d)?;
        let raw = str_arg(config_json, "config_json")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg: TranslateConfig =
            serde_json::from_str(raw).map_err(|e| (SqmtStatus::InvalidConfig, e.to_string()))?;
        let mut opts = PipelineOptions::new(cfg.source_lang, cfg.target_lang);
        opts.jobs = cfg.jobs.unwrap_or(opts.jobs).max(1);
        opts.batch_size = cfg.batch_size.unwrap_or(opts.batch_size).max(1);
        opts.strip = cfg.strip.unwrap_or(opts.strip);
        let backend = cfg.backend.build().map_err(|e| (SqmtStatus::InvalidConfig, e.to_string()))?;
        let result = match cfg.cache_dir {
            Some(dir) => {
                let cache = TranslationCache::open(&dir).map_err(|e| (SqmtStatus::Io, format!("{}: {e}", dir.display())))?;
                translate_dataset(d, &CachedTranslator::new(&backend as &dyn Translator, cache), &opts)
            }
            None => translate_dataset(d, &backend, &opts),
        };
        let (inner, rep) = result.map_err(|e| {
            let status = match e {
                squad_mt::pipeline::PipelineError::Backend(_) => SqmtStatus::Backend,
                _ => SqmtStatus::Pipeline,
            };
            (status, e.to_string())
        })?;
        if !report.is_null() {
            *report = into_c_string(serde_json::to_string(&rep).expect("report serializes"));
        }
        *out = Box::into_raw(Box::new(SqmtDataset { inner }));
        Ok(())
    })
}

/// Scores `predictions_json` (an object of question id → answer) against
/// the dataset. `lang` picks the normalization profile ("en" removes English
/// articles); NULL means "en". The report is written to `*out` as JSON.
///
/// # Safety
/// `d` must be a live handle, `predictions_json` a NUL-terminated string,
/// `lang` NULL or a NUL-terminated string, and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sqmt_score(
    d: *const SqmtDataset,
    predictions_json: *const c_char,
    lang: *const c_char,
    out: *mut *mut c_char,
) -> SqmtStatus {
    guard(|| {
        let d = dataset_arg(d)?;
        let raw = str_arg(predictions_json, "predictions_json")?;
        let lang = if lang.is_null() { "en" } else { str_arg(lang, "lang")? };
        if out.is_null() {
            return Err(null("out"));
        }
        let preds =
            PredictionSet::from_json(raw.as_bytes()).map_err(|e| (SqmtStatus::InvalidConfig, e.to_string()))?;
        let r = score(d, &preds, &LangProfile::for_lang(lang));
        *out = into_c_string(serde_json::to_string(&r).expect("report serializes"));
        Ok(())
    })
}
