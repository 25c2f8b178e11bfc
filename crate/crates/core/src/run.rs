//! Resumable translation runs.
//!
//! A run directory holds `manifest.json` (the run's full configuration, the
//! input's SHA-256 and its status) and, unless configured elsewhere,
//! `cache/`, the translation cache every backend call goes through. An
//! interrupted run is resumed by executing the same configuration again:
//! finished documents and question batches are served from the cache, so
//! only the remainder is sent to the backend, and the output is
//! byte-identical to an uninterrupted run with a deterministic backend.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backend::{BackendConfig, BackendError, BackendKind, Translator};
use crate::cache::{CachedTranslator, TranslationCache};
use crate::dataset::{parse_dataset_with, serialize_dataset, DatasetError, ParseOptions};
use crate::lang::Lang;
use crate::pipeline::{backtranslate_dataset, estimate_characters, translate_dataset, PipelineError, PipelineOptions, TransferReport};

pub const MANIFEST_FORMAT: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot read input: {0}")]
    Input(#[from] DatasetError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("no run manifest in {0}")]
    NoManifest(PathBuf),
    #[error("run manifest {path} is unreadable: {message}")]
    ManifestCorrupt { path: PathBuf, message: String },
    #[error("run configuration differs from the manifest in {field}: manifest has {recorded}, requested {requested}")]
    ManifestMismatch { field: String, recorded: String, requested: String },
    #[error("input {path} changed since the run started (sha256 {recorded} → {current})")]
    InputChanged { path: PathBuf, recorded: String, current: String },
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    Translate,
    Backtranslate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub mode: RunMode,
    pub input: PathBuf,
    pub output: PathBuf,
    /// Where a backtranslation run writes the target-language leg.
    #[serde(default)]
    pub intermediate: Option<PathBuf>,
    pub options: PipelineOptions,
    pub backend: BackendConfig,
    /// Keep `answer_pieces` in the output.
    pub extended: bool,
    #[serde(default)]
    pub squad1_compat: bool,
    /// Translation cache location; `<run_dir>/cache` when absent. Runs over
    /// different splits may share one cache.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Running,
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: u32,
    pub spec: RunSpec,
    pub input_sha256: String,
    pub status: RunStatus,
    pub started_unix: u64,
    #[serde(default)]
    pub finished_unix: Option<u64>,
    #[serde(default)]
    pub error: Option<String>,
}

/// Everything written next to the output as `<output>.report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: RunMode,
    pub backend: String,
    pub input_characters: usize,
    /// One report per translation leg.
    pub legs: Vec<TransferReport>,
    pub cache_hits: usize,
    pub cache_misses: usize,
}

impl RunReport {
    /// Questions of the input that survived every leg.
    pub fn retained_fraction(&self) -> f64 {
        match (self.legs.first(), self.legs.last()) {
            (Some(first), Some(last)) if first.input_questions > 0 => {
                last.retained_questions as f64 / first.input_questions as f64
            }
            _ => 1.0,
        }
    }
}

/// Fields a resume request may pin; each must equal the manifest's value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOverrides {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub source_lang: Option<Lang>,
    pub target_lang: Option<Lang>,
    pub backend: Option<BackendKind>,
}

pub fn manifest_path(run_dir: &Path) -> PathBuf {
    run_dir.join("manifest.json")
}

pub fn cache_dir(run_dir: &Path) -> PathBuf {
    run_dir.join("cache")
}

pub fn report_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".report.json");
    output.with_file_name(name)
}

fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

pub fn sha256_file(path: &Path) -> Result<String, RunError> {
    let bytes = std::fs::read(path).map_err(io(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Writes `bytes` to `path` through a temporary file in the same directory,
/// so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), RunError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(io(&dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io(&dir))?;
    tmp.write_all(bytes).map_err(io(path))?;
    tmp.as_file().sync_all().map_err(io(path))?;
    tmp.persist(path).map_err(|e| RunError::Io { path: path.to_path_buf(), source: e.error })?;
    Ok(())
}

pub fn read_manifest(run_dir: &Path) -> Result<RunManifest, RunError> {
    let path = manifest_path(run_dir);
    let bytes = match std::fs::read(&path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(RunError::NoManifest(run_dir.to_path_buf())),
        Err(e) => return Err(RunError::Io { path, source: e }),
    };
    let m: RunManifest = serde_json::from_slice(&bytes)
        .map_err(|e| RunError::ManifestCorrupt { path: path.clone(), message: e.to_string() })?;
    if m.format != MANIFEST_FORMAT {
        return Err(RunError::ManifestCorrupt { path, message: format!("unsupported format {}", m.format) });
    }
    Ok(m)
}

fn write_manifest(run_dir: &Path, m: &RunManifest) -> Result<(), RunError> {
    let bytes = serde_json::to_vec_pretty(m).expect("manifest serializes");
    write_atomic(&manifest_path(run_dir), &bytes)
}

fn mismatch(field: &str, recorded: impl std::fmt::Debug, requested: impl std::fmt::Debug) -> RunError {
    RunError::ManifestMismatch {
        field: field.into(),
        recorded: format!("{recorded:?}"),
        requested: format!("{requested:?}"),
    }
}

fn check_overrides(spec: &RunSpec, o: &RunOverrides) -> Result<(), RunError> {
    if let Some(v) = o.input.as_ref().filter(|v| **v != spec.input) {
        return Err(mismatch("input", &spec.input, v));
    }
    if let Some(v) = o.output.as_ref().filter(|v| **v != spec.output) {
        return Err(mismatch("output", &spec.output, v));
    }
    if let Some(v) = o.source_lang.as_ref().filter(|v| **v != spec.options.source_lang) {
        return Err(mismatch("source_lang", spec.options.source_lang.as_str(), v.as_str()));
    }
    if let Some(v) = o.target_lang.as_ref().filter(|v| **v != spec.options.target_lang) {
        return Err(mismatch("target_lang", spec.options.target_lang.as_str(), v.as_str()));
    }
    if let Some(v) = o.backend.filter(|v| *v != spec.backend.kind) {
        return Err(mismatch("backend", spec.backend.kind, v));
    }
    Ok(())
}

/// Starts a run in `run_dir` with the backend described by the spec. If the
/// directory already holds a manifest for the same configuration this
/// continues that run; a manifest for a different configuration is an error.
pub fn start_run(run_dir: &Path, spec: &RunSpec) -> Result<RunReport, RunError> {
    let backend = spec.backend.build()?;
    start_run_with(run_dir, spec, &backend)
}

pub fn start_run_with(run_dir: &Path, spec: &RunSpec, backend: &dyn Translator) -> Result<RunReport, RunError> {
    let input_sha256 = sha256_file(&spec.input)?;
    let manifest = match read_manifest(run_dir) {
        Ok(m) => {
            if m.spec != *spec {
                let recorded = serde_json::to_string(&m.spec).unwrap_or_default();
                let requested = serde_json::to_string(spec).unwrap_or_default();
                return Err(RunError::ManifestMismatch { field: "spec".into(), recorded, requested });
            }
            m
        }
        Err(RunError::NoManifest(_)) => RunManifest {
            format: MANIFEST_FORMAT,
            spec: spec.clone(),
            input_sha256: input_sha256.clone(),
            status: RunStatus::Running,
            started_unix: now_unix(),
            finished_unix: None,
            error: None,
        },
        Err(e) => return Err(e),
    };
    execute(run_dir, manifest, input_sha256, backend)
}

/// Resumes the run recorded in `run_dir` with the backend its manifest names.
pub fn resume_run(run_dir: &Path, overrides: &RunOverrides) -> Result<RunReport, RunError> {
    let manifest = read_manifest(run_dir)?;
    check_overrides(&manifest.spec, overrides)?;
    let backend = manifest.spec.backend.build()?;
    resume_run_with(run_dir, overrides, &backend)
}

pub fn resume_run_with(run_dir: &Path, overrides: &RunOverrides, backend: &dyn Translator) -> Result<RunReport, RunError> {
    let manifest = read_manifest(run_dir)?;
    check_overrides(&manifest.spec, overrides)?;
    let current = sha256_file(&manifest.spec.input)?;
    if current != manifest.input_sha256 {
        return Err(RunError::InputChanged {
            path: manifest.spec.input.clone(),
            recorded: manifest.input_sha256.clone(),
            current,
        });
    }
    execute(run_dir, manifest, current, backend)
}

fn execute(run_dir: &Path, mut manifest: RunManifest, input_sha256: String, backend: &dyn Translator) -> Result<RunReport, RunError> {
    if manifest.input_sha256 != input_sha256 {
        return Err(RunError::InputChanged {
            path: manifest.spec.input.clone(),
            recorded: manifest.input_sha256.clone(),
            current: input_sha256,
        });
    }
    std::fs::create_dir_all(run_dir).map_err(io(run_dir))?;
    manifest.status = RunStatus::Running;
    manifest.finished_unix = None;
    manifest.error = None;
    write_manifest(run_dir, &manifest)?;

    let result = run_body(run_dir, &manifest.spec, backend);
    manifest.finished_unix = Some(now_unix());
    match &result {
        Ok(_) => manifest.status = RunStatus::Completed,
        Err(e) => {
            manifest.status = RunStatus::Failed;
            manifest.error = Some(e.to_string());
        }
    }
    write_manifest(run_dir, &manifest)?;
    result
}

fn run_body(run_dir: &Path, spec: &RunSpec, backend: &dyn Translator) -> Result<RunReport, RunError> {
    let raw = std::fs::read(&spec.input).map_err(io(&spec.input))?;
    let input = parse_dataset_with(&raw, ParseOptions { squad1_compat: spec.squad1_compat })?;
    let cache_root = spec.cache_dir.clone().unwrap_or_else(|| cache_dir(run_dir));
    let cache = TranslationCache::open(&cache_root).map_err(io(&cache_root))?;
    let cached = CachedTranslator::new(backend, cache);

    let legs = match spec.mode {
        RunMode::Translate => {
            let (out, report) = translate_dataset(&input, &cached, &spec.options)?;
            write_atomic(&spec.output, &serialize_dataset(&out, spec.extended))?;
            vec![report]
        }
        RunMode::Backtranslate => {
            let bt = backtranslate_dataset(&input, &cached, &spec.options)?;
            if let Some(path) = &spec.intermediate {
                write_atomic(path, &serialize_dataset(&bt.intermediate, spec.extended))?;
            }
            write_atomic(&spec.output, &serialize_dataset(&bt.output, spec.extended))?;
            vec![bt.forward, bt.backward]
        }
    };
    let report = RunReport {
        mode: spec.mode,
        backend: backend.identity(),
        input_characters: estimate_characters(&input),
        legs,
        cache_hits: cached.hits(),
        cache_misses: cached.misses(),
    };
    let bytes = serde_json::to_vec_pretty(&report).expect("report serializes");
    write_atomic(&report_path(&spec.output), &bytes)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_path_appends_suffix() {
        assert_eq!(report_path(Path::new("out/fi.json")), PathBuf::from("out/fi.json.report.json"));
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/b.json");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
    }

    #[test]
    fn missing_and_corrupt_manifests() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(read_manifest(dir.path()), Err(RunError::NoManifest(_))));
        std::fs::write(manifest_path(dir.path()), b"{").unwrap();
        assert!(matches!(read_manifest(dir.path()), Err(RunError::ManifestCorrupt { .. })));
        assert!(matches!(resume_run(dir.path(), &RunOverrides::default()), Err(RunError::ManifestCorrupt { .. })));
    }
}
