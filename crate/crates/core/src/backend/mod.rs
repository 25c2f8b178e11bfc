//! Translation backends behind one [`Translator`] interface.

mod gate;
pub mod identity;
pub mod mock;
pub mod service;

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::lang::Lang;
use crate::markup::MarkupDoc;

pub use gate::AdmissionGate;
pub use identity::IdentityBackend;
pub use mock::{MockBackend, MockParams};
pub use service::ServiceBackend;

pub const DEFAULT_API_KEY_ENV: &str = "DEEPL_API_KEY";
pub const DEFAULT_ENDPOINT: &str = "https://api-free.deepl.com";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("authentication rejected: {0}")]
    Auth(String),
    #[error("character quota exhausted")]
    Quota,
    #[error("rate limited; gave up after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("transport error after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("unsupported language {0}")]
    UnsupportedLanguage(String),
    #[error("document translation failed: {0}")]
    Document(String),
    #[error("unexpected response: {0}")]
    Protocol(String),
    #[error("configuration error: {0}")]
    Config(String),
}

/// A translation engine. Implementations must be safe to call from several
/// threads at once.
pub trait Translator: Send + Sync {
    /// Stable name of the backend and every parameter that changes its
    /// output. Part of every cache key.
    fn identity(&self) -> String;

    fn supports(&self, _lang: &Lang) -> bool {
        true
    }

    /// Translates a markup document from `doc.meta.source_lang` to
    /// `doc.meta.target_lang`. The returned document keeps the input's
    /// metadata.
    fn translate_document(&self, doc: &MarkupDoc) -> Result<MarkupDoc, BackendError>;

    /// Translates plain texts; the output has the input's length and order.
    fn translate_texts(&self, batch: &[String], source: &Lang, target: &Lang) -> Result<Vec<String>, BackendError>;
}

impl<T: Translator + ?Sized> Translator for Box<T> {
    fn identity(&self) -> String {
        (**self).identity()
    }

    fn supports(&self, lang: &Lang) -> bool {
        (**self).supports(lang)
    }

    fn translate_document(&self, doc: &MarkupDoc) -> Result<MarkupDoc, BackendError> {
        (**self).translate_document(doc)
    }

    fn translate_texts(&self, batch: &[String], source: &Lang, target: &Lang) -> Result<Vec<String>, BackendError> {
        (**self).translate_texts(batch, source, target)
    }
}

impl<T: Translator + ?Sized> Translator for &T {
    fn identity(&self) -> String {
        (**self).identity()
    }

    fn supports(&self, lang: &Lang) -> bool {
        (**self).supports(lang)
    }

    fn translate_document(&self, doc: &MarkupDoc) -> Result<MarkupDoc, BackendError> {
        (**self).translate_document(doc)
    }

    fn translate_texts(&self, batch: &[String], source: &Lang, target: &Lang) -> Result<Vec<String>, BackendError> {
        (**self).translate_texts(batch, source, target)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    Document(MarkupDoc),
    Texts(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranslationRequest {
    pub payload: Payload,
    pub source_lang: Lang,
    pub target_lang: Lang,
}

pub fn check_languages(t: &dyn Translator, source: &Lang, target: &Lang) -> Result<(), BackendError> {
    for l in [source, target] {
        if !t.supports(l) {
            return Err(BackendError::UnsupportedLanguage(l.to_string()));
        }
    }
    Ok(())
}

/// Validates the request's languages and dispatches it.
pub fn translate(t: &dyn Translator, req: &TranslationRequest) -> Result<Payload, BackendError> {
    check_languages(t, &req.source_lang, &req.target_lang)?;
    match &req.payload {
        Payload::Document(doc) => {
            let mut doc = doc.clone();
            doc.meta.source_lang = req.source_lang.clone();
            doc.meta.target_lang = req.target_lang.clone();
            t.translate_document(&doc).map(Payload::Document)
        }
        Payload::Texts(batch) => {
            if batch.is_empty() {
                return Ok(Payload::Texts(Vec::new()));
            }
            let out = t.translate_texts(batch, &req.source_lang, &req.target_lang)?;
            if out.len() != batch.len() {
                return Err(BackendError::Protocol(format!("sent {} texts, received {}", batch.len(), out.len())));
            }
            Ok(Payload::Texts(out))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Service,
    #[default]
    Identity,
    Mock,
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "service" => Ok(Self::Service),
            "identity" => Ok(Self::Identity),
            "mock" => Ok(Self::Mock),
            other => Err(format!("unknown backend {other:?} (expected service, identity or mock)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 5, initial_backoff_ms: 500, max_backoff_ms: 30_000 }
    }
}

impl RetryPolicy {
    /// Exponential backoff before retry number `retry` (1-based), with up to
    /// 50% random jitter subtracted.
    pub fn backoff(&self, retry: u32, jitter: f64) -> Duration {
        let exp = self.initial_backoff_ms.saturating_mul(1u64 << (retry.saturating_sub(1)).min(20));
        let capped = exp.min(self.max_backoff_ms) as f64;
        Duration::from_millis((capped * (1.0 - 0.5 * jitter.clamp(0.0, 1.0))) as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PollPolicy {
    pub min_interval_ms: u64,
    pub max_interval_ms: u64,
    pub timeout_secs: u64,
}

impl Default for PollPolicy {
    fn default() -> Self {
        Self { min_interval_ms: 500, max_interval_ms: 10_000, timeout_secs: 3600 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub max_concurrent: usize,
    /// Admission rate for service requests; unlimited when absent.
    pub requests_per_second: Option<f64>,
    pub request_timeout_secs: u64,
    pub retry: RetryPolicy,
    pub poll: PollPolicy,
    pub mock: MockParams,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Identity,
            endpoint: DEFAULT_ENDPOINT.to_string(),
            api_key_env: DEFAULT_API_KEY_ENV.to_string(),
            max_concurrent: 4,
            requests_per_second: None,
            request_timeout_secs: 120,
            retry: RetryPolicy::default(),
            poll: PollPolicy::default(),
            mock: MockParams::default(),
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), BackendError> {
        let cfg = |m: String| Err(BackendError::Config(m));
        if self.retry.max_attempts < 1 {
            return cfg("retry.max_attempts must be at least 1".into());
        }
        if self.max_concurrent < 1 {
            return cfg("max_concurrent must be at least 1".into());
        }
        if let Some(r) = self.requests_per_second {
            if !(r > 0.0 && r.is_finite()) {
                return cfg(format!("requests_per_second must be positive, got {r}"));
            }
        }
        self.mock.validate()
    }

    pub fn build(&self) -> Result<Box<dyn Translator>, BackendError> {
        self.validate()?;
        Ok(match self.kind {
            BackendKind::Identity => Box::new(IdentityBackend),
            BackendKind::Mock => Box::new(MockBackend::new(self.mock.clone())?),
            BackendKind::Service => {
                let key = std::env::var(&self.api_key_env).map_err(|_| {
                    BackendError::Config(format!("environment variable {} is not set", self.api_key_env))
                })?;
                Box::new(ServiceBackend::new(self, key)?)
            }
        })
    }
}
