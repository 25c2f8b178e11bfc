//! Client for a DeepL-compatible HTTP translation service.
//!
//! Documents go through the upload / status poll / download workflow
//! (`POST /v2/document`, `POST /v2/document/{id}`,
//! `POST /v2/document/{id}/result`); plain texts use `POST /v2/translate`.
//! Every HTTP request passes the [`AdmissionGate`], so the number of requests
//! in flight never exceeds the configured cap. Rate-limit responses, server
//! errors and transport failures are retried with exponential backoff and
//! jitter.

use std::time::{Duration, Instant};

use rand::Rng;
use reqwest::blocking::{multipart, Client, RequestBuilder, Response};
use reqwest::StatusCode;
use serde::Deserialize;

use super::{AdmissionGate, BackendConfig, BackendError, PollPolicy, RetryPolicy, Translator};
use crate::lang::Lang;
use crate::markup::MarkupDoc;

/// Upper bound on texts per `/v2/translate` request.
pub const MAX_TEXTS_PER_REQUEST: usize = 50;

pub struct ServiceBackend {
    client: Client,
    base: String,
    auth: String,
    gate: AdmissionGate,
    retry: RetryPolicy,
    poll: PollPolicy,
}

impl std::fmt::Debug for ServiceBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ServiceBackend").field("base", &self.base).field("limit", &self.gate.limit()).finish()
    }
}

#[derive(Deserialize)]
struct UploadResponse {
    document_id: String,
    document_key: String,
}

#[derive(Deserialize)]
struct StatusResponse {
    status: String,
    seconds_remaining: Option<u64>,
    error_message: Option<String>,
}

#[derive(Deserialize)]
struct TextResponse {
    translations: Vec<TextTranslation>,
}

#[derive(Deserialize)]
struct TextTranslation {
    text: String,
}

enum Failure {
    Retry { rate_limited: bool, message: String },
    Fatal(BackendError),
}

impl ServiceBackend {
    pub fn new(cfg: &BackendConfig, api_key: String) -> Result<Self, BackendError> {
        if api_key.trim().is_empty() {
            return Err(BackendError::Config("empty API key".into()));
        }
        let client = Client::builder()
            .timeout(Duration::from_secs(cfg.request_timeout_secs))
            .build()
            .map_err(|e| BackendError::Config(format!("http client: {e}")))?;
        Ok(Self {
            client,
            base: cfg.endpoint.trim_end_matches('/').to_string(),
            auth: format!("DeepL-Auth-Key {}", api_key.trim()),
            gate: AdmissionGate::new(cfg.max_concurrent, cfg.requests_per_second),
            retry: cfg.retry.clone(),
            poll: cfg.poll.clone(),
        })
    }

    /// Sends the request built by `build` until it succeeds, fails fatally,
    /// or the retry budget runs out.
    fn send(&self, what: &str, build: impl Fn(&Client) -> RequestBuilder) -> Result<Response, BackendError> {
        let mut attempt = 0;
        loop {
            attempt += 1;
            let result = {
                let _permit = self.gate.acquire();
                build(&self.client).header("Authorization", &self.auth).send()
            };
            let failure = match result {
                Ok(resp) if resp.status().is_success() => return Ok(resp),
                Ok(resp) => classify(resp),
                Err(e) => Failure::Retry { rate_limited: false, message: e.to_string() },
            };
            match failure {
                Failure::Fatal(e) => return Err(e),
                Failure::Retry { rate_limited, message } => {
                    if attempt >= self.retry.max_attempts {
                        return Err(if rate_limited {
                            BackendError::RateLimited { attempts: attempt }
                        } else {
                            BackendError::Transport { attempts: attempt, message: format!("{what}: {message}") }
                        });
                    }
                    let wait = self.retry.backoff(attempt, rand::thread_rng().gen());
                    log::warn!("{what}: {message}; retrying in {wait:?} (attempt {attempt})");
                    std::thread::sleep(wait);
                }
            }
        }
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.base, path)
    }

    fn upload(&self, doc: &MarkupDoc) -> Result<UploadResponse, BackendError> {
        let url = self.url("/v2/document");
        let bytes = doc.content.as_bytes().to_vec();
        let source = doc.meta.source_lang.service_source_code();
        let target = doc.meta.target_lang.service_target_code();
        let filename = format!("{}.html", sanitize(&doc.meta.key));
        let resp = self.send("upload", |c| {
            let file = multipart::Part::bytes(bytes.clone())
                .file_name(filename.clone())
                .mime_str("text/html")
                .expect("static mime type");
            let form = multipart::Form::new()
                .text("source_lang", source.clone())
                .text("target_lang", target.clone())
                .part("file", file);
            c.post(&url).multipart(form)
        })?;
        json(resp)
    }

    fn wait_done(&self, handle: &UploadResponse) -> Result<(), BackendError> {
        let url = self.url(&format!("/v2/document/{}", handle.document_id));
        let deadline = Instant::now() + Duration::from_secs(self.poll.timeout_secs);
        loop {
            let resp = self.send("status", |c| c.post(&url).form(&[("document_key", &handle.document_key)]))?;
            let status: StatusResponse = json(resp)?;
            let hint = match status.status.as_str() {
                "done" => return Ok(()),
                "error" => {
                    return Err(BackendError::Document(status.error_message.unwrap_or_else(|| "unknown error".into())))
                }
                "queued" | "translating" => status.seconds_remaining.map(|s| s * 1000).unwrap_or(0),
                other => return Err(BackendError::Protocol(format!("unknown document status {other:?}"))),
            };
            if Instant::now() >= deadline {
                return Err(BackendError::Transport {
                    attempts: 1,
                    message: format!("document {} not done after {}s", handle.document_id, self.poll.timeout_secs),
                });
            }
            let wait = hint.clamp(self.poll.min_interval_ms, self.poll.max_interval_ms.max(self.poll.min_interval_ms));
            std::thread::sleep(Duration::from_millis(wait));
        }
    }

    fn download(&self, handle: &UploadResponse) -> Result<String, BackendError> {
        let url = self.url(&format!("/v2/document/{}/result", handle.document_id));
        let resp = self.send("download", |c| c.post(&url).form(&[("document_key", &handle.document_key)]))?;
        let bytes = resp.bytes().map_err(|e| BackendError::Transport { attempts: 1, message: e.to_string() })?;
        String::from_utf8(bytes.to_vec()).map_err(|_| BackendError::Protocol("translated document is not UTF-8".into()))
    }

    fn translate_chunk(&self, chunk: &[String], source: &Lang, target: &Lang) -> Result<Vec<String>, BackendError> {
        let url = self.url("/v2/translate");
        let mut form: Vec<(&str, String)> = chunk.iter().map(|t| ("text", t.clone())).collect();
        form.push(("source_lang", source.service_source_code()));
        form.push(("target_lang", target.service_target_code()));
        let resp = self.send("translate", |c| c.post(&url).form(&form))?;
        let body: TextResponse = json(resp)?;
        if body.translations.len() != chunk.len() {
            return Err(BackendError::Protocol(format!(
                "sent {} texts, received {} translations",
                chunk.len(),
                body.translations.len()
            )));
        }
        Ok(body.translations.into_iter().map(|t| t.text).collect())
    }
}

fn classify(resp: Response) -> Failure {
    let status = resp.status();
    let body = resp.text().unwrap_or_default();
    let message = format!("HTTP {status}: {}", body.chars().take(200).collect::<String>());
    match status.as_u16() {
        401 | 403 => Failure::Fatal(BackendError::Auth(message)),
        456 => Failure::Fatal(BackendError::Quota),
        429 => Failure::Retry { rate_limited: true, message },
        400 if body.contains("lang") => Failure::Fatal(BackendError::UnsupportedLanguage(message)),
        s if StatusCode::from_u16(s).is_ok_and(|c| c.is_server_error()) => {
            Failure::Retry { rate_limited: false, message }
        }
        _ => Failure::Fatal(BackendError::Protocol(message)),
    }
}

fn json<T: for<'de> Deserialize<'de>>(resp: Response) -> Result<T, BackendError> {
    let bytes = resp.bytes().map_err(|e| BackendError::Transport { attempts: 1, message: e.to_string() })?;
    serde_json::from_slice(&bytes).map_err(|e| BackendError::Protocol(format!("bad JSON response: {e}")))
}

fn sanitize(key: &str) -> String {
    let s: String = key.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect();
    if s.is_empty() {
        "document".into()
    } else {
        s
    }
}

impl Translator for ServiceBackend {
    fn identity(&self) -> String {
        // endpoint and key excluded: free and pro tiers translate alike, and a
        // rotated key must keep the cache warm
        "deepl-document".into()
    }

    fn supports(&self, lang: &Lang) -> bool {
        lang.is_service_supported()
    }

    fn translate_document(&self, doc: &MarkupDoc) -> Result<MarkupDoc, BackendError> {
        let handle = self.upload(doc)?;
        self.wait_done(&handle)?;
        let content = self.download(&handle)?;
        Ok(MarkupDoc { content, meta: doc.meta.clone() })
    }

    fn translate_texts(&self, batch: &[String], source: &Lang, target: &Lang) -> Result<Vec<String>, BackendError> {
        let mut out = Vec::with_capacity(batch.len());
        for chunk in batch.chunks(MAX_TEXTS_PER_REQUEST) {
            out.extend(self.translate_chunk(chunk, source, target)?);
        }
        Ok(out)
    }
}
