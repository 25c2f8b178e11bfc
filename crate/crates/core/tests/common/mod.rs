//! A DeepL-compatible HTTP server on a loopback port, enough for the client's
//! document and text endpoints, with fault injection.
#![allow(dead_code)]

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use squad_mt::backend::{BackendConfig, BackendKind, PollPolicy, RetryPolicy, ServiceBackend};

#[derive(Debug, Clone, Default)]
pub struct Request {
    pub method: String,
    pub path: String,
    pub headers: HashMap<String, String>,
    pub body: Vec<u8>,
}

impl Request {
    pub fn form(&self) -> Vec<(String, String)> {
        form_urlencoded::parse(&self.body).into_owned().collect()
    }

    /// Named parts of a multipart/form-data body.
    pub fn multipart(&self) -> HashMap<String, Vec<u8>> {
        let ct = self.headers.get("content-type").cloned().unwrap_or_default();
        let boundary = ct.split("boundary=").nth(1).unwrap_or_default().trim_matches('"').to_string();
        let delim = format!("--{boundary}").into_bytes();
        let mut out = HashMap::new();
        for part in split_bytes(&self.body, &delim) {
            let Some(head_end) = find(part, b"\r\n\r\n") else { continue };
            let head = String::from_utf8_lossy(&part[..head_end]);
            let Some(name) = head.split("name=\"").nth(1).and_then(|s| s.split('"').next()) else { continue };
            let mut content = &part[head_end + 4..];
            if content.ends_with(b"\r\n") {
                content = &content[..content.len() - 2];
            }
            out.insert(name.to_string(), content.to_vec());
        }
        out
    }
}

fn find(hay: &[u8], needle: &[u8]) -> Option<usize> {
    hay.windows(needle.len()).position(|w| w == needle)
}

fn split_bytes<'a>(mut hay: &'a [u8], delim: &[u8]) -> Vec<&'a [u8]> {
    let mut parts = Vec::new();
    while let Some(i) = find(hay, delim) {
        parts.push(&hay[..i]);
        hay = &hay[i + delim.len()..];
    }
    parts.push(hay);
    parts
}

pub struct Reply {
    pub status: u16,
    pub body: Vec<u8>,
}

impl Reply {
    pub fn json(status: u16, v: serde_json::Value) -> Self {
        Self { status, body: v.to_string().into_bytes() }
    }
}

/// What the fake service does with each request.
#[derive(Debug, Clone, Default)]
pub struct Faults {
    /// Answer this many requests with 429 before serving normally.
    pub rate_limit_first: usize,
    /// Answer this many requests with 503 before serving normally.
    pub unavailable_first: usize,
    pub always_status: Option<u16>,
    /// Hold every request this long (for concurrency measurements).
    pub delay_ms: u64,
}

#[derive(Default)]
struct State {
    docs: HashMap<String, (String, usize)>,
    next_id: usize,
}

pub struct FakeService {
    pub url: String,
    pub requests: Arc<AtomicUsize>,
    pub peak: Arc<AtomicUsize>,
    pub log: Arc<Mutex<Vec<(String, String)>>>,
    stop: Arc<AtomicBool>,
}

impl Drop for FakeService {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.url.trim_start_matches("http://"));
    }
}

fn read_request(stream: &mut TcpStream) -> Option<Request> {
    let mut r = BufReader::new(stream.try_clone().ok()?);
    let mut line = String::new();
    r.read_line(&mut line).ok()?;
    let mut it = line.split_whitespace();
    let method = it.next()?.to_string();
    let path = it.next()?.to_string();
    let mut headers = HashMap::new();
    loop {
        let mut h = String::new();
        r.read_line(&mut h).ok()?;
        let h = h.trim_end();
        if h.is_empty() {
            break;
        }
        if let Some((k, v)) = h.split_once(':') {
            headers.insert(k.trim().to_ascii_lowercase(), v.trim().to_string());
        }
    }
    let mut body = Vec::new();
    if let Some(len) = headers.get("content-length").and_then(|v| v.parse::<usize>().ok()) {
        body.resize(len, 0);
        r.read_exact(&mut body).ok()?;
    } else if headers.get("transfer-encoding").is_some_and(|v| v.contains("chunked")) {
        loop {
            let mut size = String::new();
            r.read_line(&mut size).ok()?;
            let n = usize::from_str_radix(size.trim(), 16).ok()?;
            let mut chunk = vec![0; n + 2];
            r.read_exact(&mut chunk).ok()?;
            if n == 0 {
                break;
            }
            body.extend_from_slice(&chunk[..n]);
        }
    }
    Some(Request { method, path, headers, body })
}

fn respond(stream: &mut TcpStream, reply: Reply) {
    let head = format!(
        "HTTP/1.1 {} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        reply.status,
        reply.body.len()
    );
    let _ = stream.write_all(head.as_bytes());
    let _ = stream.write_all(&reply.body);
    let _ = stream.flush();
}

/// Plain-text "translation": tags the text with the target language.
pub fn fake_translate(text: &str, target: &str) -> String {
    format!("[{target}] {text}")
}

fn serve(req: &Request, state: &Mutex<State>) -> Reply {
    let mut st = state.lock().unwrap();
    let path = req.path.as_str();
    if path == "/v2/document" {
        let parts = req.multipart();
        let (Some(file), Some(target)) = (parts.get("file"), parts.get("target_lang")) else {
            return Reply::json(400, serde_json::json!({"message": "missing file"}));
        };
        let _ = target;
        st.next_id += 1;
        let id = format!("DOC{}", st.next_id);
        st.docs.insert(id.clone(), (String::from_utf8_lossy(file).into_owned(), 0));
        return Reply::json(200, serde_json::json!({"document_id": id, "document_key": format!("KEY{id}")}));
    }
    if path == "/v2/translate" {
        let form = req.form();
        let target = form.iter().find(|(k, _)| k == "target_lang").map(|(_, v)| v.clone()).unwrap_or_default();
        if target.is_empty() {
            return Reply::json(400, serde_json::json!({"message": "Value for 'target_lang' not supported."}));
        }
        let translations: Vec<_> = form
            .iter()
            .filter(|(k, _)| k == "text")
            .map(|(_, t)| serde_json::json!({"detected_source_language": "EN", "text": fake_translate(t, &target)}))
            .collect();
        return Reply::json(200, serde_json::json!({ "translations": translations }));
    }
    if let Some(rest) = path.strip_prefix("/v2/document/") {
        let form = req.form();
        let key = form.iter().find(|(k, _)| k == "document_key").map(|(_, v)| v.clone()).unwrap_or_default();
        let (id, result) = match rest.strip_suffix("/result") {
            Some(id) => (id.to_string(), true),
            None => (rest.to_string(), false),
        };
        if key != format!("KEY{id}") {
            return Reply::json(403, serde_json::json!({"message": "bad document key"}));
        }
        let Some(doc) = st.docs.get_mut(&id) else {
            return Reply::json(404, serde_json::json!({"message": "no such document"}));
        };
        if result {
            return Reply { status: 200, body: doc.0.clone().into_bytes() };
        }
        doc.1 += 1;
        // one "translating" answer before "done"
        let status = if doc.1 < 2 { "translating" } else { "done" };
        return Reply::json(200, serde_json::json!({"document_id": id, "status": status, "seconds_remaining": 0}));
    }
    Reply::json(404, serde_json::json!({"message": "not found"}))
}

pub fn start(faults: Faults) -> FakeService {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let requests = Arc::new(AtomicUsize::new(0));
    let peak = Arc::new(AtomicUsize::new(0));
    let log = Arc::new(Mutex::new(Vec::new()));
    let stop = Arc::new(AtomicBool::new(false));
    let state = Arc::new(Mutex::new(State::default()));
    let inflight = Arc::new(AtomicUsize::new(0));
    {
        let (requests, peak, log, stop) = (requests.clone(), peak.clone(), log.clone(), stop.clone());
        std::thread::spawn(move || {
            for stream in listener.incoming() {
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(mut stream) = stream else { continue };
                let (requests, peak, log, state, inflight, faults) =
                    (requests.clone(), peak.clone(), log.clone(), state.clone(), inflight.clone(), faults.clone());
                std::thread::spawn(move || {
                    let Some(req) = read_request(&mut stream) else { return };
                    let now = inflight.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(now, Ordering::SeqCst);
                    let n = requests.fetch_add(1, Ordering::SeqCst);
                    log.lock().unwrap().push((req.method.clone(), req.path.clone()));
                    if faults.delay_ms > 0 {
                        std::thread::sleep(Duration::from_millis(faults.delay_ms));
                    }
                    let auth_ok = req.headers.get("authorization").is_some_and(|a| a.starts_with("DeepL-Auth-Key "));
                    let reply = if !auth_ok {
                        Reply::json(403, serde_json::json!({"message": "missing key"}))
                    } else if let Some(s) = faults.always_status {
                        Reply::json(s, serde_json::json!({"message": "injected"}))
                    } else if n < faults.rate_limit_first {
                        Reply::json(429, serde_json::json!({"message": "Too many requests"}))
                    } else if n < faults.rate_limit_first + faults.unavailable_first {
                        Reply::json(503, serde_json::json!({"message": "unavailable"}))
                    } else {
                        serve(&req, &state)
                    };
                    inflight.fetch_sub(1, Ordering::SeqCst);
                    respond(&mut stream, reply);
                });
            }
        });
    }
    FakeService { url, requests, peak, log, stop }
}

/// Client settings tuned for a local server: tiny backoff and poll intervals.
pub fn config(url: &str, max_concurrent: usize) -> BackendConfig {
    BackendConfig {
        kind: BackendKind::Service,
        endpoint: url.to_string(),
        max_concurrent,
        request_timeout_secs: 10,
        retry: RetryPolicy { max_attempts: 4, initial_backoff_ms: 1, max_backoff_ms: 5 },
        poll: PollPolicy { min_interval_ms: 1, max_interval_ms: 5, timeout_secs: 10 },
        ..Default::default()
    }
}

pub fn client(url: &str, max_concurrent: usize) -> ServiceBackend {
    ServiceBackend::new(&config(url, max_concurrent), "test-key:fx".into()).unwrap()
}
