//! Content-addressed, write-once cache of translation results.
//!
//! Entries live at `<root>/objects/<k[0..2]>/<k>.json` where `k` is the
//! SHA-256 of the request kind, backend identity, language pair and payload.
//! Writes go to a temporary file in the same directory and are renamed into
//! place, and an existing entry is never replaced.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backend::{BackendError, Translator};
use crate::lang::Lang;
use crate::markup::MarkupDoc;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub kind: String,
    pub backend: String,
    pub source_lang: Lang,
    pub target_lang: Lang,
    pub created_unix: u64,
    pub value: String,
}

#[derive(Debug, Clone)]
pub struct TranslationCache {
    root: PathBuf,
}

pub fn cache_key(kind: &str, backend: &str, source: &Lang, target: &Lang, payload: &[u8]) -> String {
    let mut h = Sha256::new();
    for part in [b"squad-mt-cache-v1".as_slice(), kind.as_bytes(), backend.as_bytes(), source.as_str().as_bytes(), target.as_str().as_bytes()] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part);
    }
    h.update(payload);
    hex::encode(h.finalize())
}

impl TranslationCache {
    pub fn open(root: impl Into<PathBuf>) -> std::io::Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(root.join("objects"))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, key: &str) -> PathBuf {
        self.root.join("objects").join(&key[..2]).join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Option<CacheEntry> {
        let bytes = std::fs::read(self.path(key)).ok()?;
        match serde_json::from_slice::<CacheEntry>(&bytes) {
            Ok(e) if e.key == key => Some(e),
            _ => {
                log::warn!("ignoring unreadable cache entry {key}");
                None
            }
        }
    }

    pub fn put(&self, entry: &CacheEntry) -> std::io::Result<()> {
        let path = self.path(&entry.key);
        if path.exists() {
            return Ok(());
        }
        let dir = path.parent().expect("entry path has a parent");
        std::fs::create_dir_all(dir)?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(&serde_json::to_vec(entry)?)?;
        tmp.as_file().sync_all()?;
        match tmp.persist_noclobber(&path) {
            Ok(_) => Ok(()),
            Err(e) if e.error.kind() == std::io::ErrorKind::AlreadyExists => Ok(()),
            Err(e) => Err(e.error),
        }
    }

    pub fn len(&self) -> usize {
        walk_json(&self.root.join("objects"))
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn walk_json(dir: &Path) -> usize {
    let Ok(rd) = std::fs::read_dir(dir) else { return 0 };
    rd.flatten()
        .map(|e| {
            let p = e.path();
            if p.is_dir() {
                walk_json(&p)
            } else {
                usize::from(p.extension().is_some_and(|x| x == "json"))
            }
        })
        .sum()
}

fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Serves repeated requests from a [`TranslationCache`] and records new
/// results there.
pub struct CachedTranslator<T> {
    inner: T,
    cache: TranslationCache,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

impl<T: Translator> CachedTranslator<T> {
    pub fn new(inner: T, cache: TranslationCache) -> Self {
        Self { inner, cache, hits: AtomicUsize::new(0), misses: AtomicUsize::new(0) }
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::Relaxed)
    }

    fn lookup(&self, key: &str) -> Option<String> {
        let hit = self.cache.get(key).map(|e| e.value);
        if hit.is_some() {
            self.hits.fetch_add(1, Ordering::Relaxed);
        } else {
            self.misses.fetch_add(1, Ordering::Relaxed);
        }
        hit
    }

    fn store(&self, key: String, kind: &str, source: &Lang, target: &Lang, value: String) -> Result<(), BackendError> {
        let entry = CacheEntry {
            key,
            kind: kind.into(),
            backend: self.inner.identity(),
            source_lang: source.clone(),
            target_lang: target.clone(),
            created_unix: now_unix(),
            value,
        };
        self.cache.put(&entry).map_err(|e| BackendError::Config(format!("cache write failed: {e}")))
    }
}

impl<T: Translator> Translator for CachedTranslator<T> {
    fn identity(&self) -> String {
        self.inner.identity()
    }

    fn supports(&self, lang: &Lang) -> bool {
        self.inner.supports(lang)
    }

    fn translate_document(&self, doc: &MarkupDoc) -> Result<MarkupDoc, BackendError> {
        let (src, tgt) = (&doc.meta.source_lang, &doc.meta.target_lang);
        let key = cache_key("document", &self.inner.identity(), src, tgt, doc.content.as_bytes());
        if let Some(content) = self.lookup(&key) {
            return Ok(MarkupDoc { content, meta: doc.meta.clone() });
        }
        let out = self.inner.translate_document(doc)?;
        self.store(key, "document", src, tgt, out.content.clone())?;
        Ok(out)
    }

    fn translate_texts(&self, batch: &[String], source: &Lang, target: &Lang) -> Result<Vec<String>, BackendError> {
        let payload = serde_json::to_vec(batch).expect("string list serializes");
        let key = cache_key("texts", &self.inner.identity(), source, target, &payload);
        if let Some(v) = self.lookup(&key) {
            if let Ok(texts) = serde_json::from_str::<Vec<String>>(&v) {
                if texts.len() == batch.len() {
                    return Ok(texts);
                }
            }
        }
        let out = self.inner.translate_texts(batch, source, target)?;
        self.store(key, "texts", source, target, serde_json::to_string(&out).expect("string list serializes"))?;
        Ok(out)
    }
}
