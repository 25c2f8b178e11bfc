//! Seeded perturbation backend for exercising span transfer offline.
//!
//! Each tagged run independently suffers up to four perturbations, one per
//! failure mode observed with real document translation:
//!
//! * drop: the tag is removed, its text stays (missing answer)
//! * split: the run is cut at an interior whitespace gap, the gap left
//!   untagged (discontinuous answer)
//! * swap: the run trades places with the inline that follows it
//!   (misordering)
//! * punct: a punctuation mark is appended inside the run (over-extension)
//!
//! The optional "translation" reverses the word order of every text run. It
//! is its own inverse, so two passes restore the input.
//!
//! The random stream for a request is seeded from the base seed and a hash of
//! the request content, so results do not depend on call order or thread
//! scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{BackendError, Translator};
use crate::lang::Lang;
use crate::markup::{parse_document, render, Block, Inline, MarkupDoc};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockParams {
    pub seed: u64,
    pub drop: f64,
    pub split: f64,
    pub swap: f64,
    pub punct: f64,
    pub reverse_words: bool,
}

impl Default for MockParams {
    fn default() -> Self {
        Self { seed: 0, drop: 0.0, split: 0.0, swap: 0.0, punct: 0.0, reverse_words: false }
    }
}

impl MockParams {
    pub fn validate(&self) -> Result<(), BackendError> {
        for (name, p) in [("drop", self.drop), ("split", self.split), ("swap", self.swap), ("punct", self.punct)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(BackendError::Config(format!("mock {name} probability {p} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

const APPENDED_PUNCTUATION: [char; 3] = ['.', ',', ')'];

#[derive(Debug, Clone)]
pub struct MockBackend {
    params: MockParams,
}

impl MockBackend {
    pub fn new(params: MockParams) -> Result<Self, BackendError> {
        params.validate()?;
        Ok(Self { params })
    }

    pub fn params(&self) -> &MockParams {
        &self.params
    }

    fn rng_for(&self, content: &str) -> ChaCha8Rng {
        let digest = Sha256::digest(content.as_bytes());
        let mut h = [0u8; 8];
        h.copy_from_slice(&digest[..8]);
        ChaCha8Rng::seed_from_u64(u64::from_le_bytes(h) ^ self.params.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }

    fn perturb(&self, block: Block, rng: &mut ChaCha8Rng) -> Block {
        let p = &self.params;
        let mut out: Vec<Inline> = Vec::with_capacity(block.inlines.len() + 4);
        let mut swap_at = Vec::new();
        for mut inline in block.inlines {
            if p.reverse_words {
                let reversed = reverse_words(inline.text());
                *inline.text_mut() = reversed;
            }
            let Inline::Segment { id, text } = inline else {
                out.push(inline);
                continue;
            };
            // fixed number of draws per segment keeps the stream aligned
            let drop = rng.gen::<f64>() < p.drop;
            let split = rng.gen::<f64>() < p.split;
            let punct = rng.gen::<f64>() < p.punct;
            let swap = rng.gen::<f64>() < p.swap;
            let pick = rng.gen::<u64>();

            if drop {
                out.push(Inline::Text(text));
                continue;
            }
            let mut parts = match interior_gaps(&text) {
                gaps if split && !gaps.is_empty() => {
                    let (a, b) = gaps[(pick % gaps.len() as u64) as usize];
                    vec![
                        Inline::Segment { id, text: text[..a].to_string() },
                        Inline::Text(text[a..b].to_string()),
                        Inline::Segment { id, text: text[b..].to_string() },
                    ]
                }
                _ => vec![Inline::Segment { id, text }],
            };
            if punct {
                let mark = APPENDED_PUNCTUATION[((pick >> 32) % APPENDED_PUNCTUATION.len() as u64) as usize];
                parts.last_mut().unwrap().text_mut().push(mark);
            }
            if swap {
                swap_at.push(out.len() + parts.len() - 1);
            }
            out.extend(parts);
        }
        let mut skip_until = 0;
        for i in swap_at {
            if i >= skip_until && i + 1 < out.len() {
                out.swap(i, i + 1);
                skip_until = i + 2;
            }
        }
        Block { inlines: out }
    }
}

/// Byte ranges of whitespace runs strictly inside `text`.
fn interior_gaps(text: &str) -> Vec<(usize, usize)> {
    let mut gaps = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_whitespace(), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                if s > 0 {
                    gaps.push((s, i));
                }
                start = None;
            }
            _ => {}
        }
    }
    gaps
}

/// Reverses the order of whitespace and non-whitespace tokens. Applying it
/// twice returns the input.
pub fn reverse_words(text: &str) -> String {
    let mut tokens: Vec<&str> = Vec::new();
    let mut start = 0;
    let mut prev_ws = None;
    for (i, c) in text.char_indices() {
        let ws = c.is_whitespace();
        if prev_ws.is_some_and(|p| p != ws) {
            tokens.push(&text[start..i]);
            start = i;
        }
        prev_ws = Some(ws);
    }
    if start < text.len() {
        tokens.push(&text[start..]);
    }
    tokens.iter().rev().copied().collect()
}

impl Translator for MockBackend {
    fn identity(&self) -> String {
        let p = &self.params;
        format!(
            "mock:seed={}:drop={}:split={}:swap={}:punct={}:reverse={}",
            p.seed, p.drop, p.split, p.swap, p.punct, p.reverse_words
        )
    }

    fn translate_document(&self, doc: &MarkupDoc) -> Result<MarkupDoc, BackendError> {
        let mut rng = self.rng_for(&doc.content);
        let blocks = parse_document(&doc.content)
            .into_iter()
            .map(|b| b.map(|b| self.perturb(b, &mut rng)))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| BackendError::Protocol(format!("mock received malformed document: {e}")))?;
        Ok(MarkupDoc { content: render(&blocks), meta: doc.meta.clone() })
    }

    fn translate_texts(&self, batch: &[String], _source: &Lang, _target: &Lang) -> Result<Vec<String>, BackendError> {
        Ok(batch
            .iter()
            .map(|t| if self.params.reverse_words { reverse_words(t) } else { t.clone() })
            .collect())
    }
}
