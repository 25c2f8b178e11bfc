//! SQuAD2.0 JSON model: parsing, validation, serialization and summary
//! statistics.
//!
//! Answer offsets count Unicode code points, the same convention the original
//! corpus uses. The extended output schema adds an `answer_pieces` key holding
//! `[start, end)` pairs for answers whose translation came back
//! discontinuous; `answer_start`/`text` then describe the hull of the pieces.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::text::CharMap;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("answer offset mismatch in question {id}: {detail}")]
    OffsetMismatch { id: String, detail: String },
    #[error("duplicate question id {0}")]
    DuplicateId(String),
    #[error("invalid question {id}: {reason}")]
    InvalidEntry { id: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaDataset {
    pub version: String,
    #[serde(rename = "data")]
    pub articles: Vec<Article>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Article {
    pub title: String,
    pub paragraphs: Vec<Paragraph>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paragraph {
    pub qas: Vec<QaEntry>,
    pub context: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaEntry {
    pub question: String,
    pub id: String,
    pub answers: Vec<AnswerSpan>,
    pub is_impossible: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub plausible_answers: Vec<AnswerSpan>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AnswerSpan {
    pub text: String,
    pub answer_start: usize,
    #[serde(rename = "answer_pieces", default, skip_serializing_if = "Option::is_none")]
    pub pieces: Option<Vec<(usize, usize)>>,
}

impl AnswerSpan {
    pub fn new(text: impl Into<String>, answer_start: usize) -> Self {
        Self { text: text.into(), answer_start, pieces: None }
    }

    /// `[answer_start, answer_start + len(text))` in code points.
    pub fn range(&self) -> (usize, usize) {
        (self.answer_start, self.answer_start + self.text.chars().count())
    }

    /// Number of pieces; continuous answers count as one.
    pub fn piece_count(&self) -> usize {
        self.pieces.as_ref().map_or(1, |p| p.len().max(1))
    }
}

// Input-side mirror of `QaEntry`: `is_impossible` may be absent in
// SQuAD1.1-era files.
#[derive(Deserialize)]
struct RawDataset {
    version: String,
    data: Vec<RawArticle>,
}

#[derive(Deserialize)]
struct RawArticle {
    title: String,
    paragraphs: Vec<RawParagraph>,
}

#[derive(Deserialize)]
struct RawParagraph {
    context: String,
    qas: Vec<RawQa>,
}

#[derive(Deserialize)]
struct RawQa {
    id: String,
    question: String,
    answers: Vec<AnswerSpan>,
    is_impossible: Option<bool>,
    #[serde(default)]
    plausible_answers: Vec<AnswerSpan>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Accept entries without `is_impossible`, inferring it from whether
    /// `answers` is empty.
    pub squad1_compat: bool,
}

pub fn parse_dataset(raw: &[u8]) -> Result<QaDataset, DatasetError> {
    parse_dataset_with(raw, ParseOptions::default())
}

pub fn parse_dataset_with(raw: &[u8], opts: ParseOptions) -> Result<QaDataset, DatasetError> {
    let de = &mut serde_json::Deserializer::from_slice(raw);
    let raw: RawDataset = serde_path_to_error::deserialize(de).map_err(|e| DatasetError::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;

    let mut articles = Vec::with_capacity(raw.data.len());
    for (ai, a) in raw.data.into_iter().enumerate() {
        let mut paragraphs = Vec::with_capacity(a.paragraphs.len());
        for (pi, p) in a.paragraphs.into_iter().enumerate() {
            let mut qas = Vec::with_capacity(p.qas.len());
            for (qi, q) in p.qas.into_iter().enumerate() {
                let is_impossible = match (q.is_impossible, opts.squad1_compat) {
                    (Some(v), _) => v,
                    (None, true) => q.answers.is_empty(),
                    (None, false) => {
                        return Err(DatasetError::Schema {
                            path: format!("data[{ai}].paragraphs[{pi}].qas[{qi}].is_impossible"),
                            message: "missing field `is_impossible`".into(),
                        })
                    }
                };
                qas.push(QaEntry {
                    question: q.question,
                    id: q.id,
                    answers: q.answers,
                    is_impossible,
                    plausible_answers: q.plausible_answers,
                });
            }
            paragraphs.push(Paragraph { qas, context: p.context });
        }
        articles.push(Article { title: a.title, paragraphs });
    }

    let dataset = QaDataset { version: raw.version, articles };
    dataset.validate()?;
    Ok(dataset)
}

/// Serializes to compact SQuAD2.0 JSON. With `extended == false` the
/// `answer_pieces` key is left out and only the hull span remains.
pub fn serialize_dataset(d: &QaDataset, extended: bool) -> Vec<u8> {
    if extended {
        serde_json::to_vec(d).expect("dataset serialization is infallible")
    } else {
        let mut plain = d.clone();
        plain.strip_pieces();
        serde_json::to_vec(&plain).expect("dataset serialization is infallible")
    }
}

impl QaDataset {
    pub fn empty(version: impl Into<String>) -> Self {
        Self { version: version.into(), articles: Vec::new() }
    }

    pub fn qas(&self) -> impl Iterator<Item = &QaEntry> {
        self.articles.iter().flat_map(|a| a.paragraphs.iter()).flat_map(|p| p.qas.iter())
    }

    pub fn strip_pieces(&mut self) {
        for a in &mut self.articles {
            for p in &mut a.paragraphs {
                for q in &mut p.qas {
                    for ans in q.answers.iter_mut().chain(q.plausible_answers.iter_mut()) {
                        ans.pieces = None;
                    }
                }
            }
        }
    }

    /// Checks every dataset invariant: non-empty contexts, unique ids,
    /// answerability consistency, and code-point agreement between each
    /// answer's offset and text (and its pieces, when present).
    pub fn validate(&self) -> Result<(), DatasetError> {
        let mut seen = HashSet::new();
        for (ai, a) in self.articles.iter().enumerate() {
            for (pi, p) in a.paragraphs.iter().enumerate() {
                if p.context.is_empty() {
                    return Err(DatasetError::Schema {
                        path: format!("data[{ai}].paragraphs[{pi}].context"),
                        message: "context is empty".into(),
                    });
                }
                let map = CharMap::new(&p.context);
                for q in &p.qas {
                    if !seen.insert(q.id.as_str()) {
                        return Err(DatasetError::DuplicateId(q.id.clone()));
                    }
                    if q.is_impossible && !q.answers.is_empty() {
                        return Err(DatasetError::InvalidEntry {
                            id: q.id.clone(),
                            reason: "unanswerable question has answers".into(),
                        });
                    }
                    if !q.is_impossible && q.answers.is_empty() {
                        return Err(DatasetError::InvalidEntry {
                            id: q.id.clone(),
                            reason: "answerable question has no answers".into(),
                        });
                    }
                    for ans in q.answers.iter().chain(&q.plausible_answers) {
                        check_answer(&q.id, &p.context, &map, ans)?;
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_answer(id: &str, context: &str, map: &CharMap, ans: &AnswerSpan) -> Result<(), DatasetError> {
    let (start, end) = ans.range();
    match map.slice(context, start, end) {
        Some(s) if s == ans.text => {}
        Some(s) => {
            return Err(DatasetError::OffsetMismatch {
                id: id.to_string(),
                detail: format!("context[{start}..{end}] is {s:?}, answer text is {:?}", ans.text),
            })
        }
        None => {
            return Err(DatasetError::OffsetMismatch {
                id: id.to_string(),
                detail: format!("span {start}..{end} exceeds context length {}", map.len()),
            })
        }
    }
    if let Some(pieces) = &ans.pieces {
        let bad = |detail: String| DatasetError::OffsetMismatch { id: id.to_string(), detail };
        if pieces.is_empty() {
            return Err(bad("empty answer_pieces".into()));
        }
        for (i, &(s, e)) in pieces.iter().enumerate() {
            if s >= e {
                return Err(bad(format!("piece {i} is empty or reversed: {s}..{e}")));
            }
            if i > 0 && pieces[i - 1].1 > s {
                return Err(bad(format!("piece {i} overlaps or precedes piece {}", i - 1)));
            }
        }
        let hull = (pieces[0].0, pieces[pieces.len() - 1].1);
        if hull != (start, end) {
            return Err(bad(format!("pieces hull {hull:?} differs from answer span {:?}", (start, end))));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub articles: usize,
    pub paragraphs: usize,
    pub questions: usize,
    pub answerable: usize,
    pub unanswerable: usize,
    /// Entries of `answers` lists (plausible answers excluded).
    pub answers: usize,
    pub discontinuous_answers: usize,
    pub discontinuous_fraction: f64,
}

pub fn dataset_stats(d: &QaDataset) -> DatasetStats {
    let mut s = DatasetStats { articles: d.articles.len(), ..Default::default() };
    for a in &d.articles {
        s.paragraphs += a.paragraphs.len();
        for p in &a.paragraphs {
            for q in &p.qas {
                s.questions += 1;
                if q.is_impossible {
                    s.unanswerable += 1;
                } else {
                    s.answerable += 1;
                }
                s.answers += q.answers.len();
                s.discontinuous_answers += q.answers.iter().filter(|a| a.piece_count() >= 2).count();
            }
        }
    }
    if s.answers > 0 {
        s.discontinuous_fraction = s.discontinuous_answers as f64 / s.answers as f64;
    }
    s
}
