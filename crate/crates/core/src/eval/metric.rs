//! Exact match and token F1 with the semantics of the official SQuAD2.0
//! evaluation script: lowercase, drop ASCII punctuation, drop articles,
//! collapse whitespace, then compare strings (EM) or whitespace token
//! multisets (F1). Unanswerable questions score 1 only for an empty
//! prediction.
//!
//! One departure: a question with no prediction scores 0 and stays in the
//! denominator instead of being skipped, and its id is reported.

use std::collections::{BTreeMap, HashMap, HashSet};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::dataset::QaDataset;

#[derive(Debug, thiserror::Error)]
pub enum ScoreError {
    #[error("prediction file is not a JSON object of id → answer: {0}")]
    Format(String),
}

/// Language-specific part of answer normalization.
#[derive(Debug, Clone)]
pub struct LangProfile {
    pub name: String,
    pub articles: Vec<String>,
    article_re: Option<Regex>,
}

impl LangProfile {
    pub fn new(name: impl Into<String>, articles: &[&str]) -> Self {
        let article_re = (!articles.is_empty()).then(|| {
            let alts: Vec<String> = articles.iter().map(|a| regex::escape(a)).collect();
            Regex::new(&format!(r"\b({})\b", alts.join("|"))).expect("article pattern compiles")
        });
        Self { name: name.into(), articles: articles.iter().map(|a| a.to_string()).collect(), article_re }
    }

    pub fn english() -> Self {
        Self::new("en", &["a", "an", "the"])
    }

    /// Finnish has no articles.
    pub fn finnish() -> Self {
        Self::new("fi", &[])
    }

    /// English for `en`, no article removal for everything else.
    pub fn for_lang(code: &str) -> Self {
        match code {
            "en" => Self::english(),
            other => Self::new(other, &[]),
        }
    }
}

pub fn normalize_answer(s: &str, profile: &LangProfile) -> String {
    let lower = s.to_lowercase();
    let no_punc: String = lower.chars().filter(|c| !c.is_ascii_punctuation()).collect();
    let no_articles = match &profile.article_re {
        Some(re) => re.replace_all(&no_punc, " ").into_owned(),
        None => no_punc,
    };
    no_articles.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn tokens(s: &str, profile: &LangProfile) -> Vec<String> {
    normalize_answer(s, profile).split_whitespace().map(str::to_string).collect()
}

pub fn compute_exact(gold: &str, pred: &str, profile: &LangProfile) -> f64 {
    f64::from(u8::from(normalize_answer(gold, profile) == normalize_answer(pred, profile)))
}

pub fn compute_f1(gold: &str, pred: &str, profile: &LangProfile) -> f64 {
    let g = tokens(gold, profile);
    let p = tokens(pred, profile);
    if g.is_empty() || p.is_empty() {
        return f64::from(u8::from(g == p));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in &g {
        *counts.entry(t).or_default() += 1;
    }
    let mut same = 0usize;
    for t in &p {
        if let Some(c) = counts.get_mut(t.as_str()).filter(|c| **c > 0) {
            *c -= 1;
            same += 1;
        }
    }
    if same == 0 {
        return 0.0;
    }
    let precision = same as f64 / p.len() as f64;
    let recall = same as f64 / g.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Question id → predicted answer; the empty string predicts "unanswerable".
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionSet(pub BTreeMap<String, String>);

impl PredictionSet {
    /// Reads the usual `{"id": "answer", ...}` file; `null` counts as an
    /// empty prediction.
    pub fn from_json(raw: &[u8]) -> Result<Self, ScoreError> {
        let map: BTreeMap<String, Option<String>> =
            serde_json::from_slice(raw).map_err(|e| ScoreError::Format(e.to_string()))?;
        Ok(Self(map.into_iter().map(|(k, v)| (k, v.unwrap_or_default())).collect()))
    }

    pub fn get(&self, id: &str) -> Option<&str> {
        self.0.get(id).map(String::as_str)
    }
}

impl FromIterator<(String, String)> for PredictionSet {
    fn from_iter<I: IntoIterator<Item = (String, String)>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionScore {
    pub id: String,
    pub has_answer: bool,
    pub exact: f64,
    pub f1: f64,
    pub predicted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    /// Percentages over all questions.
    pub exact: f64,
    pub f1: f64,
    pub total: usize,
    pub has_ans_exact: Option<f64>,
    pub has_ans_f1: Option<f64>,
    pub has_ans_total: usize,
    pub no_ans_exact: Option<f64>,
    pub no_ans_f1: Option<f64>,
    pub no_ans_total: usize,
    /// Dataset questions without a prediction (scored 0).
    pub missing: Vec<String>,
    /// Predicted ids that are not in the dataset (ignored).
    pub unknown: Vec<String>,
    pub per_question: Vec<QuestionScore>,
}

fn mean_pct<'a>(xs: impl Iterator<Item = &'a f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| 100.0 * sum / n as f64)
}

pub fn score(d: &QaDataset, preds: &PredictionSet, profile: &LangProfile) -> ScoreReport {
    let mut per_question = Vec::new();
    let mut missing = Vec::new();
    let mut ids = HashSet::new();
    for q in d.qas() {
        ids.insert(q.id.as_str());
        let has_answer = !q.answers.is_empty();
        let mut gold: Vec<&str> =
            q.answers.iter().map(|a| a.text.as_str()).filter(|t| !normalize_answer(t, profile).is_empty()).collect();
        if gold.is_empty() {
            gold.push("");
        }
        let (exact, f1, predicted) = match preds.get(&q.id) {
            Some(p) => (
                gold.iter().map(|g| compute_exact(g, p, profile)).fold(0.0, f64::max),
                gold.iter().map(|g| compute_f1(g, p, profile)).fold(0.0, f64::max),
                true,
            ),
            None => {
                missing.push(q.id.clone());
                (0.0, 0.0, false)
            }
        };
        per_question.push(QuestionScore { id: q.id.clone(), has_answer, exact, f1, predicted });
    }
    let unknown = preds.0.keys().filter(|k| !ids.contains(k.as_str())).cloned().collect();
    let has: Vec<&QuestionScore> = per_question.iter().filter(|s| s.has_answer).collect();
    let no: Vec<&QuestionScore> = per_question.iter().filter(|s| !s.has_answer).collect();
    ScoreReport {
        exact: mean_pct(per_question.iter().map(|s| &s.exact)).unwrap_or(0.0),
        f1: mean_pct(per_question.iter().map(|s| &s.f1)).unwrap_or(0.0),
        total: per_question.len(),
        has_ans_exact: mean_pct(has.iter().map(|s| &s.exact)),
        has_ans_f1: mean_pct(has.iter().map(|s| &s.f1)),
        has_ans_total: has.len(),
        no_ans_exact: mean_pct(no.iter().map(|s| &s.exact)),
        no_ans_f1: mean_pct(no.iter().map(|s| &s.f1)),
        no_ans_total: no.len(),
        missing,
        unknown,
        per_question,
    }
}
