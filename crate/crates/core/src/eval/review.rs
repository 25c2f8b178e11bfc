//! Manual error review of transferred answers.
//!
//! [`sample_review`] draws a stratified sample of answerable questions
//! (articles first, then a few passages per article, then every answerable
//! question of each passage) and lays them out as a tab-separated sheet with
//! a blank category column. Reviewers fill in one of six categories and
//! [`aggregate_review`] turns the sheet into counts and percentages.

use std::collections::HashMap;
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{QaDataset, QaEntry};

/// Passages taken from an article before moving on to the next one.
pub const DEFAULT_PASSAGES_PER_ARTICLE: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum ReviewError {
    #[error("requested {requested} questions but only {available} answerable questions are available")]
    InsufficientData { requested: usize, available: usize },
    #[error("{} row(s) have no category: {}", .0.len(), .0.join(", "))]
    Uncategorized(Vec<String>),
    #[error("row {row}: unknown category {value:?}")]
    UnknownCategory { row: usize, value: String },
    #[error("review sheet: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    Correct,
    Punctuation,
    #[serde(rename = "Over-extended")]
    OverExtended,
    #[serde(rename = "Under-extended")]
    UnderExtended,
    Wrong,
    Missing,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::Correct,
        Category::Punctuation,
        Category::OverExtended,
        Category::UnderExtended,
        Category::Wrong,
        Category::Missing,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Correct => "Correct",
            Category::Punctuation => "Punctuation",
            Category::OverExtended => "Over-extended",
            Category::UnderExtended => "Under-extended",
            Category::Wrong => "Wrong",
            Category::Missing => "Missing",
        }
    }
}

impl std::fmt::Display for Category {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        Category::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| s.to_string())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewRow {
    pub id: String,
    pub title: String,
    pub source_context: String,
    pub source_question: String,
    pub source_answer: String,
    pub translated_context: String,
    pub translated_question: String,
    /// Empty when the question was lost in translation.
    pub translated_answer: String,
    /// Empty until reviewed.
    pub category: String,
    pub note: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReviewSheet {
    pub rows: Vec<ReviewRow>,
}

impl ReviewSheet {
    pub fn write_tsv<W: Write>(&self, w: W) -> Result<(), ReviewError> {
        let mut out = csv::WriterBuilder::new().delimiter(b'\t').from_writer(w);
        if self.rows.is_empty() {
            out.write_record([
                "id",
                "title",
                "source_context",
                "source_question",
                "source_answer",
                "translated_context",
                "translated_question",
                "translated_answer",
                "category",
                "note",
            ])?;
        }
        for r in &self.rows {
            out.serialize(r)?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_tsv<R: Read>(r: R) -> Result<Self, ReviewError> {
        let mut rdr = csv::ReaderBuilder::new().delimiter(b'\t').from_reader(r);
        let rows = rdr.deserialize().collect::<Result<Vec<ReviewRow>, _>>()?;
        Ok(Self { rows })
    }
}

fn passage_order(d: &QaDataset, seed: u64, per_article: usize) -> Vec<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut articles: Vec<usize> = (0..d.articles.len()).collect();
    articles.shuffle(&mut rng);
    let mut keyed = Vec::new();
    for (rank, &ai) in articles.iter().enumerate() {
        let mut passages: Vec<usize> = (0..d.articles[ai].paragraphs.len())
            .filter(|&pi| d.articles[ai].paragraphs[pi].qas.iter().any(|q| !q.is_impossible))
            .collect();
        passages.shuffle(&mut rng);
        for (k, pi) in passages.into_iter().enumerate() {
            keyed.push(((k / per_article.max(1), rank, k), (ai, pi)));
        }
    }
    keyed.sort_by_key(|(key, _)| *key);
    keyed.into_iter().map(|(_, p)| p).collect()
}

/// Draws `n` answerable questions of `source` with their counterparts in
/// `translated` (matched by question id). The first round takes
/// `per_article` passages from every article in shuffled order; further
/// rounds only happen if the sample is not yet full.
pub fn sample_review(
    source: &QaDataset,
    translated: &QaDataset,
    n: usize,
    seed: u64,
    per_article: usize,
) -> Result<ReviewSheet, ReviewError> {
    let available = source.qas().filter(|q| !q.is_impossible).count();
    if n > available {
        return Err(ReviewError::InsufficientData { requested: n, available });
    }
    let mut by_id: HashMap<&str, (&QaEntry, &str)> = HashMap::new();
    for a in &translated.articles {
        for p in &a.paragraphs {
            for q in &p.qas {
                by_id.insert(q.id.as_str(), (q, p.context.as_str()));
            }
        }
    }
    let mut rows = Vec::with_capacity(n);
    for (ai, pi) in passage_order(source, seed, per_article) {
        if rows.len() >= n {
            break;
        }
        let article = &source.articles[ai];
        let p = &article.paragraphs[pi];
        for q in p.qas.iter().filter(|q| !q.is_impossible) {
            let mut row = ReviewRow {
                id: q.id.clone(),
                title: article.title.clone(),
                source_context: p.context.clone(),
                source_question: q.question.clone(),
                source_answer: q.answers.first().map(|a| a.text.clone()).unwrap_or_default(),
                ..Default::default()
            };
            if let Some((tq, tctx)) = by_id.get(q.id.as_str()) {
                row.translated_context = tctx.to_string();
                row.translated_question = tq.question.clone();
                row.translated_answer = tq.answers.first().map(|a| a.text.clone()).unwrap_or_default();
            }
            rows.push(row);
        }
    }
    rows.truncate(n);
    Ok(ReviewSheet { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryCount {
    pub category: Category,
    pub count: usize,
    /// Rounded to one decimal place.
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewReport {
    pub total: usize,
    pub categories: Vec<CategoryCount>,
}

impl std::fmt::Display for ReviewReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{:<16}{:>7}{:>8}", "Category", "Count", "%")?;
        for c in &self.categories {
            writeln!(f, "{:<16}{:>7}{:>8.1}", c.category.as_str(), c.count, c.percent)?;
        }
        write!(f, "{:<16}{:>7}", "Total", self.total)
    }
}

pub fn aggregate_review(sheet: &ReviewSheet) -> Result<ReviewReport, ReviewError> {
    let mut counts: HashMap<Category, usize> = HashMap::new();
    let mut uncategorized = Vec::new();
    for (i, r) in sheet.rows.iter().enumerate() {
        if r.category.trim().is_empty() {
            uncategorized.push(r.id.clone());
            continue;
        }
        let c: Category =
            r.category.parse().map_err(|value| ReviewError::UnknownCategory { row: i + 1, value })?;
        *counts.entry(c).or_default() += 1;
    }
    if !uncategorized.is_empty() {
        return Err(ReviewError::Uncategorized(uncategorized));
    }
    let total = sheet.rows.len();
    let categories = Category::ALL
        .into_iter()
        .map(|category| {
            let count = counts.get(&category).copied().unwrap_or(0);
            let percent = if total == 0 { 0.0 } else { (1000.0 * count as f64 / total as f64).round() / 10.0 };
            CategoryCount { category, count, percent }
        })
        .collect();
    Ok(ReviewReport { total, categories })
}
