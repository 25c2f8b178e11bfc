//! End-to-end dataset translation with answer span transfer.
//!
//! Per article: every distinct answer span of every paragraph (answers and
//! plausible answers alike) is decomposed into segments, the article becomes
//! one markup document with a block per paragraph, and the document goes
//! through the backend. Questions are translated separately in fixed-size
//! batches through the plain-text interface. The translated document is
//! decoded, spans are recomposed and stripped of trailing punctuation, and
//! the output dataset is assembled in input order.
//!
//! Every input question ends up either in the output or in the report's loss
//! ledger.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::backend::{check_languages, BackendError, Translator};
use crate::dataset::{AnswerSpan, Article, DatasetError, Paragraph, QaDataset, QaEntry};
use crate::lang::Lang;
use crate::markup::{decode_blocks, encode_blocks, DocMeta, MarkupDoc};
use crate::span::{
    decompose, recompose, strip_trailing_punctuation, strip_trailing_punctuation_keeping, LocatedRuns,
    ReconstructedSpan, SegmentPlan, Span, SpanError,
};
use crate::text::{char_len, trailing_punctuation};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid input dataset: {0}")]
    Input(#[from] DatasetError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("invalid span in question {id}: {source}")]
    Span { id: String, source: SpanError },
    #[error("assembled dataset failed validation: {0}")]
    Output(DatasetError),
}

/// How much trailing punctuation is removed from transferred answers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StripMode {
    /// Remove all trailing punctuation.
    All,
    /// Remove trailing punctuation beyond what the source answer ended with.
    #[default]
    Added,
}

impl std::str::FromStr for StripMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all" => Ok(Self::All),
            "added" => Ok(Self::Added),
            other => Err(format!("unknown strip mode {other:?} (expected all or added)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub source_lang: Lang,
    pub target_lang: Lang,
    /// Concurrent backend requests.
    pub jobs: usize,
    /// Questions per plain-text request.
    pub batch_size: usize,
    pub strip: StripMode,
}

impl PipelineOptions {
    pub fn new(source_lang: Lang, target_lang: Lang) -> Self {
        Self { source_lang, target_lang, jobs: 4, batch_size: 64, strip: StripMode::default() }
    }

    pub fn reversed(&self) -> Self {
        Self { source_lang: self.target_lang.clone(), target_lang: self.source_lang.clone(), ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossCause {
    MissingSpan,
    EmptyAfterStripping,
    DecodeFailure,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LossCounts {
    pub missing_span: usize,
    pub empty_after_stripping: usize,
    pub decode_failure: usize,
}

impl LossCounts {
    pub fn total(&self) -> usize {
        self.missing_span + self.empty_after_stripping + self.decode_failure
    }

    fn add(&mut self, cause: LossCause) {
        match cause {
            LossCause::MissingSpan => self.missing_span += 1,
            LossCause::EmptyAfterStripping => self.empty_after_stripping += 1,
            LossCause::DecodeFailure => self.decode_failure += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LostQuestion {
    pub id: String,
    pub article: usize,
    pub cause: LossCause,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeFailure {
    pub article: usize,
    pub paragraph: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArticleReport {
    pub title: String,
    pub input: usize,
    pub retained: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub source_lang: Lang,
    pub target_lang: Lang,
    /// All questions, answerable or not.
    pub input_questions: usize,
    pub retained_questions: usize,
    pub retained_fraction: f64,
    pub answerable_input: usize,
    pub answerable_retained: usize,
    pub answerable_retained_fraction: f64,
    pub losses: LossCounts,
    /// Reference answers of answerable questions, before and after.
    pub answers_input: usize,
    pub answers_retained: usize,
    pub discontinuous_answers: usize,
    pub segments_total: usize,
    pub segments_missing: usize,
    pub decode_failures: Vec<DecodeFailure>,
    pub lost: Vec<LostQuestion>,
    pub articles: Vec<ArticleReport>,
}

impl TransferReport {
    fn new(opts: &PipelineOptions) -> Self {
        Self {
            source_lang: opts.source_lang.clone(),
            target_lang: opts.target_lang.clone(),
            input_questions: 0,
            retained_questions: 0,
            retained_fraction: 1.0,
            answerable_input: 0,
            answerable_retained: 0,
            answerable_retained_fraction: 1.0,
            losses: LossCounts::default(),
            answers_input: 0,
            answers_retained: 0,
            discontinuous_answers: 0,
            segments_total: 0,
            segments_missing: 0,
            decode_failures: Vec::new(),
            lost: Vec::new(),
            articles: Vec::new(),
        }
    }

    /// `retained + losses == input`, and the ledger agrees with the counts.
    pub fn is_conserved(&self) -> bool {
        self.retained_questions + self.losses.total() == self.input_questions && self.lost.len() == self.losses.total()
    }

    pub fn missing_segment_fraction(&self) -> f64 {
        ratio(self.segments_missing, self.segments_total, 0.0)
    }

    fn finish(&mut self) {
        self.retained_fraction = ratio(self.retained_questions, self.input_questions, 1.0);
        self.answerable_retained_fraction = ratio(self.answerable_retained, self.answerable_input, 1.0);
    }
}

fn ratio(n: usize, d: usize, empty: f64) -> f64 {
    if d == 0 {
        empty
    } else {
        n as f64 / d as f64
    }
}

/// Distinct spans of one paragraph and their segment plan.
struct ParagraphPlan {
    spans: Vec<Span>,
    index: HashMap<Span, usize>,
    /// Trailing punctuation count of each source span's text.
    source_trailing: Vec<usize>,
    plan: SegmentPlan,
}

fn plan_paragraph(p: &Paragraph) -> Result<ParagraphPlan, PipelineError> {
    let mut spans = Vec::new();
    let mut index = HashMap::new();
    let mut source_trailing = Vec::new();
    for q in &p.qas {
        for a in q.answers.iter().chain(&q.plausible_answers) {
            let span = Span::from(a.range());
            index.entry(span).or_insert_with(|| {
                spans.push(span);
                source_trailing.push(trailing_punctuation(&a.text));
                spans.len() - 1
            });
        }
    }
    let plan = decompose(&spans, char_len(&p.context)).map_err(|source| PipelineError::Span {
        id: p.qas.first().map(|q| q.id.clone()).unwrap_or_default(),
        source,
    })?;
    Ok(ParagraphPlan { spans, index, source_trailing, plan })
}

/// Runs `f` over `items` on up to `jobs` threads and returns the results in
/// input order. After the first failure no new items are started; the
/// earliest failing item's error is returned.
pub fn run_ordered<T, R, E, F>(items: &[T], jobs: usize, f: F) -> Result<Vec<R>, E>
where
    T: Sync,
    R: Send,
    E: Send,
    F: Fn(&T) -> Result<R, E> + Sync,
{
    let slots: Vec<Mutex<Option<Result<R, E>>>> = items.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let failed = AtomicBool::new(false);
    let workers = jobs.max(1).min(items.len());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                if failed.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                if r.is_err() {
                    failed.store(true, Ordering::SeqCst);
                }
                *slots[i].lock().unwrap() = Some(r);
            });
        }
    });
    let mut out = Vec::with_capacity(items.len());
    let mut first_err = None;
    for slot in slots {
        match slot.into_inner().unwrap() {
            Some(Ok(r)) if first_err.is_none() => out.push(r),
            Some(Err(e)) if first_err.is_none() => first_err = Some(e),
            _ => {}
        }
    }
    match first_err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// Number of characters a run would send to the backend.
pub fn estimate_characters(d: &QaDataset) -> usize {
    d.articles
        .iter()
        .flat_map(|a| &a.paragraphs)
        .map(|p| char_len(&p.context) + p.qas.iter().map(|q| char_len(&q.question)).sum::<usize>())
        .sum()
}

enum SpanOutcome {
    Found(AnswerSpan),
    Missing,
    EmptyAfterStripping,
}

fn transfer_span(rebuilt: &ReconstructedSpan, chars: &[char], keep: usize, strip: StripMode) -> SpanOutcome {
    if !rebuilt.is_found() {
        return SpanOutcome::Missing;
    }
    let stripped = match strip {
        StripMode::All => strip_trailing_punctuation(rebuilt, chars),
        StripMode::Added => strip_trailing_punctuation_keeping(rebuilt, chars, keep),
    };
    let Some(hull) = stripped.hull() else {
        return SpanOutcome::EmptyAfterStripping;
    };
    let text: String = chars[hull.start..hull.end].iter().collect();
    let pieces = (stripped.pieces.len() >= 2).then(|| stripped.pieces.iter().map(|p| (p.start, p.end)).collect());
    SpanOutcome::Found(AnswerSpan { text, answer_start: hull.start, pieces })
}

pub fn translate_dataset(
    d: &QaDataset,
    backend: &dyn Translator,
    opts: &PipelineOptions,
) -> Result<(QaDataset, TransferReport), PipelineError> {
    d.validate()?;
    check_languages(backend, &opts.source_lang, &opts.target_lang)?;

    let plans: Vec<Vec<ParagraphPlan>> = d
        .articles
        .iter()
        .map(|a| a.paragraphs.iter().map(plan_paragraph).collect::<Result<_, _>>())
        .collect::<Result<_, _>>()?;

    let docs: Vec<Option<MarkupDoc>> = d
        .articles
        .iter()
        .zip(&plans)
        .enumerate()
        .map(|(ai, (a, ps))| {
            (!a.paragraphs.is_empty()).then(|| {
                let meta = DocMeta {
                    key: format!("article-{ai}"),
                    source_lang: opts.source_lang.clone(),
                    target_lang: opts.target_lang.clone(),
                };
                encode_blocks(a.paragraphs.iter().zip(ps).map(|(p, pp)| (p.context.as_str(), &pp.plan)), meta)
            })
        })
        .collect();

    let done = AtomicUsize::new(0);
    let translated: Vec<Option<MarkupDoc>> = run_ordered(&docs, opts.jobs, |doc| match doc {
        Some(doc) => {
            let out = backend.translate_document(doc)?;
            let n = done.fetch_add(1, Ordering::Relaxed) + 1;
            log::info!("translated document {n}/{}", docs.len());
            Ok::<_, BackendError>(Some(out))
        }
        None => Ok(None),
    })?;

    let questions: Vec<String> = d.qas().map(|q| q.question.clone()).collect();
    let batches: Vec<&[String]> = questions.chunks(opts.batch_size.max(1)).collect();
    let translated_questions: Vec<String> = run_ordered(&batches, opts.jobs, |batch| {
        let out = backend.translate_texts(batch, &opts.source_lang, &opts.target_lang)?;
        if out.len() != batch.len() {
            return Err(BackendError::Protocol(format!("sent {} questions, received {}", batch.len(), out.len())));
        }
        Ok(out)
    })?
    .concat();

    let mut report = TransferReport::new(opts);
    let mut question_cursor = 0;
    let mut articles = Vec::with_capacity(d.articles.len());

    for (ai, ((article, plans), tdoc)) in d.articles.iter().zip(&plans).zip(&translated).enumerate() {
        let blocks: Vec<Result<LocatedRuns, String>> = match tdoc {
            None => Vec::new(),
            Some(doc) => match decode_blocks(&doc.content, article.paragraphs.len()) {
                Ok(bs) => bs.into_iter().map(|b| b.map_err(|e| e.to_string())).collect(),
                Err(e) => vec![Err(e.to_string()); article.paragraphs.len()],
            },
        };
        let mut art_report = ArticleReport { title: article.title.clone(), input: 0, retained: 0 };
        let mut paragraphs = Vec::with_capacity(article.paragraphs.len());

        for (pi, ((p, pp), located)) in article.paragraphs.iter().zip(plans).zip(blocks).enumerate() {
            let qn = p.qas.len();
            let tq = &translated_questions[question_cursor..question_cursor + qn];
            question_cursor += qn;
            art_report.input += qn;
            report.input_questions += qn;
            report.segments_total += pp.plan.segments().len();
            for q in &p.qas {
                if !q.is_impossible {
                    report.answerable_input += 1;
                    report.answers_input += q.answers.len();
                }
            }

            let located = located.and_then(|l| {
                if l.text.is_empty() {
                    Err("translated paragraph is empty".to_string())
                } else {
                    Ok(l)
                }
            });
            let located = match located {
                Ok(l) => l,
                Err(error) => {
                    report.decode_failures.push(DecodeFailure { article: ai, paragraph: pi, error });
                    report.segments_missing += pp.plan.segments().len();
                    for q in &p.qas {
                        report.losses.add(LossCause::DecodeFailure);
                        report.lost.push(LostQuestion { id: q.id.clone(), article: ai, cause: LossCause::DecodeFailure });
                    }
                    continue;
                }
            };

            let mut present = vec![false; pp.plan.segments().len()];
            for r in &located.runs {
                if let Some(slot) = present.get_mut(r.segment.0 as usize) {
                    *slot = true;
                }
            }
            report.segments_missing += present.iter().filter(|p| !**p).count();

            let chars: Vec<char> = located.text.chars().collect();
            let outcomes: Vec<SpanOutcome> = recompose(&pp.plan, &located)
                .iter()
                .enumerate()
                .map(|(k, r)| transfer_span(r, &chars, pp.source_trailing[k], opts.strip))
                .collect();
            debug_assert_eq!(outcomes.len(), pp.spans.len());

            let transfer = |answers: &[AnswerSpan]| -> (Vec<AnswerSpan>, bool) {
                let mut kept = Vec::new();
                let mut emptied = false;
                for a in answers {
                    match &outcomes[pp.index[&Span::from(a.range())]] {
                        SpanOutcome::Found(t) => kept.push(t.clone()),
                        SpanOutcome::EmptyAfterStripping => emptied = true,
                        SpanOutcome::Missing => {}
                    }
                }
                (kept, emptied)
            };

            let mut qas = Vec::with_capacity(qn);
            for (q, question) in p.qas.iter().zip(tq) {
                let (answers, emptied) = transfer(&q.answers);
                let (plausible_answers, _) = transfer(&q.plausible_answers);
                if !q.is_impossible && answers.is_empty() {
                    let cause = if emptied { LossCause::EmptyAfterStripping } else { LossCause::MissingSpan };
                    report.losses.add(cause);
                    report.lost.push(LostQuestion { id: q.id.clone(), article: ai, cause });
                    continue;
                }
                if !q.is_impossible {
                    report.answerable_retained += 1;
                    report.answers_retained += answers.len();
                    report.discontinuous_answers += answers.iter().filter(|a| a.piece_count() >= 2).count();
                }
                qas.push(QaEntry {
                    question: question.clone(),
                    id: q.id.clone(),
                    answers,
                    is_impossible: q.is_impossible,
                    plausible_answers,
                });
            }
            art_report.retained += qas.len();
            report.retained_questions += qas.len();
            paragraphs.push(Paragraph { qas, context: located.text });
        }
        report.articles.push(art_report);
        articles.push(Article { title: article.title.clone(), paragraphs });
    }

    report.finish();
    let out = QaDataset { version: d.version.clone(), articles };
    out.validate().map_err(PipelineError::Output)?;
    debug_assert!(report.is_conserved());
    Ok((out, report))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Backtranslation {
    pub intermediate: QaDataset,
    pub output: QaDataset,
    pub forward: TransferReport,
    pub backward: TransferReport,
}

/// Translates `source → target` and then the result back `target → source`,
/// transferring spans on both legs.
pub fn backtranslate_dataset(
    d: &QaDataset,
    backend: &dyn Translator,
    opts: &PipelineOptions,
) -> Result<Backtranslation, PipelineError> {
    let (intermediate, forward) = translate_dataset(d, backend, opts)?;
    let mut leg_input = intermediate.clone();
    leg_input.strip_pieces();
    let (output, backward) = translate_dataset(&leg_input, backend, &opts.reversed())?;
    Ok(Backtranslation { intermediate, output, forward, backward })
}
