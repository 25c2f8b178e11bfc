//! Deterministic SQuAD2.0-shaped corpora for tests and benchmarks.
//!
//! Contexts mix plain words, non-Latin scripts, markup metacharacters and
//! punctuation. Answers are word-aligned and never contain punctuation, so
//! they survive any whitespace-token reordering unchanged. Each answerable
//! question gets one to several reference answers that may repeat, extend or
//! shrink the first one, so overlapping and nested spans are common;
//! unanswerable questions carry plausible answers.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{AnswerSpan, Article, Paragraph, QaDataset, QaEntry};
use crate::text::is_punctuation;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub articles: usize,
    pub paragraphs_per_article: usize,
    pub questions_per_paragraph: usize,
    /// Sentences per paragraph.
    pub sentences: usize,
    pub unanswerable_fraction: f64,
    pub max_answers: usize,
}

impl SynthConfig {
    /// Roughly the size of the public SQuAD2.0 development set: 35 articles,
    /// 1190 paragraphs, 11900 questions.
    pub fn dev_scale() -> Self {
        Self {
            seed: 2021,
            articles: 35,
            paragraphs_per_article: 34,
            questions_per_paragraph: 10,
            sentences: 6,
            unanswerable_fraction: 0.5,
            max_answers: 4,
        }
    }

    pub fn small() -> Self {
        Self { articles: 3, paragraphs_per_article: 5, questions_per_paragraph: 6, sentences: 4, ..Self::dev_scale() }
    }
}

const WORDS: &[&str] = &[
    "documents", "obtained", "by", "WikiLeaks", "show", "that", "the", "embassy", "in", "Helsinki", "knew",
    "river", "university", "students", "founded", "century", "government", "treaty", "signed", "between",
    "northern", "kingdom", "population", "largest", "city", "of", "and", "was", "built", "during", "war",
    "äiti", "Jyväskylä", "naïve", "Zürich", "Москва", "Αθήνα", "東京", "서울", "<x>", "a<b", "x>y", "$5", "a+b",
    "1917", "42", "km²", "élan", "Øresund", "café", "ﬁnal", "𝔘nicode",
];

/// Words that carry punctuation; they appear in contexts but never inside
/// an answer.
const PUNCT_WORDS: &[&str] = &["R&D", "\"quoted\"", "e.g.", "U.S.", "(see", "below)", "it's", "—"];

const QUESTION_WORDS: &[&str] = &["What", "Who", "When", "Where", "Which", "How many", "Why"];

struct Word {
    start: usize,
    /// End excluding attached punctuation.
    end: usize,
    clean: bool,
}

fn sentence(rng: &mut ChaCha8Rng, out: &mut String, words: &mut Vec<Word>, pos: &mut usize) {
    let n = rng.gen_range(6..20);
    for i in 0..n {
        if !out.is_empty() {
            out.push(' ');
            *pos += 1;
        }
        let (w, clean) = if rng.gen_bool(0.08) {
            (*PUNCT_WORDS.choose(rng).unwrap(), false)
        } else {
            (*WORDS.choose(rng).unwrap(), true)
        };
        let mut w = w.to_string();
        if i == 0 {
            let mut cs = w.chars();
            if let Some(f) = cs.next() {
                w = f.to_uppercase().chain(cs).collect();
            }
        }
        let len = w.chars().count();
        out.push_str(&w);
        let start = *pos;
        *pos += len;
        let mut attached = false;
        if i + 1 == n {
            out.push('.');
            attached = true;
        } else if rng.gen_bool(0.07) {
            out.push(',');
            attached = true;
        }
        words.push(Word { start, end: start + len, clean: clean && !attached });
        if attached {
            *pos += 1;
        }
    }
}

/// Picks a run of one to four consecutive clean words.
fn answer_range(rng: &mut ChaCha8Rng, words: &[Word]) -> Option<(usize, usize)> {
    for _ in 0..20 {
        let i = rng.gen_range(0..words.len());
        if !words[i].clean {
            continue;
        }
        let len = rng.gen_range(1..=4);
        let mut j = i;
        while j + 1 < words.len() && j + 1 < i + len && words[j + 1].clean {
            j += 1;
        }
        return Some((i, j));
    }
    None
}

fn span(context: &[char], words: &[Word], (i, j): (usize, usize)) -> AnswerSpan {
    let (s, e) = (words[i].start, words[j].end);
    AnswerSpan::new(context[s..e].iter().collect::<String>(), s)
}

fn question(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(3..9);
    let body: Vec<&str> = (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect();
    format!("{} {}?", QUESTION_WORDS.choose(rng).unwrap(), body.join(" "))
}

pub fn synthesize(cfg: &SynthConfig) -> QaDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut counter = 0u64;
    let mut articles = Vec::with_capacity(cfg.articles);
    for a in 0..cfg.articles {
        let mut paragraphs = Vec::with_capacity(cfg.paragraphs_per_article);
        for _ in 0..cfg.paragraphs_per_article {
            let mut context = String::new();
            let mut words = Vec::new();
            let mut pos = 0;
            for _ in 0..cfg.sentences.max(1) {
                sentence(&mut rng, &mut context, &mut words, &mut pos);
            }
            let chars: Vec<char> = context.chars().collect();
            let mut qas = Vec::with_capacity(cfg.questions_per_paragraph);
            for _ in 0..cfg.questions_per_paragraph {
                let Some(first) = answer_range(&mut rng, &words) else { continue };
                counter += 1;
                let id = format!("{counter:08x}{:016x}", rng.gen::<u64>());
                let impossible = rng.gen_bool(cfg.unanswerable_fraction);
                let mut answers = vec![span(&chars, &words, first)];
                let extra = rng.gen_range(0..cfg.max_answers.max(1));
                for _ in 0..extra {
                    let (i, j) = first;
                    let variant = match rng.gen_range(0..4) {
                        0 | 1 => first,
                        2 if j + 1 < words.len() && words[j + 1].clean => (i, j + 1),
                        3 if j > i => (i + 1, j),
                        _ => answer_range(&mut rng, &words).unwrap_or(first),
                    };
                    answers.push(span(&chars, &words, variant));
                }
                debug_assert!(answers.iter().all(|a| !a.text.chars().any(is_punctuation)));
                let q = if impossible {
                    answers.truncate(1);
                    QaEntry { question: question(&mut rng), id, answers: Vec::new(), is_impossible: true, plausible_answers: answers }
                } else {
                    QaEntry { question: question(&mut rng), id, answers, is_impossible: false, plausible_answers: Vec::new() }
                };
                qas.push(q);
            }
            paragraphs.push(Paragraph { qas, context });
        }
        articles.push(Article { title: format!("Synthetic_article_{a:03}"), paragraphs });
    }
    QaDataset { version: "v2.0".into(), articles }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::dataset_stats;

    #[test]
    fn valid_and_deterministic() {
        let d = synthesize(&SynthConfig::small());
        d.validate().unwrap();
        assert_eq!(d, synthesize(&SynthConfig::small()));
        assert_ne!(d, synthesize(&SynthConfig { seed: 1, ..SynthConfig::small() }));
    }

    #[test]
    fn answers_have_no_punctuation() {
        let d = synthesize(&SynthConfig::small());
        for q in d.qas() {
            for a in q.answers.iter().chain(&q.plausible_answers) {
                assert!(!a.text.is_empty());
                assert!(!a.text.chars().any(is_punctuation), "{:?}", a.text);
                assert_eq!(a.text.trim(), a.text);
            }
        }
    }

    #[test]
    fn dev_scale_shape() {
        let s = dataset_stats(&synthesize(&SynthConfig::dev_scale()));
        assert_eq!(s.articles, 35);
        assert_eq!(s.paragraphs, 1190);
        assert!(s.questions > 11_000, "{s:?}");
        let frac = s.unanswerable as f64 / s.questions as f64;
        assert!((0.45..0.55).contains(&frac), "{frac}");
        assert!(s.answers > s.answerable);
    }
}
