//! Scoring predictions against a dataset and the manual error review
//! workflow for transferred answers.

mod metric;
mod review;

pub use metric::{compute_exact, compute_f1, normalize_answer, score, LangProfile, PredictionSet, QuestionScore, ScoreError, ScoreReport};
pub use review::{
    aggregate_review, sample_review, Category, CategoryCount, ReviewError, ReviewReport, ReviewRow, ReviewSheet,
    DEFAULT_PASSAGES_PER_ARTICLE,
};
