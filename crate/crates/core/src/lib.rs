//! Machine translation of extractive question-answering datasets with answer
//! span transfer.
//!
//! Answer spans of a SQuAD2.0-style corpus are split into disjoint segments
//! ([`span`]), each segment is wrapped in a uniquely numbered inline element of
//! a small HTML document ([`markup`]), the document is sent through a
//! formatting-preserving translation backend ([`backend`]), and the spans are
//! rebuilt from wherever the numbered elements ended up in the translated text
//! ([`pipeline`]). [`eval`] holds the EM/token-F1 scorer and the manual error
//! review workflow.

pub mod backend;
pub mod cache;
pub mod dataset;
pub mod eval;
pub mod lang;
pub mod markup;
pub mod pipeline;
pub mod run;
pub mod span;
pub mod synth;
pub mod text;

pub use dataset::{parse_dataset, serialize_dataset, AnswerSpan, Article, Paragraph, QaDataset, QaEntry};
pub use lang::Lang;
