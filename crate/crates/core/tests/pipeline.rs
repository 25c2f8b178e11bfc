use std::collections::BTreeSet;

use proptest::prelude::*;
use squad_mt::backend::{IdentityBackend, MockBackend, MockParams};
use squad_mt::dataset::QaDataset;
use squad_mt::pipeline::{backtranslate_dataset, translate_dataset, PipelineOptions, StripMode};
use squad_mt::span::{decompose, Span};
use squad_mt::synth::{synthesize, SynthConfig};
use squad_mt::text::is_punctuation;
use squad_mt::{serialize_dataset, Lang};

fn opts() -> PipelineOptions {
    PipelineOptions::new("en".parse::<Lang>().unwrap(), "fi".parse().unwrap())
}

/// Probability that each answerable question survives when every segment is
/// dropped independently with probability `p`: a question is lost only when
/// every segment under any of its answers is dropped.
fn survival_probabilities(d: &QaDataset, p: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for a in &d.articles {
        for para in &a.paragraphs {
            let mut spans: Vec<Span> = Vec::new();
            for q in &para.qas {
                for ans in q.answers.iter().chain(&q.plausible_answers) {
                    let s = Span::from(ans.range());
                    if !spans.contains(&s) {
                        spans.push(s);
                    }
                }
            }
            let plan = decompose(&spans, para.context.chars().count()).unwrap();
            for q in para.qas.iter().filter(|q| !q.is_impossible) {
                let union: BTreeSet<_> = q
                    .answers
                    .iter()
                    .flat_map(|ans| {
                        let k = spans.iter().position(|s| *s == Span::from(ans.range())).unwrap();
                        plan.mapping()[k].iter().copied()
                    })
                    .collect();
                out.push(1.0 - p.powi(union.len() as i32));
            }
        }
    }
    out
}

#[test]
fn mock_drop_retention_matches_analytic_expectation() {
    let d = synthesize(&SynthConfig::dev_scale());
    let p = 0.1;
    let probs = survival_probabilities(&d, p);
    let expected: f64 = probs.iter().sum();
    let var: f64 = probs.iter().map(|q| q * (1.0 - q)).sum();
    let mut measured = Vec::new();
    for seed in 0..3 {
        let mock = MockBackend::new(MockParams { seed, drop: p, ..Default::default() }).unwrap();
        let (_, r) = translate_dataset(&d, &mock, &opts()).unwrap();
        assert!(r.is_conserved());
        assert_eq!(r.answerable_input, probs.len());
        let frac = r.missing_segment_fraction();
        assert!((frac - p).abs() <= 0.01, "seed {seed}: missing segment fraction {frac}");
        measured.push(r.answerable_retained as f64);
    }
    let mean = measured.iter().sum::<f64>() / measured.len() as f64;
    // questions of one paragraph share segments, so allow a wide margin
    let tol = 6.0 * (var / measured.len() as f64).sqrt() + 1.0;
    assert!((mean - expected).abs() <= tol, "retained {mean} vs expected {expected:.1} ± {tol:.1}");
}

#[test]
fn output_does_not_depend_on_concurrency() {
    let d = synthesize(&SynthConfig { articles: 6, ..SynthConfig::small() });
    let mock = MockBackend::new(MockParams { seed: 5, drop: 0.2, split: 0.2, swap: 0.2, punct: 0.2, reverse_words: true })
        .unwrap();
    let runs: Vec<Vec<u8>> = [(1, 1), (4, 3), (16, 64)]
        .into_iter()
        .map(|(jobs, batch_size)| {
            let (out, _) = translate_dataset(&d, &mock, &PipelineOptions { jobs, batch_size, ..opts() }).unwrap();
            serialize_dataset(&out, true)
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);
}

#[test]
fn identity_backtranslation_is_lossless() {
    let d = synthesize(&SynthConfig::small());
    let bt = backtranslate_dataset(&d, &IdentityBackend, &opts()).unwrap();
    assert_eq!(bt.output, d);
    assert_eq!(bt.intermediate, d);
    assert_eq!(bt.forward.retained_fraction, 1.0);
    assert_eq!(bt.backward.retained_fraction, 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn conservation_and_validity_under_any_perturbation(
        seed in any::<u64>(),
        drop in 0.0..1.0f64,
        split in 0.0..1.0f64,
        swap in 0.0..1.0f64,
        punct in 0.0..1.0f64,
        reverse_words in any::<bool>(),
        strip_all in any::<bool>(),
    ) {
        let d = synthesize(&SynthConfig { seed, articles: 2, paragraphs_per_article: 3, ..SynthConfig::small() });
        let mock = MockBackend::new(MockParams { seed, drop, split, swap, punct, reverse_words }).unwrap();
        let strip = if strip_all { StripMode::All } else { StripMode::Added };
        let (out, r) = translate_dataset(&d, &mock, &PipelineOptions { strip, ..opts() }).unwrap();
        prop_assert!(r.is_conserved());
        prop_assert!(out.validate().is_ok());
        let kept: BTreeSet<&str> = out.qas().map(|q| q.id.as_str()).collect();
        let lost: BTreeSet<&str> = r.lost.iter().map(|l| l.id.as_str()).collect();
        prop_assert!(kept.is_disjoint(&lost));
        let all: BTreeSet<&str> = d.qas().map(|q| q.id.as_str()).collect();
        prop_assert_eq!(kept.union(&lost).copied().collect::<BTreeSet<_>>(), all);
        for q in out.qas() {
            for a in q.answers.iter().chain(&q.plausible_answers) {
                let last = a.text.chars().last().unwrap();
                // synthetic answers carry no punctuation, so nothing may remain in either mode
                prop_assert!(!is_punctuation(last), "{:?}", a.text);
            }
        }
    }
}
