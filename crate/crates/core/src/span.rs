//! Interval algebra for answer spans.
//!
//! Overlapping answers cannot each get their own inline element in a flat
//! markup document, so [`decompose`] cuts the union of all spans at every span
//! boundary into disjoint segments and records which segments tile each span.
//! After translation, [`recompose`] collects wherever each segment landed and
//! rebuilds every span as an ordered list of pieces.

use serde::{Deserialize, Serialize};

use crate::text::is_punctuation;

/// Half-open `[start, end)` interval in code points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub const fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

impl From<(usize, usize)> for Span {
    fn from((start, end): (usize, usize)) -> Self {
        Self { start, end }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SegmentId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub id: SegmentId,
    pub start: usize,
    pub end: usize,
}

impl Segment {
    pub fn span(&self) -> Span {
        Span::new(self.start, self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpanError {
    #[error("span {index} ({start}..{end}) is empty or reversed")]
    Empty { index: usize, start: usize, end: usize },
    #[error("span {index} ({start}..{end}) exceeds context length {len}")]
    OutOfBounds { index: usize, start: usize, end: usize, len: usize },
}

/// Disjoint segments covering a set of spans. Segment ids are dense and
/// assigned left to right; `mapping[k]` lists the segments that tile input
/// span `k`, in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentPlan {
    segments: Vec<Segment>,
    mapping: Vec<Vec<SegmentId>>,
}

impl SegmentPlan {
    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn mapping(&self) -> &[Vec<SegmentId>] {
        &self.mapping
    }

    pub fn segment(&self, id: SegmentId) -> Option<&Segment> {
        self.segments.get(id.0 as usize)
    }

    pub fn span_count(&self) -> usize {
        self.mapping.len()
    }
}

pub fn decompose(spans: &[Span], context_len: usize) -> Result<SegmentPlan, SpanError> {
    for (index, s) in spans.iter().enumerate() {
        if s.start >= s.end {
            return Err(SpanError::Empty { index, start: s.start, end: s.end });
        }
        if s.end > context_len {
            return Err(SpanError::OutOfBounds { index, start: s.start, end: s.end, len: context_len });
        }
    }

    let mut bounds: Vec<usize> = spans.iter().flat_map(|s| [s.start, s.end]).collect();
    bounds.sort_unstable();
    bounds.dedup();

    // Coverage depth per elementary interval [bounds[i], bounds[i+1]).
    let mut delta = vec![0i64; bounds.len()];
    for s in spans {
        delta[bounds.binary_search(&s.start).unwrap()] += 1;
        delta[bounds.binary_search(&s.end).unwrap()] -= 1;
    }

    let mut segments = Vec::new();
    let mut depth = 0i64;
    for (i, w) in bounds.windows(2).enumerate() {
        depth += delta[i];
        if depth > 0 {
            segments.push(Segment { id: SegmentId(segments.len() as u32), start: w[0], end: w[1] });
        }
    }

    let mapping = spans
        .iter()
        .map(|s| {
            let first = segments.partition_point(|seg| seg.start < s.start);
            segments[first..].iter().take_while(|seg| seg.end <= s.end).map(|seg| seg.id).collect()
        })
        .collect();

    Ok(SegmentPlan { segments, mapping })
}

/// One occurrence of a tagged segment in translated text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Run {
    pub segment: SegmentId,
    pub start: usize,
    pub end: usize,
}

/// Translated plain text plus every tagged run found in it, in document
/// order. A segment may occur any number of times.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LocatedRuns {
    pub text: String,
    pub runs: Vec<Run>,
}

impl LocatedRuns {
    /// Runs that exactly reproduce a plan over untranslated text.
    pub fn identity(text: &str, plan: &SegmentPlan) -> Self {
        Self {
            text: text.to_string(),
            runs: plan.segments.iter().map(|s| Run { segment: s.id, start: s.start, end: s.end }).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpanStatus {
    Found,
    Missing,
}

/// A span rebuilt in translated text: sorted, disjoint, non-abutting pieces.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ReconstructedSpan {
    pub pieces: Vec<Span>,
}

impl ReconstructedSpan {
    pub fn missing() -> Self {
        Self { pieces: Vec::new() }
    }

    pub fn status(&self) -> SpanStatus {
        if self.pieces.is_empty() {
            SpanStatus::Missing
        } else {
            SpanStatus::Found
        }
    }

    pub fn is_found(&self) -> bool {
        !self.pieces.is_empty()
    }

    /// From the first piece's start to the last piece's end.
    pub fn hull(&self) -> Option<Span> {
        Some(Span::new(self.pieces.first()?.start, self.pieces.last()?.end))
    }
}

/// Rebuilds every span of `plan` from the runs located in translated text.
/// The result is indexed like the spans given to [`decompose`].
pub fn recompose(plan: &SegmentPlan, located: &LocatedRuns) -> Vec<ReconstructedSpan> {
    let mut by_segment: Vec<Vec<Span>> = vec![Vec::new(); plan.segments.len()];
    for r in &located.runs {
        if let Some(slot) = by_segment.get_mut(r.segment.0 as usize) {
            if r.start < r.end {
                slot.push(Span::new(r.start, r.end));
            }
        }
    }
    plan.mapping
        .iter()
        .map(|ids| {
            let mut pieces: Vec<Span> = ids.iter().flat_map(|id| by_segment[id.0 as usize].iter().copied()).collect();
            ReconstructedSpan { pieces: coalesce(&mut pieces) }
        })
        .collect()
}

/// Sorts and merges overlapping or abutting intervals.
pub fn coalesce(pieces: &mut [Span]) -> Vec<Span> {
    pieces.sort_unstable();
    let mut out: Vec<Span> = Vec::with_capacity(pieces.len());
    for p in pieces.iter().copied().filter(|p| !p.is_empty()) {
        match out.last_mut() {
            Some(last) if p.start <= last.end => last.end = last.end.max(p.end),
            _ => out.push(p),
        }
    }
    out
}

/// Retreats the end of the span past every trailing punctuation character.
/// Pieces that become empty are dropped; a span with no pieces left is
/// missing.
pub fn strip_trailing_punctuation(span: &ReconstructedSpan, text: &[char]) -> ReconstructedSpan {
    strip_trailing_punctuation_keeping(span, text, 0)
}

/// Like [`strip_trailing_punctuation`] but leaves up to `keep` punctuation
/// characters at the end, so an answer whose source already ended in
/// punctuation only loses what translation appended.
pub fn strip_trailing_punctuation_keeping(span: &ReconstructedSpan, text: &[char], keep: usize) -> ReconstructedSpan {
    let mut pieces = span.pieces.clone();
    // count trailing punctuation across pieces, newest first
    let mut trailing = 0usize;
    'outer: for p in pieces.iter().rev() {
        for i in (p.start..p.end).rev() {
            if text.get(i).is_some_and(|&c| is_punctuation(c)) {
                trailing += 1;
            } else {
                break 'outer;
            }
        }
    }
    let mut remove = trailing.saturating_sub(keep);
    while remove > 0 {
        let last = pieces.last_mut().expect("trailing count bounded by piece lengths");
        let take = remove.min(last.len());
        last.end -= take;
        remove -= take;
        if last.is_empty() {
            pieces.pop();
        }
    }
    ReconstructedSpan { pieces }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use proptest::prelude::*;

    use super::*;

    /// Labels every position with the set of spans covering it and groups
    /// maximal runs of equal non-empty label sets.
    fn oracle(spans: &[Span], len: usize) -> Vec<(usize, usize, BTreeSet<usize>)> {
        let labels: Vec<BTreeSet<usize>> = (0..len)
            .map(|i| spans.iter().enumerate().filter(|(_, s)| s.start <= i && i < s.end).map(|(k, _)| k).collect())
            .collect();
        let mut out: Vec<(usize, usize, BTreeSet<usize>)> = Vec::new();
        for (i, l) in labels.into_iter().enumerate() {
            match out.last_mut() {
                Some(last) if last.1 == i && last.2 == l => last.1 = i + 1,
                _ if l.is_empty() => {}
                _ => out.push((i, i + 1, l)),
            }
        }
        out
    }

    fn as_labelled(plan: &SegmentPlan) -> Vec<(usize, usize, BTreeSet<usize>)> {
        plan.segments
            .iter()
            .map(|seg| {
                let owners =
                    plan.mapping.iter().enumerate().filter(|(_, ids)| ids.contains(&seg.id)).map(|(k, _)| k).collect();
                (seg.start, seg.end, owners)
            })
            .collect()
    }

    fn s(start: usize, end: usize) -> Span {
        Span::new(start, end)
    }

    #[test]
    fn overlapping_answers_of_figure_passage() {
        let context = "documents obtained by WikiLeaks show that";
        let outer = "documents obtained by WikiLeaks";
        let inner = "WikiLeaks";
        let inner_start = context.find(inner).unwrap();
        assert_eq!((outer.chars().count(), inner_start), (31, 22));

        let plan = decompose(&[s(0, 31), s(22, 31)], context.chars().count()).unwrap();
        assert_eq!(
            plan.segments(),
            &[
                Segment { id: SegmentId(0), start: 0, end: 22 },
                Segment { id: SegmentId(1), start: 22, end: 31 }
            ]
        );
        assert_eq!(plan.mapping(), &[vec![SegmentId(0), SegmentId(1)], vec![SegmentId(1)]]);
        assert_eq!(as_labelled(&plan), oracle(&[s(0, 31), s(22, 31)], 41));
    }

    #[test]
    fn disjoint_spans_pass_through() {
        let plan = decompose(&[s(0, 5), s(10, 15)], 20).unwrap();
        let segs: Vec<Span> = plan.segments().iter().map(Segment::span).collect();
        assert_eq!(segs, vec![s(0, 5), s(10, 15)]);
        assert_eq!(plan.mapping(), &[vec![SegmentId(0)], vec![SegmentId(1)]]);
    }

    #[test]
    fn nested_spans() {
        let spans = [s(0, 10), s(3, 6)];
        let plan = decompose(&spans, 10).unwrap();
        let expected = oracle(&spans, 10);
        assert_eq!(
            expected,
            vec![(0, 3, BTreeSet::from([0])), (3, 6, BTreeSet::from([0, 1])), (6, 10, BTreeSet::from([0]))]
        );
        assert_eq!(as_labelled(&plan), expected);
        assert_eq!(plan.mapping()[0], vec![SegmentId(0), SegmentId(1), SegmentId(2)]);
        assert_eq!(plan.mapping()[1], vec![SegmentId(1)]);
    }

    #[test]
    fn rejects_invalid_spans() {
        assert_eq!(decompose(&[s(3, 3)], 10), Err(SpanError::Empty { index: 0, start: 3, end: 3 }));
        assert_eq!(decompose(&[s(0, 2), s(5, 4)], 10), Err(SpanError::Empty { index: 1, start: 5, end: 4 }));
        assert!(matches!(decompose(&[s(5, 11)], 10), Err(SpanError::OutOfBounds { .. })));
        assert!(decompose(&[], 0).unwrap().segments().is_empty());
    }

    #[test]
    fn duplicate_spans_share_segments() {
        let plan = decompose(&[s(2, 4), s(2, 4)], 5).unwrap();
        assert_eq!(plan.segments().len(), 1);
        assert_eq!(plan.mapping(), &[vec![SegmentId(0)], vec![SegmentId(0)]]);
    }

    #[test]
    fn identity_runs_reproduce_spans() {
        let spans = [s(0, 31), s(22, 31), s(35, 40)];
        let text = "x".repeat(40);
        let plan = decompose(&spans, 40).unwrap();
        let rebuilt = recompose(&plan, &LocatedRuns::identity(&text, &plan));
        for (r, sp) in rebuilt.iter().zip(&spans) {
            assert_eq!(r.pieces, vec![*sp]);
            assert_eq!(r.hull(), Some(*sp));
            assert_eq!(r.status(), SpanStatus::Found);
        }
    }

    #[test]
    fn absent_segment_is_missing() {
        let plan = decompose(&[s(0, 3), s(5, 8)], 10).unwrap();
        let located = LocatedRuns { text: "x".repeat(10), runs: vec![Run { segment: SegmentId(0), start: 1, end: 4 }] };
        let rebuilt = recompose(&plan, &located);
        assert_eq!(rebuilt[0].pieces, vec![s(1, 4)]);
        assert_eq!(rebuilt[1].status(), SpanStatus::Missing);
        assert_eq!(rebuilt[1].hull(), None);
    }

    #[test]
    fn relocated_segment_leaves_gap() {
        // span0 = s0 + s1, span1 = s1; s1 moved away from s0 in translation
        let plan = decompose(&[s(0, 31), s(22, 31)], 31).unwrap();
        let located = LocatedRuns {
            text: "y".repeat(45),
            runs: vec![
                Run { segment: SegmentId(0), start: 0, end: 20 },
                Run { segment: SegmentId(1), start: 30, end: 39 },
            ],
        };
        let rebuilt = recompose(&plan, &located);
        assert_eq!(rebuilt[0].pieces, vec![s(0, 20), s(30, 39)]);
        assert_eq!(rebuilt[0].hull(), Some(s(0, 39)));
        assert_eq!(rebuilt[1].pieces, vec![s(30, 39)]);
    }

    #[test]
    fn reordered_and_duplicated_runs() {
        let plan = decompose(&[s(0, 10)], 10).unwrap();
        let plan2 = decompose(&[s(0, 4), s(0, 10)], 10).unwrap();
        // s1 ahead of s0 and abutting: coalesced into one piece
        let located = LocatedRuns {
            text: "z".repeat(20),
            runs: vec![
                Run { segment: SegmentId(1), start: 2, end: 8 },
                Run { segment: SegmentId(0), start: 8, end: 12 },
            ],
        };
        assert_eq!(recompose(&plan2, &located)[1].pieces, vec![s(2, 12)]);
        // same segment twice
        let located = LocatedRuns {
            text: "z".repeat(20),
            runs: vec![
                Run { segment: SegmentId(0), start: 0, end: 3 },
                Run { segment: SegmentId(0), start: 10, end: 14 },
            ],
        };
        assert_eq!(recompose(&plan, &located)[0].pieces, vec![s(0, 3), s(10, 14)]);
    }

    fn chars(s: &str) -> Vec<char> {
        s.chars().collect()
    }

    #[test]
    fn strips_trailing_comma() {
        let text = chars("in Helsinki, the");
        let span = ReconstructedSpan { pieces: vec![s(3, 12)] };
        let stripped = strip_trailing_punctuation(&span, &text);
        assert_eq!(stripped.pieces, vec![s(3, 11)]);
        assert_eq!(strip_trailing_punctuation(&stripped, &text), stripped);
    }

    #[test]
    fn strips_repeatedly() {
        let text = chars("(Helsinki).");
        let span = ReconstructedSpan { pieces: vec![s(0, 11)] };
        assert_eq!(strip_trailing_punctuation(&span, &text).pieces, vec![s(0, 9)]);
    }

    #[test]
    fn punctuation_only_piece_is_removed() {
        let text = chars("Helsinki …).");
        let span = ReconstructedSpan { pieces: vec![s(0, 8), s(9, 12)] };
        let stripped = strip_trailing_punctuation(&span, &text);
        assert_eq!(stripped.pieces, vec![s(0, 8)]);
        let only = ReconstructedSpan { pieces: vec![s(9, 12)] };
        assert_eq!(strip_trailing_punctuation(&only, &text).status(), SpanStatus::Missing);
    }

    #[test]
    fn keeping_source_punctuation() {
        let text = chars("U.S.,");
        let span = ReconstructedSpan { pieces: vec![s(0, 5)] };
        assert_eq!(strip_trailing_punctuation_keeping(&span, &text, 1).pieces, vec![s(0, 4)]);
        assert_eq!(strip_trailing_punctuation_keeping(&span, &text, 0).pieces, vec![s(0, 3)]);
        assert_eq!(strip_trailing_punctuation_keeping(&span, &text, 5).pieces, vec![s(0, 5)]);
    }

    fn span_sets() -> impl Strategy<Value = (usize, Vec<Span>)> {
        (1usize..=50).prop_flat_map(|len| {
            let span = (0..len).prop_flat_map(move |a| (Just(a), a + 1..=len)).prop_map(|(a, b)| Span::new(a, b));
            (Just(len), prop::collection::vec(span, 0..=10))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn matches_labelling_oracle((len, spans) in span_sets()) {
            let plan = decompose(&spans, len).unwrap();
            prop_assert_eq!(as_labelled(&plan), oracle(&spans, len));
            for (k, ids) in plan.mapping().iter().enumerate() {
                // segments tile the span exactly
                let mut cursor = spans[k].start;
                for id in ids {
                    let seg = plan.segment(*id).unwrap();
                    prop_assert_eq!(seg.start, cursor);
                    cursor = seg.end;
                }
                prop_assert_eq!(cursor, spans[k].end);
            }
        }

        #[test]
        fn identity_round_trip((len, spans) in span_sets()) {
            let plan = decompose(&spans, len).unwrap();
            let rebuilt = recompose(&plan, &LocatedRuns::identity(&"a".repeat(len), &plan));
            for (r, sp) in rebuilt.iter().zip(&spans) {
                prop_assert_eq!(&r.pieces, &vec![*sp]);
            }
        }

        #[test]
        fn permutation_keeps_segments((len, spans) in span_sets(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut shuffled = spans.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = decompose(&spans, len).unwrap();
            let b = decompose(&shuffled, len).unwrap();
            prop_assert_eq!(a.segments(), b.segments());
        }

        #[test]
        fn strip_is_idempotent_and_shrinking(text in "[a-z.,)( …]{1,30}", cut in any::<prop::sample::Index>()) {
            let chars: Vec<char> = text.chars().collect();
            let start = cut.index(chars.len());
            let span = ReconstructedSpan { pieces: vec![Span::new(start, chars.len())] };
            let once = strip_trailing_punctuation(&span, &chars);
            prop_assert_eq!(strip_trailing_punctuation(&once, &chars), once.clone());
            if let Some(h) = once.hull() {
                prop_assert!(h.start == start && h.end <= chars.len());
                prop_assert!(!is_punctuation(chars[h.end - 1]));
            }
        }
    }
}
