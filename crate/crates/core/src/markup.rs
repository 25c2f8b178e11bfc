//! The HTML-subset document format carried through the translation backend.
//!
//! ```text
//! document := "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"></head><body>\n"
//!             (block "\n")* "</body></html>\n"
//! block    := "<p>" inline* "</p>"
//! inline   := chardata | "<x id=\"" digits "\">" chardata "</x>"
//! chardata := text with & < > " written as &amp; &lt; &gt; &quot;
//! ```
//!
//! One block per paragraph. Each segment of the paragraph's [`SegmentPlan`]
//! becomes an `x` element whose `id` is the segment id. Text outside the
//! blocks is insignificant; inside a block every character is kept verbatim.
//!
//! Decoding is tolerant of what translation services do to documents:
//! attributes other than `id` are ignored, unknown elements are dropped while
//! their text is kept, `x` elements without a numeric `id` are treated as
//! unknown, a missing `</p>` is implied by the next block or the end of the
//! body, and numeric character references plus `&apos;`/`&nbsp;` are resolved.
//! Structural damage to segments (unclosed, nested, or stray `</x>`) fails
//! only the block it occurs in.

use serde::{Deserialize, Serialize};

use crate::lang::Lang;
use crate::span::{LocatedRuns, Run, SegmentId, SegmentPlan};
use crate::text::CharMap;

pub const SEGMENT_TAG: &str = "x";
pub const SEGMENT_ATTR: &str = "id";

const HEADER: &str = "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"></head><body>\n";
const FOOTER: &str = "</body></html>\n";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocMeta {
    /// Identifies the source unit, e.g. the article index.
    pub key: String,
    pub source_lang: Lang,
    pub target_lang: Lang,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkupDoc {
    pub content: String,
    pub meta: DocMeta,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
pub enum DecodeError {
    #[error("segment {0} is never closed")]
    UnclosedSegment(u32),
    #[error("segment {inner} opened inside segment {outer}")]
    NestedSegment { outer: u32, inner: u32 },
    #[error("closing </x> without an open segment")]
    StrayClose,
    #[error("expected {expected} blocks, found {found}")]
    BlockCount { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Inline {
    Text(String),
    Segment { id: SegmentId, text: String },
}

impl Inline {
    pub fn text(&self) -> &str {
        match self {
            Inline::Text(t) | Inline::Segment { text: t, .. } => t,
        }
    }

    pub fn text_mut(&mut self) -> &mut String {
        match self {
            Inline::Text(t) | Inline::Segment { text: t, .. } => t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Block {
    pub inlines: Vec<Inline>,
}

impl Block {
    /// Splits `context` at the plan's segment boundaries.
    pub fn from_plan(context: &str, plan: &SegmentPlan) -> Self {
        let map = CharMap::new(context);
        let mut inlines = Vec::with_capacity(plan.segments().len() * 2 + 1);
        let mut cursor = 0;
        for seg in plan.segments() {
            if seg.start > cursor {
                inlines.push(Inline::Text(map.slice(context, cursor, seg.start).unwrap().to_string()));
            }
            let text = map.slice(context, seg.start, seg.end).expect("plan within context").to_string();
            inlines.push(Inline::Segment { id: seg.id, text });
            cursor = seg.end;
        }
        if cursor < map.len() {
            inlines.push(Inline::Text(map.slice(context, cursor, map.len()).unwrap().to_string()));
        }
        Self { inlines }
    }

    pub fn located_runs(&self) -> LocatedRuns {
        let mut text = String::new();
        let mut runs = Vec::new();
        let mut pos = 0;
        for inline in &self.inlines {
            let t = inline.text();
            let n = t.chars().count();
            if let Inline::Segment { id, .. } = inline {
                if n > 0 {
                    runs.push(Run { segment: *id, start: pos, end: pos + n });
                }
            }
            text.push_str(t);
            pos += n;
        }
        LocatedRuns { text, runs }
    }
}

pub fn encode(context: &str, plan: &SegmentPlan, meta: DocMeta) -> MarkupDoc {
    MarkupDoc { content: render(&[Block::from_plan(context, plan)]), meta }
}

/// One document holding several paragraphs, one block each.
pub fn encode_blocks<'a>(paragraphs: impl IntoIterator<Item = (&'a str, &'a SegmentPlan)>, meta: DocMeta) -> MarkupDoc {
    let blocks: Vec<Block> = paragraphs.into_iter().map(|(c, p)| Block::from_plan(c, p)).collect();
    MarkupDoc { content: render(&blocks), meta }
}

/// Decodes a single-paragraph document.
pub fn decode(doc: &MarkupDoc) -> Result<LocatedRuns, DecodeError> {
    let mut blocks = decode_blocks(&doc.content, 1)?;
    blocks.pop().expect("one block")
}

/// Decodes a document expected to hold `expected` blocks. A block count
/// mismatch fails the whole document; segment damage fails only its block.
pub fn decode_blocks(content: &str, expected: usize) -> Result<Vec<Result<LocatedRuns, DecodeError>>, DecodeError> {
    let blocks = parse_document(content);
    if blocks.len() != expected {
        return Err(DecodeError::BlockCount { expected, found: blocks.len() });
    }
    Ok(blocks.into_iter().map(|b| b.map(|b| b.located_runs())).collect())
}

pub fn render(blocks: &[Block]) -> String {
    let body: usize = blocks.iter().flat_map(|b| &b.inlines).map(|i| i.text().len() + 16).sum();
    let mut out = String::with_capacity(HEADER.len() + FOOTER.len() + body + blocks.len() * 8);
    out.push_str(HEADER);
    for b in blocks {
        out.push_str("<p>");
        for inline in &b.inlines {
            match inline {
                Inline::Text(t) => escape_into(t, &mut out),
                Inline::Segment { id, text } => {
                    out.push_str("<x id=\"");
                    out.push_str(&id.0.to_string());
                    out.push_str("\">");
                    escape_into(text, &mut out);
                    out.push_str("</x>");
                }
            }
        }
        out.push_str("</p>\n");
    }
    out.push_str(FOOTER);
    out
}

fn escape_into(text: &str, out: &mut String) {
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            c => out.push(c),
        }
    }
}

/// Resolves character references; anything unrecognized stays literal.
pub fn unescape(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut rest = raw;
    while let Some(i) = rest.find('&') {
        out.push_str(&rest[..i]);
        rest = &rest[i..];
        match parse_entity(rest) {
            Some((c, used)) => {
                out.push(c);
                rest = &rest[used..];
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

fn parse_entity(s: &str) -> Option<(char, usize)> {
    let semi = s.as_bytes().iter().take(12).position(|&b| b == b';')?;
    let name = &s[1..semi];
    let c = match name {
        "amp" => '&',
        "lt" => '<',
        "gt" => '>',
        "quot" => '"',
        "apos" => '\'',
        "nbsp" => '\u{a0}',
        _ => {
            let num = name.strip_prefix('#')?;
            let code = match num.strip_prefix(['x', 'X']) {
                Some(hex) => u32::from_str_radix(hex, 16).ok()?,
                None => num.parse().ok()?,
            };
            char::from_u32(code)?
        }
    };
    Some((c, semi + 1))
}

enum Tag {
    Start { name: String, attrs: Vec<(String, String)>, self_closing: bool },
    End { name: String },
    Skip,
}

/// Parses the tag starting at `s[0] == '<'`, returning it and the bytes
/// consumed, or `None` when `<` is literal text.
fn parse_tag(s: &str) -> Option<(Tag, usize)> {
    let b = s.as_bytes();
    if let Some(rest) = s.strip_prefix("<!--") {
        let end = rest.find("-->").map_or(s.len(), |i| i + 7);
        return Some((Tag::Skip, end));
    }
    match b.get(1)? {
        b'!' | b'?' => {
            let end = s.find('>')? + 1;
            Some((Tag::Skip, end))
        }
        b'/' => {
            let name_len = s[2..].bytes().take_while(|c| c.is_ascii_alphanumeric() || *c == b'-' || *c == b':').count();
            if name_len == 0 {
                return None;
            }
            let end = s.find('>')? + 1;
            Some((Tag::End { name: s[2..2 + name_len].to_ascii_lowercase() }, end))
        }
        c if c.is_ascii_alphabetic() => {
            let name_len = s[1..].bytes().take_while(|c| c.is_ascii_alphanumeric() || *c == b'-' || *c == b':').count();
            let name = s[1..1 + name_len].to_ascii_lowercase();
            let mut i = 1 + name_len;
            let mut attrs = Vec::new();
            loop {
                while b.get(i)?.is_ascii_whitespace() {
                    i += 1;
                }
                match b[i] {
                    b'>' => return Some((Tag::Start { name, attrs, self_closing: false }, i + 1)),
                    b'/' if b.get(i + 1) == Some(&b'>') => {
                        return Some((Tag::Start { name, attrs, self_closing: true }, i + 2))
                    }
                    b'/' => {
                        i += 1;
                        continue;
                    }
                    _ => {}
                }
                let an_len =
                    s[i..].bytes().take_while(|c| !c.is_ascii_whitespace() && !matches!(c, b'=' | b'>' | b'/')).count();
                let an = s[i..i + an_len].to_ascii_lowercase();
                i += an_len;
                while b.get(i)?.is_ascii_whitespace() {
                    i += 1;
                }
                let mut value = String::new();
                if b[i] == b'=' {
                    i += 1;
                    while b.get(i)?.is_ascii_whitespace() {
                        i += 1;
                    }
                    match b[i] {
                        q @ (b'"' | b'\'') => {
                            let close = s[i + 1..].find(q as char)?;
                            value = unescape(&s[i + 1..i + 1 + close]);
                            i += close + 2;
                        }
                        _ => {
                            let v_len = s[i..].bytes().take_while(|c| !c.is_ascii_whitespace() && *c != b'>').count();
                            value = unescape(&s[i..i + v_len]);
                            i += v_len;
                        }
                    }
                }
                if !an.is_empty() {
                    attrs.push((an, value));
                }
            }
        }
        _ => None,
    }
}

#[derive(Default)]
struct BlockBuilder {
    inlines: Vec<Inline>,
    open: Option<(SegmentId, String)>,
    ignored_x: usize,
    error: Option<DecodeError>,
}

impl BlockBuilder {
    fn push_text(&mut self, t: &str) {
        if t.is_empty() {
            return;
        }
        if let Some((_, seg)) = &mut self.open {
            seg.push_str(t);
        } else if let Some(Inline::Text(prev)) = self.inlines.last_mut() {
            prev.push_str(t);
        } else {
            self.inlines.push(Inline::Text(t.to_string()));
        }
    }

    fn fail(&mut self, e: DecodeError) {
        self.error.get_or_insert(e);
    }

    fn open_segment(&mut self, id: SegmentId) {
        match &self.open {
            Some((outer, _)) => {
                let outer = outer.0;
                self.fail(DecodeError::NestedSegment { outer, inner: id.0 });
            }
            None => self.open = Some((id, String::new())),
        }
    }

    fn close_segment(&mut self) {
        if self.ignored_x > 0 {
            self.ignored_x -= 1;
        } else if let Some((id, text)) = self.open.take() {
            self.inlines.push(Inline::Segment { id, text });
        } else {
            self.fail(DecodeError::StrayClose);
        }
    }

    fn finish(mut self) -> Result<Block, DecodeError> {
        if let Some((id, _)) = &self.open {
            let id = id.0;
            self.fail(DecodeError::UnclosedSegment(id));
        }
        match self.error {
            Some(e) => Err(e),
            None => Ok(Block { inlines: self.inlines }),
        }
    }
}

/// Tolerant parse of a markup document into its blocks.
pub fn parse_document(content: &str) -> Vec<Result<Block, DecodeError>> {
    let mut blocks = Vec::new();
    let mut current: Option<BlockBuilder> = None;
    let mut skipping: Option<String> = None;
    let mut rest = content;

    while !rest.is_empty() {
        let lt = rest.find('<').unwrap_or(rest.len());
        if lt > 0 {
            if let (None, Some(b)) = (&skipping, current.as_mut()) {
                b.push_text(&unescape(&rest[..lt]));
            }
            rest = &rest[lt..];
            continue;
        }
        let Some((tag, used)) = parse_tag(rest) else {
            if let (None, Some(b)) = (&skipping, current.as_mut()) {
                b.push_text("<");
            }
            rest = &rest[1..];
            continue;
        };
        rest = &rest[used..];

        if let Some(name) = &skipping {
            if matches!(&tag, Tag::End { name: n } if n == name) {
                skipping = None;
            }
            continue;
        }

        match tag {
            Tag::Skip => {}
            Tag::Start { name, attrs, self_closing } => match name.as_str() {
                "p" => {
                    if let Some(b) = current.take() {
                        blocks.push(b.finish());
                    }
                    if !self_closing {
                        current = Some(BlockBuilder::default());
                    }
                }
                "head" | "script" | "style" | "title" if !self_closing => skipping = Some(name),
                SEGMENT_TAG => {
                    if let Some(b) = current.as_mut() {
                        let id = attrs.iter().find(|(k, _)| k == SEGMENT_ATTR).and_then(|(_, v)| v.trim().parse::<u32>().ok());
                        match (id, self_closing) {
                            (Some(id), false) => b.open_segment(SegmentId(id)),
                            (Some(_), true) | (None, true) => {}
                            (None, false) => b.ignored_x += 1,
                        }
                    }
                }
                _ => {}
            },
            Tag::End { name } => match name.as_str() {
                "p" | "body" | "html" => {
                    if let Some(b) = current.take() {
                        blocks.push(b.finish());
                    }
                }
                SEGMENT_TAG => {
                    if let Some(b) = current.as_mut() {
                        b.close_segment();
                    }
                }
                _ => {}
            },
        }
    }
    if let Some(b) = current.take() {
        blocks.push(b.finish());
    }
    blocks
}
