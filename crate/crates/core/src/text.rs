//! Code-point indexing helpers. All offsets in this crate count Unicode scalar
//! values, never bytes.

use unicode_general_category::{get_general_category, GeneralCategory};

/// Byte offsets of every code-point boundary of a string, so code-point
/// ranges can be sliced in O(1).
#[derive(Debug, Clone)]
pub struct CharMap {
    bounds: Vec<usize>,
}

impl CharMap {
    pub fn new(s: &str) -> Self {
        let mut bounds: Vec<usize> = s.char_indices().map(|(i, _)| i).collect();
        bounds.push(s.len());
        Self { bounds }
    }

    /// Length in code points.
    pub fn len(&self) -> usize {
        self.bounds.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `s[start..end]` in code points, `None` when out of range.
    pub fn slice<'a>(&self, s: &'a str, start: usize, end: usize) -> Option<&'a str> {
        if start > end || end > self.len() {
            return None;
        }
        s.get(self.bounds[start]..self.bounds[end])
    }
}

pub fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// True for every character in a Unicode punctuation category (Pc, Pd, Ps,
/// Pe, Pi, Pf, Po).
pub fn is_punctuation(c: char) -> bool {
    matches!(
        get_general_category(c),
        GeneralCategory::ConnectorPunctuation
            | GeneralCategory::DashPunctuation
            | GeneralCategory::OpenPunctuation
            | GeneralCategory::ClosePunctuation
            | GeneralCategory::InitialPunctuation
            | GeneralCategory::FinalPunctuation
            | GeneralCategory::OtherPunctuation
    )
}

/// Number of trailing punctuation characters of `s`.
pub fn trailing_punctuation(s: &str) -> usize {
    s.chars().rev().take_while(|&c| is_punctuation(c)).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slices_by_code_point() {
        let s = "häää ✓ok";
        let m = CharMap::new(s);
        assert_eq!(m.len(), 8);
        assert_eq!(m.slice(s, 1, 4), Some("äää"));
        assert_eq!(m.slice(s, 5, 6), Some("✓"));
        assert_eq!(m.slice(s, 8, 8), Some(""));
        assert_eq!(m.slice(s, 7, 9), None);
        assert_eq!(m.slice(s, 3, 2), None);
    }

    #[test]
    fn punctuation_categories() {
        for c in ['.', ',', ')', '(', '…', '«', '»', '“', '-', '_', '!', '¿'] {
            assert!(is_punctuation(c), "{c:?}");
        }
        // symbols are not punctuation
        for c in ['a', ' ', '$', '+', '€', '1', '^'] {
            assert!(!is_punctuation(c), "{c:?}");
        }
        assert_eq!(trailing_punctuation("U.S.)."), 3);
        assert_eq!(trailing_punctuation("abc"), 0);
    }
}
