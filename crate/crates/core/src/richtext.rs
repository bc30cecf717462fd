//! Minimal rich-text tree used for document bodies, the context page and
//! style descriptions.
//!
//! A body is an ordered list of blocks; each block holds styled spans. The
//! plain-text projection joins blocks with `'\n'`, and every character offset
//! used elsewhere in the crate (selections, insertion points, highlight
//! anchors) counts Unicode scalar values in that projection.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RichTextError {
    #[error("malformed rich text: {0}")]
    Malformed(String),
    #[error("span text may not contain a newline")]
    NewlineInSpan,
    #[error("heading level {0} outside 1..=6")]
    HeadingLevel(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BlockKind {
    Paragraph,
    Heading { level: u8 },
    ListItem { ordered: bool },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub text: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub bold: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub italic: bool,
}

impl Span {
    pub fn plain(text: impl Into<String>) -> Self {
        Span {
            text: text.into(),
            bold: false,
            italic: false,
        }
    }

    fn style(&self) -> (bool, bool) {
        (self.bold, self.italic)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Block {
    pub kind: BlockKind,
    #[serde(default)]
    pub spans: Vec<Span>,
}

impl Block {
    pub fn paragraph(text: impl Into<String>) -> Self {
        Block::with_kind(BlockKind::Paragraph, text)
    }

    pub fn heading(level: u8, text: impl Into<String>) -> Self {
        Block::with_kind(BlockKind::Heading { level }, text)
    }

    pub fn list_item(ordered: bool, text: impl Into<String>) -> Self {
        Block::with_kind(BlockKind::ListItem { ordered }, text)
    }

    fn with_kind(kind: BlockKind, text: impl Into<String>) -> Self {
        let text = text.into();
        let spans = if text.is_empty() {
            Vec::new()
        } else {
            vec![Span::plain(text)]
        };
        Block { kind, spans }
    }

    pub fn text(&self) -> String {
        self.spans.iter().map(|s| s.text.as_str()).collect()
    }

    pub fn is_blank(&self) -> bool {
        self.spans.iter().all(|s| s.text.trim().is_empty())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RichText {
    #[serde(default)]
    pub blocks: Vec<Block>,
}

/// Half-open character range `[start, end)` over the plain-text projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TextRange {
    pub start: usize,
    pub end: usize,
}

impl TextRange {
    pub fn new(start: usize, end: usize) -> Self {
        TextRange { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

#[derive(Clone, Copy)]
enum Unit {
    Char(char, (bool, bool)),
    Break(BlockKind),
}

impl RichText {
    pub fn new(blocks: Vec<Block>) -> Self {
        RichText { blocks }
    }

    /// Builds paragraphs from plain text, one per line.
    pub fn from_plain(text: &str) -> Self {
        if text.is_empty() {
            return RichText::default();
        }
        RichText {
            blocks: text.split('\n').map(Block::paragraph).collect(),
        }
    }

    /// Parses the canonical serialized form and checks structural invariants.
    pub fn parse(input: &str) -> Result<Self, RichTextError> {
        let body: RichText =
            serde_json::from_str(input).map_err(|e| RichTextError::Malformed(e.to_string()))?;
        body.validate()?;
        Ok(body)
    }

    pub fn to_canonical(&self) -> String {
        serde_json::to_string(self).expect("rich text serializes")
    }

    pub fn validate(&self) -> Result<(), RichTextError> {
        for block in &self.blocks {
            if let BlockKind::Heading { level } = block.kind {
                if !(1..=6).contains(&level) {
                    return Err(RichTextError::HeadingLevel(level));
                }
            }
            if block.spans.iter().any(|s| s.text.contains('\n')) {
                return Err(RichTextError::NewlineInSpan);
            }
        }
        Ok(())
    }

    pub fn plain_text(&self) -> String {
        let mut out = String::new();
        for (i, block) in self.blocks.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            for span in &block.spans {
                out.push_str(&span.text);
            }
        }
        out
    }

    pub fn char_len(&self) -> usize {
        let chars: usize = self
            .blocks
            .iter()
            .flat_map(|b| b.spans.iter())
            .map(|s| s.text.chars().count())
            .sum();
        chars + self.blocks.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.char_len() == 0
    }

    /// Text of `range` in the plain-text projection, or `None` when the range
    /// falls outside the body.
    pub fn slice(&self, range: TextRange) -> Option<String> {
        if range.start > range.end || range.end > self.char_len() {
            return None;
        }
        Some(
            self.plain_text()
                .chars()
                .skip(range.start)
                .take(range.len())
                .collect(),
        )
    }

    /// Replaces `range` with `text`, which may contain newlines. Inserted
    /// characters inherit the formatting of their left neighbour within the
    /// same block (or the right neighbour at a block start). Adjacent spans
    /// with equal formatting are merged in the result.
    ///
    /// Panics if `range` is out of bounds; callers validate first.
    pub fn splice(&self, range: TextRange, text: &str) -> RichText {
        assert!(
            range.start <= range.end && range.end <= self.char_len(),
            "splice range out of bounds"
        );
        if self.blocks.is_empty() && text.is_empty() {
            return self.clone();
        }
        let (first_kind, mut units) = self.flatten();

        let block_kind_at = |units: &[Unit], pos: usize| -> BlockKind {
            units[..pos]
                .iter()
                .rev()
                .find_map(|u| match u {
                    Unit::Break(k) => Some(*k),
                    Unit::Char(..) => None,
                })
                .unwrap_or(first_kind)
        };
        let style = match range.start.checked_sub(1).map(|i| units[i]) {
            Some(Unit::Char(_, st)) => st,
            _ => match units.get(range.end) {
                Some(Unit::Char(_, st)) => *st,
                _ => (false, false),
            },
        };
        let current = block_kind_at(&units, range.start);
        let break_kind = match current {
            BlockKind::Heading { .. } => BlockKind::Paragraph,
            other => other,
        };
        let inserted: Vec<Unit> = text
            .chars()
            .map(|c| {
                if c == '\n' {
                    Unit::Break(break_kind)
                } else {
                    Unit::Char(c, style)
                }
            })
            .collect();
        units.splice(range.start..range.end, inserted);
        Self::rebuild(first_kind, &units)
    }

    fn flatten(&self) -> (BlockKind, Vec<Unit>) {
        let first_kind = self
            .blocks
            .first()
            .map(|b| b.kind)
            .unwrap_or(BlockKind::Paragraph);
        let mut units = Vec::with_capacity(self.char_len());
        for (i, block) in self.blocks.iter().enumerate() {
            if i > 0 {
                units.push(Unit::Break(block.kind));
            }
            for span in &block.spans {
                units.extend(span.text.chars().map(|c| Unit::Char(c, span.style())));
            }
        }
        (first_kind, units)
    }

    fn rebuild(first_kind: BlockKind, units: &[Unit]) -> RichText {
        let mut blocks = vec![Block {
            kind: first_kind,
            spans: Vec::new(),
        }];
        for unit in units {
            match *unit {
                Unit::Break(kind) => blocks.push(Block {
                    kind,
                    spans: Vec::new(),
                }),
                Unit::Char(c, (bold, italic)) => {
                    let spans = &mut blocks.last_mut().expect("at least one block").spans;
                    match spans.last_mut() {
                        Some(last) if last.style() == (bold, italic) => last.text.push(c),
                        _ => spans.push(Span {
                            text: c.to_string(),
                            bold,
                            italic,
                        }),
                    }
                }
            }
        }
        RichText { blocks }
    }

    /// Character offsets of every occurrence of `needle` (overlapping matches
    /// included) in the plain-text projection.
    pub fn find_all(&self, needle: &str) -> Vec<usize> {
        if needle.is_empty() {
            return Vec::new();
        }
        let hay: Vec<char> = self.plain_text().chars().collect();
        let pat: Vec<char> = needle.chars().collect();
        if pat.len() > hay.len() {
            return Vec::new();
        }
        (0..=hay.len() - pat.len())
            .filter(|&i| hay[i..i + pat.len()] == pat[..])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> RichText {
        RichText::new(vec![
            Block::heading(1, "Title"),
            Block {
                kind: BlockKind::Paragraph,
                spans: vec![
                    Span::plain("Hello "),
                    Span {
                        text: "bold".into(),
                        bold: true,
                        italic: false,
                    },
                    Span::plain(" world."),
                ],
            },
            Block::list_item(false, "item"),
        ])
    }

    #[test]
    fn plain_text_joins_blocks_with_newlines() {
        let body = sample();
        assert_eq!(body.plain_text(), "Title\nHello bold world.\nitem");
        assert_eq!(body.char_len(), body.plain_text().chars().count());
    }

    #[test]
    fn from_plain_round_trips_through_plain_text() {
        for s in ["", "a", "a\n", "\n", "one\ntwo\n\nthree"] {
            assert_eq!(RichText::from_plain(s).plain_text(), s);
        }
    }

    #[test]
    fn splice_inherits_left_formatting() {
        let body = sample();
        // right after "bold"
        let out = body.splice(TextRange::new(16, 16), "er");
        assert_eq!(out.plain_text(), "Title\nHello bolder world.\nitem");
        let spans = &out.blocks[1].spans;
        assert_eq!(spans[1].text, "bolder");
        assert!(spans[1].bold);
    }

    #[test]
    fn splice_across_blocks_merges_into_first() {
        let body = sample();
        let out = body.splice(TextRange::new(3, 8), "");
        assert_eq!(out.plain_text(), "Titllo bold world.\nitem");
        assert_eq!(out.blocks[0].kind, BlockKind::Heading { level: 1 });
    }

    #[test]
    fn newline_in_inserted_text_opens_block() {
        let body = RichText::from_plain("ab");
        let out = body.splice(TextRange::new(1, 1), "x\ny");
        assert_eq!(out.blocks.len(), 2);
        assert_eq!(out.plain_text(), "ax\nyb");
    }

    #[test]
    fn splice_into_empty_body() {
        let out = RichText::default().splice(TextRange::new(0, 0), "hi");
        assert_eq!(out.plain_text(), "hi");
        let same = RichText::default().splice(TextRange::new(0, 0), "");
        assert!(same.blocks.is_empty());
    }

    #[test]
    fn parse_rejects_newline_in_span_and_bad_heading() {
        let bad = r#"{"blocks":[{"kind":{"type":"paragraph"},"spans":[{"text":"a\nb"}]}]}"#;
        assert_eq!(RichText::parse(bad), Err(RichTextError::NewlineInSpan));
        let bad = r#"{"blocks":[{"kind":{"type":"heading","level":9},"spans":[]}]}"#;
        assert_eq!(RichText::parse(bad), Err(RichTextError::HeadingLevel(9)));
        assert!(matches!(
            RichText::parse("{"),
            Err(RichTextError::Malformed(_))
        ));
    }

    #[test]
    fn find_all_counts_chars_not_bytes() {
        let body = RichText::from_plain("héllo héllo");
        assert_eq!(body.find_all("llo"), vec![2, 8]);
        assert!(body.find_all("").is_empty());
    }

    fn arb_span() -> impl Strategy<Value = Span> {
        ("[a-zé ,.!?]{0,8}", any::<bool>(), any::<bool>()).prop_map(|(text, bold, italic)| Span {
            text,
            bold,
            italic,
        })
    }

    fn arb_kind() -> impl Strategy<Value = BlockKind> {
        prop_oneof![
            Just(BlockKind::Paragraph),
            (1u8..=6).prop_map(|level| BlockKind::Heading { level }),
            any::<bool>().prop_map(|ordered| BlockKind::ListItem { ordered }),
        ]
    }

    pub(crate) fn arb_body() -> impl Strategy<Value = RichText> {
        prop::collection::vec(
            (arb_kind(), prop::collection::vec(arb_span(), 0..4))
                .prop_map(|(kind, spans)| Block { kind, spans }),
            0..5,
        )
        .prop_map(RichText::new)
    }

    proptest! {
        #[test]
        fn canonical_round_trip(body in arb_body()) {
            let parsed = RichText::parse(&body.to_canonical()).unwrap();
            prop_assert_eq!(parsed, body);
        }

        #[test]
        fn splice_matches_plain_text_splice(body in arb_body(), a in 0usize..40, b in 0usize..40, ins in "[a-z\n]{0,6}") {
            let len = body.char_len();
            let (s, e) = (a.min(b).min(len), a.max(b).min(len));
            let out = body.splice(TextRange::new(s, e), &ins);
            let chars: Vec<char> = body.plain_text().chars().collect();
            let expected: String = chars[..s].iter().chain(ins.chars().collect::<Vec<_>>().iter()).chain(chars[e..].iter()).collect();
            prop_assert_eq!(out.plain_text(), expected);
            prop_assert!(out.validate().is_ok());
        }
    }
}
