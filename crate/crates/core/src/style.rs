//! Five-dimension style descriptions.
//!
//! A description is edited as rich text where each section opens with a
//! heading naming its dimension. [`validate_style_description`] turns that
//! into a [`StyleDescription`] with the sections in canonical order.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::richtext::{Block, BlockKind, RichText};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StyleDimension {
    Tone,
    Voice,
    WordChoice,
    SentenceStructure,
    ParagraphStructure,
}

impl StyleDimension {
    pub const ALL: [StyleDimension; 5] = [
        StyleDimension::Tone,
        StyleDimension::Voice,
        StyleDimension::WordChoice,
        StyleDimension::SentenceStructure,
        StyleDimension::ParagraphStructure,
    ];

    pub fn key(self) -> &'static str {
        match self {
            StyleDimension::Tone => "tone",
            StyleDimension::Voice => "voice",
            StyleDimension::WordChoice => "word_choice",
            StyleDimension::SentenceStructure => "sentence_structure",
            StyleDimension::ParagraphStructure => "paragraph_structure",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            StyleDimension::Tone => "Tone",
            StyleDimension::Voice => "Voice",
            StyleDimension::WordChoice => "Word Choice",
            StyleDimension::SentenceStructure => "Sentence Structure",
            StyleDimension::ParagraphStructure => "Paragraph Structure",
        }
    }

    /// Accepts the label or key in any case, with `_`, `-` or spaces between
    /// words and an optional trailing colon.
    pub fn from_label(label: &str) -> Option<Self> {
        let norm: String = label
            .trim()
            .trim_end_matches(':')
            .trim()
            .to_lowercase()
            .chars()
            .map(|c| if c == '_' || c == '-' { ' ' } else { c })
            .collect();
        let norm = norm.split_whitespace().collect::<Vec<_>>().join(" ");
        StyleDimension::ALL
            .into_iter()
            .find(|d| d.label().to_lowercase() == norm)
    }
}

impl fmt::Display for StyleDimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StyleDescriptionError {
    #[error("style description is missing the {0} section")]
    MissingSection(StyleDimension),
    #[error("style description section {0} is empty")]
    EmptySection(StyleDimension),
    #[error("style description repeats the {0} section")]
    DuplicateSection(StyleDimension),
    #[error("style description has text before the first section heading")]
    UnlabeledContent,
}

/// A validated description: every section present and non-blank.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StyleDescription {
    pub tone: Vec<Block>,
    pub voice: Vec<Block>,
    pub word_choice: Vec<Block>,
    pub sentence_structure: Vec<Block>,
    pub paragraph_structure: Vec<Block>,
}

impl StyleDescription {
    pub fn section(&self, dim: StyleDimension) -> &[Block] {
        match dim {
            StyleDimension::Tone => &self.tone,
            StyleDimension::Voice => &self.voice,
            StyleDimension::WordChoice => &self.word_choice,
            StyleDimension::SentenceStructure => &self.sentence_structure,
            StyleDimension::ParagraphStructure => &self.paragraph_structure,
        }
    }

    fn section_mut(&mut self, dim: StyleDimension) -> &mut Vec<Block> {
        match dim {
            StyleDimension::Tone => &mut self.tone,
            StyleDimension::Voice => &mut self.voice,
            StyleDimension::WordChoice => &mut self.word_choice,
            StyleDimension::SentenceStructure => &mut self.sentence_structure,
            StyleDimension::ParagraphStructure => &mut self.paragraph_structure,
        }
    }

    pub fn section_text(&self, dim: StyleDimension) -> String {
        RichText::new(self.section(dim).to_vec()).plain_text()
    }

    /// Rich-text form with one level-2 heading per section, canonical order.
    pub fn to_rich_text(&self) -> RichText {
        let mut blocks = Vec::new();
        for dim in StyleDimension::ALL {
            blocks.push(Block::heading(2, dim.label()));
            blocks.extend(self.section(dim).iter().cloned());
        }
        RichText::new(blocks)
    }

    /// Markdown-flavoured text used in prompts and the batch output file.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        for (i, dim) in StyleDimension::ALL.into_iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            out.push_str("## ");
            out.push_str(dim.label());
            out.push('\n');
            for block in self.section(dim) {
                match block.kind {
                    BlockKind::Paragraph => {}
                    BlockKind::Heading { level } => {
                        out.push_str(&"#".repeat(usize::from(level.max(3))));
                        out.push(' ');
                    }
                    BlockKind::ListItem { ordered: false } => out.push_str("- "),
                    BlockKind::ListItem { ordered: true } => out.push_str("1. "),
                }
                out.push_str(&block.text());
                out.push('\n');
            }
        }
        out
    }

    /// Section texts concatenated in canonical order, without separators.
    pub fn content_text(&self) -> String {
        StyleDimension::ALL
            .into_iter()
            .map(|d| self.section_text(d))
            .collect()
    }

    /// Builds a description from one paragraph of text per dimension.
    pub fn from_sections(sections: [&str; 5]) -> Result<Self, StyleDescriptionError> {
        let mut blocks = Vec::new();
        for (dim, text) in StyleDimension::ALL.into_iter().zip(sections) {
            blocks.push(Block::heading(2, dim.label()));
            blocks.push(Block::paragraph(text));
        }
        validate_style_description(&RichText::new(blocks))
    }
}

/// Accepts a rich-text description iff all five labeled sections are present
/// and non-empty; the result is in canonical section order.
///
/// Headings whose text is not a dimension label are treated as content of
/// the enclosing section.
pub fn validate_style_description(
    text: &RichText,
) -> Result<StyleDescription, StyleDescriptionError> {
    let mut sections: [Option<Vec<Block>>; 5] = Default::default();
    let mut current: Option<usize> = None;
    for block in &text.blocks {
        let dim = match block.kind {
            BlockKind::Heading { .. } => StyleDimension::from_label(&block.text()),
            _ => None,
        };
        match dim {
            Some(dim) => {
                let idx = dim as usize;
                if sections[idx].is_some() {
                    return Err(StyleDescriptionError::DuplicateSection(dim));
                }
                sections[idx] = Some(Vec::new());
                current = Some(idx);
            }
            None => match current {
                Some(idx) => {
                    if !block.is_blank() {
                        sections[idx].as_mut().expect("open section").push(block.clone());
                    }
                }
                None if block.is_blank() => {}
                None => return Err(StyleDescriptionError::UnlabeledContent),
            },
        }
    }
    for dim in StyleDimension::ALL {
        if sections[dim as usize].is_none() {
            return Err(StyleDescriptionError::MissingSection(dim));
        }
    }
    let mut desc = StyleDescription {
        tone: Vec::new(),
        voice: Vec::new(),
        word_choice: Vec::new(),
        sentence_structure: Vec::new(),
        paragraph_structure: Vec::new(),
    };
    for dim in StyleDimension::ALL {
        let blocks = sections[dim as usize].take().expect("checked above");
        if blocks.is_empty() {
            return Err(StyleDescriptionError::EmptySection(dim));
        }
        *desc.section_mut(dim) = blocks;
    }
    Ok(desc)
}

/// Parses markdown-ish text (`#` headings, `-`/`*`/`1.` list items, other
/// non-blank lines as paragraphs) into rich text. Code fence lines are
/// dropped so fenced model output parses the same as bare output.
pub fn parse_markdown(text: &str) -> RichText {
    let mut blocks = Vec::new();
    for raw in text.lines() {
        let line = raw.trim_end();
        let trimmed = line.trim_start();
        if trimmed.is_empty() || trimmed.starts_with("```") {
            continue;
        }
        let hashes = trimmed.chars().take_while(|&c| c == '#').count();
        if (1..=6).contains(&hashes) && trimmed[hashes..].starts_with(' ') {
            blocks.push(Block::heading(hashes as u8, trimmed[hashes..].trim()));
        } else if let Some(rest) = trimmed
            .strip_prefix("- ")
            .or_else(|| trimmed.strip_prefix("* "))
        {
            blocks.push(Block::list_item(false, rest.trim()));
        } else if let Some(rest) = ordered_item(trimmed) {
            blocks.push(Block::list_item(true, rest.trim()));
        } else {
            blocks.push(Block::paragraph(trimmed));
        }
    }
    RichText::new(blocks)
}

fn ordered_item(line: &str) -> Option<&str> {
    let digits = line.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits == 0 {
        return None;
    }
    line[digits..].strip_prefix(". ")
}

pub fn parse_markdown_description(text: &str) -> Result<StyleDescription, StyleDescriptionError> {
    validate_style_description(&parse_markdown(text))
}

pub const DEFAULT_STYLE_SUMMARY: &str = "General-purpose neutral style";

pub(crate) fn default_description() -> StyleDescription {
    StyleDescription::from_sections([
        "Neutral and even-handed; neither overly formal nor casual.",
        "Clear and direct, written mostly in the active voice.",
        "Plain, widely understood vocabulary that avoids jargon and slang.",
        "Moderate sentence length mixing simple and compound sentences.",
        "Short to medium paragraphs, each focused on a single idea.",
    ])
    .expect("built-in default style is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn five() -> Vec<Block> {
        StyleDimension::ALL
            .into_iter()
            .flat_map(|d| [Block::heading(2, d.label()), Block::paragraph(format!("{d} text"))])
            .collect()
    }

    #[test]
    fn accepts_complete_description() {
        let desc = validate_style_description(&RichText::new(five())).unwrap();
        assert_eq!(desc.section_text(StyleDimension::Voice), "voice text");
    }

    #[test]
    fn missing_voice_is_reported() {
        let blocks: Vec<Block> = five()
            .into_iter()
            .filter(|b| !b.text().to_lowercase().contains("voice"))
            .collect();
        assert_eq!(
            validate_style_description(&RichText::new(blocks)),
            Err(StyleDescriptionError::MissingSection(StyleDimension::Voice))
        );
    }

    #[test]
    fn out_of_order_sections_are_reordered() {
        let mut pairs: Vec<Vec<Block>> = five().chunks(2).map(|c| c.to_vec()).collect();
        pairs.reverse();
        let shuffled = RichText::new(pairs.concat());
        let desc = validate_style_description(&shuffled).unwrap();
        let headings: Vec<String> = desc
            .to_rich_text()
            .blocks
            .iter()
            .filter(|b| matches!(b.kind, BlockKind::Heading { .. }))
            .map(|b| b.text())
            .collect();
        assert_eq!(
            headings,
            ["Tone", "Voice", "Word Choice", "Sentence Structure", "Paragraph Structure"]
        );
    }

    #[test]
    fn empty_section_is_rejected() {
        let mut blocks = five();
        blocks[3] = Block::paragraph("   ");
        assert_eq!(
            validate_style_description(&RichText::new(blocks)),
            Err(StyleDescriptionError::EmptySection(StyleDimension::Voice))
        );
    }

    #[test]
    fn duplicate_and_preamble_are_rejected() {
        let mut blocks = five();
        blocks.push(Block::heading(2, "tone"));
        assert_eq!(
            validate_style_description(&RichText::new(blocks)),
            Err(StyleDescriptionError::DuplicateSection(StyleDimension::Tone))
        );
        let mut blocks = five();
        blocks.insert(0, Block::paragraph("intro"));
        assert_eq!(
            validate_style_description(&RichText::new(blocks)),
            Err(StyleDescriptionError::UnlabeledContent)
        );
    }

    #[test]
    fn labels_are_matched_loosely() {
        assert_eq!(
            StyleDimension::from_label("word_choice"),
            Some(StyleDimension::WordChoice)
        );
        assert_eq!(
            StyleDimension::from_label(" Sentence  structure: "),
            Some(StyleDimension::SentenceStructure)
        );
        assert_eq!(StyleDimension::from_label("Mood"), None);
    }

    #[test]
    fn markdown_round_trip() {
        let desc = default_description();
        assert_eq!(parse_markdown_description(&desc.to_markdown()).unwrap(), desc);
    }

    #[test]
    fn markdown_parser_handles_fences_and_lists() {
        let text = "```html\n# Tone\n- warm\n- wry\n## Voice\nfirst person\n### Word choice\n1. plain\n## Sentence Structure\nshort\n## Paragraph Structure\nbrief\n```";
        let desc = parse_markdown_description(text).unwrap();
        assert_eq!(desc.tone.len(), 2);
        assert_eq!(desc.word_choice[0].kind, BlockKind::ListItem { ordered: true });
    }

    #[test]
    fn default_description_is_valid() {
        let desc = default_description();
        assert!(validate_style_description(&desc.to_rich_text()).is_ok());
    }
}
