//! Prompt templates with named `{placeholder}` slots.
//!
//! A template file starts with a `version: N` header line and a `---`
//! separator; the rest is the prompt body. `{{` and `}}` produce literal
//! braces. Rendering is strict: every placeholder needs a binding and every
//! binding must be used.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TemplateError {
    #[error("missing binding for placeholder {{{0}}}")]
    MissingBinding(String),
    #[error("binding {0:?} is not used by the template")]
    UnusedBinding(String),
    #[error("template syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("template {template} must use exactly {expected:?}, found {found:?}")]
    Contract {
        template: TemplateId,
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("unknown template {0:?}")]
    UnknownTemplate(String),
    #[error("template i/o: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    StyleExtract,
    StyleCompare,
    StyleSummarize,
    FeedbackSummarize,
    Rewrite,
    Apply,
    Continue,
    Inline,
    SelfEval,
}

/// Model tier a template is routed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Fast,
    Strong,
}

impl TemplateId {
    pub const ALL: [TemplateId; 9] = [
        TemplateId::StyleExtract,
        TemplateId::StyleCompare,
        TemplateId::StyleSummarize,
        TemplateId::FeedbackSummarize,
        TemplateId::Rewrite,
        TemplateId::Apply,
        TemplateId::Continue,
        TemplateId::Inline,
        TemplateId::SelfEval,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::StyleExtract => "style_extract",
            TemplateId::StyleCompare => "style_compare",
            TemplateId::StyleSummarize => "style_summarize",
            TemplateId::FeedbackSummarize => "feedback_summarize",
            TemplateId::Rewrite => "rewrite",
            TemplateId::Apply => "apply",
            TemplateId::Continue => "continue",
            TemplateId::Inline => "inline",
            TemplateId::SelfEval => "self_eval",
        }
    }

    /// Placeholders the template must use, no more and no fewer.
    pub fn placeholders(self) -> &'static [&'static str] {
        match self {
            TemplateId::StyleExtract => &["document", "current_style", "like_summary", "dislike_summary"],
            TemplateId::StyleCompare => &["old_style", "new_style"],
            TemplateId::StyleSummarize => &["style"],
            TemplateId::FeedbackSummarize => &["polarity", "items"],
            TemplateId::Rewrite => &["style", "selection"],
            TemplateId::Apply => &["style", "selection", "instruction"],
            TemplateId::Continue => &["style", "context", "window"],
            TemplateId::Inline => &["style", "context", "window", "instruction"],
            TemplateId::SelfEval => &["task", "inputs", "output"],
        }
    }

    pub fn tier(self) -> Tier {
        match self {
            TemplateId::StyleExtract
            | TemplateId::StyleCompare
            | TemplateId::StyleSummarize
            | TemplateId::FeedbackSummarize => Tier::Fast,
            TemplateId::Rewrite
            | TemplateId::Apply
            | TemplateId::Continue
            | TemplateId::Inline
            | TemplateId::SelfEval => Tier::Strong,
        }
    }

    fn builtin_source(self) -> &'static str {
        match self {
            TemplateId::StyleExtract => include_str!("../../templates/style_extract.tmpl"),
            TemplateId::StyleCompare => include_str!("../../templates/style_compare.tmpl"),
            TemplateId::StyleSummarize => include_str!("../../templates/style_summarize.tmpl"),
            TemplateId::FeedbackSummarize => include_str!("../../templates/feedback_summarize.tmpl"),
            TemplateId::Rewrite => include_str!("../../templates/rewrite.tmpl"),
            TemplateId::Apply => include_str!("../../templates/apply.tmpl"),
            TemplateId::Continue => include_str!("../../templates/continue.tmpl"),
            TemplateId::Inline => include_str!("../../templates/inline.tmpl"),
            TemplateId::SelfEval => include_str!("../../templates/self_eval.tmpl"),
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = TemplateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TemplateId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| TemplateError::UnknownTemplate(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Literal(String),
    Placeholder(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub version: u32,
    segments: Vec<Segment>,
}

impl Template {
    /// Parses a template file (header plus body).
    pub fn parse(source: &str) -> Result<Self, TemplateError> {
        let syntax = |offset: usize, message: &str| TemplateError::Syntax {
            offset,
            message: message.to_string(),
        };
        let (header, rest) = source
            .split_once('\n')
            .ok_or_else(|| syntax(0, "missing version header"))?;
        let version = header
            .trim()
            .strip_prefix("version:")
            .and_then(|v| v.trim().parse::<u32>().ok())
            .ok_or_else(|| syntax(0, "expected `version: <n>`"))?;
        let (sep, body) = rest.split_once('\n').unwrap_or((rest, ""));
        if sep.trim() != "---" {
            return Err(syntax(header.len() + 1, "expected `---` after the header"));
        }
        let base = header.len() + sep.len() + 2;
        let segments = Self::parse_body(body).map_err(|(off, msg)| syntax(base + off, msg))?;
        Ok(Template { version, segments })
    }

    fn parse_body(body: &str) -> Result<Vec<Segment>, (usize, &'static str)> {
        let mut segments = Vec::new();
        let mut literal = String::new();
        let bytes = body.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            match bytes[i] {
                b'{' if bytes.get(i + 1) == Some(&b'{') => {
                    literal.push('{');
                    i += 2;
                }
                b'}' if bytes.get(i + 1) == Some(&b'}') => {
                    literal.push('}');
                    i += 2;
                }
                b'{' => {
                    let close = body[i + 1..]
                        .find('}')
                        .ok_or((i, "unterminated placeholder"))?;
                    let name = &body[i + 1..i + 1 + close];
                    let valid = name
                        .chars()
                        .next()
                        .is_some_and(|c| c.is_ascii_lowercase() || c == '_')
                        && name
                            .chars()
                            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_');
                    if !valid {
                        return Err((i, "invalid placeholder name"));
                    }
                    if !literal.is_empty() {
                        segments.push(Segment::Literal(std::mem::take(&mut literal)));
                    }
                    segments.push(Segment::Placeholder(name.to_string()));
                    i += close + 2;
                }
                b'}' => return Err((i, "unmatched `}`")),
                _ => {
                    let ch = body[i..].chars().next().expect("in bounds");
                    literal.push(ch);
                    i += ch.len_utf8();
                }
            }
        }
        if !literal.is_empty() {
            segments.push(Segment::Literal(literal));
        }
        Ok(segments)
    }

    pub fn placeholders(&self) -> BTreeSet<&str> {
        self.segments
            .iter()
            .filter_map(|s| match s {
                Segment::Placeholder(name) => Some(name.as_str()),
                Segment::Literal(_) => None,
            })
            .collect()
    }

    pub fn render(&self, bindings: &BTreeMap<String, String>) -> Result<String, TemplateError> {
        for seg in &self.segments {
            if let Segment::Placeholder(name) = seg {
                if !bindings.contains_key(name) {
                    return Err(TemplateError::MissingBinding(name.clone()));
                }
            }
        }
        let used = self.placeholders();
        if let Some(extra) = bindings.keys().find(|k| !used.contains(k.as_str())) {
            return Err(TemplateError::UnusedBinding(extra.clone()));
        }
        let mut out = String::new();
        for seg in &self.segments {
            match seg {
                Segment::Literal(text) => out.push_str(text),
                Segment::Placeholder(name) => out.push_str(&bindings[name]),
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct TemplateSet {
    templates: BTreeMap<TemplateId, Template>,
}

impl TemplateSet {
    pub fn builtin() -> Self {
        let templates = TemplateId::ALL
            .into_iter()
            .map(|id| {
                let t = Template::parse(id.builtin_source()).expect("built-in template parses");
                (id, t)
            })
            .collect();
        TemplateSet { templates }
    }

    /// Built-in templates overridden by any `<template_id>.tmpl` file in
    /// `dir`. Overrides must honor the same placeholder contract.
    pub fn load_dir(dir: &Path) -> Result<Self, TemplateError> {
        let mut set = Self::builtin();
        for id in TemplateId::ALL {
            let path = dir.join(format!("{}.tmpl", id.as_str()));
            if !path.exists() {
                continue;
            }
            let source =
                std::fs::read_to_string(&path).map_err(|e| TemplateError::Io(e.to_string()))?;
            set.insert(id, Template::parse(&source)?)?;
        }
        Ok(set)
    }

    pub fn insert(&mut self, id: TemplateId, template: Template) -> Result<(), TemplateError> {
        let found: Vec<String> = template.placeholders().into_iter().map(String::from).collect();
        let mut expected: Vec<String> = id.placeholders().iter().map(|s| s.to_string()).collect();
        expected.sort();
        if found != expected {
            return Err(TemplateError::Contract {
                template: id,
                expected,
                found,
            });
        }
        self.templates.insert(id, template);
        Ok(())
    }

    pub fn get(&self, id: TemplateId) -> &Template {
        &self.templates[&id]
    }

    pub fn render(
        &self,
        id: TemplateId,
        bindings: &BTreeMap<String, String>,
    ) -> Result<String, TemplateError> {
        self.get(id).render(bindings)
    }
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::builtin()
    }
}
