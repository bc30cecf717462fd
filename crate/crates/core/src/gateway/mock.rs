//! Deterministic offline provider.
//!
//! Every answer is a pure function of the template id and its bindings, and
//! each rule is simple enough to recompute by hand in a test:
//!
//! * `style_extract`: five sections built from measurable text statistics
//!   (mean words per sentence, lexical-variety bucket, exclamation density)
//!   plus short digests of the feedback summaries.
//! * `style_compare`: rating = `min(10, round(10 * lev / max_len))` over the
//!   concatenated section texts of the two descriptions.
//! * `feedback_summarize`: excerpts sorted lexicographically, joined by `"; "`.
//! * generation templates: a `[XX:hash8]` tag over the bundle fields.
//! * `self_eval`: 10 when the output is what the mock itself would produce
//!   for the given inputs (or embeds the expected tag), else 0.

use sha2::{Digest, Sha256};

use super::parse::parse_feedback_items;
use super::{Bindings, CompletionRequest, Provider, ProviderError, TemplateId};
use crate::style::{parse_markdown_description, StyleDimension};

pub const SUMMARY_MAX_CHARS: usize = 280;

#[derive(Debug, Clone, Copy, Default)]
pub struct MockProvider;

impl Provider for MockProvider {
    fn name(&self) -> &str {
        "mock"
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        Ok(mock_complete(request))
    }
}

pub fn mock_complete(request: &CompletionRequest) -> String {
    mock_answer(request.template_id, &request.bindings)
}

fn get<'a>(b: &'a Bindings, key: &str) -> &'a str {
    b.get(key).map(String::as_str).unwrap_or("")
}

pub fn mock_answer(template: TemplateId, b: &Bindings) -> String {
    match template {
        TemplateId::StyleExtract => extract(
            get(b, "document"),
            get(b, "like_summary"),
            get(b, "dislike_summary"),
        ),
        TemplateId::StyleCompare => compare(get(b, "old_style"), get(b, "new_style")),
        TemplateId::StyleSummarize => summarize_style(get(b, "style")),
        TemplateId::FeedbackSummarize => match parse_feedback_items(get(b, "items")) {
            Ok(items) => sorted_join(items.into_iter().map(|(e, _)| e)),
            Err(_) => String::new(),
        },
        TemplateId::Rewrite => {
            let tag = generation_tag(template, &[get(b, "style"), get(b, "selection")]);
            format!("{tag}{}", get(b, "selection"))
        }
        TemplateId::Apply => {
            let tag = generation_tag(
                template,
                &[get(b, "style"), get(b, "selection"), get(b, "instruction")],
            );
            format!("{tag}{}", get(b, "selection"))
        }
        TemplateId::Continue => {
            generation_tag(template, &[get(b, "style"), get(b, "context"), get(b, "window")])
        }
        TemplateId::Inline => generation_tag(
            template,
            &[
                get(b, "style"),
                get(b, "context"),
                get(b, "window"),
                get(b, "instruction"),
            ],
        ),
        TemplateId::SelfEval => format!("Score: {}", self_eval(b)),
    }
}

/// `[XX:hash8]` where `hash8` is the first 8 hex digits of SHA-256 over the
/// fields joined with U+001F.
pub fn generation_tag(template: TemplateId, fields: &[&str]) -> String {
    let code = match template {
        TemplateId::Rewrite => "RW",
        TemplateId::Apply => "AP",
        TemplateId::Continue => "CT",
        TemplateId::Inline => "IP",
        _ => "XX",
    };
    format!("[{code}:{}]", short_hash(&fields.join("\u{1f}")))
}

fn short_hash(text: &str) -> String {
    hex::encode(&Sha256::digest(text.as_bytes())[..4])
}

fn digest_or_none(summary: &str) -> String {
    if summary.trim().is_empty() {
        "none".to_string()
    } else {
        short_hash(summary)
    }
}

pub fn sorted_join(excerpts: impl IntoIterator<Item = String>) -> String {
    let mut v: Vec<String> = excerpts.into_iter().collect();
    v.sort();
    v.join("; ")
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextStats {
    pub sentences: usize,
    pub words: usize,
    pub avg_sentence_len: f64,
    pub lexical_variety: &'static str,
    pub exclamation_density: &'static str,
    pub paragraphs: usize,
    pub avg_sentences_per_paragraph: f64,
}

fn word_count(s: &str) -> usize {
    s.split_whitespace().count()
}

fn sentence_count(text: &str) -> usize {
    text.split(['.', '!', '?'])
        .filter(|s| word_count(s) > 0)
        .count()
}

pub fn text_stats(document: &str) -> TextStats {
    let pieces: Vec<usize> = document
        .split(['.', '!', '?'])
        .map(word_count)
        .filter(|&n| n > 0)
        .collect();
    let sentences = pieces.len();
    let words: usize = pieces.iter().sum();
    let avg_sentence_len = if sentences == 0 {
        0.0
    } else {
        words as f64 / sentences as f64
    };

    let tokens: Vec<String> = document
        .split(|c: char| !c.is_alphanumeric() && c != '\'')
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect();
    let lexical_variety = if tokens.is_empty() {
        "n/a"
    } else {
        let unique = tokens.iter().collect::<std::collections::BTreeSet<_>>().len();
        let ratio = unique as f64 / tokens.len() as f64;
        if ratio < 0.5 {
            "low"
        } else if ratio < 0.8 {
            "medium"
        } else {
            "high"
        }
    };

    let bangs = document.chars().filter(|&c| c == '!').count();
    let exclamation_density = if bangs == 0 {
        "none"
    } else if sentences > 0 && (bangs as f64) / (sentences as f64) < 0.25 {
        "some"
    } else {
        "frequent"
    };

    let paragraph_texts: Vec<&str> = document.lines().filter(|l| !l.trim().is_empty()).collect();
    let paragraphs = paragraph_texts.len();
    let avg_sentences_per_paragraph = if paragraphs == 0 {
        0.0
    } else {
        paragraph_texts.iter().map(|p| sentence_count(p)).sum::<usize>() as f64 / paragraphs as f64
    };

    TextStats {
        sentences,
        words,
        avg_sentence_len,
        lexical_variety,
        exclamation_density,
        paragraphs,
        avg_sentences_per_paragraph,
    }
}

/// Two-decimal rendering without trailing zeros: `5`, `5.5`, `5.33`.
pub fn format_stat(x: f64) -> String {
    format!("{}", (x * 100.0).round() / 100.0)
}

fn extract(document: &str, likes: &str, dislikes: &str) -> String {
    let s = text_stats(document);
    format!(
        "## Tone\n\
         Exclamation use is {excl} (exclamation_density={excl}).\n\
         \n## Voice\n\
         Shaped by reader feedback (likes_digest={likes} dislikes_digest={dislikes}).\n\
         \n## Word Choice\n\
         Lexical variety is {ttr} (type_token_ratio={ttr}).\n\
         \n## Sentence Structure\n\
         Sentences average {avg} words (avg_sentence_len={avg}).\n\
         \n## Paragraph Structure\n\
         {paras} paragraph(s) of about {spp} sentence(s) each (paragraphs={paras} avg_sentences_per_paragraph={spp}).\n",
        excl = s.exclamation_density,
        likes = digest_or_none(likes),
        dislikes = digest_or_none(dislikes),
        ttr = s.lexical_variety,
        avg = format_stat(s.avg_sentence_len),
        paras = s.paragraphs,
        spp = format_stat(s.avg_sentences_per_paragraph),
    )
}

fn comparison_basis(text: &str) -> String {
    match parse_markdown_description(text) {
        Ok(desc) => desc.content_text(),
        Err(_) => text.to_string(),
    }
}

/// Levenshtein distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `min(10, round(10 * lev / max_len))`, with halves rounded up; 0 for two
/// empty strings.
pub fn edit_distance_rating(old: &str, new: &str) -> u8 {
    let max = old.chars().count().max(new.chars().count());
    if max == 0 {
        return 0;
    }
    let lev = levenshtein(old, new);
    let rounded = (20 * lev + max) / (2 * max);
    rounded.min(10) as u8
}

fn compare(old: &str, new: &str) -> String {
    let (a, b) = (comparison_basis(old), comparison_basis(new));
    let rating = edit_distance_rating(&a, &b);
    let text = if rating == 0 && a == b {
        "The two styles are identical.".to_string()
    } else {
        format!(
            "The new style description differs from the previous one by {} edit(s) across {} characters.",
            levenshtein(&a, &b),
            a.chars().count().max(b.chars().count())
        )
    };
    format!("Comparison: {text}\nRating: {rating}")
}

fn truncate_chars(text: &str, max: usize) -> String {
    text.chars().take(max).collect()
}

fn summarize_style(style: &str) -> String {
    let summary = match parse_markdown_description(style) {
        Ok(desc) => [StyleDimension::Tone, StyleDimension::Voice, StyleDimension::SentenceStructure]
            .into_iter()
            .map(|d| {
                desc.section_text(d)
                    .lines()
                    .next()
                    .unwrap_or_default()
                    .to_string()
            })
            .collect::<Vec<_>>()
            .join(" "),
        Err(_) => style.split_whitespace().collect::<Vec<_>>().join(" "),
    };
    truncate_chars(&summary, SUMMARY_MAX_CHARS)
}

fn self_eval(b: &Bindings) -> u8 {
    let Ok(task) = get(b, "task").parse::<TemplateId>() else {
        return 0;
    };
    let Ok(inputs) = serde_json::from_str::<Bindings>(get(b, "inputs")) else {
        return 0;
    };
    let output = get(b, "output");
    let expected = mock_answer(task, &inputs);
    let ok = match task {
        TemplateId::Rewrite | TemplateId::Apply | TemplateId::Continue | TemplateId::Inline => {
            let tag_end = expected.find(']').map(|i| i + 1).unwrap_or(expected.len());
            output.contains(&expected[..tag_end])
        }
        _ => output == expected,
    };
    if ok {
        10
    } else {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::parse::{parse_comparison_output, parse_style_output};
    use crate::style::default_description;

    #[test]
    fn identical_descriptions_rate_zero() {
        let d = default_description().to_markdown();
        let (_, r) = parse_comparison_output(&compare(&d, &d)).unwrap();
        assert_eq!(r.value(), 0);
    }

    #[test]
    fn disjoint_descriptions_rate_ten() {
        let a = crate::style::StyleDescription::from_sections(["aaaa", "aaa", "aa", "aaaa", "a"])
            .unwrap()
            .to_markdown();
        let b = crate::style::StyleDescription::from_sections(["bb", "bbbbb", "b", "bbb", "bbbb"])
            .unwrap()
            .to_markdown();
        let (_, r) = parse_comparison_output(&compare(&a, &b)).unwrap();
        assert_eq!(r.value(), 10);
    }

    #[test]
    fn five_word_sentences() {
        let doc = "The cat sat on mats. Dogs ran in the park. We all went home today.";
        let desc = parse_style_output(&extract(doc, "", "")).unwrap();
        assert!(desc
            .section_text(StyleDimension::SentenceStructure)
            .contains("avg_sentence_len=5"));
    }

    #[test]
    fn stat_formatting() {
        assert_eq!(format_stat(5.0), "5");
        assert_eq!(format_stat(5.5), "5.5");
        assert_eq!(format_stat(16.0 / 3.0), "5.33");
        assert_eq!(format_stat(0.0), "0");
    }

    #[test]
    fn feedback_digest_changes_voice_section() {
        let a = extract("Hi there.", "", "");
        let b = extract("Hi there.", "short punchy sentences", "");
        assert_ne!(a, b);
        assert!(a.contains("likes_digest=none"));
    }

    #[test]
    fn generation_tags_are_stable_and_input_sensitive() {
        let t1 = generation_tag(TemplateId::Rewrite, &["s", "x"]);
        assert_eq!(t1, generation_tag(TemplateId::Rewrite, &["s", "x"]));
        assert_ne!(t1, generation_tag(TemplateId::Rewrite, &["s", "y"]));
        assert_ne!(
            generation_tag(TemplateId::Rewrite, &["ab", "c"]),
            generation_tag(TemplateId::Rewrite, &["a", "bc"])
        );
        assert_eq!(t1.len(), "[RW:12345678]".len());
    }

    #[test]
    fn self_eval_scores_own_output_ten_and_tampered_zero() {
        let mut inputs = Bindings::new();
        inputs.insert("document".into(), "One two three. Four five six.".into());
        inputs.insert("current_style".into(), default_description().to_markdown());
        inputs.insert("like_summary".into(), String::new());
        inputs.insert("dislike_summary".into(), String::new());
        let out = mock_answer(TemplateId::StyleExtract, &inputs);
        let mut b = Bindings::new();
        b.insert("task".into(), "style_extract".into());
        b.insert("inputs".into(), serde_json::to_string(&inputs).unwrap());
        b.insert("output".into(), out.clone());
        assert_eq!(self_eval(&b), 10);
        b.insert("output".into(), out.replace("avg_sentence_len=3", "avg_sentence_len=4"));
        assert_eq!(self_eval(&b), 0);
    }

    #[test]
    fn summary_is_bounded() {
        let long = "word ".repeat(200);
        assert!(summarize_style(&long).chars().count() <= SUMMARY_MAX_CHARS);
    }
}
