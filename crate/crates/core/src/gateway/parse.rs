//! Strict parsers for provider output.
//!
//! Ratings and scores are rejected, never clamped, when they are not a bare
//! integer in `0..=10`.

use crate::error::Error;
use crate::model::Rating;
use crate::style::{parse_markdown_description, StyleDescription};

fn malformed(msg: impl Into<String>) -> Error {
    Error::MalformedProviderOutput(msg.into())
}

/// Parses a bare integer in `0..=10`. Signs, decimals and surrounding text
/// are rejected; surrounding whitespace is not.
pub fn parse_rating(text: &str) -> Result<Rating, Error> {
    let t = text.trim();
    if t.is_empty() || t.len() > 3 || !t.bytes().all(|b| b.is_ascii_digit()) {
        return Err(malformed(format!("rating {t:?} is not an integer in 0..=10")));
    }
    let value: u8 = t
        .parse()
        .map_err(|_| malformed(format!("rating {t:?} is not an integer in 0..=10")))?;
    Rating::new(value).ok_or_else(|| malformed(format!("rating {value} is outside 0..=10")))
}

fn labeled_lines<'a>(text: &'a str, label: &str) -> Vec<&'a str> {
    text.lines()
        .filter_map(|line| {
            let line = line.trim().trim_start_matches(['*', '#', ' ']);
            let (head, rest) = line.split_once(':')?;
            head.trim_matches('*')
                .trim()
                .eq_ignore_ascii_case(label)
                .then(|| rest.trim().trim_matches('*').trim())
        })
        .collect()
}

/// Parses `Comparison: ...` / `Rating: N` output. The comparison text is
/// everything that is not the rating line, with the `Comparison:` label
/// stripped.
pub fn parse_comparison_output(text: &str) -> Result<(String, Rating), Error> {
    let ratings = labeled_lines(text, "rating");
    let rating = match ratings.as_slice() {
        [one] => parse_rating(one)?,
        [] => return Err(malformed("comparison output has no `Rating:` line")),
        _ => return Err(malformed("comparison output has several `Rating:` lines")),
    };
    let mut comparison = Vec::new();
    for line in text.lines() {
        let stripped = line.trim().trim_start_matches(['*', '#', ' ']);
        let lower = stripped.to_ascii_lowercase();
        if lower.starts_with("rating") && stripped.contains(':') {
            continue;
        }
        let body = match stripped.split_once(':') {
            Some((head, rest)) if head.trim_matches('*').trim().eq_ignore_ascii_case("comparison") => {
                rest.trim()
            }
            _ => line.trim(),
        };
        if !body.is_empty() {
            comparison.push(body.to_string());
        }
    }
    if comparison.is_empty() {
        return Err(malformed("comparison output has no comparison text"));
    }
    Ok((comparison.join("\n"), rating))
}

/// Parses `Score: N` from a self-evaluation answer.
pub fn parse_score_output(text: &str) -> Result<u8, Error> {
    match labeled_lines(text, "score").as_slice() {
        [one] => parse_rating(one).map(u8::from),
        [] => parse_rating(text).map(u8::from),
        _ => Err(malformed("self-evaluation output has several `Score:` lines")),
    }
}

/// Parses a five-section markdown style description.
pub fn parse_style_output(text: &str) -> Result<StyleDescription, Error> {
    parse_markdown_description(text).map_err(|e| malformed(format!("style description: {e}")))
}

/// Renders feedback items as one line each: a JSON-quoted excerpt, then
/// optionally ` because ` and a JSON-quoted reason.
pub fn format_feedback_items<'a>(items: impl IntoIterator<Item = (&'a str, Option<&'a str>)>) -> String {
    let mut out = String::new();
    for (excerpt, reason) in items {
        out.push_str("- ");
        out.push_str(&serde_json::to_string(excerpt).expect("string serializes"));
        if let Some(reason) = reason {
            out.push_str(" because ");
            out.push_str(&serde_json::to_string(reason).expect("string serializes"));
        }
        out.push('\n');
    }
    out
}

/// Inverse of [`format_feedback_items`], returning `(excerpt, reason)` pairs.
pub fn parse_feedback_items(text: &str) -> Result<Vec<(String, Option<String>)>, Error> {
    let mut items = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let rest = line
            .strip_prefix("- ")
            .ok_or_else(|| malformed(format!("feedback item {line:?} lacks `- `")))?;
        let mut stream = serde_json::Deserializer::from_str(rest).into_iter::<String>();
        let excerpt = stream
            .next()
            .ok_or_else(|| malformed("feedback item has no excerpt"))?
            .map_err(|e| malformed(e.to_string()))?;
        let tail = rest[stream.byte_offset()..].trim_start();
        let reason = if tail.is_empty() {
            None
        } else {
            let quoted = tail
                .strip_prefix("because ")
                .ok_or_else(|| malformed(format!("unexpected text after excerpt: {tail:?}")))?;
            Some(serde_json::from_str::<String>(quoted).map_err(|e| malformed(e.to_string()))?)
        };
        items.push((excerpt, reason));
    }
    Ok(items)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rating_is_strict() {
        assert_eq!(parse_rating(" 7 ").unwrap().value(), 7);
        assert_eq!(parse_rating("10").unwrap().value(), 10);
        for bad in ["11", "-1", "3.5", "", "seven", "+3", "1000", "07x"] {
            assert!(
                matches!(parse_rating(bad), Err(Error::MalformedProviderOutput(_))),
                "{bad:?}"
            );
        }
    }

    #[test]
    fn comparison_output() {
        let (text, rating) =
            parse_comparison_output("Comparison: The new style is terser.\nRating: 4").unwrap();
        assert_eq!(text, "The new style is terser.");
        assert_eq!(rating.value(), 4);
        let (_, rating) = parse_comparison_output("**Comparison:** same\n**Rating:** 0").unwrap();
        assert_eq!(rating.value(), 0);
        assert!(parse_comparison_output("Comparison: x\nRating: 11").is_err());
        assert!(parse_comparison_output("Comparison: x").is_err());
        assert!(parse_comparison_output("Rating: 2").is_err());
        assert!(parse_comparison_output("Comparison: x\nRating: 1\nRating: 2").is_err());
    }

    #[test]
    fn score_output() {
        assert_eq!(parse_score_output("Score: 9").unwrap(), 9);
        assert_eq!(parse_score_output("8").unwrap(), 8);
        assert!(parse_score_output("Score: 12").is_err());
    }

    #[test]
    fn feedback_items_with_awkward_text() {
        let items = [("line one\nline \"two\"", Some("because \"yes\"")), ("plain", None)];
        let text = format_feedback_items(items.iter().map(|(e, r)| (*e, *r)));
        let parsed = parse_feedback_items(&text).unwrap();
        assert_eq!(parsed[0].0, "line one\nline \"two\"");
        assert_eq!(parsed[0].1.as_deref(), Some("because \"yes\""));
        assert_eq!(parsed[1], ("plain".to_string(), None));
    }

    proptest! {
        #[test]
        fn feedback_items_round_trip(items in prop::collection::vec((".{1,12}", prop::option::of(".{0,8}")), 0..6)) {
            let text = format_feedback_items(items.iter().map(|(e, r)| (e.as_str(), r.as_deref())));
            prop_assert_eq!(parse_feedback_items(&text).unwrap(), items);
        }
    }
}
