//! Likes and dislikes: highlight lifecycle, reanchoring after edits, and the
//! cached summaries fed into style updates.

use serde::{Deserialize, Serialize};

use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::events::{HighlightChanged, HighlightRemoved, HighlightsReanchored, ReanchorStatus};
use crate::gateway::parse::format_feedback_items;
use crate::gateway::{Bindings, TemplateId};
use crate::model::{
    AnchorStatus, DocumentId, EventType, Highlight, HighlightId, Polarity, Timestamp,
};
use crate::richtext::{RichText, TextRange};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackSummary {
    pub like_summary: String,
    pub dislike_summary: String,
    /// Ids of the highlights the summaries were computed from, ascending.
    pub computed_over: Vec<HighlightId>,
    pub computed_at: Timestamp,
}

/// Checks that `range` is non-empty and inside `body`.
pub fn check_range(body: &RichText, range: TextRange) -> Result<()> {
    if range.is_empty() {
        return Err(Error::EmptyRange);
    }
    let len = body.char_len();
    if range.end > len {
        return Err(Error::OutOfBounds {
            start: range.start,
            end: range.end,
            len,
        });
    }
    Ok(())
}

/// Re-locates each anchored highlight in `body`. A highlight whose excerpt
/// still sits at its recorded offsets stays `anchored`; otherwise a single
/// occurrence elsewhere makes it `moved` there, and zero or several
/// occurrences make it `orphaned` (offsets kept, not rendered). Only
/// offsets and status ever change.
pub fn reanchor_highlights(
    body: &RichText,
    highlights: impl IntoIterator<Item = Highlight>,
) -> Vec<(Highlight, AnchorStatus)> {
    let mut out = Vec::new();
    for mut h in highlights {
        let Some(anchor) = h.anchor else { continue };
        let status = if body.slice(anchor).as_deref() == Some(h.excerpt.as_str()) {
            AnchorStatus::Anchored
        } else {
            match body.find_all(&h.excerpt).as_slice() {
                [start] => {
                    h.anchor = Some(TextRange::new(*start, start + h.excerpt.chars().count()));
                    AnchorStatus::Moved
                }
                _ => AnchorStatus::Orphaned,
            }
        };
        h.anchor_status = Some(status);
        out.push((h, status));
    }
    out
}

fn polarity_event(p: Polarity) -> EventType {
    match p {
        Polarity::Like => EventType::LikeAdded,
        Polarity::Dislike => EventType::DislikeAdded,
    }
}

fn clean_reason(reason: Option<String>) -> Option<String> {
    reason.map(|r| r.trim().to_string()).filter(|r| !r.is_empty())
}

impl Engine {
    fn store_highlight(&self, h: Highlight) -> Result<Highlight> {
        let mut inner = self.lock();
        let now = self.clock.now();
        let h = Highlight {
            id: inner.model.next_ids.highlight(),
            created_at: now,
            ..h
        };
        inner.model.highlights.insert(h.id, h.clone());
        inner.ledger_version += 1;
        inner.emit(now, polarity_event(h.polarity), &HighlightChanged { highlight: h.clone() })?;
        Ok(h)
    }

    /// Likes or dislikes a span of a document; the excerpt is captured from
    /// the current body.
    pub fn add_highlight(
        &self,
        document_id: DocumentId,
        range: TextRange,
        polarity: Polarity,
        reason: Option<String>,
    ) -> Result<Highlight> {
        let excerpt = {
            let inner = self.lock();
            let body = &inner.document(document_id)?.body;
            check_range(body, range)?;
            body.slice(range).expect("range checked")
        };
        self.store_highlight(Highlight {
            id: HighlightId(0),
            document_id: Some(document_id),
            excerpt,
            anchor: Some(range),
            anchor_status: Some(AnchorStatus::Anchored),
            polarity,
            reason: clean_reason(reason),
            active: true,
            created_at: self.clock.now(),
        })
    }

    /// A like or dislike typed in by hand, with no document anchor.
    pub fn add_manual_highlight(
        &self,
        polarity: Polarity,
        excerpt: &str,
        reason: Option<String>,
    ) -> Result<Highlight> {
        if excerpt.trim().is_empty() {
            return Err(Error::EmptyExcerpt);
        }
        self.store_highlight(Highlight {
            id: HighlightId(0),
            document_id: None,
            excerpt: excerpt.to_string(),
            anchor: None,
            anchor_status: None,
            polarity,
            reason: clean_reason(reason),
            active: true,
            created_at: self.clock.now(),
        })
    }

    pub fn set_active(&self, id: HighlightId, active: bool) -> Result<Highlight> {
        let mut inner = self.lock();
        let now = self.clock.now();
        let h = inner
            .model
            .highlights
            .get_mut(&id)
            .ok_or(Error::UnknownHighlight(id))?;
        h.active = active;
        let h = h.clone();
        inner.ledger_version += 1;
        inner.emit(now, EventType::HighlightToggled, &HighlightChanged { highlight: h.clone() })?;
        Ok(h)
    }

    pub fn delete_highlight(&self, id: HighlightId) -> Result<()> {
        let mut inner = self.lock();
        let now = self.clock.now();
        inner
            .model
            .highlights
            .remove(&id)
            .ok_or(Error::UnknownHighlight(id))?;
        inner.ledger_version += 1;
        inner.emit(now, EventType::HighlightDeleted, &HighlightRemoved { highlight_id: id })?;
        Ok(())
    }

    pub fn list_highlights(&self) -> Vec<Highlight> {
        self.lock().model.highlights.values().cloned().collect()
    }

    pub fn get_highlight(&self, id: HighlightId) -> Result<Highlight> {
        self.lock()
            .model
            .highlights
            .get(&id)
            .cloned()
            .ok_or(Error::UnknownHighlight(id))
    }

    /// Re-locates the document's highlights against its current body.
    pub fn reanchor(&self, document_id: DocumentId) -> Result<Vec<ReanchorStatus>> {
        let mut inner = self.lock();
        let now = self.clock.now();
        let body = inner.document(document_id)?.body.clone();
        let mine: Vec<Highlight> = inner
            .model
            .highlights
            .values()
            .filter(|h| h.document_id == Some(document_id))
            .cloned()
            .collect();
        let results = reanchor_highlights(&body, mine);
        let statuses = results
            .iter()
            .map(|(h, status)| ReanchorStatus {
                highlight_id: h.id,
                status: *status,
            })
            .collect();
        let highlights: Vec<Highlight> = results.into_iter().map(|(h, _)| h).collect();
        for h in &highlights {
            inner.model.highlights.insert(h.id, h.clone());
        }
        inner.emit(
            now,
            EventType::HighlightsReanchored,
            &HighlightsReanchored {
                document_id,
                highlights,
            },
        )?;
        Ok(statuses)
    }

    /// Summaries of the active likes and dislikes. Cached until the ledger
    /// changes; a result that arrives after a newer mutation is discarded
    /// and recomputed. No provider call is made for an empty side.
    pub fn summarize_active(&self) -> Result<FeedbackSummary> {
        const ATTEMPTS: usize = 4;
        let mut latest = None;
        for _ in 0..ATTEMPTS {
            let (version, likes, dislikes, ids, now) = {
                let inner = self.lock();
                if let Some(c) = &inner.summary_cache {
                    if c.version == inner.ledger_version {
                        return Ok(c.summary.clone());
                    }
                }
                let active: Vec<&Highlight> = inner.model.highlights.values().filter(|h| h.active).collect();
                let pick = |p: Polarity| -> Vec<(String, Option<String>)> {
                    active
                        .iter()
                        .filter(|h| h.polarity == p)
                        .map(|h| (h.excerpt.clone(), h.reason.clone()))
                        .collect()
                };
                (
                    inner.ledger_version,
                    pick(Polarity::Like),
                    pick(Polarity::Dislike),
                    active.iter().map(|h| h.id).collect::<Vec<_>>(),
                    self.clock.now(),
                )
            };
            let summary = FeedbackSummary {
                like_summary: self.summarize_side("liked", &likes)?,
                dislike_summary: self.summarize_side("disliked", &dislikes)?,
                computed_over: ids,
                computed_at: now,
            };
            let mut inner = self.lock();
            if inner.ledger_version == version {
                inner.summary_cache = Some(crate::engine::CachedSummary {
                    version,
                    summary: summary.clone(),
                });
                return Ok(summary);
            }
            tracing::debug!("feedback changed while summarizing; recomputing");
            latest = Some(summary);
        }
        Ok(latest.expect("loop ran"))
    }

    fn summarize_side(&self, polarity: &str, items: &[(String, Option<String>)]) -> Result<String> {
        if items.is_empty() {
            return Ok(String::new());
        }
        let mut b = Bindings::new();
        b.insert("polarity".into(), polarity.into());
        b.insert(
            "items".into(),
            format_feedback_items(items.iter().map(|(e, r)| (e.as_str(), r.as_deref()))),
        );
        Ok(self.gateway.run(TemplateId::FeedbackSummarize, b)?.trim().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{CompletionRequest, Gateway, Provider, ProviderError, RetryPolicy, TemplateSet};
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    fn engine_with_doc(text: &str) -> (Engine, DocumentId) {
        let e = Engine::mock();
        let d = e.create_document("d", RichText::from_plain(text)).unwrap();
        (e, d.id)
    }

    #[test]
    fn highlight_with_reason() {
        let (e, d) = engine_with_doc("The prose has great word choice here.");
        let h = e
            .add_highlight(d, TextRange::new(4, 8), Polarity::Like, Some("great word choice".into()))
            .unwrap();
        assert_eq!(h.excerpt, "pros");
        assert_eq!(h.reason.as_deref(), Some("great word choice"));
        assert!(h.active);
        let d2 = e.add_highlight(d, TextRange::new(0, 3), Polarity::Dislike, None).unwrap();
        assert_eq!(d2.reason, None);
    }

    #[test]
    fn range_errors() {
        let (e, d) = engine_with_doc("abc");
        assert!(matches!(
            e.add_highlight(d, TextRange::new(1, 1), Polarity::Like, None),
            Err(Error::EmptyRange)
        ));
        assert!(matches!(
            e.add_highlight(d, TextRange::new(1, 9), Polarity::Like, None),
            Err(Error::OutOfBounds { len: 3, .. })
        ));
        assert!(matches!(
            e.add_highlight(DocumentId(9), TextRange::new(0, 1), Polarity::Like, None),
            Err(Error::UnknownDocument(_))
        ));
    }

    #[test]
    fn manual_highlights() {
        let e = Engine::mock();
        let h = e
            .add_manual_highlight(Polarity::Like, "short punchy sentences", None)
            .unwrap();
        assert_eq!(h.document_id, None);
        assert!(matches!(
            e.add_manual_highlight(Polarity::Like, "  ", None),
            Err(Error::EmptyExcerpt)
        ));
        let dis = e.add_manual_highlight(Polarity::Dislike, "passive voice", None).unwrap();
        e.set_active(dis.id, false).unwrap();
        let s = e.summarize_active().unwrap();
        assert_eq!(s.computed_over, vec![h.id]);
        assert_eq!(s.dislike_summary, "");
    }

    #[test]
    fn toggle_and_delete() {
        let e = Engine::mock();
        let h = e.add_manual_highlight(Polarity::Like, "x", None).unwrap();
        e.set_active(h.id, false).unwrap();
        assert!(e.summarize_active().unwrap().computed_over.is_empty());
        e.set_active(h.id, true).unwrap();
        assert_eq!(e.summarize_active().unwrap().computed_over, vec![h.id]);
        e.delete_highlight(h.id).unwrap();
        assert!(matches!(e.set_active(h.id, true), Err(Error::UnknownHighlight(_))));
        assert!(matches!(e.delete_highlight(h.id), Err(Error::UnknownHighlight(_))));
    }

    #[test]
    fn mock_summary_is_sorted_join() {
        let e = Engine::mock();
        for x in ["zeta line", "alpha line", "mid line"] {
            e.add_manual_highlight(Polarity::Like, x, Some("because".into())).unwrap();
        }
        let inactive = e.add_manual_highlight(Polarity::Dislike, "nope", None).unwrap();
        e.set_active(inactive.id, false).unwrap();
        let s = e.summarize_active().unwrap();
        // independent oracle: sort then join
        let mut expected = ["zeta line", "alpha line", "mid line"];
        expected.sort_unstable();
        assert_eq!(s.like_summary, expected.join("; "));
        assert_eq!(s.dislike_summary, "");
    }

    struct Counting(AtomicUsize);

    impl Provider for Counting {
        fn name(&self) -> &str {
            "counting"
        }

        fn complete(&self, r: &CompletionRequest) -> std::result::Result<String, ProviderError> {
            self.0.fetch_add(1, Ordering::SeqCst);
            Ok(crate::gateway::mock::mock_complete(r))
        }
    }

    #[test]
    fn empty_ledger_makes_no_calls_and_cache_holds() {
        let provider = Arc::new(Counting(AtomicUsize::new(0)));
        let gateway = Gateway::new(provider.clone(), TemplateSet::builtin(), RetryPolicy::immediate(1));
        let e = Engine::new(gateway, Arc::new(crate::clock::ManualClock::default()), Default::default());
        let s = e.summarize_active().unwrap();
        assert_eq!((s.like_summary.as_str(), s.dislike_summary.as_str()), ("", ""));
        assert_eq!(provider.0.load(Ordering::SeqCst), 0);
        e.add_manual_highlight(Polarity::Like, "a", None).unwrap();
        e.summarize_active().unwrap();
        e.summarize_active().unwrap();
        assert_eq!(provider.0.load(Ordering::SeqCst), 1);
        e.add_manual_highlight(Polarity::Dislike, "b", None).unwrap();
        e.summarize_active().unwrap();
        assert_eq!(provider.0.load(Ordering::SeqCst), 3);
    }

    fn anchored(id: u64, excerpt: &str, start: usize) -> Highlight {
        Highlight {
            id: HighlightId(id),
            document_id: Some(DocumentId(1)),
            excerpt: excerpt.into(),
            anchor: Some(TextRange::new(start, start + excerpt.chars().count())),
            anchor_status: Some(AnchorStatus::Anchored),
            polarity: Polarity::Like,
            reason: Some("r".into()),
            active: false,
            created_at: chrono::Utc::now(),
        }
    }

    #[test]
    fn reanchor_cases() {
        let body = RichText::from_plain("one two three");
        let h = anchored(1, "two", 4);
        let r = reanchor_highlights(&body, [h.clone()]);
        assert_eq!(r[0].1, AnchorStatus::Anchored);

        let inserted = "XYZ ";
        let shifted = RichText::from_plain(&format!("{inserted}one two three"));
        let r = reanchor_highlights(&shifted, [h.clone()]);
        assert_eq!(r[0].1, AnchorStatus::Moved);
        // oracle: old offset plus the inserted length
        assert_eq!(r[0].0.anchor.unwrap().start, 4 + inserted.chars().count());

        let gone = RichText::from_plain("one three");
        let r = reanchor_highlights(&gone, [h.clone()]);
        assert_eq!(r[0].1, AnchorStatus::Orphaned);
        assert_eq!(r[0].0.excerpt, h.excerpt);
        assert_eq!((r[0].0.polarity, r[0].0.active), (h.polarity, h.active));

        let ambiguous = RichText::from_plain("X two two");
        assert_eq!(reanchor_highlights(&ambiguous, [h])[0].1, AnchorStatus::Orphaned);
    }

    #[test]
    fn document_edit_reanchors() {
        let (e, d) = engine_with_doc("alpha beta gamma");
        let h = e.add_highlight(d, TextRange::new(6, 10), Polarity::Like, None).unwrap();
        let up = e
            .update_document(d, None, Some(RichText::from_plain("new alpha beta gamma")))
            .unwrap();
        assert_eq!(up.reanchored[0].status, AnchorStatus::Moved);
        let h2 = e.get_highlight(h.id).unwrap();
        assert_eq!(h2.anchor, Some(TextRange::new(10, 14)));
        let statuses = e.reanchor(d).unwrap();
        assert_eq!(statuses[0].status, AnchorStatus::Anchored);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn reanchor_keeps_content(prefix in "[a-z ]{0,12}", excerpt in "[a-z]{1,6}", text in "[a-z ]{0,30}") {
                let h = anchored(1, &excerpt, 0);
                let body = RichText::from_plain(&format!("{prefix}{text}"));
                for (after, _) in reanchor_highlights(&body, [h.clone()]) {
                    prop_assert_eq!(&after.excerpt, &h.excerpt);
                    prop_assert_eq!(&after.reason, &h.reason);
                    prop_assert_eq!(after.active, h.active);
                    prop_assert_eq!(after.polarity, h.polarity);
                    if after.anchor_status != Some(AnchorStatus::Orphaned) {
                        prop_assert_eq!(body.slice(after.anchor.unwrap()), Some(h.excerpt.clone()));
                    }
                }
            }
        }
    }
}
