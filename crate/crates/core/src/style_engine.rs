//! Style update pipeline: candidate computation through the gateway,
//! threshold-gated commits, direct edits, reverts, and the analysis runs
//! fired by the per-document character counter.

use serde::{Deserialize, Serialize};

use crate::engine::{Engine, Inner};
use crate::error::{Error, Result};
use crate::events::{AnalysisAbandoned, StyleCommitted, StyleNotUpdated, TriggerCause};
use crate::gateway::mock::SUMMARY_MAX_CHARS;
use crate::gateway::parse::{parse_comparison_output, parse_style_output};
use crate::gateway::{Bindings, Gateway, TemplateId};
use crate::model::{
    DocumentId, EventType, Rating, StyleComparison, StyleHistoryEntry, StyleId, StyleProfile,
    StyleSource,
};
use crate::richtext::RichText;
use crate::style::{validate_style_description, StyleDescription};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisTrigger {
    pub document_id: DocumentId,
    pub cause: TriggerCause,
}

/// Sources that go through the threshold gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GatedSource {
    Automatic,
    ManualRefresh,
}

impl GatedSource {
    fn style_source(self) -> StyleSource {
        match self {
            GatedSource::Automatic => StyleSource::Automatic,
            GatedSource::ManualRefresh => StyleSource::ManualRefresh,
        }
    }

    fn cause(self) -> TriggerCause {
        match self {
            GatedSource::Automatic => TriggerCause::AutomaticCounter,
            GatedSource::ManualRefresh => TriggerCause::ManualRefresh,
        }
    }
}

impl From<TriggerCause> for GatedSource {
    fn from(c: TriggerCause) -> Self {
        match c {
            TriggerCause::AutomaticCounter => GatedSource::Automatic,
            TriggerCause::ManualRefresh => GatedSource::ManualRefresh,
        }
    }
}

/// An uncommitted style proposal and how far it is from the style it was
/// computed against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateUpdate {
    pub based_on: StyleId,
    pub description: StyleDescription,
    pub comparison_text: String,
    pub difference_rating: Rating,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    Committed,
    NoUpdateNeeded,
    /// An automatic candidate was significant, but a lock was switched on
    /// before it could be committed.
    Suppressed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateOutcome {
    pub kind: OutcomeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub committed_style: Option<StyleProfile>,
    pub based_on: StyleId,
    pub comparison_text: String,
    pub difference_rating: Rating,
    pub threshold: u8,
}

/// How a dispatched analysis ended.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum AnalysisReport {
    Completed { outcome: UpdateOutcome },
    Failed { kind: String, message: String },
}

fn compare(gateway: &Gateway, old: &StyleDescription, new: &StyleDescription) -> Result<(String, Rating)> {
    let mut b = Bindings::new();
    b.insert("old_style".into(), old.to_markdown());
    b.insert("new_style".into(), new.to_markdown());
    parse_comparison_output(&gateway.run(TemplateId::StyleCompare, b)?)
}

/// Short summary of `description`, at most [`SUMMARY_MAX_CHARS`] characters.
pub fn summarize_style(gateway: &Gateway, description: &StyleDescription) -> Result<String> {
    let mut b = Bindings::new();
    b.insert("style".into(), description.to_markdown());
    let text = gateway.run(TemplateId::StyleSummarize, b)?;
    let summary: String = text
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .chars()
        .take(SUMMARY_MAX_CHARS)
        .collect();
    if summary.is_empty() {
        return Err(Error::MalformedProviderOutput("empty style summary".into()));
    }
    Ok(summary)
}

/// Runs style extraction over exactly these four inputs, then compares the
/// result with `current`.
pub fn compute_candidate(
    gateway: &Gateway,
    document: &str,
    current: &StyleProfile,
    like_summary: &str,
    dislike_summary: &str,
) -> Result<CandidateUpdate> {
    let mut b = Bindings::new();
    b.insert("current_style".into(), current.description.to_markdown());
    b.insert("like_summary".into(), like_summary.into());
    b.insert("dislike_summary".into(), dislike_summary.into());
    b.insert("document".into(), document.into());
    let description = parse_style_output(&gateway.run(TemplateId::StyleExtract, b)?)?;
    let (comparison_text, difference_rating) = compare(gateway, &current.description, &description)?;
    Ok(CandidateUpdate {
        based_on: current.id,
        description,
        comparison_text,
        difference_rating,
    })
}

fn event_for(source: StyleSource) -> EventType {
    match source {
        StyleSource::Automatic => EventType::StyleUpdateAutomatic,
        StyleSource::ManualRefresh => EventType::StyleUpdateManualRequest,
        StyleSource::ManualEdit => EventType::StyleUpdateDirectEdit,
        StyleSource::Revert => EventType::StyleRevert,
        StyleSource::Default => unreachable!("the default style is never committed"),
    }
}

struct Commit {
    description: StyleDescription,
    summary: String,
    source: StyleSource,
    reverted_from: Option<StyleId>,
    comparison_text: String,
    difference_rating: Rating,
    document_id: Option<DocumentId>,
    threshold: Option<u8>,
}

impl Engine {
    pub fn current_style(&self) -> StyleProfile {
        self.lock().model.head().profile.clone()
    }

    /// Newest first; each entry carries its comparison with the entry below.
    pub fn history(&self) -> Vec<StyleHistoryEntry> {
        self.lock().model.style_history.iter().rev().cloned().collect()
    }

    fn commit_locked(&self, inner: &mut Inner, c: Commit) -> Result<StyleHistoryEntry> {
        let now = self.clock.now();
        let old_id = inner.model.head().profile.id;
        let id = inner.model.next_ids.style();
        let entry = StyleHistoryEntry {
            profile: StyleProfile {
                id,
                summary: c.summary,
                summary_generated_at: now,
                description: c.description,
                source: c.source,
                reverted_from: c.reverted_from,
                created_at: now,
            },
            comparison: Some(StyleComparison {
                old_style_id: old_id,
                new_style_id: id,
                comparison_text: c.comparison_text,
                difference_rating: c.difference_rating,
            }),
        };
        inner.model.style_history.push(entry.clone());
        inner.emit(
            now,
            event_for(c.source),
            &StyleCommitted {
                entry: entry.clone(),
                document_id: c.document_id,
                threshold: c.threshold,
                dispatched_at: None,
            },
        )?;
        Ok(entry)
    }

    /// Commits `candidate` iff its rating exceeds the update threshold;
    /// otherwise records a no-update verdict and changes nothing. Candidates
    /// computed against a style that is no longer committed are rejected.
    pub fn commit_if_significant(
        &self,
        candidate: CandidateUpdate,
        source: GatedSource,
        document_id: Option<DocumentId>,
    ) -> Result<UpdateOutcome> {
        let threshold = {
            let inner = self.lock();
            check_fresh(&inner, candidate.based_on)?;
            inner.model.settings.update_threshold
        };
        let outcome = |kind, committed_style| UpdateOutcome {
            kind,
            committed_style,
            based_on: candidate.based_on,
            comparison_text: candidate.comparison_text.clone(),
            difference_rating: candidate.difference_rating,
            threshold,
        };
        if candidate.difference_rating.value() <= threshold {
            let mut inner = self.lock();
            check_fresh(&inner, candidate.based_on)?;
            let now = self.clock.now();
            inner.emit(
                now,
                EventType::StyleNoUpdate,
                &StyleNotUpdated {
                    based_on: candidate.based_on,
                    source: source.style_source(),
                    difference_rating: candidate.difference_rating,
                    comparison_text: candidate.comparison_text.clone(),
                    threshold,
                    document_id,
                    dispatched_at: None,
                },
            )?;
            return Ok(outcome(OutcomeKind::NoUpdateNeeded, None));
        }
        let summary = summarize_style(&self.gateway, &candidate.description)?;
        let mut inner = self.lock();
        check_fresh(&inner, candidate.based_on)?;
        if source == GatedSource::Automatic && automatic_locked(&inner, document_id) {
            return Ok(outcome(OutcomeKind::Suppressed, None));
        }
        let entry = self.commit_locked(
            &mut inner,
            Commit {
                description: candidate.description.clone(),
                summary,
                source: source.style_source(),
                reverted_from: None,
                comparison_text: candidate.comparison_text.clone(),
                difference_rating: candidate.difference_rating,
                document_id,
                threshold: Some(threshold),
            },
        )?;
        Ok(outcome(OutcomeKind::Committed, Some(entry.profile)))
    }

    /// Explicit refresh: ignores the counter and the locks, keeps the
    /// threshold gate. Waits for any analysis already running for the
    /// document.
    pub fn force_refresh(&self, document_id: DocumentId) -> Result<UpdateOutcome> {
        {
            let mut inner = self.lock();
            inner.document(document_id)?;
            inner = self.wait_idle(inner, document_id);
            inner.in_flight.insert(document_id);
            inner.document_mut(document_id)?.chars_since_analysis = 0;
            self.emit_dispatched(
                &mut inner,
                AnalysisTrigger {
                    document_id,
                    cause: TriggerCause::ManualRefresh,
                },
            )?;
        }
        self.run_dispatched(document_id, GatedSource::ManualRefresh)
    }

    /// Runs an analysis fired by the counter and reports how it ended.
    pub(crate) fn run_triggered(&self, trigger: AnalysisTrigger) -> AnalysisReport {
        match self.run_dispatched(trigger.document_id, trigger.cause.into()) {
            Ok(outcome) => AnalysisReport::Completed { outcome },
            Err(e) => AnalysisReport::Failed {
                kind: e.kind().to_string(),
                message: e.to_string(),
            },
        }
    }

    /// Runs one dispatched analysis, releases the document, and then runs
    /// any automatic analysis that became due while it was in flight.
    fn run_dispatched(&self, document_id: DocumentId, source: GatedSource) -> Result<UpdateOutcome> {
        let first = self.analyze_and_release(document_id, source);
        let mut next = first.1;
        while let Some(t) = next {
            next = self.analyze_and_release(t.document_id, t.cause.into()).1;
        }
        first.0
    }

    fn analyze_and_release(
        &self,
        document_id: DocumentId,
        source: GatedSource,
    ) -> (Result<UpdateOutcome>, Option<AnalysisTrigger>) {
        let result = self.analyze(document_id, source);
        let abandoned = match &result {
            Ok(o) if o.kind == OutcomeKind::Suppressed => {
                Some(("Suppressed".to_string(), "a style lock was enabled during analysis".to_string()))
            }
            Ok(_) => None,
            Err(e) => Some((e.kind().to_string(), e.to_string())),
        };
        let mut inner = self.lock();
        let mut follow_up = None;
        let released = (|| -> Result<()> {
            if let Some((kind, message)) = abandoned {
                tracing::warn!(document = %document_id, kind, message, "style analysis abandoned");
                let now = self.clock.now();
                inner.emit(
                    now,
                    EventType::StyleAnalysisAbandoned,
                    &AnalysisAbandoned {
                        document_id,
                        cause: source.cause(),
                        kind,
                        message,
                    },
                )?;
            }
            inner.in_flight.remove(&document_id);
            follow_up = inner.register_edit(document_id, 0)?;
            if let Some(t) = follow_up {
                self.emit_dispatched(&mut inner, t)?;
            }
            Ok(())
        })();
        if released.is_err() {
            inner.in_flight.remove(&document_id);
        }
        drop(inner);
        self.notify_idle();
        if let Err(e) = released {
            tracing::error!(document = %document_id, error = %e, "could not record end of analysis");
            return (result.and(Err(e)), None);
        }
        (result, follow_up)
    }

    fn analyze(&self, document_id: DocumentId, source: GatedSource) -> Result<UpdateOutcome> {
        let (body, head) = {
            let inner = self.lock();
            (inner.document(document_id)?.body.plain_text(), inner.model.head().profile.clone())
        };
        let feedback = self.summarize_active()?;
        let candidate = compute_candidate(
            &self.gateway,
            &body,
            &head,
            &feedback.like_summary,
            &feedback.dislike_summary,
        )?;
        self.commit_if_significant(candidate, source, Some(document_id))
    }

    /// Commits without the gate, re-comparing if another commit lands
    /// while the provider calls are running.
    fn commit_ungated(
        &self,
        description: StyleDescription,
        source: StyleSource,
        reverted_from: Option<StyleId>,
    ) -> Result<StyleProfile> {
        const ATTEMPTS: usize = 3;
        let mut last_seen = None;
        for _ in 0..ATTEMPTS {
            let head = self.current_style();
            let (comparison_text, difference_rating) = compare(&self.gateway, &head.description, &description)?;
            let summary = summarize_style(&self.gateway, &description)?;
            let mut inner = self.lock();
            let current = inner.model.head().profile.id;
            if current != head.id {
                last_seen = Some((head.id, current));
                continue;
            }
            let entry = self.commit_locked(
                &mut inner,
                Commit {
                    description: description.clone(),
                    summary,
                    source,
                    reverted_from,
                    comparison_text,
                    difference_rating,
                    document_id: None,
                    threshold: None,
                },
            )?;
            return Ok(entry.profile);
        }
        let (based_on, current) = last_seen.expect("loop ran");
        Err(Error::StaleCandidate { based_on, current })
    }

    /// The writer's own description is authoritative: committed with no
    /// threshold gate, though the comparison is still recorded.
    pub fn edit_style_directly(&self, description: &RichText) -> Result<StyleProfile> {
        let description = validate_style_description(description)?;
        self.commit_ungated(description, StyleSource::ManualEdit, None)
    }

    /// Appends a new entry carrying the target entry's description.
    pub fn revert_style(&self, target: StyleId) -> Result<StyleProfile> {
        let description = {
            let inner = self.lock();
            inner
                .model
                .style_history
                .iter()
                .find(|e| e.profile.id == target)
                .map(|e| e.profile.description.clone())
                .ok_or(Error::UnknownHistoryEntry(target))?
        };
        self.commit_ungated(description, StyleSource::Revert, Some(target))
    }
}

fn check_fresh(inner: &Inner, based_on: StyleId) -> Result<()> {
    let current = inner.model.head().profile.id;
    if current != based_on {
        return Err(Error::StaleCandidate { based_on, current });
    }
    Ok(())
}

fn automatic_locked(inner: &Inner, document_id: Option<DocumentId>) -> bool {
    inner.model.settings.global_style_lock
        || document_id
            .and_then(|id| inner.model.documents.get(&id))
            .is_some_and(|d| !d.track_style)
}
