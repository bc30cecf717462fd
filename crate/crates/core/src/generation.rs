//! The four generation features and the offer lifecycle. Generated text is
//! only ever offered; the document changes on an explicit insert and
//! nowhere else.

use serde::{Deserialize, Serialize};

use crate::engine::{statuses_of, Engine, Inner};
use crate::error::{Error, Result};
use crate::events::{GenerationClosed, GenerationInserted, GenerationOffered, GenerationRegenerated, ReanchorStatus};
use crate::feedback::check_range;
use crate::gateway::{Bindings, TemplateId};
use crate::model::{
    body_hash, Document, DocumentId, EventType, Generation, GenerationId, GenerationKind,
    GenerationStatus, GenerationTarget, StyleId,
};
use crate::richtext::TextRange;
use crate::style_engine::AnalysisReport;

/// Everything a generation prompt is rendered from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub kind: GenerationKind,
    /// Committed style the description was taken from.
    pub style_id: StyleId,
    pub style_description: String,
    /// Present exactly for `continue` and `inline_prompt`.
    pub context_body: Option<String>,
    /// The selection, or the window of text before the insertion point.
    pub document_excerpt: String,
    pub instruction: Option<String>,
}

impl PromptBundle {
    pub fn template_id(&self) -> TemplateId {
        match self.kind {
            GenerationKind::Rewrite => TemplateId::Rewrite,
            GenerationKind::ApplyPrompt => TemplateId::Apply,
            GenerationKind::Continue => TemplateId::Continue,
            GenerationKind::InlinePrompt => TemplateId::Inline,
        }
    }

    /// Template bindings. Absent fields are simply not bound, so a template
    /// that expects them fails with `MissingBinding` and one that does not
    /// expect a present field fails with `UnusedBinding`.
    pub fn bindings(&self) -> Bindings {
        let mut b = Bindings::new();
        b.insert("style".into(), self.style_description.clone());
        let excerpt_key = if self.kind.uses_context() { "window" } else { "selection" };
        b.insert(excerpt_key.into(), self.document_excerpt.clone());
        if let Some(c) = &self.context_body {
            b.insert("context".into(), c.clone());
        }
        if let Some(i) = &self.instruction {
            b.insert("instruction".into(), i.clone());
        }
        b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolveAction {
    Insert,
    Regenerate,
    Discard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolveOutcome {
    /// The resolved generation in its final state.
    pub generation: Generation,
    /// The new offer created by a regenerate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replacement: Option<Generation>,
    /// The updated document after an insert.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub document: Option<Document>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reanchored: Vec<ReanchorStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis: Option<AnalysisReport>,
}

/// Last `window` characters of `text` before char offset `point`.
pub fn trailing_window(text: &str, point: usize, window: usize) -> String {
    let start = point.saturating_sub(window);
    text.chars().skip(start).take(point - start).collect()
}

struct Prepared {
    bundle: PromptBundle,
    source_text: Option<String>,
    body_hash: String,
}

fn prepare(
    inner: &Inner,
    kind: GenerationKind,
    document_id: DocumentId,
    target: GenerationTarget,
    instruction: Option<&str>,
) -> Result<Prepared> {
    let doc = inner.document(document_id)?;
    let body = &doc.body;
    let (excerpt, source_text) = match target {
        GenerationTarget::Selection(range) => {
            check_range(body, range)?;
            let s = body.slice(range).expect("range checked");
            (s.clone(), Some(s))
        }
        GenerationTarget::Point(p) => {
            let len = body.char_len();
            if p > len {
                return Err(Error::OutOfBounds { start: p, end: p, len });
            }
            let window = inner.model.settings.continue_window_chars;
            (trailing_window(&body.plain_text(), p, window), None)
        }
    };
    let instruction = if kind.takes_instruction() {
        match instruction.map(str::trim) {
            Some(i) if !i.is_empty() => Some(i.to_string()),
            _ => return Err(Error::EmptyInstruction),
        }
    } else {
        None
    };
    let head = &inner.model.head().profile;
    Ok(Prepared {
        bundle: PromptBundle {
            kind,
            style_id: head.id,
            style_description: head.description.to_markdown(),
            context_body: kind
                .uses_context()
                .then(|| inner.model.context.body.plain_text()),
            document_excerpt: excerpt,
            instruction,
        },
        source_text,
        body_hash: body_hash(body),
    })
}

fn target_matches_kind(kind: GenerationKind, target: &GenerationTarget) -> bool {
    matches!(
        (kind.uses_context(), target),
        (false, GenerationTarget::Selection(_)) | (true, GenerationTarget::Point(_))
    )
}

impl Engine {
    /// Builds the bundle the given request would be rendered from, without
    /// calling the provider.
    pub fn prompt_bundle(
        &self,
        kind: GenerationKind,
        document_id: DocumentId,
        target: GenerationTarget,
        instruction: Option<&str>,
    ) -> Result<PromptBundle> {
        let inner = self.lock();
        Ok(prepare(&inner, kind, document_id, target, instruction)?.bundle)
    }

    fn offer(
        &self,
        kind: GenerationKind,
        document_id: DocumentId,
        target: GenerationTarget,
        instruction: Option<&str>,
    ) -> Result<Generation> {
        if !target_matches_kind(kind, &target) {
            return Err(Error::InvalidRequest(format!("{kind:?} does not take this target")));
        }
        let prepared = {
            let inner = self.lock();
            prepare(&inner, kind, document_id, target, instruction)?
        };
        let output = self
            .gateway
            .run(prepared.bundle.template_id(), prepared.bundle.bindings())?;
        let mut inner = self.lock();
        let now = self.clock.now();
        let id = inner.model.next_ids.generation();
        let generation = Generation {
            id,
            kind,
            document_id,
            target,
            instruction: prepared.bundle.instruction.clone(),
            source_text: prepared.source_text,
            output,
            status: GenerationStatus::Offered,
            attempt: 1,
            lineage: id,
            style_id: prepared.bundle.style_id,
            created_at: now,
        };
        inner.model.generations.insert(id, generation.clone());
        inner.emit(
            now,
            kind.event_type(),
            &GenerationOffered {
                generation: generation.clone(),
                bundle_has_context: prepared.bundle.context_body.is_some(),
                body_hash: prepared.body_hash,
            },
        )?;
        Ok(generation)
    }

    /// Rewrites the selection in the committed style. Style only, no context.
    pub fn rewrite(&self, document_id: DocumentId, selection: TextRange) -> Result<Generation> {
        self.offer(GenerationKind::Rewrite, document_id, GenerationTarget::Selection(selection), None)
    }

    pub fn apply_prompt(&self, document_id: DocumentId, selection: TextRange, instruction: &str) -> Result<Generation> {
        self.offer(
            GenerationKind::ApplyPrompt,
            document_id,
            GenerationTarget::Selection(selection),
            Some(instruction),
        )
    }

    /// New text at `point`, from style, context, and the window of text
    /// ending at the point.
    pub fn continue_text(&self, document_id: DocumentId, point: usize) -> Result<Generation> {
        self.offer(GenerationKind::Continue, document_id, GenerationTarget::Point(point), None)
    }

    pub fn inline_prompt(&self, document_id: DocumentId, point: usize, instruction: &str) -> Result<Generation> {
        self.offer(
            GenerationKind::InlinePrompt,
            document_id,
            GenerationTarget::Point(point),
            Some(instruction),
        )
    }

    pub fn get_generation(&self, id: GenerationId) -> Result<Generation> {
        self.lock()
            .model
            .generations
            .get(&id)
            .cloned()
            .ok_or(Error::UnknownGeneration(id))
    }

    pub fn list_generations(&self) -> Vec<Generation> {
        self.lock().model.generations.values().cloned().collect()
    }

    pub fn resolve(&self, id: GenerationId, action: ResolveAction) -> Result<ResolveOutcome> {
        match action {
            ResolveAction::Discard => self.discard(id),
            ResolveAction::Insert => self.insert(id),
            ResolveAction::Regenerate => self.regenerate(id),
        }
    }

    fn offered(inner: &Inner, id: GenerationId) -> Result<Generation> {
        let g = inner
            .model
            .generations
            .get(&id)
            .ok_or(Error::UnknownGeneration(id))?;
        if g.status != GenerationStatus::Offered {
            return Err(Error::AlreadyResolved(id));
        }
        Ok(g.clone())
    }

    fn discard(&self, id: GenerationId) -> Result<ResolveOutcome> {
        let mut inner = self.lock();
        let mut g = Self::offered(&inner, id)?;
        let now = self.clock.now();
        g.status = GenerationStatus::Discarded;
        inner.model.generations.insert(id, g.clone());
        inner.emit(now, EventType::GenerationDiscarded, &GenerationClosed { generation: g.clone() })?;
        Ok(ResolveOutcome {
            generation: g,
            replacement: None,
            document: None,
            reanchored: Vec::new(),
            analysis: None,
        })
    }

    fn insert(&self, id: GenerationId) -> Result<ResolveOutcome> {
        let (generation, document, reanchored, trigger) = {
            let mut inner = self.lock();
            let mut g = Self::offered(&inner, id)?;
            let now = self.clock.now();
            let doc = inner.document(g.document_id)?;
            let len = doc.body.char_len();
            let range = match g.target {
                GenerationTarget::Selection(r) => {
                    if doc.body.slice(r) != g.source_text {
                        return Err(Error::GenerationConflict(
                            id,
                            "the selected text has changed since the request".into(),
                        ));
                    }
                    r
                }
                GenerationTarget::Point(p) => {
                    if p > len {
                        return Err(Error::GenerationConflict(
                            id,
                            format!("insertion point {p} is past the end of the document ({len})"),
                        ));
                    }
                    TextRange::new(p, p)
                }
            };
            let new_body = doc.body.splice(range, &g.output);
            let doc = inner.document_mut(g.document_id)?;
            doc.body = new_body;
            doc.updated_at = now;
            g.status = GenerationStatus::Inserted;
            inner.model.generations.insert(id, g.clone());
            let reanchored = inner.reanchor_document(g.document_id)?;
            let trigger = inner.register_edit(g.document_id, g.output.chars().count() as u64)?;
            let document = inner.document(g.document_id)?.clone();
            inner.emit(
                now,
                EventType::GenerationInserted,
                &GenerationInserted {
                    generation: g.clone(),
                    document: document.clone(),
                    reanchored: reanchored.clone(),
                    analysis_dispatched: trigger.is_some(),
                },
            )?;
            if let Some(t) = trigger {
                self.emit_dispatched(&mut inner, t)?;
            }
            (g, document, reanchored, trigger)
        };
        let analysis = trigger.map(|t| self.run_triggered(t));
        Ok(ResolveOutcome {
            generation,
            replacement: None,
            document: Some(document),
            reanchored: statuses_of(&reanchored),
            analysis,
        })
    }

    /// Supersedes the offer with a fresh one rendered from the current
    /// style, context, and document.
    fn regenerate(&self, id: GenerationId) -> Result<ResolveOutcome> {
        let (old, prepared) = {
            let inner = self.lock();
            let old = Self::offered(&inner, id)?;
            let prepared = prepare(&inner, old.kind, old.document_id, old.target, old.instruction.as_deref())?;
            if old.source_text.is_some() && prepared.source_text != old.source_text {
                return Err(Error::GenerationConflict(
                    id,
                    "the selected text has changed since the request".into(),
                ));
            }
            (old, prepared)
        };
        let output = self
            .gateway
            .run(prepared.bundle.template_id(), prepared.bundle.bindings())?;
        let mut inner = self.lock();
        let mut old = Self::offered(&inner, old.id)?;
        let now = self.clock.now();
        let new_id = inner.model.next_ids.generation();
        let replacement = Generation {
            id: new_id,
            output,
            status: GenerationStatus::Offered,
            attempt: old.attempt + 1,
            style_id: prepared.bundle.style_id,
            created_at: now,
            ..old.clone()
        };
        old.status = GenerationStatus::Superseded;
        inner.model.generations.insert(old.id, old.clone());
        inner.model.generations.insert(new_id, replacement.clone());
        inner.emit(
            now,
            EventType::GenerationRegenerated,
            &GenerationRegenerated {
                superseded: old.id,
                generation: replacement.clone(),
                bundle_has_context: prepared.bundle.context_body.is_some(),
            },
        )?;
        Ok(ResolveOutcome {
            generation: old,
            replacement: Some(replacement),
            document: None,
            reanchored: Vec::new(),
            analysis: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::mock::generation_tag;
    use crate::richtext::RichText;
    use sha2::{Digest, Sha256};

    fn setup(text: &str) -> (Engine, DocumentId) {
        let e = Engine::mock();
        let d = e.create_document("d", RichText::from_plain(text)).unwrap();
        e.set_context(RichText::from_plain("Audience: hikers in Seattle.")).unwrap();
        (e, d.id)
    }

    /// Independent tag oracle: sha256 over the fields joined by U+001F.
    fn oracle_tag(code: &str, fields: &[&str]) -> String {
        let digest = Sha256::digest(fields.join("\u{1f}").as_bytes());
        let hex: String = digest.iter().take(4).map(|b| format!("{b:02x}")).collect();
        format!("[{code}:{hex}]")
    }

    #[test]
    fn rewrite_prompt_has_style_and_selection_but_no_context() {
        let (e, d) = setup("Hello brave new world.");
        let bundle = e
            .prompt_bundle(GenerationKind::Rewrite, d, GenerationTarget::Selection(TextRange::new(6, 11)), None)
            .unwrap();
        let prompt = e.gateway().render(bundle.template_id(), &bundle.bindings()).unwrap();
        assert!(prompt.contains(&e.current_style().description.to_markdown()));
        assert!(prompt.contains("brave"));
        assert!(!prompt.contains("hikers"));
    }

    #[test]
    fn rewrite_output_matches_tag_oracle() {
        let (e, d) = setup("Hello brave new world.");
        let g = e.rewrite(d, TextRange::new(6, 11)).unwrap();
        let style = e.current_style().description.to_markdown();
        assert_eq!(g.output, format!("{}brave", oracle_tag("RW", &[&style, "brave"])));
        assert_eq!(g.output, format!("{}brave", generation_tag(TemplateId::Rewrite, &[&style, "brave"])));
        assert_eq!(g.status, GenerationStatus::Offered);
        assert!(matches!(e.rewrite(d, TextRange::new(3, 3)), Err(Error::EmptyRange)));
    }

    #[test]
    fn apply_prompt_rules() {
        let (e, d) = setup("We went to the lake.");
        let i = "Make this more positive and enthusiastic";
        let a = e.apply_prompt(d, TextRange::new(0, 20), i).unwrap();
        let b = e.apply_prompt(d, TextRange::new(0, 20), i).unwrap();
        assert_eq!(a.kind, GenerationKind::ApplyPrompt);
        assert_eq!(a.output, b.output);
        assert_eq!(a.instruction.as_deref(), Some(i));
        assert!(matches!(e.apply_prompt(d, TextRange::new(0, 2), " "), Err(Error::EmptyInstruction)));
    }

    #[test]
    fn continue_window_ends_at_point() {
        let (e, d) = setup("First part. Second part.");
        let bundle = e
            .prompt_bundle(GenerationKind::Continue, d, GenerationTarget::Point(11), None)
            .unwrap();
        assert_eq!(bundle.document_excerpt, "First part.");
        assert_eq!(bundle.context_body.as_deref(), Some("Audience: hikers in Seattle."));
        let prompt = e.gateway().render(bundle.template_id(), &bundle.bindings()).unwrap();
        assert!(prompt.contains("hikers"));
        assert_eq!(trailing_window("abcdef", 4, 2), "cd");
        assert_eq!(trailing_window("abcdef", 1, 5), "a");
    }

    #[test]
    fn continue_on_empty_document() {
        let e = Engine::mock();
        let d = e.create_document("d", RichText::default()).unwrap();
        let g = e.continue_text(d.id, 0).unwrap();
        assert!(g.output.starts_with("[CT:"));
        assert!(matches!(e.continue_text(d.id, 1), Err(Error::OutOfBounds { .. })));
    }

    #[test]
    fn inline_prompt_rules() {
        let (e, d) = setup("Rain.");
        let g = e.inline_prompt(d, 5, "Write a haiku about Seattle").unwrap();
        assert_eq!(g.status, GenerationStatus::Offered);
        let b = e
            .prompt_bundle(GenerationKind::InlinePrompt, d, GenerationTarget::Point(5), Some("x"))
            .unwrap();
        let prompt = e.gateway().render(b.template_id(), &b.bindings()).unwrap();
        assert!(prompt.contains("hikers") && prompt.contains("## Tone"));
        assert!(matches!(e.inline_prompt(d, 5, ""), Err(Error::EmptyInstruction)));
    }

    #[test]
    fn insert_replaces_only_the_selection() {
        let (e, d) = setup("Keep this. Change me. Keep that.");
        let g = e.rewrite(d, TextRange::new(11, 21)).unwrap();
        let before = e.get_document(d).unwrap();
        assert_eq!(before.body.plain_text(), "Keep this. Change me. Keep that.");
        let out = e.resolve(g.id, ResolveAction::Insert).unwrap();
        let after = out.document.unwrap().body.plain_text();
        assert_eq!(after, format!("Keep this. {} Keep that.", g.output));
        assert_eq!(after.chars().count() - g.output.chars().count(), before.body.char_len() - 10);
        assert_eq!(
            e.get_document(d).unwrap().chars_since_analysis,
            g.output.chars().count() as u64
        );
        assert!(matches!(e.resolve(g.id, ResolveAction::Insert), Err(Error::AlreadyResolved(_))));
    }

    #[test]
    fn discard_leaves_document_untouched() {
        let (e, d) = setup("Unchanged text.");
        let before = e.get_document(d).unwrap().body_hash();
        let g = e.continue_text(d, 15).unwrap();
        e.resolve(g.id, ResolveAction::Discard).unwrap();
        assert_eq!(e.get_document(d).unwrap().body_hash(), before);
        assert!(matches!(e.resolve(g.id, ResolveAction::Discard), Err(Error::AlreadyResolved(_))));
        assert!(matches!(
            e.resolve(GenerationId(77), ResolveAction::Discard),
            Err(Error::UnknownGeneration(_))
        ));
    }

    #[test]
    fn regenerate_picks_up_context_changes() {
        let (e, d) = setup("Text.");
        let g1 = e.continue_text(d, 5).unwrap();
        e.set_context(RichText::from_plain("Different background.")).unwrap();
        let out = e.resolve(g1.id, ResolveAction::Regenerate).unwrap();
        let g2 = out.replacement.unwrap();
        assert_eq!(out.generation.status, GenerationStatus::Superseded);
        assert_eq!((g2.attempt, g2.lineage), (2, g1.id));
        assert_ne!(g2.output, g1.output);
        let g3 = e.resolve(g2.id, ResolveAction::Regenerate).unwrap().replacement.unwrap();
        assert_eq!(g3.attempt, 3);
        let live: Vec<_> = e
            .list_generations()
            .into_iter()
            .filter(|g| g.lineage == g1.id && g.status != GenerationStatus::Superseded)
            .collect();
        assert_eq!(live.len(), 1);
    }

    #[test]
    fn stale_selection_conflicts() {
        let (e, d) = setup("Alpha beta.");
        let g = e.rewrite(d, TextRange::new(0, 5)).unwrap();
        e.update_document(d, None, Some(RichText::from_plain("Gamma beta."))).unwrap();
        assert!(matches!(e.resolve(g.id, ResolveAction::Insert), Err(Error::GenerationConflict(..))));
    }

    #[test]
    fn template_binding_enforces_context_matrix() {
        let (e, d) = setup("Some words here.");
        let mut rw = e
            .prompt_bundle(GenerationKind::Rewrite, d, GenerationTarget::Selection(TextRange::new(0, 4)), None)
            .unwrap();
        rw.context_body = Some("leak".into());
        let err = e.gateway().render(rw.template_id(), &rw.bindings()).unwrap_err();
        assert_eq!(err.kind(), "UnusedBinding");
        let mut ct = e
            .prompt_bundle(GenerationKind::Continue, d, GenerationTarget::Point(4), None)
            .unwrap();
        ct.context_body = None;
        let err = e.gateway().render(ct.template_id(), &ct.bindings()).unwrap_err();
        assert_eq!(err.kind(), "MissingBinding");
    }
}
