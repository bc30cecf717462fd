//! The engine: one writer over the model and the event log.
//!
//! Every mutation takes the state lock, changes the live model, and appends
//! exactly one event describing the change. Provider calls never run under
//! the lock; results computed against a state that has since moved on are
//! rejected when they come back (see `StaleCandidate`).

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::{Arc, Condvar, Mutex, MutexGuard};

use serde::{Deserialize, Serialize};

use crate::clock::{Clock, SystemClock};
use crate::error::{Error, Result};
use crate::events::*;
use crate::feedback::{reanchor_highlights, FeedbackSummary};
use crate::gateway::{Gateway, SelfEvalEntry, TemplateId};
use crate::model::{
    ContextProfile, Document, DocumentId, EventRecord, EventType, Page, SessionId, Settings,
    Timestamp,
};
use crate::richtext::RichText;
use crate::store::{FileStore, Model, Snapshot};
use crate::style_engine::{AnalysisReport, AnalysisTrigger};
use crate::telemetry::{export_timeline, summarize_counts, EventLog, SessionCounts, TimelineExport};

/// Every public operation the engine exposes to the service boundary.
/// The HTTP route table must cover each of these exactly once.
pub const OPERATIONS: &[&str] = &[
    "create_document",
    "get_document",
    "list_documents",
    "update_document",
    "current_style",
    "edit_style_directly",
    "force_refresh",
    "history",
    "revert_style",
    "set_locks",
    "get_context",
    "set_context",
    "add_highlight",
    "add_manual_highlight",
    "set_active",
    "delete_highlight",
    "list_highlights",
    "summarize_active",
    "reanchor",
    "rewrite",
    "apply_prompt",
    "continue_text",
    "inline_prompt",
    "get_generation",
    "resolve",
    "events",
    "counts",
    "timeline",
    "start_session",
    "record_page_view",
    "get_settings",
    "update_settings",
    "self_evaluate",
    "snapshot",
];

#[derive(Debug, Clone)]
pub struct EngineConfig {
    /// Settings for a fresh store; an existing store keeps its own.
    pub settings: Settings,
    /// Write a snapshot after this many events (file-backed engines only).
    pub snapshot_every: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            settings: Settings::default(),
            snapshot_every: 100,
        }
    }
}

pub(crate) struct CachedSummary {
    pub version: u64,
    pub summary: FeedbackSummary,
}

pub(crate) struct Inner {
    pub model: Model,
    pub log: EventLog,
    pub session: SessionId,
    /// Documents with a style analysis in flight.
    pub in_flight: BTreeSet<DocumentId>,
    /// Bumped by every ledger mutation; summaries carry the version they
    /// were computed at.
    pub ledger_version: u64,
    pub summary_cache: Option<CachedSummary>,
    store: Option<FileStore>,
    snapshot_every: u64,
    since_snapshot: u64,
}

impl Inner {
    pub fn emit<T: Serialize>(&mut self, now: Timestamp, ty: EventType, payload: &T) -> Result<u64> {
        let record = EventRecord {
            seq: 0,
            timestamp: now,
            session_id: self.session,
            event_type: ty,
            payload: serde_json::to_value(payload).expect("payload serializes"),
        };
        let seq = self.log.append(record);
        if let Some(store) = self.store.as_mut() {
            store.append(self.log.last().expect("just appended"))?;
            self.since_snapshot += 1;
            if self.since_snapshot >= self.snapshot_every {
                let snap = self.model.to_snapshot(seq, now);
                store.write_snapshot(&snap)?;
                self.since_snapshot = 0;
            }
        }
        Ok(seq)
    }

    pub fn document(&self, id: DocumentId) -> Result<&Document> {
        self.model.documents.get(&id).ok_or(Error::UnknownDocument(id))
    }

    pub fn document_mut(&mut self, id: DocumentId) -> Result<&mut Document> {
        self.model.documents.get_mut(&id).ok_or(Error::UnknownDocument(id))
    }

    /// Adds `inserted` to the document's counter and dispatches an automatic
    /// analysis when the counter reaches the interval, both locks are
    /// permissive, and none is already running for the document. Characters
    /// typed while locked still accumulate.
    pub fn register_edit(&mut self, id: DocumentId, inserted: u64) -> Result<Option<AnalysisTrigger>> {
        let settings = self.model.settings.clone();
        let busy = self.in_flight.contains(&id);
        let doc = self.document_mut(id)?;
        doc.chars_since_analysis += inserted;
        let fire = doc.chars_since_analysis >= settings.analysis_interval_n
            && !settings.global_style_lock
            && doc.track_style
            && !busy;
        if !fire {
            return Ok(None);
        }
        doc.chars_since_analysis = 0;
        self.in_flight.insert(id);
        Ok(Some(AnalysisTrigger {
            document_id: id,
            cause: TriggerCause::AutomaticCounter,
        }))
    }

    /// Reanchors the document's highlights in place and returns the ones
    /// whose offsets or status changed.
    pub fn reanchor_document(&mut self, id: DocumentId) -> Result<Vec<crate::model::Highlight>> {
        let body = self.document(id)?.body.clone();
        let mine: Vec<_> = self
            .model
            .highlights
            .values()
            .filter(|h| h.document_id == Some(id))
            .cloned()
            .collect();
        let mut changed = Vec::new();
        for (updated, _) in reanchor_highlights(&body, mine) {
            let old = self.model.highlights.get(&updated.id);
            if old != Some(&updated) {
                changed.push(updated.clone());
                self.model.highlights.insert(updated.id, updated);
            }
        }
        Ok(changed)
    }
}

/// Result of a document update: the stored document plus what the edit set
/// in motion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentUpdate {
    pub document: Document,
    pub inserted_chars: u64,
    pub reanchored: Vec<ReanchorStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis: Option<AnalysisReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventPage {
    pub events: Vec<EventRecord>,
    /// Sequence number to pass as `from_seq` for the next page, if any.
    pub next_seq: Option<u64>,
}

/// Characters inserted when `old` becomes `new`: the length growth plus the
/// length of the replaced span, i.e. everything in `new` outside the common
/// prefix and suffix.
pub fn char_delta(old: &str, new: &str) -> u64 {
    let a: Vec<char> = old.chars().collect();
    let b: Vec<char> = new.chars().collect();
    let prefix = a.iter().zip(&b).take_while(|(x, y)| x == y).count();
    let max_suffix = a.len().min(b.len()) - prefix;
    let suffix = a
        .iter()
        .rev()
        .zip(b.iter().rev())
        .take(max_suffix)
        .take_while(|(x, y)| x == y)
        .count();
    (b.len() - prefix - suffix) as u64
}

pub struct Engine {
    state: Mutex<Inner>,
    idle: Condvar,
    pub(crate) gateway: Gateway,
    pub(crate) clock: Arc<dyn Clock>,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine").field("gateway", &self.gateway).finish()
    }
}

impl Engine {
    /// In-memory engine with the mock provider and the system clock.
    pub fn mock() -> Self {
        Engine::new(Gateway::mock(), Arc::new(SystemClock), EngineConfig::default())
    }

    pub fn new(gateway: Gateway, clock: Arc<dyn Clock>, config: EngineConfig) -> Self {
        Self::build(gateway, clock, Model::new(config.settings), EventLog::default(), None, config.snapshot_every)
            .expect("in-memory engine cannot fail to start")
    }

    /// Opens (or creates) a file-backed store and starts a new session.
    pub fn open(dir: &Path, gateway: Gateway, clock: Arc<dyn Clock>, config: EngineConfig) -> Result<Self> {
        config.settings.validate()?;
        let (store, model, records) = FileStore::open(dir, config.settings)?;
        Self::build(
            gateway,
            clock,
            model,
            EventLog::from_records(records),
            Some(store),
            config.snapshot_every,
        )
    }

    fn build(
        gateway: Gateway,
        clock: Arc<dyn Clock>,
        model: Model,
        log: EventLog,
        store: Option<FileStore>,
        snapshot_every: u64,
    ) -> Result<Self> {
        let engine = Engine {
            state: Mutex::new(Inner {
                model,
                log,
                session: SessionId(0),
                in_flight: BTreeSet::new(),
                ledger_version: 0,
                summary_cache: None,
                store,
                snapshot_every: snapshot_every.max(1),
                since_snapshot: 0,
            }),
            idle: Condvar::new(),
            gateway,
            clock,
        };
        engine.start_session()?;
        Ok(engine)
    }

    pub(crate) fn lock(&self) -> MutexGuard<'_, Inner> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Blocks until no analysis is in flight for `id`.
    pub(crate) fn wait_idle<'a>(&self, mut guard: MutexGuard<'a, Inner>, id: DocumentId) -> MutexGuard<'a, Inner> {
        while guard.in_flight.contains(&id) {
            guard = self.idle.wait(guard).unwrap_or_else(|p| p.into_inner());
        }
        guard
    }

    pub(crate) fn notify_idle(&self) {
        self.idle.notify_all();
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    pub fn now(&self) -> Timestamp {
        self.clock.now()
    }

    // documents

    pub fn create_document(&self, title: &str, body: RichText) -> Result<Document> {
        body.validate()?;
        let mut inner = self.lock();
        let now = self.clock.now();
        let doc = Document {
            id: inner.model.next_ids.document(),
            title: title.to_string(),
            body,
            track_style: true,
            chars_since_analysis: 0,
            created_at: now,
            updated_at: now,
        };
        inner.model.documents.insert(doc.id, doc.clone());
        inner.emit(
            now,
            EventType::DocumentCreated,
            &DocumentChanged {
                document: doc.clone(),
                inserted_chars: 0,
                reanchored: Vec::new(),
                analysis_dispatched: false,
            },
        )?;
        Ok(doc)
    }

    pub fn get_document(&self, id: DocumentId) -> Result<Document> {
        self.lock().document(id).cloned()
    }

    pub fn list_documents(&self) -> Vec<Document> {
        self.lock().model.documents.values().cloned().collect()
    }

    /// Replaces the title and/or body. The character delta is computed here
    /// from the stored and new bodies and fed to the analysis counter.
    pub fn update_document(&self, id: DocumentId, title: Option<String>, body: Option<RichText>) -> Result<DocumentUpdate> {
        if let Some(b) = &body {
            b.validate()?;
        }
        let (document, inserted, statuses, trigger) = {
            let mut inner = self.lock();
            let now = self.clock.now();
            let doc = inner.document_mut(id)?;
            let old_plain = doc.body.plain_text();
            if let Some(t) = title {
                doc.title = t;
            }
            let mut inserted = 0;
            if let Some(b) = body {
                inserted = char_delta(&old_plain, &b.plain_text());
                doc.body = b;
            }
            doc.updated_at = now;
            let reanchored = inner.reanchor_document(id)?;
            let trigger = inner.register_edit(id, inserted)?;
            let document = inner.document(id)?.clone();
            let statuses = statuses_of(&reanchored);
            inner.emit(
                now,
                EventType::DocumentUpdated,
                &DocumentChanged {
                    document: document.clone(),
                    inserted_chars: inserted,
                    reanchored,
                    analysis_dispatched: trigger.is_some(),
                },
            )?;
            if let Some(t) = &trigger {
                self.emit_dispatched(&mut inner, *t)?;
            }
            (document, inserted, statuses, trigger)
        };
        let analysis = trigger.map(|t| self.run_triggered(t));
        Ok(DocumentUpdate {
            document,
            inserted_chars: inserted,
            reanchored: statuses,
            analysis,
        })
    }

    /// Registers `inserted` new characters against the document without
    /// changing its body, running the analysis if one fires.
    pub fn register_edit(&self, id: DocumentId, inserted: u64) -> Result<(Option<AnalysisTrigger>, Option<AnalysisReport>)> {
        let trigger = {
            let mut inner = self.lock();
            let now = self.clock.now();
            let trigger = inner.register_edit(id, inserted)?;
            let document = inner.document(id)?.clone();
            inner.emit(
                now,
                EventType::DocumentUpdated,
                &DocumentChanged {
                    document,
                    inserted_chars: inserted,
                    reanchored: Vec::new(),
                    analysis_dispatched: trigger.is_some(),
                },
            )?;
            if let Some(t) = &trigger {
                self.emit_dispatched(&mut inner, *t)?;
            }
            trigger
        };
        let report = trigger.map(|t| self.run_triggered(t));
        Ok((trigger, report))
    }

    pub(crate) fn emit_dispatched(&self, inner: &mut Inner, t: AnalysisTrigger) -> Result<()> {
        let now = self.clock.now();
        inner.emit(
            now,
            EventType::StyleAnalysisDispatched,
            &AnalysisDispatched {
                document_id: t.document_id,
                cause: t.cause,
            },
        )?;
        Ok(())
    }

    // context

    pub fn get_context(&self) -> ContextProfile {
        self.lock().model.context.clone()
    }

    pub fn set_context(&self, body: RichText) -> Result<ContextProfile> {
        body.validate()?;
        let mut inner = self.lock();
        let now = self.clock.now();
        inner.model.context = ContextProfile { body };
        let context = inner.model.context.clone();
        inner.emit(now, EventType::ContextEdited, &ContextChanged { context: context.clone() })?;
        Ok(context)
    }

    // settings

    pub fn get_settings(&self) -> Settings {
        self.lock().model.settings.clone()
    }

    pub fn update_settings(&self, settings: Settings) -> Result<Settings> {
        settings.validate()?;
        let mut inner = self.lock();
        let now = self.clock.now();
        inner.model.settings = settings.clone();
        inner.emit(now, EventType::SettingsChanged, &SettingsChanged { settings: settings.clone(), document: None })?;
        Ok(settings)
    }

    /// Updates the global lock and/or one document's tracking flag. Automatic
    /// triggers need both to be permissive.
    pub fn set_locks(&self, global_style_lock: Option<bool>, document_id: Option<DocumentId>, track_style: Option<bool>) -> Result<Settings> {
        if document_id.is_some() != track_style.is_some() {
            return Err(Error::InvalidRequest(
                "document_id and track_style must be given together".into(),
            ));
        }
        let mut inner = self.lock();
        if let Some(id) = document_id {
            inner.document(id)?;
        }
        let now = self.clock.now();
        if let Some(lock) = global_style_lock {
            inner.model.settings.global_style_lock = lock;
        }
        let document = match (document_id, track_style) {
            (Some(id), Some(track)) => {
                let doc = inner.document_mut(id)?;
                doc.track_style = track;
                doc.updated_at = now;
                Some(doc.clone())
            }
            _ => None,
        };
        let settings = inner.model.settings.clone();
        inner.emit(now, EventType::SettingsChanged, &SettingsChanged { settings: settings.clone(), document })?;
        Ok(settings)
    }

    // sessions and telemetry

    pub fn start_session(&self) -> Result<SessionId> {
        let mut inner = self.lock();
        let now = self.clock.now();
        let id = inner.model.next_ids.session();
        inner.model.sessions.insert(id);
        inner.session = id;
        inner.emit(now, EventType::SessionStarted, &SessionStarted { session_id: id })?;
        Ok(id)
    }

    pub fn current_session(&self) -> SessionId {
        self.lock().session
    }

    pub fn sessions(&self) -> Vec<SessionId> {
        self.lock().model.sessions.iter().copied().collect()
    }

    /// Page views change nothing but the log.
    pub fn record_page_view(&self, page: Page) -> Result<u64> {
        let mut inner = self.lock();
        let now = self.clock.now();
        inner.emit(now, EventType::PageView, &PageViewed { page })
    }

    pub fn events(&self, from_seq: u64, limit: usize) -> EventPage {
        let inner = self.lock();
        let all = inner.log.replay(from_seq);
        let events: Vec<EventRecord> = all.iter().take(limit).cloned().collect();
        let next_seq = (all.len() > limit).then(|| events.last().map_or(from_seq, |e| e.seq + 1));
        EventPage { events, next_seq }
    }

    pub fn all_events(&self) -> Vec<EventRecord> {
        self.lock().log.records().to_vec()
    }

    pub fn counts(&self, session: SessionId, split_halves: bool) -> Result<SessionCounts> {
        summarize_counts(self.lock().log.records(), session, split_halves)
    }

    pub fn timeline(&self, session: SessionId) -> Result<TimelineExport> {
        export_timeline(self.lock().log.records(), session)
    }

    pub fn snapshot(&self) -> Snapshot {
        let inner = self.lock();
        inner.model.to_snapshot(inner.log.last_seq(), self.clock.now())
    }

    /// Live model, for comparison against a replay of the log.
    pub fn model(&self) -> Model {
        self.lock().model.clone()
    }

    /// Writes a snapshot now (file-backed engines only).
    pub fn checkpoint(&self) -> Result<()> {
        let mut inner = self.lock();
        let now = self.clock.now();
        let snap = inner.model.to_snapshot(inner.log.last_seq(), now);
        if let Some(store) = inner.store.as_ref() {
            store.write_snapshot(&snap)?;
        }
        inner.since_snapshot = 0;
        Ok(())
    }

    /// Advisory fidelity score for `output`; never blocks anything.
    pub fn self_evaluate(&self, label: &str, task: TemplateId, inputs: &crate::gateway::Bindings, output: &str) -> Result<SelfEvalEntry> {
        let score = self.gateway.self_evaluate(task, inputs, output)?;
        tracing::info!(label, task = %task, score, "self-evaluation");
        Ok(SelfEvalEntry {
            label: label.to_string(),
            task,
            score,
        })
    }
}

pub(crate) fn statuses_of(highlights: &[crate::model::Highlight]) -> Vec<ReanchorStatus> {
    highlights
        .iter()
        .filter_map(|h| {
            h.anchor_status.map(|status| ReanchorStatus {
                highlight_id: h.id,
                status,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn delta_counts_replaced_span() {
        assert_eq!(char_delta("hello world", "hello world!"), 1);
        assert_eq!(char_delta("hello world", "hello"), 0);
        assert_eq!(char_delta("abc", "aXc"), 1);
        assert_eq!(char_delta("aaaa", "aaaaa"), 1);
        assert_eq!(char_delta("", "héllo"), 5);
    }

    proptest! {
        #[test]
        fn delta_of_insertion_is_its_length(a in "[a-c]{0,20}", ins in "[a-c]{0,10}", at in 0usize..=20) {
            let at = at.min(a.chars().count());
            let mut b: String = a.chars().take(at).collect();
            b.push_str(&ins);
            b.extend(a.chars().skip(at));
            prop_assert_eq!(char_delta(&a, &b), ins.chars().count() as u64);
        }

        #[test]
        fn delta_never_exceeds_new_length(a in "[ab]{0,15}", b in "[ab]{0,15}") {
            prop_assert!(char_delta(&a, &b) <= b.chars().count() as u64);
        }
    }

    #[test]
    fn locks_require_pairing() {
        let e = Engine::mock();
        let d = e.create_document("d", RichText::default()).unwrap();
        assert!(matches!(e.set_locks(None, Some(d.id), None), Err(Error::InvalidRequest(_))));
        assert!(matches!(
            e.set_locks(None, Some(DocumentId(99)), Some(true)),
            Err(Error::UnknownDocument(_))
        ));
        assert!(e.set_locks(Some(true), None, None).unwrap().global_style_lock);
    }

    #[test]
    fn events_are_paged() {
        let e = Engine::mock();
        for _ in 0..5 {
            e.record_page_view(Page::Home).unwrap();
        }
        let first = e.events(1, 4);
        assert_eq!(first.events.len(), 4);
        let rest = e.events(first.next_seq.unwrap(), 4);
        assert_eq!(rest.events.len(), 2);
        assert_eq!(rest.next_seq, None);
    }

    #[test]
    fn file_store_survives_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let open = || {
            Engine::open(
                dir.path(),
                Gateway::mock(),
                Arc::new(crate::clock::ManualClock::default()),
                EngineConfig { snapshot_every: 3, ..EngineConfig::default() },
            )
            .unwrap()
        };
        let e = open();
        let d = e.create_document("d", RichText::from_plain("one two")).unwrap();
        e.update_document(d.id, None, Some(RichText::from_plain("one two three"))).unwrap();
        e.set_context(RichText::from_plain("ctx")).unwrap();
        e.record_page_view(Page::Style).unwrap();
        let before = e.model();
        drop(e);
        let e = open();
        let after = e.model();
        assert_eq!(after.documents, before.documents);
        assert_eq!(after.context, before.context);
        assert_eq!(e.current_session(), SessionId(2));
        assert_eq!(e.sessions(), vec![SessionId(1), SessionId(2)]);
    }
}
