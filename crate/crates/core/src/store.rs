//! In-memory model, snapshots, and the event fold used to rebuild state from
//! the log.
//!
//! On disk a store is a directory with `snapshot.json` (the model as of
//! `log_seq`) and `events.jsonl` (the full append-only log, one record per
//! line). Opening a store loads the snapshot and folds every later event.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::*;
use crate::model::{
    default_style, ContextProfile, Document, DocumentId, EventRecord, EventType, Generation,
    GenerationId, Highlight, HighlightId, SessionId, Settings, StyleHistoryEntry, StyleId,
    Timestamp,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NextIds {
    pub document: u64,
    pub style: u64,
    pub highlight: u64,
    pub generation: u64,
    pub session: u64,
}

impl Default for NextIds {
    fn default() -> Self {
        NextIds {
            document: 1,
            style: 2,
            highlight: 1,
            generation: 1,
            session: 1,
        }
    }
}

impl NextIds {
    pub fn document(&mut self) -> DocumentId {
        let id = DocumentId(self.document);
        self.document += 1;
        id
    }

    pub fn style(&mut self) -> StyleId {
        let id = StyleId(self.style);
        self.style += 1;
        id
    }

    pub fn highlight(&mut self) -> HighlightId {
        let id = HighlightId(self.highlight);
        self.highlight += 1;
        id
    }

    pub fn generation(&mut self) -> GenerationId {
        let id = GenerationId(self.generation);
        self.generation += 1;
        id
    }

    pub fn session(&mut self) -> SessionId {
        let id = SessionId(self.session);
        self.session += 1;
        id
    }
}

/// Everything the engine persists.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub documents: BTreeMap<DocumentId, Document>,
    /// Oldest first; the last entry is the committed style.
    pub style_history: Vec<StyleHistoryEntry>,
    pub highlights: BTreeMap<HighlightId, Highlight>,
    pub context: ContextProfile,
    pub settings: Settings,
    pub generations: BTreeMap<GenerationId, Generation>,
    pub sessions: BTreeSet<SessionId>,
    pub next_ids: NextIds,
}

impl Model {
    pub fn new(settings: Settings) -> Self {
        Model {
            documents: BTreeMap::new(),
            style_history: vec![StyleHistoryEntry {
                profile: default_style(),
                comparison: None,
            }],
            highlights: BTreeMap::new(),
            context: ContextProfile::default(),
            settings,
            generations: BTreeMap::new(),
            sessions: BTreeSet::new(),
            next_ids: NextIds::default(),
        }
    }

    pub fn head(&self) -> &StyleHistoryEntry {
        self.style_history.last().expect("history is never empty")
    }

    pub fn to_snapshot(&self, log_seq: u64, exported_at: Timestamp) -> Snapshot {
        Snapshot {
            schema_version: SCHEMA_VERSION,
            log_seq,
            documents: self.documents.values().cloned().collect(),
            style_history: self.style_history.clone(),
            highlights: self.highlights.values().cloned().collect(),
            context: self.context.clone(),
            settings: self.settings.clone(),
            generations: self.generations.values().cloned().collect(),
            sessions: self.sessions.iter().copied().collect(),
            next_ids: self.next_ids,
            exported_at,
        }
    }

    pub fn from_snapshot(s: Snapshot) -> Result<Self> {
        if s.schema_version != SCHEMA_VERSION {
            return Err(Error::Corrupt(format!(
                "unsupported snapshot schema {}",
                s.schema_version
            )));
        }
        if s.style_history.is_empty() {
            return Err(Error::Corrupt("snapshot has an empty style history".into()));
        }
        Ok(Model {
            documents: s.documents.into_iter().map(|d| (d.id, d)).collect(),
            style_history: s.style_history,
            highlights: s.highlights.into_iter().map(|h| (h.id, h)).collect(),
            context: s.context,
            settings: s.settings,
            generations: s.generations.into_iter().map(|g| (g.id, g)).collect(),
            sessions: s.sessions.into_iter().collect(),
            next_ids: s.next_ids,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub schema_version: u32,
    /// Sequence number of the last event folded into this snapshot.
    pub log_seq: u64,
    pub documents: Vec<Document>,
    pub style_history: Vec<StyleHistoryEntry>,
    pub highlights: Vec<Highlight>,
    pub context: ContextProfile,
    pub settings: Settings,
    pub generations: Vec<Generation>,
    pub sessions: Vec<SessionId>,
    pub next_ids: NextIds,
    pub exported_at: Timestamp,
}

impl Snapshot {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Corrupt(format!("snapshot: {e}")))
    }
}

fn payload<T: DeserializeOwned>(record: &EventRecord) -> Result<T> {
    serde_json::from_value(record.payload.clone()).map_err(|e| {
        Error::Corrupt(format!(
            "event {} ({}): {e}",
            record.seq, record.event_type
        ))
    })
}

fn bump(next: &mut u64, id: u64) {
    *next = (*next).max(id + 1);
}

fn put_document(model: &mut Model, doc: Document) {
    bump(&mut model.next_ids.document, doc.id.0);
    model.documents.insert(doc.id, doc);
}

fn put_highlight(model: &mut Model, h: Highlight) {
    bump(&mut model.next_ids.highlight, h.id.0);
    model.highlights.insert(h.id, h);
}

fn put_generation(model: &mut Model, g: Generation) {
    bump(&mut model.next_ids.generation, g.id.0);
    model.generations.insert(g.id, g);
}

/// Applies one logged event to `model`. This is the only code path used to
/// rebuild state from the log.
pub fn apply_event(model: &mut Model, record: &EventRecord) -> Result<()> {
    match record.event_type {
        EventType::DocumentCreated | EventType::DocumentUpdated => {
            let p: DocumentChanged = payload(record)?;
            put_document(model, p.document);
            for h in p.reanchored {
                put_highlight(model, h);
            }
        }
        EventType::StyleUpdateAutomatic
        | EventType::StyleUpdateManualRequest
        | EventType::StyleUpdateDirectEdit
        | EventType::StyleRevert => {
            let p: StyleCommitted = payload(record)?;
            bump(&mut model.next_ids.style, p.entry.profile.id.0);
            model.style_history.push(p.entry);
        }
        EventType::StyleAnalysisDispatched => {
            let p: AnalysisDispatched = payload(record)?;
            if let Some(doc) = model.documents.get_mut(&p.document_id) {
                doc.chars_since_analysis = 0;
            }
        }
        EventType::StyleNoUpdate | EventType::StyleAnalysisAbandoned | EventType::PageView => {}
        EventType::LikeAdded | EventType::DislikeAdded | EventType::HighlightToggled => {
            let p: HighlightChanged = payload(record)?;
            put_highlight(model, p.highlight);
        }
        EventType::HighlightDeleted => {
            let p: HighlightRemoved = payload(record)?;
            model.highlights.remove(&p.highlight_id);
        }
        EventType::HighlightsReanchored => {
            let p: HighlightsReanchored = payload(record)?;
            for h in p.highlights {
                put_highlight(model, h);
            }
        }
        EventType::Rewrite
        | EventType::ApplyPrompt
        | EventType::Continue
        | EventType::InlinePrompt => {
            let p: GenerationOffered = payload(record)?;
            put_generation(model, p.generation);
        }
        EventType::GenerationInserted => {
            let p: GenerationInserted = payload(record)?;
            put_generation(model, p.generation);
            put_document(model, p.document);
            for h in p.reanchored {
                put_highlight(model, h);
            }
        }
        EventType::GenerationDiscarded => {
            let p: GenerationClosed = payload(record)?;
            put_generation(model, p.generation);
        }
        EventType::GenerationRegenerated => {
            let p: GenerationRegenerated = payload(record)?;
            if let Some(old) = model.generations.get_mut(&p.superseded) {
                old.status = crate::model::GenerationStatus::Superseded;
            }
            put_generation(model, p.generation);
        }
        EventType::ContextEdited => {
            let p: ContextChanged = payload(record)?;
            model.context = p.context;
        }
        EventType::SettingsChanged => {
            let p: SettingsChanged = payload(record)?;
            model.settings = p.settings;
            if let Some(doc) = p.document {
                put_document(model, doc);
            }
        }
        EventType::SessionStarted => {
            let p: SessionStarted = payload(record)?;
            bump(&mut model.next_ids.session, p.session_id.0);
            model.sessions.insert(p.session_id);
        }
    }
    Ok(())
}

/// Folds `records` over a fresh model with default settings.
pub fn replay_model(records: &[EventRecord]) -> Result<Model> {
    let mut model = Model::new(Settings::default());
    for r in records {
        apply_event(&mut model, r)?;
    }
    Ok(model)
}

/// File-backed store directory.
#[derive(Debug)]
pub struct FileStore {
    dir: PathBuf,
    log: File,
}

impl FileStore {
    pub const SNAPSHOT: &'static str = "snapshot.json";
    pub const LOG: &'static str = "events.jsonl";

    /// Opens (creating if needed) the store at `dir` and returns it with the
    /// recovered model and the full event log.
    pub fn open(dir: &Path, settings: Settings) -> Result<(Self, Model, Vec<EventRecord>)> {
        fs::create_dir_all(dir)?;
        let snapshot_path = dir.join(Self::SNAPSHOT);
        let (mut model, from_seq) = if snapshot_path.exists() {
            let snap = Snapshot::parse(&fs::read_to_string(&snapshot_path)?)?;
            let seq = snap.log_seq;
            (Model::from_snapshot(snap)?, seq)
        } else {
            (Model::new(settings), 0)
        };
        let log_path = dir.join(Self::LOG);
        let mut records = Vec::new();
        if log_path.exists() {
            let reader = BufReader::new(File::open(&log_path)?);
            for line in reader.lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let record = EventRecord::parse(&line)?;
                let expected = records.len() as u64 + 1;
                if record.seq != expected {
                    return Err(Error::Corrupt(format!(
                        "event log gap: expected seq {expected}, found {}",
                        record.seq
                    )));
                }
                if record.seq > from_seq {
                    apply_event(&mut model, &record)?;
                }
                records.push(record);
            }
        }
        if (records.len() as u64) < from_seq {
            return Err(Error::Corrupt(format!(
                "snapshot is at seq {from_seq} but the log ends at {}",
                records.len()
            )));
        }
        let log = OpenOptions::new().create(true).append(true).open(&log_path)?;
        Ok((
            FileStore {
                dir: dir.to_path_buf(),
                log,
            },
            model,
            records,
        ))
    }

    pub fn append(&mut self, record: &EventRecord) -> Result<()> {
        let mut line = serde_json::to_string(record).expect("event serializes");
        line.push('\n');
        self.log.write_all(line.as_bytes())?;
        self.log.flush()?;
        Ok(())
    }

    /// Writes the snapshot atomically (temp file then rename).
    pub fn write_snapshot(&self, snapshot: &Snapshot) -> Result<()> {
        let tmp = self.dir.join("snapshot.json.tmp");
        let json = serde_json::to_string_pretty(snapshot).expect("snapshot serializes");
        fs::write(&tmp, json)?;
        fs::rename(&tmp, self.dir.join(Self::SNAPSHOT))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::richtext::RichText;
    use chrono::Utc;

    fn doc(id: u64, text: &str) -> Document {
        Document {
            id: DocumentId(id),
            title: "t".into(),
            body: RichText::from_plain(text),
            track_style: true,
            chars_since_analysis: 0,
            created_at: Utc::now(),
            updated_at: Utc::now(),
        }
    }

    #[test]
    fn snapshot_round_trip() {
        let mut model = Model::new(Settings::default());
        put_document(&mut model, doc(3, "hello"));
        let snap = model.to_snapshot(0, Utc::now());
        let json = serde_json::to_string(&snap).unwrap();
        let back = Model::from_snapshot(Snapshot::parse(&json).unwrap()).unwrap();
        assert_eq!(back, model);
        assert_eq!(back.next_ids.document, 4);
    }

    #[test]
    fn snapshot_schema_and_history_are_checked() {
        let model = Model::new(Settings::default());
        let mut snap = model.to_snapshot(0, Utc::now());
        snap.schema_version = 99;
        assert!(Model::from_snapshot(snap.clone()).is_err());
        snap.schema_version = SCHEMA_VERSION;
        snap.style_history.clear();
        assert!(Model::from_snapshot(snap).is_err());
    }

    #[test]
    fn fold_rejects_mistyped_payload() {
        let mut model = Model::new(Settings::default());
        let record = EventRecord {
            seq: 1,
            timestamp: Utc::now(),
            session_id: SessionId(1),
            event_type: EventType::DocumentCreated,
            payload: serde_json::json!({"nope": 1}),
        };
        assert!(matches!(apply_event(&mut model, &record), Err(Error::Corrupt(_))));
    }
}
