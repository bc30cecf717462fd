//! Append-only event log and the session analyses built on it: per-type
//! counts (optionally split into halves of the task span) and lane-structured
//! timelines.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::events::PageViewed;
use crate::model::{EventRecord, EventType, Page, SessionId, Timestamp};

#[derive(Debug, Default, Clone)]
pub struct EventLog {
    records: Vec<EventRecord>,
}

impl EventLog {
    pub fn from_records(records: Vec<EventRecord>) -> Self {
        EventLog { records }
    }

    /// Assigns the next sequence number and appends. Timestamps are clamped
    /// so they never decrease.
    pub fn append(&mut self, mut record: EventRecord) -> u64 {
        record.seq = self.records.len() as u64 + 1;
        if let Some(last) = self.records.last() {
            if record.timestamp < last.timestamp {
                record.timestamp = last.timestamp;
            }
        }
        let seq = record.seq;
        self.records.push(record);
        seq
    }

    pub fn last(&self) -> Option<&EventRecord> {
        self.records.last()
    }

    pub fn last_seq(&self) -> u64 {
        self.records.len() as u64
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records with `seq >= from_seq`, in order.
    pub fn replay(&self, from_seq: u64) -> &[EventRecord] {
        let start = (from_seq.max(1) - 1) as usize;
        self.records.get(start..).unwrap_or(&[])
    }

    pub fn records(&self) -> &[EventRecord] {
        &self.records
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StyleUpdateCounts {
    pub automatic: u64,
    pub direct_edit: u64,
    pub manual_request: u64,
    pub revert: u64,
    pub no_update: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureCounts {
    pub rewrite: u64,
    pub apply_prompt: u64,
    #[serde(rename = "continue")]
    pub continue_text: u64,
    pub inline_prompt: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub style_updates: StyleUpdateCounts,
    pub likes: u64,
    pub dislikes: u64,
    pub page_views: BTreeMap<Page, u64>,
    pub features: FeatureCounts,
    /// Every event type except `session_started`.
    pub by_type: BTreeMap<String, u64>,
}

impl Counts {
    fn add(&mut self, record: &EventRecord) {
        let ty = record.event_type;
        if ty == EventType::SessionStarted {
            return;
        }
        *self.by_type.entry(ty.as_str().to_string()).or_default() += 1;
        match ty {
            EventType::StyleUpdateAutomatic => self.style_updates.automatic += 1,
            EventType::StyleUpdateDirectEdit => self.style_updates.direct_edit += 1,
            EventType::StyleUpdateManualRequest => self.style_updates.manual_request += 1,
            EventType::StyleRevert => self.style_updates.revert += 1,
            EventType::StyleNoUpdate => self.style_updates.no_update += 1,
            EventType::LikeAdded => self.likes += 1,
            EventType::DislikeAdded => self.dislikes += 1,
            EventType::Rewrite => self.features.rewrite += 1,
            EventType::ApplyPrompt => self.features.apply_prompt += 1,
            EventType::Continue => self.features.continue_text += 1,
            EventType::InlinePrompt => self.features.inline_prompt += 1,
            EventType::PageView => {
                if let Ok(p) = serde_json::from_value::<PageViewed>(record.payload.clone()) {
                    *self.page_views.entry(p.page).or_default() += 1;
                }
            }
            _ => {}
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpan {
    pub start: Timestamp,
    pub end: Timestamp,
}

impl TaskSpan {
    pub fn midpoint(&self) -> Timestamp {
        self.start + (self.end - self.start) / 2
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionCounts {
    pub session_id: SessionId,
    pub task_span: Option<TaskSpan>,
    pub total: Counts,
    /// First and second half of the task span; events exactly at the
    /// midpoint fall in the second half.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub halves: Option<[Counts; 2]>,
}

fn session_records(records: &[EventRecord], session: SessionId) -> Result<Vec<&EventRecord>> {
    let selected: Vec<&EventRecord> = records.iter().filter(|r| r.session_id == session).collect();
    if selected.is_empty() {
        return Err(Error::UnknownSession(session));
    }
    Ok(selected)
}

fn span_of(records: &[&EventRecord]) -> Option<TaskSpan> {
    let first = records.first()?;
    let last = records.last()?;
    Some(TaskSpan {
        start: first.timestamp,
        end: last.timestamp,
    })
}

pub fn summarize_counts(
    records: &[EventRecord],
    session: SessionId,
    split_halves: bool,
) -> Result<SessionCounts> {
    let selected = session_records(records, session)?;
    let task_span = span_of(&selected);
    let mut total = Counts::default();
    for r in &selected {
        total.add(r);
    }
    let halves = split_halves.then(|| {
        let mut halves: [Counts; 2] = Default::default();
        if let Some(span) = task_span {
            let mid = span.midpoint();
            for r in &selected {
                let idx = usize::from(r.timestamp >= mid);
                halves[idx].add(r);
            }
        }
        halves
    });
    Ok(SessionCounts {
        session_id: session,
        task_span,
        total,
        halves,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelinePoint {
    pub seq: u64,
    pub timestamp: Timestamp,
    pub payload: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineExport {
    pub session_id: SessionId,
    /// One lane per event type, keyed by type name.
    pub lanes: BTreeMap<String, Vec<TimelinePoint>>,
    pub task_span: Option<TaskSpan>,
}

pub fn export_timeline(records: &[EventRecord], session: SessionId) -> Result<TimelineExport> {
    let selected = session_records(records, session)?;
    let mut lanes: BTreeMap<String, Vec<TimelinePoint>> = BTreeMap::new();
    for r in &selected {
        lanes
            .entry(r.event_type.as_str().to_string())
            .or_default()
            .push(TimelinePoint {
                seq: r.seq,
                timestamp: r.timestamp,
                payload: r.payload.clone(),
            });
    }
    Ok(TimelineExport {
        session_id: session,
        lanes,
        task_span: span_of(&selected),
    })
}

impl TimelineExport {
    /// Delimiter-separated form: `lane,seq,timestamp,offset_ms,payload`,
    /// lanes in name order, points in time order. `offset_ms` is relative to
    /// the start of the task span.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["lane", "seq", "timestamp", "offset_ms", "payload"])
            .expect("in-memory write");
        let start = self.task_span.map(|s| s.start);
        for (lane, points) in &self.lanes {
            for p in points {
                let offset = start
                    .map(|s| (p.timestamp - s).num_milliseconds())
                    .unwrap_or(0);
                w.write_record([
                    lane.as_str(),
                    &p.seq.to_string(),
                    &p.timestamp.to_rfc3339(),
                    &offset.to_string(),
                    &p.payload.to_string(),
                ])
                .expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    /// All points merged across lanes in sequence order, with their lane.
    pub fn merged(&self) -> Vec<(&str, &TimelinePoint)> {
        let mut all: Vec<(&str, &TimelinePoint)> = self
            .lanes
            .iter()
            .flat_map(|(lane, pts)| pts.iter().map(move |p| (lane.as_str(), p)))
            .collect();
        all.sort_by_key(|(_, p)| p.seq);
        all
    }
}
