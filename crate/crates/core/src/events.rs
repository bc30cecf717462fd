//! Typed payloads for each [`EventType`]. Payloads carry the post-state of
//! whatever the operation changed, so the log alone is enough to rebuild the
//! model (see [`crate::store::apply_event`]).

use serde::{Deserialize, Serialize};

use crate::model::{
    AnchorStatus, ContextProfile, Document, DocumentId, Generation, GenerationId, Highlight,
    HighlightId, Page, Rating, SessionId, Settings, StyleHistoryEntry, StyleId, StyleSource,
    Timestamp,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentChanged {
    pub document: Document,
    #[serde(default)]
    pub inserted_chars: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reanchored: Vec<Highlight>,
    #[serde(default)]
    pub analysis_dispatched: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleCommitted {
    pub entry: StyleHistoryEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub document_id: Option<DocumentId>,
    /// Threshold in force for gated sources; absent for ungated ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dispatched_at: Option<Timestamp>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleNotUpdated {
    pub based_on: StyleId,
    pub source: StyleSource,
    pub difference_rating: Rating,
    pub comparison_text: String,
    pub threshold: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub document_id: Option<DocumentId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dispatched_at: Option<Timestamp>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighlightChanged {
    pub highlight: Highlight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighlightRemoved {
    pub highlight_id: HighlightId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighlightsReanchored {
    pub document_id: DocumentId,
    pub highlights: Vec<Highlight>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageViewed {
    pub page: Page,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationOffered {
    pub generation: Generation,
    pub bundle_has_context: bool,
    pub body_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationInserted {
    pub generation: Generation,
    pub document: Document,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reanchored: Vec<Highlight>,
    #[serde(default)]
    pub analysis_dispatched: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationClosed {
    pub generation: Generation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRegenerated {
    pub superseded: GenerationId,
    pub generation: Generation,
    pub bundle_has_context: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextChanged {
    pub context: ContextProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingsChanged {
    pub settings: Settings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub document: Option<Document>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStarted {
    pub session_id: SessionId,
}

/// Reanchoring status reported for each highlight touched by a reanchor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReanchorStatus {
    pub highlight_id: HighlightId,
    pub status: AnchorStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerCause {
    AutomaticCounter,
    ManualRefresh,
}

/// A style analysis was started for a document; its counter is zero from
/// here on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisDispatched {
    pub document_id: DocumentId,
    pub cause: TriggerCause,
}

/// A dispatched analysis ended without a style commit or a no-update
/// verdict: the provider failed, the candidate went stale, or a lock was
/// switched on while it ran.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisAbandoned {
    pub document_id: DocumentId,
    pub cause: TriggerCause,
    pub kind: String,
    pub message: String,
}
