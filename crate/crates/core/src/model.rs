//! Shared domain types. Pure values; no I/O.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::Error;
use crate::richtext::{RichText, TextRange};
use crate::style::{default_description, StyleDescription, DEFAULT_STYLE_SUMMARY};

pub type Timestamp = DateTime<Utc>;

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u64);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }

        impl FromStr for $name {
            type Err = std::num::ParseIntError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                s.parse().map($name)
            }
        }
    };
}

id_type!(DocumentId);
id_type!(
    /// Identifies a committed style profile, and so a style history entry.
    StyleId
);
id_type!(HighlightId);
id_type!(GenerationId);
id_type!(SessionId);

/// Difference rating between two styles: 0 identical, 10 entirely different.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Rating(u8);

impl Rating {
    pub const MAX: u8 = 10;

    pub fn new(value: u8) -> Option<Self> {
        (value <= Self::MAX).then_some(Rating(value))
    }

    pub fn value(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for Rating {
    type Error = String;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Rating::new(value).ok_or_else(|| format!("rating {value} outside 0..=10"))
    }
}

impl From<Rating> for u8 {
    fn from(r: Rating) -> u8 {
        r.0
    }
}

impl fmt::Display for Rating {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: DocumentId,
    pub title: String,
    pub body: RichText,
    pub track_style: bool,
    pub chars_since_analysis: u64,
    pub created_at: Timestamp,
    pub updated_at: Timestamp,
}

impl Document {
    pub fn body_hash(&self) -> String {
        body_hash(&self.body)
    }
}

/// Hex SHA-256 of the canonical serialization of `body`.
pub fn body_hash(body: &RichText) -> String {
    hex::encode(Sha256::digest(body.to_canonical().as_bytes()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StyleSource {
    Default,
    Automatic,
    ManualEdit,
    ManualRefresh,
    Revert,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StyleProfile {
    pub id: StyleId,
    pub summary: String,
    pub summary_generated_at: Timestamp,
    pub description: StyleDescription,
    pub source: StyleSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reverted_from: Option<StyleId>,
    pub created_at: Timestamp,
}

pub const DEFAULT_STYLE_ID: StyleId = StyleId(1);

/// The built-in generic profile every engine starts from.
pub fn default_style() -> StyleProfile {
    let epoch = Utc.timestamp_opt(0, 0).single().expect("epoch");
    StyleProfile {
        id: DEFAULT_STYLE_ID,
        summary: DEFAULT_STYLE_SUMMARY.to_string(),
        summary_generated_at: epoch,
        description: default_description(),
        source: StyleSource::Default,
        reverted_from: None,
        created_at: epoch,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StyleComparison {
    pub old_style_id: StyleId,
    pub new_style_id: StyleId,
    pub comparison_text: String,
    pub difference_rating: Rating,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StyleHistoryEntry {
    pub profile: StyleProfile,
    /// Comparison against the preceding entry; absent only for the first.
    pub comparison: Option<StyleComparison>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Like,
    Dislike,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorStatus {
    Anchored,
    Moved,
    Orphaned,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Highlight {
    pub id: HighlightId,
    pub document_id: Option<DocumentId>,
    pub excerpt: String,
    pub anchor: Option<TextRange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor_status: Option<AnchorStatus>,
    pub polarity: Polarity,
    pub reason: Option<String>,
    pub active: bool,
    pub created_at: Timestamp,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextProfile {
    pub body: RichText,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationKind {
    Rewrite,
    ApplyPrompt,
    Continue,
    InlinePrompt,
}

impl GenerationKind {
    pub const ALL: [GenerationKind; 4] = [
        GenerationKind::Rewrite,
        GenerationKind::ApplyPrompt,
        GenerationKind::Continue,
        GenerationKind::InlinePrompt,
    ];

    pub fn uses_context(self) -> bool {
        matches!(self, GenerationKind::Continue | GenerationKind::InlinePrompt)
    }

    pub fn takes_instruction(self) -> bool {
        matches!(self, GenerationKind::ApplyPrompt | GenerationKind::InlinePrompt)
    }

    pub fn event_type(self) -> EventType {
        match self {
            GenerationKind::Rewrite => EventType::Rewrite,
            GenerationKind::ApplyPrompt => EventType::ApplyPrompt,
            GenerationKind::Continue => EventType::Continue,
            GenerationKind::InlinePrompt => EventType::InlinePrompt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationTarget {
    Selection(TextRange),
    Point(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationStatus {
    Offered,
    Inserted,
    Discarded,
    Superseded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generation {
    pub id: GenerationId,
    pub kind: GenerationKind,
    pub document_id: DocumentId,
    pub target: GenerationTarget,
    pub instruction: Option<String>,
    /// Selected text at request time (selection kinds only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_text: Option<String>,
    pub output: String,
    pub status: GenerationStatus,
    pub attempt: u32,
    /// Id of the first generation in a regenerate chain.
    pub lineage: GenerationId,
    /// Committed style the bundle was rendered with.
    pub style_id: StyleId,
    pub created_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Settings {
    pub global_style_lock: bool,
    pub feedback_mode: bool,
    pub analysis_interval_n: u64,
    pub update_threshold: u8,
    #[serde(default = "default_window")]
    pub continue_window_chars: usize,
}

fn default_window() -> usize {
    2000
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            global_style_lock: false,
            feedback_mode: true,
            analysis_interval_n: 100,
            update_threshold: 3,
            continue_window_chars: default_window(),
        }
    }
}

impl Settings {
    pub fn validate(&self) -> Result<(), Error> {
        if self.analysis_interval_n == 0 {
            return Err(Error::InvalidSettings(
                "analysis_interval_n must be positive".into(),
            ));
        }
        if self.update_threshold > Rating::MAX {
            return Err(Error::InvalidSettings(
                "update_threshold must be within 0..=10".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Page {
    Home,
    Style,
    Context,
    History,
    Likes,
}

macro_rules! event_types {
    ($($variant:ident => $name:literal),* $(,)?) => {
        /// Closed set of telemetry event types.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum EventType {
            $($variant),*
        }

        impl EventType {
            pub const ALL: &'static [EventType] = &[$(EventType::$variant),*];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(EventType::$variant => $name),*
                }
            }
        }

        impl FromStr for EventType {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self, Error> {
                match s {
                    $($name => Ok(EventType::$variant),)*
                    other => Err(Error::UnknownEventType(other.to_string())),
                }
            }
        }
    };
}

event_types! {
    StyleUpdateAutomatic => "style_update_automatic",
    StyleUpdateManualRequest => "style_update_manual_request",
    StyleUpdateDirectEdit => "style_update_direct_edit",
    StyleRevert => "style_revert",
    StyleNoUpdate => "style_no_update",
    StyleAnalysisDispatched => "style_analysis_dispatched",
    StyleAnalysisAbandoned => "style_analysis_abandoned",
    LikeAdded => "like_added",
    DislikeAdded => "dislike_added",
    HighlightToggled => "highlight_toggled",
    HighlightDeleted => "highlight_deleted",
    HighlightsReanchored => "highlights_reanchored",
    PageView => "page_view",
    Rewrite => "rewrite",
    ApplyPrompt => "apply_prompt",
    Continue => "continue",
    InlinePrompt => "inline_prompt",
    GenerationInserted => "generation_inserted",
    GenerationDiscarded => "generation_discarded",
    GenerationRegenerated => "generation_regenerated",
    ContextEdited => "context_edited",
    DocumentCreated => "document_created",
    DocumentUpdated => "document_updated",
    SettingsChanged => "settings_changed",
    SessionStarted => "session_started",
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for EventType {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for EventType {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub seq: u64,
    pub timestamp: Timestamp,
    pub session_id: SessionId,
    #[serde(rename = "type")]
    pub event_type: EventType,
    pub payload: Value,
}

impl EventRecord {
    /// Parses one line of the event log. Unknown `type` values are reported
    /// as [`Error::UnknownEventType`].
    pub fn parse(line: &str) -> Result<Self, Error> {
        let raw: Value = serde_json::from_str(line).map_err(|e| Error::Corrupt(e.to_string()))?;
        if let Some(ty) = raw.get("type").and_then(Value::as_str) {
            ty.parse::<EventType>()?;
        }
        serde_json::from_value(raw).map_err(|e| Error::Corrupt(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::style::validate_style_description;

    #[test]
    fn default_style_is_fixed_and_valid() {
        let a = default_style();
        assert_eq!(a, default_style());
        assert_eq!(a.source, StyleSource::Default);
        assert_eq!(a.summary, "General-purpose neutral style");
        assert!(validate_style_description(&a.description.to_rich_text()).is_ok());
    }

    #[test]
    fn rating_range_is_enforced_in_serde() {
        assert!(serde_json::from_str::<Rating>("10").is_ok());
        assert!(serde_json::from_str::<Rating>("11").is_err());
    }

    #[test]
    fn event_types_round_trip_and_unknown_rejected() {
        for ty in EventType::ALL {
            let json = serde_json::to_string(ty).unwrap();
            assert_eq!(serde_json::from_str::<EventType>(&json).unwrap(), *ty);
        }
        let line = r#"{"seq":1,"timestamp":"2024-01-01T00:00:00Z","session_id":1,"type":"teleport","payload":{}}"#;
        assert!(matches!(
            EventRecord::parse(line),
            Err(Error::UnknownEventType(t)) if t == "teleport"
        ));
    }

    #[test]
    fn settings_defaults() {
        let s = Settings::default();
        assert_eq!((s.analysis_interval_n, s.update_threshold), (100, 3));
        assert!(Settings { analysis_interval_n: 0, ..s.clone() }.validate().is_err());
        assert!(Settings { update_threshold: 11, ..s }.validate().is_err());
    }
}
