use thiserror::Error;

use crate::gateway::template::TemplateError;
use crate::model::{DocumentId, GenerationId, HighlightId, SessionId, StyleId};
use crate::richtext::RichTextError;
use crate::style::StyleDescriptionError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown document {0}")]
    UnknownDocument(DocumentId),
    #[error("unknown style history entry {0}")]
    UnknownHistoryEntry(StyleId),
    #[error("unknown highlight {0}")]
    UnknownHighlight(HighlightId),
    #[error("unknown generation {0}")]
    UnknownGeneration(GenerationId),
    #[error("unknown session {0}")]
    UnknownSession(SessionId),
    #[error("unknown event type {0:?}")]
    UnknownEventType(String),

    #[error(transparent)]
    StyleDescription(#[from] StyleDescriptionError),
    #[error(transparent)]
    RichText(#[from] RichTextError),
    #[error("range is empty")]
    EmptyRange,
    #[error("range {start}..{end} is outside a document of {len} characters")]
    OutOfBounds { start: usize, end: usize, len: usize },
    #[error("highlight excerpt is empty")]
    EmptyExcerpt,
    #[error("instruction is empty")]
    EmptyInstruction,
    #[error("invalid settings: {0}")]
    InvalidSettings(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),

    #[error("generation {0} is already resolved")]
    AlreadyResolved(GenerationId),
    #[error("generation {0} no longer matches the document: {1}")]
    GenerationConflict(GenerationId, String),
    #[error("candidate was computed against style {based_on}, but {current} is now committed")]
    StaleCandidate { based_on: StyleId, current: StyleId },

    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("provider failed after {attempts} attempt(s): {cause}")]
    ProviderFailure { attempts: u32, cause: String },
    #[error("provider timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("malformed provider output: {0}")]
    MalformedProviderOutput(String),

    #[error("storage error: {0}")]
    Io(String),
    #[error("corrupt record: {0}")]
    Corrupt(String),
}

impl Error {
    /// Machine-readable kind, stable across releases.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::UnknownDocument(_) => "UnknownDocument",
            Error::UnknownHistoryEntry(_) => "UnknownHistoryEntry",
            Error::UnknownHighlight(_) => "UnknownHighlight",
            Error::UnknownGeneration(_) => "UnknownGeneration",
            Error::UnknownSession(_) => "UnknownSession",
            Error::UnknownEventType(_) => "UnknownEventType",
            Error::StyleDescription(e) => match e {
                StyleDescriptionError::MissingSection(_) => "MissingSection",
                StyleDescriptionError::EmptySection(_) => "EmptySection",
                StyleDescriptionError::DuplicateSection(_) => "DuplicateSection",
                StyleDescriptionError::UnlabeledContent => "UnlabeledContent",
            },
            Error::RichText(_) => "MalformedRichText",
            Error::EmptyRange => "EmptyRange",
            Error::OutOfBounds { .. } => "OutOfBounds",
            Error::EmptyExcerpt => "EmptyExcerpt",
            Error::EmptyInstruction => "EmptyInstruction",
            Error::InvalidSettings(_) => "InvalidSettings",
            Error::InvalidRequest(_) => "InvalidRequest",
            Error::AlreadyResolved(_) => "AlreadyResolved",
            Error::GenerationConflict(..) => "GenerationConflict",
            Error::StaleCandidate { .. } => "StaleCandidate",
            Error::Template(e) => match e {
                TemplateError::MissingBinding(_) => "MissingBinding",
                TemplateError::UnusedBinding(_) => "UnusedBinding",
                TemplateError::Syntax { .. } => "TemplateSyntax",
                TemplateError::Contract { .. } => "TemplateContract",
                TemplateError::UnknownTemplate(_) => "UnknownTemplate",
                TemplateError::Io(_) => "TemplateIo",
            },
            Error::ProviderFailure { .. } => "ProviderFailure",
            Error::Timeout { .. } => "Timeout",
            Error::MalformedProviderOutput(_) => "MalformedProviderOutput",
            Error::Io(_) => "Io",
            Error::Corrupt(_) => "Corrupt",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
