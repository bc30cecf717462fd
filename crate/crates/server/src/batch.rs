//! Headless pipeline: learn a style from a sample, rewrite an input under it.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use quillmate_core::clock::{Clock, SystemClock};
use quillmate_core::engine::{Engine, EngineConfig};
use quillmate_core::gateway::Gateway;
use quillmate_core::generation::ResolveAction;
use quillmate_core::model::default_style;
use quillmate_core::richtext::{RichText, TextRange};
use quillmate_core::style_engine::compute_candidate;
use quillmate_core::Error;

pub const EXIT_READ: i32 = 3;
pub const EXIT_WRITE: i32 = 4;
pub const EXIT_PROVIDER: i32 = 5;
pub const EXIT_ENGINE: i32 = 6;

#[derive(Debug)]
pub enum BatchError {
    Read { path: PathBuf, message: String },
    Write { path: PathBuf, message: String },
    Engine(Error),
}

impl BatchError {
    pub fn kind(&self) -> &str {
        match self {
            BatchError::Read { .. } => "ReadFailed",
            BatchError::Write { .. } => "WriteFailed",
            BatchError::Engine(e) => e.kind(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            BatchError::Read { .. } => EXIT_READ,
            BatchError::Write { .. } => EXIT_WRITE,
            BatchError::Engine(Error::ProviderFailure { .. } | Error::Timeout { .. } | Error::MalformedProviderOutput(_)) => {
                EXIT_PROVIDER
            }
            BatchError::Engine(_) => EXIT_ENGINE,
        }
    }
}

impl fmt::Display for BatchError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BatchError::Read { path, message } => write!(f, "cannot read {}: {message}", path.display()),
            BatchError::Write { path, message } => write!(f, "cannot write {}: {message}", path.display()),
            BatchError::Engine(e) => e.fmt(f),
        }
    }
}

impl std::error::Error for BatchError {}

impl From<Error> for BatchError {
    fn from(e: Error) -> Self {
        BatchError::Engine(e)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchOutput {
    pub output_path: PathBuf,
    pub style_path: PathBuf,
    pub rewritten: String,
    pub style_markdown: String,
}

/// Where the learned style description is written: next to the output,
/// with `.style.md` appended to its file name.
pub fn style_path_for(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".style.md");
    output.with_file_name(name)
}

fn read(path: &Path) -> Result<String, BatchError> {
    std::fs::read_to_string(path).map_err(|e| BatchError::Read {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn write(path: &Path, text: &str) -> Result<(), BatchError> {
    std::fs::write(path, text).map_err(|e| BatchError::Write {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Extracts a style from `sample`, rewrites all of `input` under it and
/// writes the rewrite to `output` and the style to [`style_path_for`].
/// Nothing is written unless every step succeeds.
pub fn run_batch(gateway: Gateway, input: &Path, sample: &Path, output: &Path) -> Result<BatchOutput, BatchError> {
    let sample_text = read(sample)?;
    let input_text = read(input)?;
    let clock: Arc<dyn Clock> = Arc::new(SystemClock);
    let engine = Engine::new(gateway, clock, EngineConfig::default());

    let learned = compute_candidate(engine.gateway(), &sample_text, &default_style(), "", "")?;
    let style = engine.edit_style_directly(&learned.description.to_rich_text())?;

    let doc = engine.create_document("batch input", RichText::from_plain(&input_text))?;
    let rewritten = if doc.body.char_len() == 0 {
        String::new()
    } else {
        let g = engine.rewrite(doc.id, TextRange::new(0, doc.body.char_len()))?;
        let out = engine.resolve(g.id, ResolveAction::Insert)?;
        out.document.map(|d| d.body.plain_text()).unwrap_or_default()
    };

    let style_markdown = style.description.to_markdown();
    let style_path = style_path_for(output);
    write(output, &rewritten)?;
    write(&style_path, &style_markdown)?;
    Ok(BatchOutput {
        output_path: output.to_path_buf(),
        style_path,
        rewritten,
        style_markdown,
    })
}
