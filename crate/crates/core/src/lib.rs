//! Style-aware writing engine.
//!
//! Keeps one evolving writing-style profile and a free-form context page,
//! learns from what the writer types and from explicit likes and dislikes,
//! and uses both to rewrite or generate text that is only ever offered,
//! never applied without an explicit insert.

pub mod clock;
pub mod engine;
pub mod error;
pub mod events;
pub mod feedback;
pub mod gateway;
pub mod generation;
pub mod model;
pub mod richtext;
pub mod store;
pub mod style;
pub mod style_engine;
pub mod telemetry;

pub use error::{Error, Result};
