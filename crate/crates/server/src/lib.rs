//! HTTP service and batch front end for the quillmate engine.

pub mod api;
pub mod batch;
pub mod error;
pub mod provider;

pub use api::{router, Route, ROUTES};
pub use error::{status_for, ApiError, ErrorBody};
