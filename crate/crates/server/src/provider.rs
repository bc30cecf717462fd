//! Builds a [`Gateway`] from command-line options.

use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, ValueEnum};

use quillmate_core::gateway::http::{HttpProvider, ProviderProfile};
use quillmate_core::gateway::mock::MockProvider;
use quillmate_core::gateway::replay::{RecordingProvider, ReplayProvider};
use quillmate_core::gateway::{Gateway, Provider, RetryPolicy, TemplateSet};
use quillmate_core::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProviderKind {
    /// Deterministic offline provider.
    Mock,
    /// Hosted model over HTTP; needs --profile and the API key variable.
    Http,
    /// Answers from recorded fixtures; needs --fixtures.
    Replay,
}

#[derive(Debug, Clone, Args)]
pub struct ProviderArgs {
    #[arg(long, value_enum, default_value = "mock")]
    pub provider: ProviderKind,
    /// JSON provider profile (endpoint and model names) for --provider http.
    #[arg(long)]
    pub profile: Option<PathBuf>,
    /// Fixture directory for --provider replay.
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
    /// Directory of `<template_id>.tmpl` files overriding the built-in templates.
    #[arg(long)]
    pub templates: Option<PathBuf>,
    /// Record every provider response as a fixture in this directory.
    #[arg(long)]
    pub record: Option<PathBuf>,
}

impl ProviderArgs {
    pub fn mock() -> Self {
        ProviderArgs {
            provider: ProviderKind::Mock,
            profile: None,
            fixtures: None,
            templates: None,
            record: None,
        }
    }

    pub fn build(&self) -> Result<Gateway, Error> {
        let templates = match &self.templates {
            Some(dir) => TemplateSet::load_dir(dir)?,
            None => TemplateSet::builtin(),
        };
        let (provider, retry): (Arc<dyn Provider>, RetryPolicy) = match self.provider {
            ProviderKind::Mock => (Arc::new(MockProvider), RetryPolicy::immediate(1)),
            ProviderKind::Http => {
                let path = self
                    .profile
                    .as_ref()
                    .ok_or_else(|| Error::InvalidRequest("--provider http needs --profile".into()))?;
                let text = std::fs::read_to_string(path)?;
                let profile: ProviderProfile = serde_json::from_str(&text)
                    .map_err(|e| Error::InvalidRequest(format!("provider profile: {e}")))?;
                (Arc::new(HttpProvider::from_env(profile)), RetryPolicy::default())
            }
            ProviderKind::Replay => {
                let dir = self
                    .fixtures
                    .as_ref()
                    .ok_or_else(|| Error::InvalidRequest("--provider replay needs --fixtures".into()))?;
                let (replay, issues) = ReplayProvider::load(dir)?;
                for issue in issues {
                    tracing::warn!(path = %issue.path.display(), "skipping fixture: {}", issue.problem);
                }
                (Arc::new(replay), RetryPolicy::immediate(1))
            }
        };
        let provider: Arc<dyn Provider> = match &self.record {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                Arc::new(RecordingProvider::new(provider, dir.clone()))
            }
            None => provider,
        };
        Ok(Gateway::new(provider, templates, retry))
    }
}
