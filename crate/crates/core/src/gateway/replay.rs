//! Recorded-response fixtures.
//!
//! A fixture directory holds one JSON file per recorded call, named
//! `<request_hash>.json`, where the hash covers the template id and the
//! rendered prompt. [`ReplayProvider`] answers from such a directory and
//! [`RecordingProvider`] writes one while delegating to a real provider.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CompletionRequest, Provider, ProviderError, TemplateId};
use crate::error::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fixture {
    pub template_id: TemplateId,
    pub rendered_prompt: String,
    pub response: String,
}

impl Fixture {
    pub fn parse(text: &str) -> Result<Self, Error> {
        serde_json::from_str(text).map_err(|e| Error::Corrupt(format!("fixture: {e}")))
    }

    pub fn hash(&self) -> String {
        request_hash(self.template_id, &self.rendered_prompt)
    }
}

pub fn request_hash(template_id: TemplateId, rendered_prompt: &str) -> String {
    let mut h = Sha256::new();
    h.update(template_id.as_str().as_bytes());
    h.update(b"\n");
    h.update(rendered_prompt.as_bytes());
    hex::encode(h.finalize())
}

#[derive(Debug, Default)]
pub struct ReplayProvider {
    responses: HashMap<String, String>,
}

/// Problems found while loading a fixture directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixtureIssue {
    pub path: PathBuf,
    pub problem: String,
}

impl ReplayProvider {
    /// Loads every `*.json` fixture in `dir`. Unparseable files and files
    /// whose name does not match their content hash are reported and skipped.
    pub fn load(dir: &Path) -> Result<(Self, Vec<FixtureIssue>), Error> {
        let mut responses = HashMap::new();
        let mut issues = Vec::new();
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for path in paths {
            let text = std::fs::read_to_string(&path)?;
            match Fixture::parse(&text) {
                Ok(fixture) => {
                    let hash = fixture.hash();
                    if path.file_stem().and_then(|s| s.to_str()) != Some(hash.as_str()) {
                        issues.push(FixtureIssue {
                            path: path.clone(),
                            problem: format!("file name does not match request hash {hash}"),
                        });
                        continue;
                    }
                    responses.insert(hash, fixture.response);
                }
                Err(e) => issues.push(FixtureIssue {
                    path: path.clone(),
                    problem: e.to_string(),
                }),
            }
        }
        Ok((ReplayProvider { responses }, issues))
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl Provider for ReplayProvider {
    fn name(&self) -> &str {
        "replay"
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        let key = request_hash(request.template_id, &request.rendered_prompt);
        self.responses
            .get(&key)
            .cloned()
            .ok_or_else(|| ProviderError::Fatal(format!("no recorded response for {key}")))
    }
}

pub struct RecordingProvider {
    inner: Arc<dyn Provider>,
    dir: PathBuf,
}

impl RecordingProvider {
    pub fn new(inner: Arc<dyn Provider>, dir: impl Into<PathBuf>) -> Self {
        RecordingProvider {
            inner,
            dir: dir.into(),
        }
    }
}

impl Provider for RecordingProvider {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        let response = self.inner.complete(request)?;
        let fixture = Fixture {
            template_id: request.template_id,
            rendered_prompt: request.rendered_prompt.clone(),
            response: response.clone(),
        };
        let path = self.dir.join(format!("{}.json", fixture.hash()));
        let json = serde_json::to_string_pretty(&fixture).expect("fixture serializes");
        if let Err(e) = std::fs::create_dir_all(&self.dir).and_then(|_| std::fs::write(&path, json)) {
            tracing::warn!(path = %path.display(), error = %e, "could not record fixture");
        }
        Ok(response)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::mock::MockProvider;
    use crate::gateway::{Bindings, Gateway};

    fn request() -> CompletionRequest {
        let mut b = Bindings::new();
        b.insert("style".into(), "terse".into());
        b.insert("selection".into(), "hello".into());
        Gateway::mock().request(TemplateId::Rewrite, b).unwrap()
    }

    #[test]
    fn record_then_replay() {
        let dir = tempfile::tempdir().unwrap();
        let rec = RecordingProvider::new(Arc::new(MockProvider), dir.path());
        let req = request();
        let live = rec.complete(&req).unwrap();
        let (replay, issues) = ReplayProvider::load(dir.path()).unwrap();
        assert!(issues.is_empty());
        assert_eq!(replay.len(), 1);
        assert_eq!(replay.complete(&req).unwrap(), live);
    }

    #[test]
    fn missing_fixture_is_fatal_and_bad_files_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("junk.json"), "{").unwrap();
        let fixture = Fixture {
            template_id: TemplateId::Rewrite,
            rendered_prompt: "p".into(),
            response: "r".into(),
        };
        std::fs::write(
            dir.path().join("wrongname.json"),
            serde_json::to_string(&fixture).unwrap(),
        )
        .unwrap();
        let (replay, issues) = ReplayProvider::load(dir.path()).unwrap();
        assert_eq!(issues.len(), 2);
        assert!(matches!(replay.complete(&request()), Err(ProviderError::Fatal(_))));
    }
}
