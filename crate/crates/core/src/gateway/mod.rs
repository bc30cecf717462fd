//! Provider-agnostic completion layer.
//!
//! Templates are rendered strictly, routed to a model tier, and sent through
//! a [`Provider`] with retries. [`mock::MockProvider`] is a pure function of
//! the request and backs every test in this workspace.

pub mod http;
pub mod mock;
pub mod parse;
pub mod replay;
pub mod template;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use template::{Template, TemplateError, TemplateId, TemplateSet, Tier};

pub type Bindings = BTreeMap<String, String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Determinism {
    Deterministic,
    Creative,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub template_id: TemplateId,
    pub tier: Tier,
    pub rendered_prompt: String,
    /// The values substituted into the template, kept for providers that
    /// work from structured inputs (the mock, self-evaluation).
    pub bindings: Bindings,
    pub max_length: u32,
    pub determinism: Determinism,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProviderError {
    /// Worth retrying: rate limits, 5xx, connection resets.
    Transient(String),
    Timeout,
    /// Not worth retrying: bad credentials, malformed request.
    Fatal(String),
}

impl fmt::Display for ProviderError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProviderError::Transient(m) => write!(f, "transient: {m}"),
            ProviderError::Timeout => f.write_str("timeout"),
            ProviderError::Fatal(m) => write!(f, "fatal: {m}"),
        }
    }
}

pub trait Provider: Send + Sync {
    fn name(&self) -> &str;
    fn complete(&self, request: &CompletionRequest) -> std::result::Result<String, ProviderError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    /// Total attempts, including the first.
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_millis(250),
            max_delay: Duration::from_secs(4),
        }
    }
}

impl RetryPolicy {
    pub fn immediate(max_attempts: u32) -> Self {
        RetryPolicy {
            max_attempts,
            base_delay: Duration::ZERO,
            max_delay: Duration::ZERO,
        }
    }

    fn backoff(&self, attempt: u32) -> Duration {
        if self.base_delay.is_zero() {
            return Duration::ZERO;
        }
        let exp = self
            .base_delay
            .saturating_mul(1u32 << attempt.saturating_sub(1).min(16))
            .min(self.max_delay);
        let jitter_ms = rand::rng().random_range(0..=self.base_delay.as_millis() as u64);
        exp + Duration::from_millis(jitter_ms)
    }
}

/// Sends `request` to `provider`, retrying transient failures and timeouts
/// up to `policy.max_attempts` total attempts.
pub fn complete(
    request: &CompletionRequest,
    provider: &dyn Provider,
    policy: &RetryPolicy,
) -> Result<String> {
    let max = policy.max_attempts.max(1);
    let mut last = ProviderError::Transient("no attempt made".into());
    for attempt in 1..=max {
        match provider.complete(request) {
            Ok(text) => return Ok(text),
            Err(ProviderError::Fatal(cause)) => {
                return Err(Error::ProviderFailure {
                    attempts: attempt,
                    cause,
                })
            }
            Err(e) => {
                tracing::debug!(template = %request.template_id, attempt, error = %e, "provider attempt failed");
                last = e;
                if attempt < max {
                    std::thread::sleep(policy.backoff(attempt));
                }
            }
        }
    }
    Err(match last {
        ProviderError::Timeout => Error::Timeout { attempts: max },
        other => Error::ProviderFailure {
            attempts: max,
            cause: other.to_string(),
        },
    })
}

fn max_length(id: TemplateId) -> u32 {
    match id {
        TemplateId::StyleExtract => 900,
        TemplateId::StyleCompare => 300,
        TemplateId::StyleSummarize => 80,
        TemplateId::FeedbackSummarize => 200,
        TemplateId::SelfEval => 16,
        TemplateId::Rewrite | TemplateId::Apply | TemplateId::Continue | TemplateId::Inline => 700,
    }
}

fn determinism(id: TemplateId) -> Determinism {
    match id {
        TemplateId::Rewrite | TemplateId::Apply | TemplateId::Continue | TemplateId::Inline => {
            Determinism::Creative
        }
        _ => Determinism::Deterministic,
    }
}

/// Score at or above which a self-evaluation counts as a pass.
pub const SELF_EVAL_PASS: u8 = 8;

#[derive(Clone)]
pub struct Gateway {
    templates: Arc<TemplateSet>,
    provider: Arc<dyn Provider>,
    retry: RetryPolicy,
}

impl fmt::Debug for Gateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gateway")
            .field("provider", &self.provider.name())
            .field("retry", &self.retry)
            .finish()
    }
}

impl Gateway {
    pub fn new(provider: Arc<dyn Provider>, templates: TemplateSet, retry: RetryPolicy) -> Self {
        Gateway {
            templates: Arc::new(templates),
            provider,
            retry,
        }
    }

    pub fn mock() -> Self {
        Gateway::new(
            Arc::new(mock::MockProvider),
            TemplateSet::builtin(),
            RetryPolicy::immediate(1),
        )
    }

    pub fn provider_name(&self) -> &str {
        self.provider.name()
    }

    pub fn templates(&self) -> &TemplateSet {
        &self.templates
    }

    pub fn render(&self, id: TemplateId, bindings: &Bindings) -> Result<String> {
        Ok(self.templates.render(id, bindings)?)
    }

    pub fn request(&self, id: TemplateId, bindings: Bindings) -> Result<CompletionRequest> {
        let rendered_prompt = self.render(id, &bindings)?;
        Ok(CompletionRequest {
            template_id: id,
            tier: id.tier(),
            rendered_prompt,
            bindings,
            max_length: max_length(id),
            determinism: determinism(id),
        })
    }

    pub fn complete(&self, request: &CompletionRequest) -> Result<String> {
        complete(request, self.provider.as_ref(), &self.retry)
    }

    pub fn run(&self, id: TemplateId, bindings: Bindings) -> Result<String> {
        let request = self.request(id, bindings)?;
        self.complete(&request)
    }

    /// Asks the provider to score `output` for fidelity to `inputs`. The
    /// score is advisory and never blocks the caller's operation.
    pub fn self_evaluate(&self, task: TemplateId, inputs: &Bindings, output: &str) -> Result<u8> {
        if output.trim().is_empty() {
            return Err(Error::InvalidRequest("output to evaluate is empty".into()));
        }
        let mut bindings = Bindings::new();
        bindings.insert("task".into(), task.as_str().into());
        bindings.insert(
            "inputs".into(),
            serde_json::to_string_pretty(inputs).expect("bindings serialize"),
        );
        bindings.insert("output".into(), output.into());
        let answer = self.run(TemplateId::SelfEval, bindings)?;
        parse::parse_score_output(&answer)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelfEvalEntry {
    pub label: String,
    pub task: TemplateId,
    pub score: u8,
}

impl SelfEvalEntry {
    pub fn passed(&self) -> bool {
        self.score >= SELF_EVAL_PASS
    }
}

/// Collected self-evaluation scores; scores below [`SELF_EVAL_PASS`] are
/// flagged in the rendered report.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelfEvalReport {
    pub entries: Vec<SelfEvalEntry>,
}

impl SelfEvalReport {
    pub fn push(&mut self, label: impl Into<String>, task: TemplateId, score: u8) {
        self.entries.push(SelfEvalEntry {
            label: label.into(),
            task,
            score,
        });
    }

    pub fn flagged(&self) -> impl Iterator<Item = &SelfEvalEntry> {
        self.entries.iter().filter(|e| !e.passed())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let status = if e.passed() { "PASS" } else { "FLAG" };
            out.push_str(&format!("{status} {:>2}/10 {} {}\n", e.score, e.task, e.label));
        }
        let flagged = self.flagged().count();
        out.push_str(&format!(
            "{} evaluated, {} flagged (threshold {SELF_EVAL_PASS})\n",
            self.entries.len(),
            flagged
        ));
        out
    }
}
