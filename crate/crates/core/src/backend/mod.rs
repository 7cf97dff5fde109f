//! Recommendation generators: a remote chat-completion endpoint or one of
//! two deterministic offline mocks, plus parsing of their free-text replies.

mod list;
mod mock;
mod remote;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{PopularityTable, ProjectRecord};

pub use list::{
    parse_maven_list, render_maven_list, RecommendationList, RecommendedItem, MAVEN_LIST_HEADER,
};
pub use mock::{mock_cooccurrence_recommend, mock_popularity_recommend};
pub use remote::{
    extract_content, is_transient_status, AttemptError, InFlightLimiter, RemoteChatBackend,
    RetryError, RetryPolicy, TransportFailure,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("invalid backend configuration: {0}")]
    Config(String),
    #[error("gave up after {attempts} attempt(s) (last status {status:?}): {message}")]
    Exhausted {
        attempts: u32,
        status: Option<u16>,
        message: String,
    },
    #[error("request rejected (status {status:?}): {message}")]
    Permanent {
        status: Option<u16>,
        message: String,
    },
    #[error("request timed out after {0}s")]
    Timeout(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    RemoteChat,
    MockPopularity,
    MockCooccurrence,
}

impl FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "remote-chat" | "remote" => Ok(BackendKind::RemoteChat),
            "mock-popularity" => Ok(BackendKind::MockPopularity),
            "mock-cooccurrence" => Ok(BackendKind::MockCooccurrence),
            other => Err(format!(
                "unknown backend {other:?} (expected remote-chat, mock-popularity or mock-cooccurrence)"
            )),
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::RemoteChat => "remote-chat",
            BackendKind::MockPopularity => "mock-popularity",
            BackendKind::MockCooccurrence => "mock-cooccurrence",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint_url: String,
    pub model_name: String,
    /// Model served for configurations flagged as fine-tuned. Defaults to
    /// `model_name` with a `-finetuned` suffix.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub finetuned_model_name: Option<String>,
    #[serde(skip)]
    pub use_finetuned: bool,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub request_timeout_secs: f64,
    pub max_retries: u32,
    pub retry_base_delay_ms: u64,
    pub max_in_flight: usize,
    /// Only accept `k: group:artifact` lines when parsing replies.
    pub strict_parse: bool,
    /// Sent as a bearer token; never serialized.
    #[serde(skip)]
    pub api_key: Option<String>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::MockPopularity,
            endpoint_url: String::new(),
            model_name: "mock".to_string(),
            finetuned_model_name: None,
            use_finetuned: false,
            temperature: 0.0,
            max_output_tokens: 512,
            request_timeout_secs: 120.0,
            max_retries: 3,
            retry_base_delay_ms: 500,
            max_in_flight: 4,
            strict_parse: false,
            api_key: None,
        }
    }
}

impl BackendConfig {
    pub fn mock(kind: BackendKind) -> Self {
        BackendConfig {
            kind,
            ..Default::default()
        }
    }

    pub fn remote(endpoint_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        BackendConfig {
            kind: BackendKind::RemoteChat,
            endpoint_url: endpoint_url.into(),
            model_name: model_name.into(),
            ..Default::default()
        }
    }

    pub fn effective_model(&self) -> String {
        if self.use_finetuned {
            self.finetuned_model_name
                .clone()
                .unwrap_or_else(|| format!("{}-finetuned", self.model_name))
        } else {
            self.model_name.clone()
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.kind == BackendKind::RemoteChat && self.endpoint_url.trim().is_empty() {
            return Err(BackendError::Config(
                "remote-chat requires an endpoint URL".into(),
            ));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(BackendError::Config(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        if self.max_output_tokens == 0 {
            return Err(BackendError::Config("max_output_tokens must be positive".into()));
        }
        if self.max_in_flight == 0 {
            return Err(BackendError::Config("max_in_flight must be positive".into()));
        }
        if !(self.request_timeout_secs.is_finite() && self.request_timeout_secs > 0.0) {
            return Err(BackendError::Config("request timeout must be positive".into()));
        }
        Ok(())
    }
}

/// One recommendation request. Mocks read `target` directly; the remote
/// backend only sees `prompt`.
#[derive(Debug, Clone, Copy)]
pub struct Session<'a> {
    pub prompt: &'a str,
    pub target: &'a ProjectRecord,
    pub n: usize,
}

pub trait Backend: Send + Sync {
    /// Returns the raw reply text for one session.
    fn complete(&self, session: &Session<'_>) -> Result<String, BackendError>;
}

pub struct MockPopularityBackend {
    table: PopularityTable,
}

impl MockPopularityBackend {
    pub fn new(table: PopularityTable) -> Self {
        MockPopularityBackend { table }
    }
}

impl Backend for MockPopularityBackend {
    fn complete(&self, session: &Session<'_>) -> Result<String, BackendError> {
        let list = mock_popularity_recommend(&self.table, session.target, session.n);
        Ok(render_maven_list(list.items.iter().map(|i| &i.coordinate)))
    }
}

pub struct MockCooccurrenceBackend {
    train: Vec<ProjectRecord>,
}

impl MockCooccurrenceBackend {
    pub fn new(train: Vec<ProjectRecord>) -> Self {
        MockCooccurrenceBackend { train }
    }
}

impl Backend for MockCooccurrenceBackend {
    fn complete(&self, session: &Session<'_>) -> Result<String, BackendError> {
        let list = mock_cooccurrence_recommend(&self.train, session.target, session.n);
        Ok(render_maven_list(list.items.iter().map(|i| &i.coordinate)))
    }
}

/// Builds the configured backend. Mocks are fed the training projects and
/// their popularity table.
pub fn build_backend(
    config: &BackendConfig,
    train: &[ProjectRecord],
    table: &PopularityTable,
) -> Result<Box<dyn Backend>, BackendError> {
    config.validate()?;
    Ok(match config.kind {
        BackendKind::RemoteChat => Box::new(RemoteChatBackend::new(config.clone())),
        BackendKind::MockPopularity => Box::new(MockPopularityBackend::new(table.clone())),
        BackendKind::MockCooccurrence => Box::new(MockCooccurrenceBackend::new(train.to_vec())),
    })
}
