//! Chat-completion gateway with live, record, replay and scripted backends.
//!
//! Fixture files are JSON lines, one [`Fixture`] per line. Replay matches by
//! call ordinal; a prompt digest mismatch is reported as a warning only,
//! since prompts drift as the engine evolves while replies stay meaningful.

use std::collections::VecDeque;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{ChatTranscript, Role};
use crate::transport::{
    ForbiddenTransport, HttpRequest, HttpTransport, Method, ReqwestTransport, TransportError,
};

pub const DEFAULT_MODEL: &str = "gpt-3.5-turbo";
pub const DEFAULT_API_KEY_ENV: &str = "OPENAI_API_KEY";
pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1";

/// Token estimate of a transcript: per message `ceil(chars / 4) + 4`.
pub fn estimate_tokens(transcript: &ChatTranscript) -> usize {
    transcript
        .messages()
        .iter()
        .map(|m| m.estimated_tokens())
        .sum()
}

/// Hex SHA-256 of the canonical JSON of the transcript's messages.
pub fn prompt_digest(transcript: &ChatTranscript) -> String {
    let canonical = serde_json::to_string(transcript.messages()).expect("messages serialize");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GatewayMode {
    Live,
    Record,
    Replay,
    Scripted,
}

impl std::str::FromStr for GatewayMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "live" => Ok(GatewayMode::Live),
            "record" => Ok(GatewayMode::Record),
            "replay" => Ok(GatewayMode::Replay),
            "scripted" => Ok(GatewayMode::Scripted),
            other => Err(format!("unknown gateway mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatewayConfig {
    pub mode: GatewayMode,
    pub endpoint_url: String,
    pub model_name: String,
    pub api_key_env_var: String,
    pub fixture_path: Option<PathBuf>,
    pub request_timeout_ms: u64,
    pub max_retries: u32,
    pub temperature: f64,
    /// First retry delay; doubles on each further attempt.
    pub retry_backoff_ms: u64,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            mode: GatewayMode::Replay,
            endpoint_url: DEFAULT_ENDPOINT.to_string(),
            model_name: DEFAULT_MODEL.to_string(),
            api_key_env_var: DEFAULT_API_KEY_ENV.to_string(),
            fixture_path: None,
            request_timeout_ms: 60_000,
            max_retries: 3,
            temperature: 0.0,
            retry_backoff_ms: 500,
        }
    }
}

impl GatewayConfig {
    pub fn validate(&self) -> Result<(), GatewayError> {
        let invalid = |msg: &str| Err(GatewayError::InvalidConfig(msg.to_string()));
        if !(0.0..=2.0).contains(&self.temperature) {
            return invalid("temperature must be within [0, 2]");
        }
        if self.request_timeout_ms == 0 {
            return invalid("request_timeout_ms must be positive");
        }
        if matches!(self.mode, GatewayMode::Live | GatewayMode::Record) {
            if self.endpoint_url.trim().is_empty() {
                return invalid("endpoint_url is required for live and record modes");
            }
            if self.api_key_env_var.trim().is_empty() {
                return invalid("api_key_env_var is required for live and record modes");
            }
        }
        if matches!(self.mode, GatewayMode::Record | GatewayMode::Replay) && self.fixture_path.is_none() {
            return invalid("fixture_path is required for record and replay modes");
        }
        Ok(())
    }

    fn chat_url(&self) -> String {
        let base = self.endpoint_url.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fixture {
    pub ordinal: usize,
    pub prompt_digest: String,
    pub reply: String,
}

pub fn read_fixtures(path: &Path) -> Result<Vec<Fixture>, GatewayError> {
    let file = File::open(path).map_err(|e| GatewayError::FixtureFile {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut fixtures = Vec::new();
    for (number, line) in BufReader::new(file).lines().enumerate() {
        let bad = |message: String| GatewayError::FixtureFile {
            path: path.to_path_buf(),
            message: format!("line {}: {message}", number + 1),
        };
        let line = line.map_err(|e| bad(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let fixture: Fixture = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        if fixture.ordinal != fixtures.len() {
            return Err(bad(format!(
                "ordinal {} out of sequence, expected {}",
                fixture.ordinal,
                fixtures.len()
            )));
        }
        fixtures.push(fixture);
    }
    Ok(fixtures)
}

pub fn write_fixtures(path: &Path, fixtures: &[Fixture]) -> std::io::Result<()> {
    let mut file = File::create(path)?;
    for fixture in fixtures {
        writeln!(file, "{}", serde_json::to_string(fixture)?)?;
    }
    Ok(())
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("transport-error: {0}")]
    Transport(String),
    #[error("timeout: no response within the configured timeout")]
    Timeout,
    #[error("fixture-exhausted: call {ordinal} requested but only {available} fixtures recorded")]
    FixtureExhausted { ordinal: usize, available: usize },
    #[error("auth-missing: environment variable {0} is not set")]
    AuthMissing(String),
    #[error("endpoint returned status {status}: {message}")]
    Rejected { status: u16, message: String },
    #[error("malformed completion response: {0}")]
    BadResponse(String),
    #[error("fixture file {path}: {message}")]
    FixtureFile { path: PathBuf, message: String },
    #[error("invalid gateway config: {0}")]
    InvalidConfig(String),
    #[error("transcript must be non-empty and end with a user message")]
    InvalidTranscript,
    #[error("scripted policy has no reply for call {0}")]
    ScriptExhausted(usize),
}

/// Anything that can answer a chat transcript.
pub trait ChatGateway {
    fn complete(&mut self, transcript: &ChatTranscript) -> Result<String, GatewayError>;
}

impl<G: ChatGateway + ?Sized> ChatGateway for &mut G {
    fn complete(&mut self, transcript: &ChatTranscript) -> Result<String, GatewayError> {
        (**self).complete(transcript)
    }
}

impl<G: ChatGateway + ?Sized> ChatGateway for Box<G> {
    fn complete(&mut self, transcript: &ChatTranscript) -> Result<String, GatewayError> {
        (**self).complete(transcript)
    }
}

/// Deterministic reply source for the scripted backend.
pub trait ReplyPolicy: Send {
    fn reply(&mut self, transcript: &ChatTranscript) -> Option<String>;
}

impl<F> ReplyPolicy for F
where
    F: FnMut(&ChatTranscript) -> Option<String> + Send,
{
    fn reply(&mut self, transcript: &ChatTranscript) -> Option<String> {
        self(transcript)
    }
}

/// Replies from a fixed queue, optionally cycling once exhausted.
#[derive(Debug, Clone, Default)]
pub struct ScriptedReplies {
    queue: VecDeque<String>,
    cycle: bool,
}

impl ScriptedReplies {
    pub fn new<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            queue: replies.into_iter().map(Into::into).collect(),
            cycle: false,
        }
    }

    pub fn cycling(mut self) -> Self {
        self.cycle = true;
        self
    }
}

impl ReplyPolicy for ScriptedReplies {
    fn reply(&mut self, _transcript: &ChatTranscript) -> Option<String> {
        let next = self.queue.pop_front()?;
        if self.cycle {
            self.queue.push_back(next.clone());
        }
        Some(next)
    }
}

enum Backend {
    Http {
        transport: Box<dyn HttpTransport>,
        api_key: Option<String>,
        record_to: Option<PathBuf>,
    },
    Replay {
        fixtures: Vec<Fixture>,
    },
    Scripted {
        policy: Box<dyn ReplyPolicy>,
    },
}

/// One chat session. Calls must be made in order; ordinals count calls.
pub struct Gateway {
    config: GatewayConfig,
    backend: Backend,
    calls: usize,
    warnings: Vec<String>,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("mode", &self.config.mode)
            .field("calls", &self.calls)
            .finish_non_exhaustive()
    }
}

impl Gateway {
    /// Builds a gateway with the real network transport for live/record mode
    /// and a forbidden transport otherwise. Scripted mode needs
    /// [`Gateway::scripted`].
    pub fn from_config(config: GatewayConfig) -> Result<Self, GatewayError> {
        let transport: Box<dyn HttpTransport> = match config.mode {
            GatewayMode::Live | GatewayMode::Record => Box::new(
                ReqwestTransport::new().map_err(|e| GatewayError::Transport(e.to_string()))?,
            ),
            _ => Box::new(ForbiddenTransport::new()),
        };
        Self::with_transport(config, transport)
    }

    /// Builds a live, record or replay gateway over the given transport.
    /// Replay never touches the transport.
    pub fn with_transport(
        config: GatewayConfig,
        transport: Box<dyn HttpTransport>,
    ) -> Result<Self, GatewayError> {
        config.validate()?;
        let backend = match config.mode {
            GatewayMode::Live => Backend::Http {
                transport,
                api_key: None,
                record_to: None,
            },
            GatewayMode::Record => {
                let path = config.fixture_path.clone().expect("validated");
                File::create(&path).map_err(|e| GatewayError::FixtureFile {
                    path: path.clone(),
                    message: e.to_string(),
                })?;
                Backend::Http {
                    transport,
                    api_key: None,
                    record_to: Some(path),
                }
            }
            GatewayMode::Replay => {
                drop(transport);
                let path = config.fixture_path.as_deref().expect("validated");
                Backend::Replay {
                    fixtures: read_fixtures(path)?,
                }
            }
            GatewayMode::Scripted => {
                return Err(GatewayError::InvalidConfig(
                    "scripted mode requires a reply policy".into(),
                ))
            }
        };
        Ok(Self {
            config,
            backend,
            calls: 0,
            warnings: Vec::new(),
        })
    }

    pub fn scripted(policy: impl ReplyPolicy + 'static) -> Self {
        Self {
            config: GatewayConfig {
                mode: GatewayMode::Scripted,
                ..GatewayConfig::default()
            },
            backend: Backend::Scripted {
                policy: Box::new(policy),
            },
            calls: 0,
            warnings: Vec::new(),
        }
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    pub fn calls(&self) -> usize {
        self.calls
    }

    /// Digest mismatches observed during replay.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    fn resolve_api_key(config: &GatewayConfig, slot: &mut Option<String>) -> Result<String, GatewayError> {
        if let Some(key) = slot {
            return Ok(key.clone());
        }
        let key = std::env::var(&config.api_key_env_var)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| GatewayError::AuthMissing(config.api_key_env_var.clone()))?;
        *slot = Some(key.clone());
        Ok(key)
    }

    fn request_body(&self, transcript: &ChatTranscript) -> serde_json::Value {
        let messages: Vec<_> = transcript
            .messages()
            .iter()
            .map(|m| serde_json::json!({"role": m.role.as_str(), "content": m.content}))
            .collect();
        serde_json::json!({
            "model": self.config.model_name,
            "messages": messages,
            "temperature": self.config.temperature,
        })
    }

    fn http_round_trip(
        config: &GatewayConfig,
        transport: &dyn HttpTransport,
        api_key: &str,
        body: &serde_json::Value,
    ) -> Result<String, GatewayError> {
        let attempts = config.max_retries + 1;
        let mut last_error = GatewayError::Transport("no attempt made".into());
        for attempt in 0..attempts {
            if attempt > 0 {
                let delay = config.retry_backoff_ms.saturating_mul(1 << (attempt - 1).min(16));
                std::thread::sleep(Duration::from_millis(delay));
            }
            let request = HttpRequest::new(Method::Post, config.chat_url())
                .header("Authorization", format!("Bearer {api_key}"))
                .json(body)
                .timeout(Duration::from_millis(config.request_timeout_ms));
            match transport.send(request) {
                Ok(response) if (200..300).contains(&response.status) => {
                    return parse_completion(&response.body);
                }
                Ok(response) if response.status == 429 || response.status >= 500 => {
                    log::warn!("completion attempt {} got status {}", attempt + 1, response.status);
                    last_error = GatewayError::Transport(format!("status {}", response.status));
                }
                Ok(response) => {
                    return Err(GatewayError::Rejected {
                        status: response.status,
                        message: response.body.chars().take(200).collect(),
                    });
                }
                Err(TransportError::Timeout) => {
                    log::warn!("completion attempt {} timed out", attempt + 1);
                    last_error = GatewayError::Timeout;
                }
                Err(e) => {
                    log::warn!("completion attempt {} failed: {e}", attempt + 1);
                    last_error = GatewayError::Transport(e.to_string());
                }
            }
        }
        Err(last_error)
    }
}

fn parse_completion(body: &str) -> Result<String, GatewayError> {
    let value: serde_json::Value =
        serde_json::from_str(body).map_err(|e| GatewayError::BadResponse(e.to_string()))?;
    value
        .pointer("/choices/0/message/content")
        .and_then(|c| c.as_str())
        .map(str::to_string)
        .ok_or_else(|| GatewayError::BadResponse("missing choices[0].message.content".into()))
}

impl ChatGateway for Gateway {
    fn complete(&mut self, transcript: &ChatTranscript) -> Result<String, GatewayError> {
        if transcript.last().map(|m| m.role) != Some(Role::User) {
            return Err(GatewayError::InvalidTranscript);
        }
        let ordinal = self.calls;
        let body = match &self.backend {
            Backend::Http { .. } => Some(self.request_body(transcript)),
            _ => None,
        };
        let reply = match &mut self.backend {
            Backend::Http {
                transport,
                api_key,
                record_to,
            } => {
                let key = Self::resolve_api_key(&self.config, api_key)?;
                let reply = Self::http_round_trip(
                    &self.config,
                    transport.as_ref(),
                    &key,
                    body.as_ref().expect("http body"),
                )?;
                if let Some(path) = record_to {
                    let fixture = Fixture {
                        ordinal,
                        prompt_digest: prompt_digest(transcript),
                        reply: reply.clone(),
                    };
                    let append = || -> std::io::Result<()> {
                        let mut file = OpenOptions::new().append(true).open(&*path)?;
                        writeln!(file, "{}", serde_json::to_string(&fixture)?)
                    };
                    append().map_err(|e| GatewayError::FixtureFile {
                        path: path.clone(),
                        message: e.to_string(),
                    })?;
                }
                reply
            }
            Backend::Replay { fixtures } => {
                let fixture = fixtures.get(ordinal).ok_or(GatewayError::FixtureExhausted {
                    ordinal,
                    available: fixtures.len(),
                })?;
                let digest = prompt_digest(transcript);
                if digest != fixture.prompt_digest {
                    let warning = format!(
                        "fixture {ordinal}: prompt digest mismatch (recorded {}, now {})",
                        short(&fixture.prompt_digest),
                        short(&digest)
                    );
                    log::warn!("{warning}");
                    self.warnings.push(warning);
                }
                fixture.reply.clone()
            }
            Backend::Scripted { policy } => policy
                .reply(transcript)
                .ok_or(GatewayError::ScriptExhausted(ordinal))?,
        };
        self.calls += 1;
        Ok(reply)
    }
}

fn short(digest: &str) -> &str {
    &digest[..digest.len().min(12)]
}

/// Fake chat-completions endpoint answering with `replies` in order, in the
/// response shape of the real API. Used to record fixtures offline.
pub fn completion_stub<I, S>(replies: I) -> crate::transport::FnTransport
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let mut queue: VecDeque<String> = replies.into_iter().map(Into::into).collect();
    crate::transport::FnTransport::new(move |_request| match queue.pop_front() {
        Some(reply) => Ok(crate::transport::HttpResponse {
            status: 200,
            body: serde_json::json!({
                "choices": [{"index": 0, "message": {"role": "assistant", "content": reply}}]
            })
            .to_string(),
        }),
        None => Ok(crate::transport::HttpResponse {
            status: 400,
            body: "{\"error\": {\"message\": \"stub has no more replies\"}}".into(),
        }),
    })
}

/// Decorator that keeps a copy of every transcript sent.
pub struct RecordingGateway<G> {
    inner: G,
    sent: Vec<ChatTranscript>,
}

impl<G: ChatGateway> RecordingGateway<G> {
    pub fn new(inner: G) -> Self {
        Self {
            inner,
            sent: Vec::new(),
        }
    }

    pub fn sent(&self) -> &[ChatTranscript] {
        &self.sent
    }

    pub fn into_inner(self) -> G {
        self.inner
    }
}

impl<G: ChatGateway> ChatGateway for RecordingGateway<G> {
    fn complete(&mut self, transcript: &ChatTranscript) -> Result<String, GatewayError> {
        self.sent.push(transcript.clone());
        self.inner.complete(transcript)
    }
}
