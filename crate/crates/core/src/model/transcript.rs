use serde::{Deserialize, Serialize};

use super::ModelError;

/// Characters per estimated token.
pub const CHARS_PER_TOKEN: usize = 4;
/// Fixed per-message overhead added by the estimator.
pub const MESSAGE_OVERHEAD_TOKENS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self::new(Role::User, content)
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self::new(Role::Assistant, content)
    }

    /// `ceil(chars / 4) + 4`. An approximation, not a tokenizer.
    pub fn estimated_tokens(&self) -> usize {
        self.content.chars().count().div_ceil(CHARS_PER_TOKEN) + MESSAGE_OVERHEAD_TOKENS
    }
}

/// Ordered chat messages with a running token estimate.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTranscript")]
pub struct ChatTranscript {
    messages: Vec<ChatMessage>,
    token_estimate: usize,
}

#[derive(Deserialize)]
struct RawTranscript {
    messages: Vec<ChatMessage>,
    token_estimate: usize,
}

impl TryFrom<RawTranscript> for ChatTranscript {
    type Error = ModelError;

    fn try_from(raw: RawTranscript) -> Result<Self, Self::Error> {
        let transcript = ChatTranscript::from_messages(raw.messages);
        if transcript.token_estimate != raw.token_estimate {
            return Err(ModelError::TokenEstimateMismatch {
                stored: raw.token_estimate,
                computed: transcript.token_estimate,
            });
        }
        Ok(transcript)
    }
}

impl ChatTranscript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_messages(messages: Vec<ChatMessage>) -> Self {
        let token_estimate = messages.iter().map(ChatMessage::estimated_tokens).sum();
        Self {
            messages,
            token_estimate,
        }
    }

    pub fn push(&mut self, message: ChatMessage) {
        self.token_estimate += message.estimated_tokens();
        self.messages.push(message);
    }

    pub fn with(mut self, message: ChatMessage) -> Self {
        self.push(message);
        self
    }

    pub fn messages(&self) -> &[ChatMessage] {
        &self.messages
    }

    pub fn token_estimate(&self) -> usize {
        self.token_estimate
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn last(&self) -> Option<&ChatMessage> {
        self.messages.last()
    }
}
