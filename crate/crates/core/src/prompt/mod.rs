//! Prompt builders for the six prompt families and parsers for model replies.
//!
//! All builders are pure: equal inputs give byte-equal output.

mod builders;
mod reply;

pub use builders::{
    build_crossapp_prompt, build_crossplatform_prompt, build_exploration_prompt,
    build_initiation_prompt, build_oneshot_generation_prompt, build_summarization_prompt,
    corrective_message, render_element_line, PageChange, CORRECTIVE_PREFIX, MAX_ATTR_CHARS,
    SUMMARIZATION_PROMPT,
};
pub use reply::{action_reply_json, extract_code_block, parse_exploration_reply};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Action, Locator};

/// What the model decided in one exploration round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum Decision {
    Done { summary: String },
    Act { action: Action },
    Unparseable { reason: String, raw: String },
}

/// One scripted step of a one-shot generation request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioStepSpec {
    pub page_label: String,
    /// Sentence describing the step, e.g. `Click the "Login" button`.
    pub narration: String,
    #[serde(default)]
    pub locator: Option<Locator>,
    #[serde(default)]
    pub input_text: Option<String>,
}

impl ScenarioStepSpec {
    pub fn validate(&self) -> Result<(), PromptError> {
        if self.narration.trim().is_empty() {
            return Err(PromptError::EmptyArg("narration"));
        }
        if self.input_text.is_some() && self.locator.is_none() {
            return Err(PromptError::InvalidStep(
                "input_text requires a locator".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("empty-steps: at least one scenario step is required")]
    EmptySteps,
    #[error("empty-arg: {0} must not be empty")]
    EmptyArg(&'static str),
    #[error("invalid scenario step: {0}")]
    InvalidStep(String),
    #[error("invalid device config: {0}")]
    InvalidConfig(String),
    #[error("wrong-kind: expected a {expected} migration spec")]
    WrongKind { expected: &'static str },
    #[error("invalid-spec: missing {}", .0.join(", "))]
    InvalidSpec(Vec<String>),
}
