//! The exploration dialogue: initiation, rounds of page description and
//! model-chosen actions, and termination.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::{DeviceError, Driver};
use crate::gateway::{ChatGateway, GatewayError};
use crate::model::{
    Action, ChatMessage, ChatTranscript, ExplorationTrace, Initiator, Role, Terminal, TraceRound,
    UiElement, UiSnapshot,
};
use crate::prompt::{
    build_exploration_prompt, build_initiation_prompt, corrective_message, parse_exploration_reply,
    Decision, PageChange, PromptError, CORRECTIVE_PREFIX,
};

/// What the engine does when a pop-up covers the screen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PopupPolicy {
    #[default]
    AutoDismiss,
    SurfaceToLlm,
}

impl std::str::FromStr for PopupPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" | "auto_dismiss" => Ok(PopupPolicy::AutoDismiss),
            "surface" | "surface_to_llm" => Ok(PopupPolicy::SurfaceToLlm),
            other => Err(format!("unknown popup policy {other:?} (expected auto or surface)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplorerConfig {
    /// Cap on model-chosen rounds. Engine pop-up dismissals do not count.
    pub max_rounds: u32,
    pub token_budget: usize,
    pub element_cap: usize,
    pub stagnation_limit: u32,
    pub popup_policy: PopupPolicy,
    /// Upper bound on the characters of one exploration message. Elements
    /// past the bound are left out.
    pub message_char_cap: usize,
}

impl Default for ExplorerConfig {
    fn default() -> Self {
        ExplorerConfig {
            max_rounds: 20,
            token_budget: 3500,
            element_cap: 25,
            stagnation_limit: 3,
            popup_policy: PopupPolicy::AutoDismiss,
            message_char_cap: 6000,
        }
    }
}

impl ExplorerConfig {
    pub fn validate(&self) -> Result<(), ExplorerError> {
        let positive = [
            ("max_rounds", self.max_rounds as usize),
            ("token_budget", self.token_budget),
            ("element_cap", self.element_cap),
            ("stagnation_limit", self.stagnation_limit as usize),
            ("message_char_cap", self.message_char_cap),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(ExplorerError::InvalidConfig(format!("{name} must be positive")));
        }
        if self.stagnation_limit > self.max_rounds {
            return Err(ExplorerError::InvalidConfig(format!(
                "stagnation_limit {} exceeds max_rounds {}",
                self.stagnation_limit, self.max_rounds
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ExplorerError {
    #[error("invalid explorer config: {0}")]
    InvalidConfig(String),
    #[error("budget-too-small: {required} tokens needed, budget is {budget}")]
    BudgetTooSmall { required: usize, budget: usize },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// Interactive elements of `snapshot`: editable ones first, then
/// clickable-only ones, each group in document order, at most `cap` total.
pub fn filter_elements(snapshot: &UiSnapshot, cap: usize) -> Vec<UiElement> {
    let elements = snapshot.elements();
    let editable = elements.iter().filter(|e| e.editable);
    let clickable_only = elements.iter().filter(|e| e.clickable && !e.editable);
    editable.chain(clickable_only).take(cap).cloned().collect()
}

/// Exploration message for `elements`, dropping trailing elements until the
/// text fits in `char_cap` characters.
fn capped_exploration_prompt(
    previous: Option<&Action>,
    change: PageChange,
    mut elements: Vec<UiElement>,
    char_cap: usize,
) -> String {
    loop {
        let text = build_exploration_prompt(previous, change, &elements);
        if text.chars().count() <= char_cap || elements.is_empty() {
            return text;
        }
        elements.pop();
    }
}

fn round_summary_line(number: usize, messages: &[ChatMessage]) -> String {
    let reply = messages.iter().rev().find(|m| m.role == Role::Assistant);
    match reply.map(|m| parse_exploration_reply(&m.content)) {
        Some(Decision::Act { action }) => {
            let target = if action.element_xpath.is_empty() {
                "the screen"
            } else {
                action.element_xpath.as_str()
            };
            format!("Round {number}: performed {} on {target}", action.operation_type)
        }
        Some(Decision::Done { .. }) => format!("Round {number}: reported DONE"),
        _ => format!("Round {number}: no operation performed"),
    }
}

/// Fits `transcript` into `budget` estimated tokens.
///
/// The first message (the initiation prompt) is always kept. The model's
/// readiness reply goes first, then the oldest rounds, each replaced by one
/// line in a summary message placed right after the initiation prompt. A
/// round starts at a user message that is not a corrective re-prompt.
pub fn trim_transcript(transcript: &ChatTranscript, budget: usize) -> Result<ChatTranscript, ExplorerError> {
    if transcript.token_estimate() <= budget {
        return Ok(transcript.clone());
    }
    let messages = transcript.messages();
    let Some((initiation, rest)) = messages.split_first() else {
        return Ok(transcript.clone());
    };
    let rest = match rest.first() {
        Some(m) if m.role == Role::Assistant => &rest[1..],
        _ => rest,
    };
    let mut rounds: Vec<&[ChatMessage]> = Vec::new();
    let mut start = 0;
    for (i, m) in rest.iter().enumerate() {
        if i > start && m.role == Role::User && !m.content.starts_with(CORRECTIVE_PREFIX) {
            rounds.push(&rest[start..i]);
            start = i;
        }
    }
    if start < rest.len() {
        rounds.push(&rest[start..]);
    }

    let assemble = |dropped: usize| {
        let mut out = vec![initiation.clone()];
        if dropped > 0 {
            let lines: Vec<String> = rounds[..dropped]
                .iter()
                .enumerate()
                .map(|(i, r)| round_summary_line(i + 1, r))
                .collect();
            out.push(ChatMessage::user(format!(
                "Summary of earlier rounds:\n{}",
                lines.join("\n")
            )));
        }
        out.extend(rounds[dropped..].iter().flat_map(|r| r.iter().cloned()));
        ChatTranscript::from_messages(out)
    };

    let keep_latest = rounds.len().saturating_sub(1);
    let mut smallest = usize::MAX;
    for dropped in 0..=keep_latest {
        let candidate = assemble(dropped);
        if candidate.token_estimate() <= budget {
            return Ok(candidate);
        }
        smallest = smallest.min(candidate.token_estimate());
    }
    Err(ExplorerError::BudgetTooSmall {
        required: smallest,
        budget,
    })
}

/// Result of one dialogue: the trace and the full, untrimmed transcript.
#[derive(Debug, Clone)]
pub struct Exploration {
    pub trace: ExplorationTrace,
    pub transcript: ChatTranscript,
}

struct Session<'a, G: ChatGateway> {
    gateway: &'a mut G,
    budget: usize,
    transcript: ChatTranscript,
}

impl<G: ChatGateway> Session<'_, G> {
    /// Sends the trimmed transcript. `Ok(None)` means the budget cannot hold
    /// the latest round.
    fn ask(&mut self, message: String) -> Result<Option<String>, ExplorerError> {
        self.transcript.push(ChatMessage::user(message));
        let sent = match trim_transcript(&self.transcript, self.budget) {
            Ok(t) => t,
            Err(ExplorerError::BudgetTooSmall { required, budget }) => {
                log::warn!("transcript needs {required} tokens, budget is {budget}");
                return Ok(None);
            }
            Err(e) => return Err(e),
        };
        let reply = self.gateway.complete(&sent)?;
        self.transcript.push(ChatMessage::assistant(reply.clone()));
        Ok(Some(reply))
    }
}

/// Runs the exploration dialogue for `function` of `app` against `driver`.
pub fn run_exploration<D: Driver, G: ChatGateway>(
    app: &str,
    function: &str,
    driver: &mut D,
    gateway: &mut G,
    cfg: &ExplorerConfig,
) -> Result<Exploration, ExplorerError> {
    cfg.validate()?;
    let initiation = build_initiation_prompt(app, function)?;
    let scenario_name = format!("{app}: {function}");
    let mut session = Session {
        gateway,
        budget: cfg.token_budget,
        transcript: ChatTranscript::new(),
    };
    let mut rounds: Vec<TraceRound> = Vec::new();

    let opening = initiation.messages()[0].content.clone();
    let terminal = 'dialogue: {
        let Some(readiness) = session.ask(opening)? else {
            break 'dialogue Terminal::BudgetCap;
        };
        if readiness.trim().is_empty() {
            break 'dialogue Terminal::ParseFailure;
        }
        log::info!("readiness reply: {}", readiness.trim());

        let mut llm_rounds = 0u32;
        let mut previous: Option<(String, Action)> = None;
        let mut streak = 0u32;
        loop {
            if llm_rounds >= cfg.max_rounds {
                break 'dialogue Terminal::RoundCap;
            }
            let snapshot = driver.snapshot()?;
            if cfg.popup_policy == PopupPolicy::AutoDismiss {
                if let Some(dismiss) = driver.active_popup_dismiss() {
                    let action = Action::click(dismiss);
                    let outcome = driver.perform(&action)?;
                    log::info!("engine dismissed pop-up: {:?}", outcome.status);
                    rounds.push(TraceRound {
                        snapshot,
                        decision: Decision::Act { action },
                        outcome: Some(outcome),
                        initiator: Initiator::Engine,
                    });
                    continue;
                }
            }

            let change = match &previous {
                None => PageChange::First,
                Some((fp, _)) if fp == snapshot.page_fingerprint() => PageChange::Unchanged,
                Some(_) => PageChange::NewPage,
            };
            let message = capped_exploration_prompt(
                previous.as_ref().map(|(_, a)| a),
                change,
                filter_elements(&snapshot, cfg.element_cap),
                cfg.message_char_cap,
            );
            let Some(reply) = session.ask(message)? else {
                break 'dialogue Terminal::BudgetCap;
            };
            let mut decision = parse_exploration_reply(&reply);
            if let Decision::Unparseable { reason, .. } = &decision {
                log::warn!("unparseable reply ({reason}), re-prompting once");
                let Some(retry) = session.ask(corrective_message(reason))? else {
                    break 'dialogue Terminal::BudgetCap;
                };
                decision = parse_exploration_reply(&retry);
            }
            llm_rounds += 1;

            let action = match &decision {
                Decision::Act { action } => action.clone(),
                Decision::Done { .. } | Decision::Unparseable { .. } => {
                    let terminal = if matches!(decision, Decision::Done { .. }) {
                        Terminal::Done
                    } else {
                        Terminal::ParseFailure
                    };
                    rounds.push(TraceRound {
                        snapshot,
                        decision,
                        outcome: None,
                        initiator: Initiator::Llm,
                    });
                    break 'dialogue terminal;
                }
            };

            let key = (snapshot.page_fingerprint().to_string(), action.clone());
            streak = if previous.as_ref() == Some(&key) { streak + 1 } else { 1 };
            let outcome = driver.perform(&action)?;
            log::debug!("round {llm_rounds}: {} -> {:?}", action.operation_type, outcome.status);
            rounds.push(TraceRound {
                snapshot,
                decision,
                outcome: Some(outcome),
                initiator: Initiator::Llm,
            });
            previous = Some(key);
            if streak >= cfg.stagnation_limit {
                break 'dialogue Terminal::Stagnation;
            }
        }
    };

    let final_fingerprint = driver.snapshot()?.page_fingerprint().to_string();
    Ok(Exploration {
        trace: ExplorationTrace {
            scenario_name,
            rounds,
            terminal,
            final_fingerprint,
        },
        transcript: session.transcript,
    })
}
