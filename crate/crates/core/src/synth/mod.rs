//! Turning traces and model replies into checked test scripts, script
//! migration, and replay of scripts against a driver.

mod lint;
mod render;

pub use lint::{lint, Finding, LintRule};
pub use render::{render, NAVIGATION_WAIT_COMMENT};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::{DeviceError, Driver, OutcomeStatus};
use crate::explorer::trim_transcript;
use crate::gateway::{ChatGateway, GatewayError};
use crate::model::{
    Action, ChatMessage, ChatTranscript, DeviceConfig, ExplorationTrace, Initiator, Locator,
    LocatorStrategy, MigrationKind, MigrationSpec, ModelError, StepKind, Terminal, TestScript,
    TestStep, UiElement,
};
use crate::prompt::{
    build_crossapp_prompt, build_crossplatform_prompt, extract_code_block, PromptError,
    SUMMARIZATION_PROMPT,
};

/// Wait inserted after a step that changed the page.
pub const DEFAULT_WAIT_MS: u64 = 2000;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("trace-not-done: terminal is {0}")]
    TraceNotDone(&'static str),
    #[error("trace-not-done: no executed actions")]
    EmptyTrace,
    #[error("invalid script: {0}")]
    InvalidScript(#[from] ModelError),
    #[error("invalid-spec: missing {}", .0.join(", "))]
    InvalidSpec(Vec<String>),
    #[error("extraction-failed: the reply holds no code block")]
    ExtractionFailed,
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Device(#[from] DeviceError),
}

/// Locator for `element`: its resource id when it has one, else its xpath.
pub fn preferred_locator(element: &UiElement) -> Locator {
    match &element.resource_id {
        Some(id) if !id.trim().is_empty() => Locator::id(id.clone()),
        _ => Locator::xpath(element.xpath.clone()),
    }
}

/// Deterministic script for a finished exploration: one step per effective
/// action in order, and a `wait_ms` wait after each step that changed the
/// page. Actions with no effect or on a missing element are left out.
pub fn synthesize_from_trace(
    trace: &ExplorationTrace,
    config: &DeviceConfig,
    wait_ms: u64,
) -> Result<TestScript, SynthError> {
    if trace.terminal != Terminal::Done {
        return Err(SynthError::TraceNotDone(trace.terminal.as_str()));
    }
    let mut steps = Vec::new();
    for round in &trace.rounds {
        let (Some(action), Some(outcome)) = (round.action(), &round.outcome) else {
            continue;
        };
        if !matches!(outcome.status, OutcomeStatus::Ok | OutcomeStatus::PopupAppeared) {
            continue;
        }
        let locator = if action.element_xpath.is_empty() {
            None
        } else {
            Some(
                round
                    .snapshot
                    .find(&action.element_xpath)
                    .map(preferred_locator)
                    .unwrap_or_else(|| Locator::xpath(action.element_xpath.clone())),
            )
        };
        let step = match (action.operation_type, locator) {
            (crate::model::OperationType::Click, Some(l)) => TestStep::click(l),
            (crate::model::OperationType::Input, Some(l)) => TestStep::input(l, action.operation_text.clone()),
            (crate::model::OperationType::Drag, l) => {
                TestStep::drag(l, action.drag_direction().expect("validated drag"))
            }
            (_, None) => unreachable!("click and input always carry an xpath"),
        };
        if round.initiator == Initiator::Engine {
            log::debug!("including engine pop-up dismissal as a step");
        }
        steps.push(step);
        if round.changed_page() && wait_ms > 0 {
            steps.push(TestStep::wait(wait_ms));
        }
    }
    if steps.is_empty() {
        return Err(SynthError::EmptyTrace);
    }
    let script = TestScript {
        config: config.clone(),
        steps,
        scenario_name: trace.scenario_name.clone(),
    };
    script.validate()?;
    Ok(script)
}

/// Asks the model for the final script. `None` when the reply holds no
/// code or the transcript cannot be fitted into `budget`.
pub fn synthesize_via_llm<G: ChatGateway>(
    transcript: &ChatTranscript,
    gateway: &mut G,
    budget: Option<usize>,
) -> Result<Option<String>, SynthError> {
    let full = transcript.clone().with(ChatMessage::user(SUMMARIZATION_PROMPT));
    let sent = match budget {
        Some(budget) => match trim_transcript(&full, budget) {
            Ok(t) => t,
            Err(e) => {
                log::warn!("summarization skipped: {e}");
                return Ok(None);
            }
        },
        None => full,
    };
    let reply = gateway.complete(&sent)?;
    Ok(extract_code_block(&reply))
}

/// Names of the items a migration spec is missing; empty when complete.
pub fn validate_migration_spec(spec: &MigrationSpec) -> Vec<String> {
    let blank = |s: &str| s.trim().is_empty();
    let mut missing = Vec::new();
    match spec.kind {
        MigrationKind::CrossPlatform => {
            let info = spec.platform_info.clone().unwrap_or_default();
            if blank(&info.new_device_name) {
                missing.push("new_device_name".to_string());
            }
            if blank(&info.new_os_version_or_brand) {
                missing.push("new_os_version_or_brand".to_string());
            }
        }
        MigrationKind::CrossApp => {
            let info = spec.app_info.clone().unwrap_or_default();
            if blank(&info.package_name) {
                missing.push("package_name".to_string());
            }
            if blank(&info.main_activity) {
                missing.push("main_activity".to_string());
            }
        }
    }
    if spec.differential_steps.is_empty() {
        missing.push("differential_steps".to_string());
    }
    for (index, step) in spec.differential_steps.iter().enumerate() {
        if blank(step) {
            missing.push(format!("differential_steps[step {}]", index + 1));
        }
    }
    if spec.kind == MigrationKind::CrossPlatform {
        for step in 1..=spec.differential_steps.len() {
            if spec.identifiers_for(step).next().is_none() {
                missing.push(format!("element_identifiers[step {step}]"));
            }
        }
    }
    if blank(&spec.old_script_text) {
        missing.push("old_script_text".to_string());
    }
    missing
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MigrationReport {
    pub script_text: String,
    pub findings: Vec<Finding>,
    pub changed_line_count: usize,
    /// The model returned the old script unchanged.
    pub suspicious_unchanged: bool,
}

/// Lines inserted plus lines deleted between two texts, ignoring trailing
/// whitespace.
pub fn changed_line_count(old: &str, new: &str) -> usize {
    let normalize = |s: &str| s.lines().map(str::trim_end).collect::<Vec<_>>().join("\n") + "\n";
    let (old, new) = (normalize(old), normalize(new));
    similar::TextDiff::from_lines(&old, &new)
        .iter_all_changes()
        .filter(|c| c.tag() != similar::ChangeTag::Equal)
        .count()
}

/// One migration request: validate, prompt, extract, lint, diff. Never
/// edits the returned script.
pub fn migrate<G: ChatGateway>(spec: &MigrationSpec, gateway: &mut G) -> Result<MigrationReport, SynthError> {
    let missing = validate_migration_spec(spec);
    if !missing.is_empty() {
        return Err(SynthError::InvalidSpec(missing));
    }
    let prompt = match spec.kind {
        MigrationKind::CrossPlatform => build_crossplatform_prompt(spec)?,
        MigrationKind::CrossApp => build_crossapp_prompt(spec)?,
    };
    let reply = gateway.complete(&prompt)?;
    let script_text = extract_code_block(&reply).ok_or(SynthError::ExtractionFailed)?;
    let changed = changed_line_count(&spec.old_script_text, &script_text);
    Ok(MigrationReport {
        findings: lint(&script_text),
        changed_line_count: changed,
        suspicious_unchanged: changed == 0,
        script_text,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayFailure {
    /// 1-based index into the script's steps.
    pub step: usize,
    pub status: OutcomeStatus,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub reached_fingerprint: String,
    pub failures: Vec<ReplayFailure>,
}

/// Runs `script` against `driver`. A step that has no effect is reported and
/// execution continues; a step whose element is missing ends the replay.
pub fn replay_script<D: Driver>(script: &TestScript, driver: &mut D) -> Result<ReplayReport, SynthError> {
    script.validate()?;
    let mut failures = Vec::new();
    for (index, step) in script.steps.iter().enumerate() {
        let number = index + 1;
        if step.kind == StepKind::Wait {
            driver.wait(step.wait_before_ms)?;
            continue;
        }
        if step.wait_before_ms > 0 {
            driver.wait(step.wait_before_ms)?;
        }
        let xpath = match &step.locator {
            None => String::new(),
            Some(Locator { strategy: LocatorStrategy::Xpath, value }) => value.clone(),
            Some(Locator { strategy: LocatorStrategy::Id, value }) => {
                match driver.snapshot()?.find_by_id(value) {
                    Some(element) => element.xpath.clone(),
                    None => {
                        failures.push(ReplayFailure {
                            step: number,
                            status: OutcomeStatus::ElementNotFound,
                            detail: format!("no element with id {value:?}"),
                        });
                        break;
                    }
                }
            }
        };
        let action = match step.kind {
            StepKind::Click => Action::click(xpath),
            StepKind::Input => Action::input(xpath, step.text.clone().unwrap_or_default()),
            StepKind::Drag => Action::drag(
                xpath,
                step.text.as_deref().and_then(|t| t.parse().ok()).expect("validated drag"),
            ),
            StepKind::Wait => unreachable!(),
        };
        let outcome = driver.perform(&action)?;
        match outcome.status {
            OutcomeStatus::Ok | OutcomeStatus::PopupAppeared => {}
            OutcomeStatus::NoEffect => failures.push(ReplayFailure {
                step: number,
                status: outcome.status,
                detail: format!("{} on {:?} had no effect", action.operation_type, action.element_xpath),
            }),
            OutcomeStatus::ElementNotFound => {
                failures.push(ReplayFailure {
                    step: number,
                    status: outcome.status,
                    detail: format!("no element at {:?}", action.element_xpath),
                });
                break;
            }
        }
    }
    Ok(ReplayReport {
        reached_fingerprint: driver.snapshot()?.page_fingerprint().to_string(),
        failures,
    })
}

#[cfg(test)]
mod tests;
