//! Device drivers: a deterministic app simulator and a WebDriver/Appium
//! wire-protocol client behind one trait.

mod app_model;
mod page_source;
mod simulator;
mod webdriver;

pub use app_model::{
    load_app_model, parse_app_model, AppModel, Condition, GuardExpr, PageDef, Popup, Predicate,
    Transition, Trigger,
};
pub use page_source::parse_page_source;
pub use simulator::{ResetPolicy, Simulator};
pub use webdriver::{WebDriverClient, W3C_ELEMENT_KEY};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Action, DeviceConfig, UiSnapshot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeStatus {
    Ok,
    NoEffect,
    ElementNotFound,
    PopupAppeared,
}

impl OutcomeStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            OutcomeStatus::Ok => "ok",
            OutcomeStatus::NoEffect => "no_effect",
            OutcomeStatus::ElementNotFound => "element_not_found",
            OutcomeStatus::PopupAppeared => "popup_appeared",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionOutcome {
    pub status: OutcomeStatus,
    pub new_snapshot: UiSnapshot,
    /// An input was preceded by an implicit focus click.
    #[serde(default)]
    pub focus_clicked: bool,
}

#[derive(Debug, Error)]
pub enum DeviceError {
    #[error("session-lost: {0}")]
    SessionLost(String),
    #[error("parse-error: {0}")]
    Parse(String),
    #[error("unsupported-action: {0}")]
    UnsupportedAction(String),
    #[error("invalid action: {0}")]
    InvalidAction(#[from] crate::model::ActionError),
    #[error("wire protocol error: {0}")]
    Protocol(String),
}

/// One device session.
pub trait Driver {
    fn snapshot(&mut self) -> Result<UiSnapshot, DeviceError>;

    fn perform(&mut self, action: &Action) -> Result<ActionOutcome, DeviceError>;

    fn reset(&mut self, policy: ResetPolicy) -> Result<(), DeviceError>;

    /// Honors a script wait. The simulator advances a logical clock.
    fn wait(&mut self, ms: u64) -> Result<(), DeviceError>;

    /// Dismiss target of a pop-up currently covering the screen, when the
    /// driver can tell.
    fn active_popup_dismiss(&self) -> Option<String> {
        None
    }
}

impl<D: Driver + ?Sized> Driver for &mut D {
    fn snapshot(&mut self) -> Result<UiSnapshot, DeviceError> {
        (**self).snapshot()
    }

    fn perform(&mut self, action: &Action) -> Result<ActionOutcome, DeviceError> {
        (**self).perform(action)
    }

    fn reset(&mut self, policy: ResetPolicy) -> Result<(), DeviceError> {
        (**self).reset(policy)
    }

    fn wait(&mut self, ms: u64) -> Result<(), DeviceError> {
        (**self).wait(ms)
    }

    fn active_popup_dismiss(&self) -> Option<String> {
        (**self).active_popup_dismiss()
    }
}

impl<D: Driver + ?Sized> Driver for Box<D> {
    fn snapshot(&mut self) -> Result<UiSnapshot, DeviceError> {
        (**self).snapshot()
    }

    fn perform(&mut self, action: &Action) -> Result<ActionOutcome, DeviceError> {
        (**self).perform(action)
    }

    fn reset(&mut self, policy: ResetPolicy) -> Result<(), DeviceError> {
        (**self).reset(policy)
    }

    fn wait(&mut self, ms: u64) -> Result<(), DeviceError> {
        (**self).wait(ms)
    }

    fn active_popup_dismiss(&self) -> Option<String> {
        (**self).active_popup_dismiss()
    }
}

impl ResetPolicy {
    pub fn from_config(config: &DeviceConfig) -> Self {
        if config.no_reset {
            ResetPolicy::NoReset
        } else if config.full_reset {
            ResetPolicy::FullReset
        } else {
            ResetPolicy::FastReset
        }
    }
}
