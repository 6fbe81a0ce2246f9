//! Domain types shared by every other module, with their validation.
//!
//! All types have a canonical snake_case JSON encoding; those encodings are
//! the on-disk trace, IR and spec formats.

mod action;
mod migration;
mod script;
mod trace;
mod transcript;
mod ui;

pub use action::{validate_action, Action, ActionError, DragDirection, OperationType};
pub use migration::{AppInfo, ElementIdentifier, MigrationKind, MigrationSpec, PlatformInfo};
pub use script::{Locator, LocatorStrategy, StepKind, TestScript, TestStep};
pub use trace::{ExplorationTrace, Initiator, Terminal, TraceRound, TraceSummary};
pub use transcript::{ChatMessage, ChatTranscript, Role, CHARS_PER_TOKEN, MESSAGE_OVERHEAD_TOKENS};
pub use ui::{fingerprint, Bounds, UiElement, UiSnapshot, EMPTY_PAGE_FINGERPRINT};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{0} must not be empty")]
    EmptyField(&'static str),
    #[error("app_package {0:?} is not a reverse-DNS name")]
    BadPackage(String),
    #[error("no_reset and full_reset are both set")]
    ConflictingResetFlags,
    #[error("duplicate xpath {0:?} in one page")]
    DuplicateXpath(String),
    #[error("stored fingerprint {stored} does not match computed {computed}")]
    FingerprintMismatch { stored: String, computed: String },
    #[error("stored token estimate {stored} does not match computed {computed}")]
    TokenEstimateMismatch { stored: usize, computed: usize },
    #[error("invalid step: {0}")]
    InvalidStep(&'static str),
    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<ModelError>,
    },
    #[error("invalid trace: {0}")]
    InvalidTrace(&'static str),
    #[error("trace file: {0}")]
    TraceFile(String),
}

/// Appium session capabilities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceConfig {
    pub device_name: String,
    pub app_package: String,
    pub app_activity: String,
    #[serde(default)]
    pub no_reset: bool,
    #[serde(default)]
    pub full_reset: bool,
}

impl DeviceConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.device_name.trim().is_empty() {
            return Err(ModelError::EmptyField("device_name"));
        }
        if self.app_package.trim().is_empty() {
            return Err(ModelError::EmptyField("app_package"));
        }
        if self.app_activity.trim().is_empty() {
            return Err(ModelError::EmptyField("app_activity"));
        }
        let reverse_dns = self.app_package.split('.').count() >= 2
            && self.app_package.split('.').all(|segment| {
                !segment.is_empty()
                    && segment.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
            });
        if !reverse_dns {
            return Err(ModelError::BadPackage(self.app_package.clone()));
        }
        if self.no_reset && self.full_reset {
            return Err(ModelError::ConflictingResetFlags);
        }
        Ok(())
    }

    /// The five capability entries in their wire order.
    pub fn capabilities(&self) -> [(&'static str, serde_json::Value); 5] {
        [
            ("appium:deviceName", self.device_name.clone().into()),
            ("appium:appPackage", self.app_package.clone().into()),
            ("appium:appActivity", self.app_activity.clone().into()),
            ("appium:noReset", self.no_reset.into()),
            ("appium:fullReset", self.full_reset.into()),
        ]
    }

    #[cfg(test)]
    pub(crate) fn example() -> Self {
        DeviceConfig {
            device_name: "emulator-5554".into(),
            app_package: "com.example.mail".into(),
            app_activity: ".MainActivity".into(),
            no_reset: false,
            full_reset: true,
        }
    }
}

/// Capability keys every session and rendered script must carry.
pub const CAPABILITY_KEYS: [&str; 5] = [
    "appium:deviceName",
    "appium:appPackage",
    "appium:appActivity",
    "appium:noReset",
    "appium:fullReset",
];

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn device_config_invariants() {
        assert!(DeviceConfig::example().validate().is_ok());
        let mut both = DeviceConfig::example();
        both.no_reset = true;
        assert!(matches!(both.validate(), Err(ModelError::ConflictingResetFlags)));
        let mut bad = DeviceConfig::example();
        bad.app_package = "mail".into();
        assert!(matches!(bad.validate(), Err(ModelError::BadPackage(_))));
        let mut empty = DeviceConfig::example();
        empty.app_activity = String::new();
        assert!(matches!(empty.validate(), Err(ModelError::EmptyField("app_activity"))));
    }

    fn arb_element() -> impl Strategy<Value = UiElement> {
        (
            "[A-Za-z]{1,6}",
            proptest::option::of("[a-z:/]{1,10}"),
            proptest::option::of("[ -~]{0,10}"),
            proptest::option::of("[ -~]{0,10}"),
            any::<bool>(),
            any::<bool>(),
            proptest::option::of(any::<bool>()),
            proptest::option::of((0..500i32, 0..500i32, 500..1000i32, 500..1000i32)),
        )
            .prop_map(|(tag, id, text, hint, clickable, editable, checked, bounds)| UiElement {
                xpath: format!("//{tag}"),
                resource_id: id,
                text,
                hint,
                class_name: format!("android.widget.{tag}"),
                clickable,
                editable,
                checked,
                bounds: bounds.map(|(left, top, right, bottom)| Bounds { left, top, right, bottom }),
            })
    }

    proptest! {
        #[test]
        fn snapshot_and_script_round_trip(
            elements in proptest::collection::vec(arb_element(), 0..6),
            steps in proptest::collection::vec((any::<bool>(), "[a-z]{1,8}", 1..5000u64), 1..6),
        ) {
            let mut elements = elements;
            for (i, e) in elements.iter_mut().enumerate() {
                e.xpath = format!("{}[{}]", e.xpath, i + 1);
            }
            let snap = UiSnapshot::new(elements).unwrap();
            let json = serde_json::to_string(&snap).unwrap();
            prop_assert_eq!(serde_json::from_str::<UiSnapshot>(&json).unwrap(), snap);

            let script = TestScript {
                config: DeviceConfig::example(),
                steps: steps.into_iter().map(|(id, v, ms)| if id {
                    TestStep::input(Locator::id(v.clone()), v)
                } else {
                    TestStep::wait(ms)
                }).collect(),
                scenario_name: "login".into(),
            };
            let json = serde_json::to_string(&script).unwrap();
            prop_assert_eq!(serde_json::from_str::<TestScript>(&json).unwrap(), script);
        }

        #[test]
        fn transcript_round_trip(contents in proptest::collection::vec("[ -~]{0,40}", 0..6)) {
            let t = ChatTranscript::from_messages(contents.into_iter().map(ChatMessage::user).collect());
            let json = serde_json::to_string(&t).unwrap();
            prop_assert_eq!(serde_json::from_str::<ChatTranscript>(&json).unwrap(), t);
        }
    }
}
