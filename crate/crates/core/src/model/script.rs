use serde::{Deserialize, Serialize};

use super::{DeviceConfig, ModelError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocatorStrategy {
    Id,
    Xpath,
}

impl LocatorStrategy {
    /// Label used in prompt annotations, e.g. `(ID: "...")`.
    pub fn label(&self) -> &'static str {
        match self {
            LocatorStrategy::Id => "ID",
            LocatorStrategy::Xpath => "XPath",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Locator {
    pub strategy: LocatorStrategy,
    pub value: String,
}

impl Locator {
    pub fn id(value: impl Into<String>) -> Self {
        Self {
            strategy: LocatorStrategy::Id,
            value: value.into(),
        }
    }

    pub fn xpath(value: impl Into<String>) -> Self {
        Self {
            strategy: LocatorStrategy::Xpath,
            value: value.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Click,
    Input,
    Drag,
    Wait,
}

/// One locator-addressed script step. Input steps carry an implicit focus
/// click; drag steps carry their direction in `text`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestStep {
    #[serde(default)]
    pub locator: Option<Locator>,
    pub kind: StepKind,
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default)]
    pub wait_before_ms: u64,
}

impl TestStep {
    pub fn click(locator: Locator) -> Self {
        Self {
            locator: Some(locator),
            kind: StepKind::Click,
            text: None,
            wait_before_ms: 0,
        }
    }

    pub fn input(locator: Locator, text: impl Into<String>) -> Self {
        Self {
            locator: Some(locator),
            kind: StepKind::Input,
            text: Some(text.into()),
            wait_before_ms: 0,
        }
    }

    pub fn drag(locator: Option<Locator>, direction: crate::model::DragDirection) -> Self {
        Self {
            locator,
            kind: StepKind::Drag,
            text: Some(direction.as_str().to_string()),
            wait_before_ms: 0,
        }
    }

    pub fn wait(ms: u64) -> Self {
        Self {
            locator: None,
            kind: StepKind::Wait,
            text: None,
            wait_before_ms: ms,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if let Some(locator) = &self.locator {
            if locator.value.trim().is_empty() {
                return Err(ModelError::InvalidStep("locator value is empty"));
            }
        }
        match self.kind {
            StepKind::Click if self.locator.is_none() => {
                Err(ModelError::InvalidStep("click requires a locator"))
            }
            StepKind::Input if self.locator.is_none() => {
                Err(ModelError::InvalidStep("input requires a locator"))
            }
            StepKind::Input if self.text.as_deref().is_none_or(str::is_empty) => {
                Err(ModelError::InvalidStep("input requires text"))
            }
            StepKind::Drag
                if self
                    .text
                    .as_deref()
                    .and_then(|t| t.parse::<crate::model::DragDirection>().ok())
                    .is_none() =>
            {
                Err(ModelError::InvalidStep("drag requires a direction"))
            }
            StepKind::Wait if self.locator.is_some() => {
                Err(ModelError::InvalidStep("wait must not have a locator"))
            }
            StepKind::Wait if self.wait_before_ms == 0 => {
                Err(ModelError::InvalidStep("wait requires a positive duration"))
            }
            _ => Ok(()),
        }
    }
}

/// Renderer-independent script IR.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestScript {
    pub config: DeviceConfig,
    pub steps: Vec<TestStep>,
    pub scenario_name: String,
}

impl TestScript {
    pub fn validate(&self) -> Result<(), ModelError> {
        self.config.validate()?;
        if self.steps.is_empty() {
            return Err(ModelError::EmptyField("steps"));
        }
        for (index, step) in self.steps.iter().enumerate() {
            step.validate().map_err(|e| ModelError::AtStep {
                step: index + 1,
                source: Box::new(e),
            })?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_invariants() {
        assert!(TestStep::click(Locator::id("a")).validate().is_ok());
        assert!(TestStep::input(Locator::id("a"), "").validate().is_err());
        assert!(TestStep::wait(0).validate().is_err());
        assert!(TestStep::wait(2000).validate().is_ok());
        let mut wait = TestStep::wait(10);
        wait.locator = Some(Locator::id("x"));
        assert!(wait.validate().is_err());
        assert!(TestStep::drag(None, crate::model::DragDirection::Up).validate().is_ok());
    }

    #[test]
    fn empty_script_rejected() {
        let script = TestScript {
            config: DeviceConfig::example(),
            steps: vec![],
            scenario_name: "x".into(),
        };
        assert!(matches!(script.validate(), Err(ModelError::EmptyField("steps"))));
    }
}
