use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Operation vocabulary the model may choose from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperationType {
    Click,
    Input,
    Drag,
}

impl OperationType {
    pub fn as_str(&self) -> &'static str {
        match self {
            OperationType::Click => "click",
            OperationType::Input => "input",
            OperationType::Drag => "drag",
        }
    }
}

impl fmt::Display for OperationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OperationType {
    type Err = ActionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "click" => Ok(OperationType::Click),
            "input" => Ok(OperationType::Input),
            "drag" => Ok(OperationType::Drag),
            _ => Err(ActionError::BadOperationType(s.to_string())),
        }
    }
}

/// Swipe direction carried in `operation_text` of a drag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DragDirection {
    Up,
    Down,
    Left,
    Right,
}

impl DragDirection {
    pub const ALL: [DragDirection; 4] = [
        DragDirection::Up,
        DragDirection::Down,
        DragDirection::Left,
        DragDirection::Right,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            DragDirection::Up => "up",
            DragDirection::Down => "down",
            DragDirection::Left => "left",
            DragDirection::Right => "right",
        }
    }
}

impl FromStr for DragDirection {
    type Err = ActionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "up" => Ok(DragDirection::Up),
            "down" => Ok(DragDirection::Down),
            "left" => Ok(DragDirection::Left),
            "right" => Ok(DragDirection::Right),
            _ => Err(ActionError::BadDragDirection(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ActionError {
    #[error("missing-xpath: element_xpath is required for {0}")]
    MissingXpath(OperationType),
    #[error("empty-input-text: input requires non-empty operation_text")]
    EmptyInputText,
    #[error("bad-operation-type: {0:?} is not one of click, input, drag")]
    BadOperationType(String),
    #[error("bad-drag-direction: {0:?} is not one of up, down, left, right")]
    BadDragDirection(String),
}

impl ActionError {
    /// Short machine name of the violated rule.
    pub fn code(&self) -> &'static str {
        match self {
            ActionError::MissingXpath(_) => "missing-xpath",
            ActionError::EmptyInputText => "empty-input-text",
            ActionError::BadOperationType(_) => "bad-operation-type",
            ActionError::BadDragDirection(_) => "bad-drag-direction",
        }
    }
}

/// The `(element-xpath, operation-type, operation-text)` triple.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action {
    pub element_xpath: String,
    pub operation_type: OperationType,
    #[serde(default)]
    pub operation_text: String,
}

impl Action {
    pub fn click(xpath: impl Into<String>) -> Self {
        Self {
            element_xpath: xpath.into(),
            operation_type: OperationType::Click,
            operation_text: String::new(),
        }
    }

    pub fn input(xpath: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            element_xpath: xpath.into(),
            operation_type: OperationType::Input,
            operation_text: text.into(),
        }
    }

    pub fn drag(xpath: impl Into<String>, direction: DragDirection) -> Self {
        Self {
            element_xpath: xpath.into(),
            operation_type: OperationType::Drag,
            operation_text: direction.as_str().to_string(),
        }
    }

    /// Builds and validates an action from untyped string parts.
    pub fn from_parts(xpath: &str, operation_type: &str, text: &str) -> Result<Self, ActionError> {
        let action = Action {
            element_xpath: xpath.to_string(),
            operation_type: operation_type.parse()?,
            operation_text: text.to_string(),
        };
        validate_action(&action)?;
        Ok(action)
    }

    /// Direction of a drag; `None` for other operations or malformed text.
    pub fn drag_direction(&self) -> Option<DragDirection> {
        match self.operation_type {
            OperationType::Drag => self.operation_text.parse().ok(),
            _ => None,
        }
    }
}

pub fn validate_action(action: &Action) -> Result<(), ActionError> {
    let xpath_empty = action.element_xpath.trim().is_empty();
    match action.operation_type {
        OperationType::Click => {
            if xpath_empty {
                return Err(ActionError::MissingXpath(OperationType::Click));
            }
        }
        OperationType::Input => {
            if xpath_empty {
                return Err(ActionError::MissingXpath(OperationType::Input));
            }
            if action.operation_text.is_empty() {
                return Err(ActionError::EmptyInputText);
            }
        }
        OperationType::Drag => {
            action.operation_text.parse::<DragDirection>()?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn click_with_xpath_ok() {
        assert_eq!(Action::from_parts("//Button[1]", "click", "").map(|_| ()), Ok(()));
    }

    #[test]
    fn input_without_xpath_is_missing_xpath() {
        let err = Action::from_parts("", "input", "abc").unwrap_err();
        assert_eq!(err.code(), "missing-xpath");
    }

    #[test]
    fn whole_screen_drag_ok() {
        let action = Action::from_parts("", "drag", "down").unwrap();
        assert_eq!(action.drag_direction(), Some(DragDirection::Down));
    }

    #[test]
    fn error_codes() {
        assert_eq!(Action::from_parts("//x", "tap", "").unwrap_err().code(), "bad-operation-type");
        assert_eq!(Action::from_parts("//x", "input", "").unwrap_err().code(), "empty-input-text");
        assert_eq!(Action::from_parts("", "drag", "sideways").unwrap_err().code(), "bad-drag-direction");
        assert_eq!(Action::from_parts(" ", "click", "").unwrap_err().code(), "missing-xpath");
    }

    /// Independent statement of the acceptance set.
    fn expected_ok(xpath: &str, op: &str, text: &str) -> bool {
        let op = op.trim().to_ascii_lowercase();
        let has_xpath = !xpath.trim().is_empty();
        match op.as_str() {
            "click" => has_xpath,
            "input" => has_xpath && !text.is_empty(),
            "drag" => ["up", "down", "left", "right"].contains(&text.trim().to_ascii_lowercase().as_str()),
            _ => false,
        }
    }

    proptest! {
        #[test]
        fn accepts_exactly_the_invariant_set(
            xpath in prop_oneof![Just(String::new()), Just(" ".to_string()), "//[a-z]{1,5}\\[[1-3]\\]"],
            op in prop_oneof![Just("click"), Just("input"), Just("drag"), Just("Click"), Just("tap"), Just("scroll"), Just("")],
            text in prop_oneof![Just(String::new()), Just("up".to_string()), Just("Down".to_string()), Just("left".to_string()), Just("right".to_string()), "[a-z ]{1,8}"],
        ) {
            let result = Action::from_parts(&xpath, op, &text);
            prop_assert_eq!(result.is_ok(), expected_ok(&xpath, op, &text));
        }

        #[test]
        fn canonical_json_round_trip(
            xpath in "//[a-zA-Z]{1,6}",
            text in "[ -~]{0,12}",
            op in prop_oneof![Just(OperationType::Click), Just(OperationType::Input), Just(OperationType::Drag)],
        ) {
            let action = Action { element_xpath: xpath, operation_type: op, operation_text: text };
            let json = serde_json::to_string(&action).unwrap();
            prop_assert_eq!(serde_json::from_str::<Action>(&json).unwrap(), action);
        }
    }
}
