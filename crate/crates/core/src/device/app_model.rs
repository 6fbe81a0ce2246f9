use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{DragDirection, OperationType, UiElement, UiSnapshot};

#[derive(Debug, Error)]
pub enum AppModelError {
    #[error("io-error: {0}")]
    Io(#[from] std::io::Error),
    #[error("schema-error: {0}")]
    Schema(#[from] serde_json::Error),
    #[error("invariant-violation: {0}")]
    Invariant(String),
}

/// Live state of one element.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementState {
    #[serde(default)]
    pub text: String,
    #[serde(default)]
    pub checked: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageDef {
    pub elements: Vec<UiElement>,
    #[serde(default)]
    pub state: BTreeMap<String, ElementState>,
}

impl PageDef {
    pub fn element(&self, xpath: &str) -> Option<&UiElement> {
        self.elements.iter().find(|e| e.xpath == xpath)
    }

    /// Initial state of every element: the explicit entry, else the values
    /// in the element definition.
    pub fn initial_state(&self) -> BTreeMap<String, ElementState> {
        self.elements
            .iter()
            .map(|e| {
                let state = self.state.get(&e.xpath).cloned().unwrap_or_else(|| ElementState {
                    text: e.text.clone().unwrap_or_default(),
                    checked: e.checked.unwrap_or(false),
                });
                (e.xpath.clone(), state)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    Checked,
    TextNonempty,
    TextEquals(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition {
    pub xpath: String,
    pub predicate: Predicate,
}

impl Condition {
    pub fn holds(&self, state: &BTreeMap<String, ElementState>) -> bool {
        let Some(s) = state.get(&self.xpath) else {
            return false;
        };
        match &self.predicate {
            Predicate::Checked => s.checked,
            Predicate::TextNonempty => !s.text.is_empty(),
            Predicate::TextEquals(value) => &s.text == value,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuardExpr {
    pub conjuncts: Vec<Condition>,
}

impl GuardExpr {
    pub fn holds(&self, state: &BTreeMap<String, ElementState>) -> bool {
        self.conjuncts.iter().all(|c| c.holds(state))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trigger {
    /// Empty for a whole-screen drag.
    #[serde(default)]
    pub element_xpath: String,
    pub action_kind: OperationType,
    /// Drag direction this trigger responds to; any direction when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<DragDirection>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub from: String,
    pub on: Trigger,
    #[serde(default)]
    pub guard: Option<GuardExpr>,
    pub to: String,
}

impl Transition {
    pub fn matches(&self, page: &str, xpath: &str, kind: OperationType, direction: Option<DragDirection>) -> bool {
        self.from == page
            && self.on.element_xpath == xpath
            && self.on.action_kind == kind
            && (self.on.direction.is_none() || self.on.direction == direction)
    }
}

/// Scheduled pop-up: once `after_round` actions have been performed on
/// `trigger_page`, `popup_page` covers the screen until `dismiss_xpath` is
/// clicked.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Popup {
    pub trigger_page: String,
    pub after_round: u32,
    pub popup_page: String,
    pub dismiss_xpath: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppModel {
    pub name: String,
    pub start_page: String,
    pub pages: BTreeMap<String, PageDef>,
    #[serde(default)]
    pub transitions: Vec<Transition>,
    #[serde(default)]
    pub popups: Vec<Popup>,
}

impl AppModel {
    pub fn page(&self, id: &str) -> Option<&PageDef> {
        self.pages.get(id)
    }

    /// Page whose structural fingerprint equals `fingerprint`.
    pub fn page_for_fingerprint(&self, fingerprint: &str) -> Option<&str> {
        self.pages
            .iter()
            .find(|(_, page)| crate::model::fingerprint(&page.elements) == fingerprint)
            .map(|(id, _)| id.as_str())
    }

    pub fn validate(&self) -> Result<(), AppModelError> {
        let violation = |msg: String| Err(AppModelError::Invariant(msg));
        if !self.pages.contains_key(&self.start_page) {
            return violation(format!("start_page {:?} is not a page", self.start_page));
        }
        for (id, page) in &self.pages {
            if let Err(e) = UiSnapshot::new(page.elements.clone()) {
                return violation(format!("page {id:?}: {e}"));
            }
            if let Some(xpath) = page.state.keys().find(|x| page.element(x).is_none()) {
                return violation(format!("page {id:?}: state for unknown element {xpath:?}"));
            }
        }
        for (index, t) in self.transitions.iter().enumerate() {
            let at = format!("transition {index} ({} -> {})", t.from, t.to);
            let Some(source) = self.pages.get(&t.from) else {
                return violation(format!("{at}: source page {:?} missing", t.from));
            };
            if !self.pages.contains_key(&t.to) {
                return violation(format!("{at}: target page {:?} missing", t.to));
            }
            let whole_screen = t.on.action_kind == OperationType::Drag && t.on.element_xpath.is_empty();
            if !whole_screen && source.element(&t.on.element_xpath).is_none() {
                return violation(format!(
                    "{at}: element {:?} not on page {:?}",
                    t.on.element_xpath, t.from
                ));
            }
            if t.on.direction.is_some() && t.on.action_kind != OperationType::Drag {
                return violation(format!("{at}: direction is only valid for drag"));
            }
            for condition in t.guard.iter().flat_map(|g| &g.conjuncts) {
                if source.element(&condition.xpath).is_none() {
                    return violation(format!(
                        "{at}: guard references {:?}, absent from page {:?}",
                        condition.xpath, t.from
                    ));
                }
            }
        }
        // Two transitions on the same trigger are only allowed when both are
        // guarded by different expressions.
        for (i, a) in self.transitions.iter().enumerate() {
            for (j, b) in self.transitions.iter().enumerate().skip(i + 1) {
                let same_trigger = a.from == b.from
                    && a.on.element_xpath == b.on.element_xpath
                    && a.on.action_kind == b.on.action_kind
                    && (a.on.direction.is_none() || b.on.direction.is_none() || a.on.direction == b.on.direction);
                let ambiguous = a.guard.is_none() || b.guard.is_none() || a.guard == b.guard;
                if same_trigger && ambiguous {
                    return violation(format!(
                        "transitions {i} and {j} both fire on {:?} {} in page {:?}",
                        a.on.element_xpath, a.on.action_kind, a.from
                    ));
                }
            }
        }
        for (index, popup) in self.popups.iter().enumerate() {
            if !self.pages.contains_key(&popup.trigger_page) {
                return violation(format!("popup {index}: trigger page {:?} missing", popup.trigger_page));
            }
            let Some(page) = self.pages.get(&popup.popup_page) else {
                return violation(format!("popup {index}: popup page {:?} missing", popup.popup_page));
            };
            if page.element(&popup.dismiss_xpath).is_none() {
                return violation(format!(
                    "popup {index}: dismiss element {:?} not on page {:?}",
                    popup.dismiss_xpath, popup.popup_page
                ));
            }
            if popup.after_round == 0 {
                return violation(format!("popup {index}: after_round must be at least 1"));
            }
        }
        Ok(())
    }
}

pub fn parse_app_model(json: &str) -> Result<AppModel, AppModelError> {
    let model: AppModel = serde_json::from_str(json)?;
    model.validate()?;
    Ok(model)
}

pub fn load_app_model(path: &Path) -> Result<AppModel, AppModelError> {
    parse_app_model(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model_json(transitions: &str) -> String {
        format!(
            r#"{{
              "name": "t",
              "start_page": "a",
              "pages": {{
                "a": {{"elements": [
                    {{"xpath": "//go", "class_name": "Button", "clickable": true}},
                    {{"xpath": "//box", "class_name": "CheckBox", "clickable": true, "checked": false}}
                ]}},
                "b": {{"elements": []}}
              }},
              "transitions": {transitions}
            }}"#
        )
    }

    #[test]
    fn valid_model_parses() {
        let m = parse_app_model(&model_json(
            r#"[{"from":"a","on":{"element_xpath":"//go","action_kind":"click"},"guard":{"conjuncts":[{"xpath":"//box","predicate":"checked"}]},"to":"b"}]"#,
        ))
        .unwrap();
        assert_eq!(m.pages.len(), 2);
        assert_eq!(m.transitions[0].guard.as_ref().unwrap().conjuncts[0].predicate, Predicate::Checked);
    }

    #[test]
    fn transition_to_missing_page() {
        let err = parse_app_model(&model_json(
            r#"[{"from":"a","on":{"element_xpath":"//go","action_kind":"click"},"to":"nowhere"}]"#,
        ))
        .unwrap_err();
        assert!(matches!(err, AppModelError::Invariant(ref m) if m.contains("nowhere")), "{err}");
    }

    #[test]
    fn empty_file_is_schema_error() {
        assert!(matches!(parse_app_model(""), Err(AppModelError::Schema(_))));
    }

    #[test]
    fn ambiguous_transitions_rejected() {
        let err = parse_app_model(&model_json(
            r#"[{"from":"a","on":{"element_xpath":"//go","action_kind":"click"},"to":"b"},
                {"from":"a","on":{"element_xpath":"//go","action_kind":"click"},"to":"a"}]"#,
        ))
        .unwrap_err();
        assert!(matches!(err, AppModelError::Invariant(_)));
    }

    #[test]
    fn guard_on_foreign_xpath_rejected() {
        let err = parse_app_model(&model_json(
            r#"[{"from":"a","on":{"element_xpath":"//go","action_kind":"click"},"guard":{"conjuncts":[{"xpath":"//elsewhere","predicate":{"text_equals":"x"}}]},"to":"b"}]"#,
        ))
        .unwrap_err();
        assert!(matches!(err, AppModelError::Invariant(ref m) if m.contains("//elsewhere")));
    }
}
