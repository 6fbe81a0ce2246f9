use std::collections::BTreeMap;
use std::sync::Arc;

use super::app_model::{AppModel, ElementState};
use super::{ActionOutcome, DeviceError, Driver, OutcomeStatus};
use crate::model::{validate_action, Action, OperationType, UiElement, UiSnapshot};

/// How a session reset treats app state.
///
/// | flags                         | policy      | simulator effect              |
/// |-------------------------------|-------------|-------------------------------|
/// | `full_reset`                  | `FullReset` | start page, all state cleared |
/// | neither flag                  | `FastReset` | same as `FullReset`           |
/// | `no_reset`                    | `NoReset`   | page and state preserved      |
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResetPolicy {
    FullReset,
    FastReset,
    NoReset,
}

/// Deterministic finite-state stand-in for an app under test.
#[derive(Debug, Clone)]
pub struct Simulator {
    model: Arc<AppModel>,
    page: String,
    state: BTreeMap<String, BTreeMap<String, ElementState>>,
    focused: Option<String>,
    actions_on_page: BTreeMap<String, u32>,
    fired_popups: Vec<bool>,
    active_popup: Option<usize>,
    clock_ms: u64,
}

impl Simulator {
    pub fn new(model: impl Into<Arc<AppModel>>) -> Self {
        let model = model.into();
        let mut sim = Simulator {
            page: model.start_page.clone(),
            state: BTreeMap::new(),
            focused: None,
            actions_on_page: BTreeMap::new(),
            fired_popups: vec![false; model.popups.len()],
            active_popup: None,
            clock_ms: 0,
            model,
        };
        sim.clear();
        sim
    }

    fn clear(&mut self) {
        self.page = self.model.start_page.clone();
        self.state = self
            .model
            .pages
            .iter()
            .map(|(id, page)| (id.clone(), page.initial_state()))
            .collect();
        self.focused = None;
        self.actions_on_page.clear();
        self.fired_popups = vec![false; self.model.popups.len()];
        self.active_popup = None;
    }

    pub fn model(&self) -> &AppModel {
        &self.model
    }

    /// Page the app is on, ignoring any pop-up covering it.
    pub fn current_page(&self) -> &str {
        &self.page
    }

    /// Page currently visible to the user.
    pub fn visible_page(&self) -> &str {
        match self.active_popup {
            Some(i) => &self.model.popups[i].popup_page,
            None => &self.page,
        }
    }

    pub fn focused(&self) -> Option<&str> {
        self.focused.as_deref()
    }

    pub fn clock_ms(&self) -> u64 {
        self.clock_ms
    }

    fn live_elements(&self, page_id: &str) -> Vec<UiElement> {
        let page = &self.model.pages[page_id];
        let state = &self.state[page_id];
        page.elements
            .iter()
            .map(|e| {
                let mut e = e.clone();
                if let Some(s) = state.get(&e.xpath) {
                    e.text = (!s.text.is_empty()).then(|| s.text.clone());
                    e.checked = e.checked.map(|_| s.checked);
                }
                e
            })
            .collect()
    }

    fn current_snapshot(&self) -> UiSnapshot {
        UiSnapshot::new(self.live_elements(self.visible_page()))
            .expect("validated app model has unique xpaths")
    }

    fn outcome(&self, status: OutcomeStatus, focus_clicked: bool) -> ActionOutcome {
        ActionOutcome {
            status,
            new_snapshot: self.current_snapshot(),
            focus_clicked,
        }
    }

    /// Text entry without the implicit focus click. Has no effect unless the
    /// element is editable and already focused.
    pub fn send_keys_raw(&mut self, xpath: &str, text: &str) -> ActionOutcome {
        let page_id = self.visible_page().to_string();
        let Some(element) = self.model.pages[&page_id].element(xpath) else {
            return self.outcome(OutcomeStatus::ElementNotFound, false);
        };
        if !element.editable || self.focused.as_deref() != Some(xpath) {
            return self.outcome(OutcomeStatus::NoEffect, false);
        }
        self.set_text(&page_id, xpath, text);
        self.outcome(OutcomeStatus::Ok, false)
    }

    fn set_text(&mut self, page_id: &str, xpath: &str, text: &str) {
        if let Some(s) = self.state.get_mut(page_id).and_then(|p| p.get_mut(xpath)) {
            s.text = text.to_string();
        }
    }

    /// Follows the first transition on this trigger whose guard holds.
    /// Returns `None` when no transition is defined, `Some(false)` when all
    /// are guard-blocked.
    fn fire_transition(&mut self, action: &Action) -> Option<bool> {
        let direction = action.drag_direction();
        let page_state = &self.state[&self.page];
        let mut candidates = self
            .model
            .transitions
            .iter()
            .filter(|t| t.matches(&self.page, &action.element_xpath, action.operation_type, direction))
            .peekable();
        candidates.peek()?;
        let target = candidates
            .find(|t| t.guard.as_ref().is_none_or(|g| g.holds(page_state)))
            .map(|t| t.to.clone());
        match target {
            Some(to) => {
                self.page = to;
                self.focused = None;
                Some(true)
            }
            None => Some(false),
        }
    }

    fn perform_on_popup(&mut self, popup: usize, action: &Action) -> ActionOutcome {
        let dismiss = &self.model.popups[popup].dismiss_xpath;
        if action.operation_type == OperationType::Click && &action.element_xpath == dismiss {
            self.active_popup = None;
            self.outcome(OutcomeStatus::Ok, false)
        } else {
            self.outcome(OutcomeStatus::NoEffect, false)
        }
    }

    fn schedule_popups(&mut self, page_id: &str) -> bool {
        let count = self.actions_on_page.entry(page_id.to_string()).or_insert(0);
        *count += 1;
        let count = *count;
        let due = self.model.popups.iter().enumerate().find(|(i, p)| {
            !self.fired_popups[*i] && p.trigger_page == page_id && count >= p.after_round
        });
        if let Some((index, _)) = due {
            self.fired_popups[index] = true;
            self.active_popup = Some(index);
            return true;
        }
        false
    }
}

impl Driver for Simulator {
    fn snapshot(&mut self) -> Result<UiSnapshot, DeviceError> {
        Ok(self.current_snapshot())
    }

    fn perform(&mut self, action: &Action) -> Result<ActionOutcome, DeviceError> {
        validate_action(action)?;
        let visible = self.visible_page().to_string();
        let whole_screen = action.element_xpath.is_empty();
        let element = if whole_screen {
            None
        } else {
            match self.model.pages[&visible].element(&action.element_xpath) {
                Some(e) => Some(e.clone()),
                None => return Ok(self.outcome(OutcomeStatus::ElementNotFound, false)),
            }
        };
        if let Some(popup) = self.active_popup {
            return Ok(self.perform_on_popup(popup, action));
        }

        let page_id = self.page.clone();
        let mut focus_clicked = false;
        let effect = match action.operation_type {
            OperationType::Click => {
                let element = element.expect("click has an xpath");
                let mut effect = false;
                if element.checked.is_some() {
                    if let Some(s) = self.state.get_mut(&page_id).and_then(|p| p.get_mut(&element.xpath)) {
                        s.checked = !s.checked;
                    }
                    effect = true;
                }
                if element.editable {
                    self.focused = Some(element.xpath.clone());
                    effect = true;
                } else {
                    self.focused = None;
                }
                self.fire_transition(action) == Some(true) || effect
            }
            OperationType::Input => {
                let element = element.expect("input has an xpath");
                if element.editable {
                    self.focused = Some(element.xpath.clone());
                    focus_clicked = true;
                    let entered = self.send_keys_raw(&element.xpath, &action.operation_text);
                    debug_assert_eq!(entered.status, OutcomeStatus::Ok);
                    self.fire_transition(action);
                    true
                } else {
                    false
                }
            }
            OperationType::Drag => self.fire_transition(action) == Some(true),
        };
        let popup = self.schedule_popups(&page_id);
        let status = if popup {
            OutcomeStatus::PopupAppeared
        } else if effect {
            OutcomeStatus::Ok
        } else {
            OutcomeStatus::NoEffect
        };
        Ok(self.outcome(status, focus_clicked))
    }

    fn reset(&mut self, policy: ResetPolicy) -> Result<(), DeviceError> {
        match policy {
            ResetPolicy::FullReset | ResetPolicy::FastReset => self.clear(),
            ResetPolicy::NoReset => {}
        }
        Ok(())
    }

    fn wait(&mut self, ms: u64) -> Result<(), DeviceError> {
        self.clock_ms += ms;
        Ok(())
    }

    fn active_popup_dismiss(&self) -> Option<String> {
        self.active_popup
            .map(|i| self.model.popups[i].dismiss_xpath.clone())
    }
}
