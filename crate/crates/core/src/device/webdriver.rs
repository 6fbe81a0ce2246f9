use std::time::Duration;

use serde_json::{json, Value};

use super::page_source::parse_page_source;
use super::simulator::ResetPolicy;
use super::{ActionOutcome, DeviceError, Driver, OutcomeStatus};
use crate::model::{validate_action, Action, Bounds, DeviceConfig, DragDirection, OperationType, UiSnapshot};
use crate::transport::{HttpRequest, HttpTransport, Method, TransportError};

/// W3C web element identifier key.
pub const W3C_ELEMENT_KEY: &str = "element-6066-11e4-a52e-4f735466cecf";

/// Appium session over the WebDriver wire protocol.
pub struct WebDriverClient {
    transport: Box<dyn HttpTransport>,
    base_url: String,
    config: DeviceConfig,
    session_id: Option<String>,
    timeout: Duration,
}

impl std::fmt::Debug for WebDriverClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WebDriverClient")
            .field("base_url", &self.base_url)
            .field("session_id", &self.session_id)
            .finish_non_exhaustive()
    }
}

enum WireFailure {
    NoSuchElement,
    InvalidSession(String),
    UnknownCommand(String),
    Other(String),
}

impl From<WireFailure> for DeviceError {
    fn from(failure: WireFailure) -> Self {
        match failure {
            WireFailure::NoSuchElement => DeviceError::Protocol("no such element".into()),
            WireFailure::InvalidSession(m) => DeviceError::SessionLost(m),
            WireFailure::UnknownCommand(m) => DeviceError::UnsupportedAction(m),
            WireFailure::Other(m) => DeviceError::Protocol(m),
        }
    }
}

impl WebDriverClient {
    /// Opens a session with the five `appium:` capabilities.
    pub fn connect(
        base_url: impl Into<String>,
        config: DeviceConfig,
        transport: Box<dyn HttpTransport>,
    ) -> Result<Self, DeviceError> {
        let mut client = WebDriverClient {
            transport,
            base_url: base_url.into().trim_end_matches('/').to_string(),
            config,
            session_id: None,
            timeout: Duration::from_secs(60),
        };
        client.create_session()?;
        Ok(client)
    }

    pub fn session_id(&self) -> Option<&str> {
        self.session_id.as_deref()
    }

    /// Capabilities payload for `POST /session`.
    pub fn session_request(config: &DeviceConfig) -> Value {
        let caps: serde_json::Map<String, Value> = config
            .capabilities()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        json!({"capabilities": {"alwaysMatch": caps, "firstMatch": [{}]}})
    }

    fn session_path(&self) -> Result<String, DeviceError> {
        self.session_id
            .as_ref()
            .map(|id| format!("/session/{id}"))
            .ok_or_else(|| DeviceError::SessionLost("no active session".into()))
    }

    fn call(&self, method: Method, path: &str, body: Option<Value>) -> Result<Value, WireFailure> {
        let mut request = HttpRequest::new(method, format!("{}{path}", self.base_url)).timeout(self.timeout);
        if let Some(body) = &body {
            request = request.json(body);
        }
        let response = self.transport.send(request).map_err(|e| match e {
            TransportError::Timeout => WireFailure::InvalidSession("request timed out".into()),
            other => WireFailure::InvalidSession(other.to_string()),
        })?;
        let value: Value = if response.body.trim().is_empty() {
            Value::Null
        } else {
            serde_json::from_str(&response.body)
                .map_err(|e| WireFailure::Other(format!("{method} {path}: bad JSON: {e}", method = method.as_str())))?
        };
        if (200..300).contains(&response.status) {
            return Ok(value);
        }
        let error = value.pointer("/value/error").and_then(Value::as_str).unwrap_or("");
        let message = value
            .pointer("/value/message")
            .and_then(Value::as_str)
            .unwrap_or("")
            .to_string();
        Err(match error {
            "no such element" => WireFailure::NoSuchElement,
            "invalid session id" => WireFailure::InvalidSession(message),
            "unknown command" | "unknown method" | "unsupported operation" => WireFailure::UnknownCommand(
                format!("{} {path}: {error}", method.as_str()),
            ),
            _ if response.status == 404 && error.is_empty() => {
                WireFailure::UnknownCommand(format!("{} {path}: status 404", method.as_str()))
            }
            _ => WireFailure::Other(format!("{} {path}: status {} {error} {message}", method.as_str(), response.status)),
        })
    }

    fn create_session(&mut self) -> Result<(), DeviceError> {
        let value = self.call(Method::Post, "/session", Some(Self::session_request(&self.config)))?;
        let id = value
            .pointer("/value/sessionId")
            .or_else(|| value.get("sessionId"))
            .and_then(Value::as_str)
            .ok_or_else(|| DeviceError::Protocol("session response without sessionId".into()))?;
        self.session_id = Some(id.to_string());
        Ok(())
    }

    pub fn close(&mut self) -> Result<(), DeviceError> {
        if self.session_id.is_some() {
            let path = self.session_path()?;
            self.call(Method::Delete, &path, None)?;
            self.session_id = None;
        }
        Ok(())
    }

    fn find_element(&self, xpath: &str) -> Result<Option<String>, DeviceError> {
        let path = format!("{}/element", self.session_path()?);
        match self.call(Method::Post, &path, Some(json!({"using": "xpath", "value": xpath}))) {
            Ok(value) => {
                let element = value.get("value").unwrap_or(&Value::Null);
                element
                    .get(W3C_ELEMENT_KEY)
                    .or_else(|| element.get("ELEMENT"))
                    .and_then(Value::as_str)
                    .map(|id| Some(id.to_string()))
                    .ok_or_else(|| DeviceError::Protocol("element response without an id".into()))
            }
            Err(WireFailure::NoSuchElement) => Ok(None),
            Err(other) => Err(other.into()),
        }
    }

    fn click_element(&self, element_id: &str) -> Result<(), DeviceError> {
        let path = format!("{}/element/{element_id}/click", self.session_path()?);
        self.call(Method::Post, &path, Some(json!({})))?;
        Ok(())
    }

    fn send_keys(&self, element_id: &str, text: &str) -> Result<(), DeviceError> {
        let path = format!("{}/element/{element_id}/value", self.session_path()?);
        let chars: Vec<String> = text.chars().map(String::from).collect();
        self.call(Method::Post, &path, Some(json!({"text": text, "value": chars})))?;
        Ok(())
    }

    /// Touch swipe across the middle 50% of `area` in `direction`.
    pub fn swipe_actions(area: Bounds, direction: DragDirection) -> Value {
        let (cx, cy) = area.center();
        let (dx, dy) = (area.width() / 4, area.height() / 4);
        let ((sx, sy), (ex, ey)) = match direction {
            DragDirection::Up => ((cx, cy + dy), (cx, cy - dy)),
            DragDirection::Down => ((cx, cy - dy), (cx, cy + dy)),
            DragDirection::Left => ((cx + dx, cy), (cx - dx, cy)),
            DragDirection::Right => ((cx - dx, cy), (cx + dx, cy)),
        };
        json!({"actions": [{
            "type": "pointer",
            "id": "finger1",
            "parameters": {"pointerType": "touch"},
            "actions": [
                {"type": "pointerMove", "duration": 0, "x": sx, "y": sy},
                {"type": "pointerDown", "button": 0},
                {"type": "pause", "duration": 100},
                {"type": "pointerMove", "duration": 500, "x": ex, "y": ey},
                {"type": "pointerUp", "button": 0}
            ]
        }]})
    }

    fn drag(&mut self, action: &Action) -> Result<OutcomeStatus, DeviceError> {
        let direction = action.drag_direction().expect("validated drag");
        let snapshot = self.snapshot()?;
        let area = if action.element_xpath.is_empty() {
            snapshot.elements().iter().find_map(|e| e.bounds)
        } else {
            match snapshot.find(&action.element_xpath) {
                Some(e) => e.bounds,
                None => return Ok(OutcomeStatus::ElementNotFound),
            }
        }
        .ok_or_else(|| DeviceError::UnsupportedAction("no bounds known for drag area".into()))?;
        let path = format!("{}/actions", self.session_path()?);
        self.call(Method::Post, &path, Some(Self::swipe_actions(area, direction)))?;
        Ok(OutcomeStatus::Ok)
    }
}

impl Driver for WebDriverClient {
    fn snapshot(&mut self) -> Result<UiSnapshot, DeviceError> {
        let path = format!("{}/source", self.session_path()?);
        let value = self.call(Method::Get, &path, None)?;
        let xml = value
            .get("value")
            .and_then(Value::as_str)
            .ok_or_else(|| DeviceError::Parse("page source response without a string value".into()))?;
        parse_page_source(xml)
    }

    fn perform(&mut self, action: &Action) -> Result<ActionOutcome, DeviceError> {
        validate_action(action)?;
        let mut focus_clicked = false;
        let status = match action.operation_type {
            OperationType::Click => match self.find_element(&action.element_xpath)? {
                Some(id) => {
                    self.click_element(&id)?;
                    OutcomeStatus::Ok
                }
                None => OutcomeStatus::ElementNotFound,
            },
            OperationType::Input => match self.find_element(&action.element_xpath)? {
                Some(id) => {
                    self.click_element(&id)?;
                    focus_clicked = true;
                    self.send_keys(&id, &action.operation_text)?;
                    OutcomeStatus::Ok
                }
                None => OutcomeStatus::ElementNotFound,
            },
            OperationType::Drag => self.drag(action)?,
        };
        Ok(ActionOutcome {
            status,
            new_snapshot: self.snapshot()?,
            focus_clicked,
        })
    }

    fn reset(&mut self, _policy: ResetPolicy) -> Result<(), DeviceError> {
        // The reset flags travel in the capabilities; the server applies them
        // when the session is re-created.
        self.close()?;
        self.create_session()
    }

    fn wait(&mut self, ms: u64) -> Result<(), DeviceError> {
        std::thread::sleep(Duration::from_millis(ms));
        Ok(())
    }
}

impl Drop for WebDriverClient {
    fn drop(&mut self) {
        if self.session_id.is_some() {
            let _ = self.close();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::{FnTransport, HttpResponse};

    const SOURCE: &str = r#"<hierarchy><android.widget.FrameLayout class="android.widget.FrameLayout" bounds="[0,0][1000,2000]"><android.widget.EditText class="android.widget.EditText" resource-id="app:id/user" clickable="true"/><android.widget.Button class="android.widget.Button" text="Login" clickable="true"/></android.widget.FrameLayout></hierarchy>"#;

    fn ok(value: Value) -> Result<HttpResponse, TransportError> {
        Ok(HttpResponse { status: 200, body: json!({"value": value}).to_string() })
    }

    fn stub(pointer_support: bool) -> FnTransport {
        FnTransport::new(move |req| {
            let path = req.url.trim_start_matches("http://stub:4723");
            match (req.method, path) {
                (Method::Post, "/session") => ok(json!({"sessionId": "s1", "capabilities": {}})),
                (Method::Get, "/session/s1/source") => ok(Value::String(SOURCE.into())),
                (Method::Post, "/session/s1/element") => {
                    let body: Value = serde_json::from_str(req.body.as_deref().unwrap()).unwrap();
                    if body["value"].as_str().unwrap().contains("Missing") {
                        Ok(HttpResponse {
                            status: 404,
                            body: json!({"value": {"error": "no such element", "message": "gone"}}).to_string(),
                        })
                    } else {
                        ok(json!({W3C_ELEMENT_KEY: "e1"}))
                    }
                }
                (Method::Post, "/session/s1/element/e1/click") | (Method::Post, "/session/s1/element/e1/value") => ok(Value::Null),
                (Method::Post, "/session/s1/actions") if pointer_support => ok(Value::Null),
                (Method::Post, "/session/s1/actions") => Ok(HttpResponse {
                    status: 404,
                    body: json!({"value": {"error": "unknown command", "message": ""}}).to_string(),
                }),
                (Method::Delete, "/session/s1") => ok(Value::Null),
                (Method::Get, "/session/gone/source") => Ok(HttpResponse {
                    status: 404,
                    body: json!({"value": {"error": "invalid session id", "message": "x"}}).to_string(),
                }),
                _ => Ok(HttpResponse { status: 500, body: "{}".into() }),
            }
        })
    }

    fn config() -> DeviceConfig {
        DeviceConfig {
            device_name: "emulator-5554".into(),
            app_package: "com.netease.mail".into(),
            app_activity: ".Launch".into(),
            no_reset: false,
            full_reset: true,
        }
    }

    #[test]
    fn session_capabilities_use_exact_keys() {
        let server = stub(true);
        let client = WebDriverClient::connect("http://stub:4723/", config(), Box::new(server.clone())).unwrap();
        assert_eq!(client.session_id(), Some("s1"));
        let body: Value = serde_json::from_str(server.requests()[0].body.as_deref().unwrap()).unwrap();
        let caps = body["capabilities"]["alwaysMatch"].as_object().unwrap();
        let mut keys: Vec<_> = caps.keys().cloned().collect();
        keys.sort();
        assert_eq!(
            keys,
            ["appium:appActivity", "appium:appPackage", "appium:deviceName", "appium:fullReset", "appium:noReset"]
        );
        assert_eq!(caps["appium:fullReset"], true);
    }

    #[test]
    fn snapshot_parses_source() {
        let mut client = WebDriverClient::connect("http://stub:4723", config(), Box::new(stub(true))).unwrap();
        let snap = client.snapshot().unwrap();
        assert_eq!(snap.elements().len(), 3);
        assert!(snap.elements()[1].editable);
    }

    #[test]
    fn input_focuses_then_sends_keys() {
        let server = stub(true);
        let mut client = WebDriverClient::connect("http://stub:4723", config(), Box::new(server.clone())).unwrap();
        let outcome = client.perform(&Action::input("//user", "alice")).unwrap();
        assert_eq!(outcome.status, OutcomeStatus::Ok);
        assert!(outcome.focus_clicked);
        let paths: Vec<_> = server.requests().iter().map(|r| r.url.replace("http://stub:4723", "")).collect();
        let click = paths.iter().position(|p| p.ends_with("/click")).unwrap();
        let value = paths.iter().position(|p| p.ends_with("/value")).unwrap();
        assert!(click < value);
        let body: Value = serde_json::from_str(server.requests()[value].body.as_deref().unwrap()).unwrap();
        assert_eq!(body["text"], "alice");
    }

    #[test]
    fn missing_element_reported_as_outcome() {
        let mut client = WebDriverClient::connect("http://stub:4723", config(), Box::new(stub(true))).unwrap();
        let outcome = client.perform(&Action::click("//Missing")).unwrap();
        assert_eq!(outcome.status, OutcomeStatus::ElementNotFound);
    }

    #[test]
    fn drag_uses_pointer_actions_or_reports_unsupported() {
        let server = stub(true);
        let mut client = WebDriverClient::connect("http://stub:4723", config(), Box::new(server.clone())).unwrap();
        let outcome = client.perform(&Action::drag("", DragDirection::Up)).unwrap();
        assert_eq!(outcome.status, OutcomeStatus::Ok);
        let actions = server.requests().into_iter().find(|r| r.url.ends_with("/actions")).unwrap();
        let body: Value = serde_json::from_str(actions.body.as_deref().unwrap()).unwrap();
        let moves = &body["actions"][0]["actions"];
        assert_eq!(moves[0]["y"], 1500);
        assert_eq!(moves[3]["y"], 500);

        let mut client = WebDriverClient::connect("http://stub:4723", config(), Box::new(stub(false))).unwrap();
        assert!(matches!(
            client.perform(&Action::drag("", DragDirection::Left)),
            Err(DeviceError::UnsupportedAction(_))
        ));
    }

    #[test]
    fn reset_recreates_session_and_invalid_session_is_lost() {
        let server = stub(true);
        let mut client = WebDriverClient::connect("http://stub:4723", config(), Box::new(server.clone())).unwrap();
        client.reset(ResetPolicy::FullReset).unwrap();
        let methods: Vec<_> = server.requests().iter().map(|r| (r.method, r.url.clone())).collect();
        assert_eq!(methods[1], (Method::Delete, "http://stub:4723/session/s1".to_string()));
        assert_eq!(methods[2].1, "http://stub:4723/session");

        client.session_id = Some("gone".into());
        assert!(matches!(client.snapshot(), Err(DeviceError::SessionLost(_))));
        client.session_id = None;
    }
}
