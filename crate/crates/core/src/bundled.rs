//! App models, device configs, scenario inputs and recorded model replies
//! shipped with the crate. The JSON files live under `data/`.

use crate::device::{parse_app_model, AppModel};
use crate::model::{DeviceConfig, MigrationSpec};
use crate::prompt::ScenarioStepSpec;

pub const LOGIN_MODEL: &str = include_str!("../data/models/login.json");
pub const LOGIN_POPUP_MODEL: &str = include_str!("../data/models/login_popup.json");
pub const SEND_EMAIL_MODEL: &str = include_str!("../data/models/send_email.json");
pub const FLIGHT_SEARCH_MODEL: &str = include_str!("../data/models/flight_search.json");

pub const MAIL_CONFIG: &str = include_str!("../data/configs/mail.json");
pub const FLIGHTS_CONFIG: &str = include_str!("../data/configs/flights.json");

pub const LOGIN_STEPS: &str = include_str!("../data/steps/login.json");

pub const CROSSPLATFORM_SPEC: &str = include_str!("../data/migration/crossplatform_login.json");
pub const CROSSAPP_SPEC: &str = include_str!("../data/migration/crossapp_login.json");

pub const LOGIN_REFERENCE_FIXTURE: &str = include_str!("../data/fixtures/login_reference.jsonl");
pub const GUARD_RECOVERY_FIXTURE: &str = include_str!("../data/fixtures/guard_recovery.jsonl");
pub const CROSSPLATFORM_FIXTURE: &str = include_str!("../data/fixtures/migrate_crossplatform.jsonl");
pub const CROSSAPP_FIXTURE: &str = include_str!("../data/fixtures/migrate_crossapp.jsonl");
pub const GENERATE_FIXTURE: &str = include_str!("../data/fixtures/generate_login.jsonl");

/// App name and function used for the recorded exploration sessions.
pub const LOGIN_APP: &str = "Mail";
pub const LOGIN_FUNCTION: &str = "Login";

/// Bundled app models by file stem.
pub const MODELS: [(&str, &str); 4] = [
    ("login", LOGIN_MODEL),
    ("login_popup", LOGIN_POPUP_MODEL),
    ("send_email", SEND_EMAIL_MODEL),
    ("flight_search", FLIGHT_SEARCH_MODEL),
];

pub fn model(text: &str) -> AppModel {
    parse_app_model(text).expect("bundled app model is valid")
}

pub fn config(text: &str) -> DeviceConfig {
    serde_json::from_str(text).expect("bundled device config is valid")
}

pub fn login_steps() -> Vec<ScenarioStepSpec> {
    serde_json::from_str(LOGIN_STEPS).expect("bundled steps are valid")
}

pub fn migration_spec(text: &str) -> MigrationSpec {
    serde_json::from_str(text).expect("bundled migration spec is valid")
}

/// Absolute path of a file under the crate's `data/` directory.
pub fn data_path(relative: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(relative)
}
