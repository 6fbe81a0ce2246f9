use serde::{Deserialize, Serialize};

use super::LocatorStrategy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MigrationKind {
    CrossPlatform,
    CrossApp,
}

impl MigrationKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MigrationKind::CrossPlatform => "cross_platform",
            MigrationKind::CrossApp => "cross_app",
        }
    }
}

/// Identifier of an element touched by a differential step. `step_index` is
/// 1-based and matches the `Step-N` numbering in prompts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementIdentifier {
    pub step_index: usize,
    pub strategy: LocatorStrategy,
    pub value: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlatformInfo {
    #[serde(default)]
    pub new_device_name: String,
    #[serde(default)]
    pub new_os_version_or_brand: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppInfo {
    #[serde(default)]
    pub package_name: String,
    #[serde(default)]
    pub main_activity: String,
}

/// Old script plus the differential information for the migration target.
///
/// Every field except `kind` defaults when absent so that an incomplete spec
/// file still parses and validation can name each missing item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MigrationSpec {
    pub kind: MigrationKind,
    #[serde(default)]
    pub old_script_text: String,
    #[serde(default)]
    pub differential_steps: Vec<String>,
    #[serde(default)]
    pub element_identifiers: Vec<ElementIdentifier>,
    #[serde(default)]
    pub platform_info: Option<PlatformInfo>,
    #[serde(default)]
    pub app_info: Option<AppInfo>,
}

impl MigrationSpec {
    /// Identifiers attached to the 1-based differential step `step`.
    pub fn identifiers_for(&self, step: usize) -> impl Iterator<Item = &ElementIdentifier> {
        self.element_identifiers
            .iter()
            .filter(move |id| id.step_index == step && !id.value.trim().is_empty())
    }
}
