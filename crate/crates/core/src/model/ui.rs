use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ModelError;

/// Fingerprint reported for a page without any elements.
pub const EMPTY_PAGE_FINGERPRINT: &str = "page:empty";

/// Integer pixel rectangle, `[left, top][right, bottom]` as Android reports it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bounds {
    pub left: i32,
    pub top: i32,
    pub right: i32,
    pub bottom: i32,
}

impl Bounds {
    pub fn center(&self) -> (i32, i32) {
        ((self.left + self.right) / 2, (self.top + self.bottom) / 2)
    }

    pub fn width(&self) -> i32 {
        self.right - self.left
    }

    pub fn height(&self) -> i32 {
        self.bottom - self.top
    }
}

/// One widget of a page observation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UiElement {
    pub xpath: String,
    #[serde(default)]
    pub resource_id: Option<String>,
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default)]
    pub hint: Option<String>,
    pub class_name: String,
    #[serde(default)]
    pub clickable: bool,
    #[serde(default)]
    pub editable: bool,
    #[serde(default)]
    pub checked: Option<bool>,
    #[serde(default)]
    pub bounds: Option<Bounds>,
}

impl UiElement {
    pub fn new(xpath: impl Into<String>, class_name: impl Into<String>) -> Self {
        Self {
            xpath: xpath.into(),
            resource_id: None,
            text: None,
            hint: None,
            class_name: class_name.into(),
            clickable: false,
            editable: false,
            checked: None,
            bounds: None,
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.resource_id = Some(id.into());
        self
    }

    pub fn with_text(mut self, text: impl Into<String>) -> Self {
        self.text = Some(text.into());
        self
    }

    pub fn with_hint(mut self, hint: impl Into<String>) -> Self {
        self.hint = Some(hint.into());
        self
    }

    pub fn clickable(mut self) -> Self {
        self.clickable = true;
        self
    }

    pub fn editable(mut self) -> Self {
        self.editable = true;
        self
    }

    pub fn with_checked(mut self, checked: bool) -> Self {
        self.checked = Some(checked);
        self
    }

    pub fn is_interactive(&self) -> bool {
        self.clickable || self.editable
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.xpath.trim().is_empty() {
            return Err(ModelError::EmptyField("xpath"));
        }
        Ok(())
    }
}

/// One page observation. The fingerprint is derived from the elements and
/// is recomputed on deserialization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSnapshot")]
pub struct UiSnapshot {
    page_fingerprint: String,
    elements: Vec<UiElement>,
    #[serde(default)]
    raw_source: Option<String>,
}

#[derive(Deserialize)]
struct RawSnapshot {
    page_fingerprint: String,
    elements: Vec<UiElement>,
    #[serde(default)]
    raw_source: Option<String>,
}

impl TryFrom<RawSnapshot> for UiSnapshot {
    type Error = ModelError;

    fn try_from(raw: RawSnapshot) -> Result<Self, Self::Error> {
        let snapshot = UiSnapshot::new(raw.elements)?.with_raw_source(raw.raw_source);
        if snapshot.page_fingerprint != raw.page_fingerprint {
            return Err(ModelError::FingerprintMismatch {
                stored: raw.page_fingerprint,
                computed: snapshot.page_fingerprint,
            });
        }
        Ok(snapshot)
    }
}

impl UiSnapshot {
    /// Builds a snapshot, rejecting duplicate or empty xpaths.
    pub fn new(elements: Vec<UiElement>) -> Result<Self, ModelError> {
        let mut seen = std::collections::HashSet::new();
        for element in &elements {
            element.validate()?;
            if !seen.insert(element.xpath.as_str()) {
                return Err(ModelError::DuplicateXpath(element.xpath.clone()));
            }
        }
        Ok(Self {
            page_fingerprint: fingerprint(&elements),
            elements,
            raw_source: None,
        })
    }

    pub fn with_raw_source(mut self, raw: Option<String>) -> Self {
        self.raw_source = raw;
        self
    }

    pub fn page_fingerprint(&self) -> &str {
        &self.page_fingerprint
    }

    pub fn elements(&self) -> &[UiElement] {
        &self.elements
    }

    pub fn raw_source(&self) -> Option<&str> {
        self.raw_source.as_deref()
    }

    pub fn find(&self, xpath: &str) -> Option<&UiElement> {
        self.elements.iter().find(|e| e.xpath == xpath)
    }

    pub fn find_by_id(&self, resource_id: &str) -> Option<&UiElement> {
        self.elements
            .iter()
            .find(|e| e.resource_id.as_deref() == Some(resource_id))
    }
}

/// Structural page hash over `(xpath, class_name, clickable, editable)` in
/// document order. Text, hint and checked state do not participate, so typing
/// into a field or toggling a checkbox is not reported as navigation.
pub fn fingerprint(elements: &[UiElement]) -> String {
    if elements.is_empty() {
        return EMPTY_PAGE_FINGERPRINT.to_string();
    }
    let mut hasher = Sha256::new();
    for element in elements {
        // Length prefixes keep field boundaries unambiguous.
        hasher.update((element.xpath.len() as u64).to_le_bytes());
        hasher.update(element.xpath.as_bytes());
        hasher.update((element.class_name.len() as u64).to_le_bytes());
        hasher.update(element.class_name.as_bytes());
        hasher.update([element.clickable as u8, element.editable as u8]);
    }
    let digest = hasher.finalize();
    format!("page:{}", hex::encode(&digest[..16]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn page() -> Vec<UiElement> {
        vec![
            UiElement::new("/hierarchy/A[1]", "android.widget.EditText")
                .editable()
                .clickable(),
            UiElement::new("/hierarchy/B[1]", "android.widget.CheckBox")
                .clickable()
                .with_checked(false),
            UiElement::new("/hierarchy/C[1]", "android.widget.Button").clickable(),
        ]
    }

    #[test]
    fn empty_page_has_sentinel() {
        assert_eq!(fingerprint(&[]), EMPTY_PAGE_FINGERPRINT);
    }

    #[test]
    fn deterministic() {
        assert_eq!(fingerprint(&page()), fingerprint(&page()));
    }

    // Every single-field structural mutation of every element must change the
    // fingerprint; every non-structural one must not.
    #[test]
    fn exhaustive_single_field_mutations() {
        let base = fingerprint(&page());
        let mut structural = 0;
        for idx in 0..3 {
            let mutations: Vec<Box<dyn Fn(&mut UiElement)>> = vec![
                Box::new(|e| e.xpath.push('x')),
                Box::new(|e| e.class_name.push('x')),
                Box::new(|e| e.clickable = !e.clickable),
                Box::new(|e| e.editable = !e.editable),
            ];
            for mutate in &mutations {
                let mut p = page();
                mutate(&mut p[idx]);
                assert_ne!(fingerprint(&p), base, "element {idx}");
                structural += 1;
            }
            let cosmetic: Vec<Box<dyn Fn(&mut UiElement)>> = vec![
                Box::new(|e| e.text = Some("typed".into())),
                Box::new(|e| e.hint = Some("hint".into())),
                Box::new(|e| e.checked = Some(true)),
                Box::new(|e| e.resource_id = Some("id".into())),
            ];
            for mutate in &cosmetic {
                let mut p = page();
                mutate(&mut p[idx]);
                assert_eq!(fingerprint(&p), base);
            }
        }
        assert_eq!(structural, 12);
    }

    #[test]
    fn reordering_changes_fingerprint() {
        let mut p = page();
        p.swap(0, 2);
        assert_ne!(fingerprint(&p), fingerprint(&page()));
    }

    #[test]
    fn duplicate_xpath_rejected() {
        let mut p = page();
        p[1].xpath = p[0].xpath.clone();
        assert!(matches!(
            UiSnapshot::new(p),
            Err(ModelError::DuplicateXpath(_))
        ));
    }

    #[test]
    fn tampered_fingerprint_rejected_on_parse() {
        let snap = UiSnapshot::new(page()).unwrap();
        let mut value = serde_json::to_value(&snap).unwrap();
        value["page_fingerprint"] = "page:bogus".into();
        assert!(serde_json::from_value::<UiSnapshot>(value).is_err());
    }
}
