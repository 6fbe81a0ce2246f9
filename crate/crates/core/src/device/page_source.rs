use crate::model::{Bounds, UiElement, UiSnapshot};

use super::DeviceError;

/// Root tags that wrap the widget tree without being widgets themselves.
const CONTAINER_ROOTS: [&str; 2] = ["hierarchy", "AppiumAUT"];

fn parse_bounds(raw: &str) -> Option<Bounds> {
    // "[left,top][right,bottom]"
    let nums: Vec<i32> = raw
        .split(['[', ']', ','])
        .filter(|s| !s.is_empty())
        .map(|s| s.trim().parse().ok())
        .collect::<Option<_>>()?;
    match nums[..] {
        [left, top, right, bottom] => Some(Bounds { left, top, right, bottom }),
        _ => None,
    }
}

fn non_empty(node: roxmltree::Node<'_, '_>, name: &str) -> Option<String> {
    node.attribute(name)
        .filter(|v| !v.is_empty())
        .map(str::to_string)
}

fn is_true(node: roxmltree::Node<'_, '_>, name: &str) -> bool {
    node.attribute(name) == Some("true")
}

fn element_from_node(node: roxmltree::Node<'_, '_>, xpath: String) -> UiElement {
    let tag = node.tag_name().name();
    let class_name = non_empty(node, "class")
        .or_else(|| non_empty(node, "type"))
        .unwrap_or_else(|| tag.to_string());
    let editable = is_true(node, "editable")
        || class_name.ends_with("EditText")
        || class_name.contains("TextField");
    let checked = is_true(node, "checkable").then(|| is_true(node, "checked"));
    UiElement {
        xpath,
        resource_id: non_empty(node, "resource-id"),
        text: non_empty(node, "text"),
        hint: non_empty(node, "hint").or_else(|| non_empty(node, "content-desc")),
        class_name,
        clickable: is_true(node, "clickable"),
        editable,
        checked,
        bounds: node.attribute("bounds").and_then(parse_bounds),
    }
}

fn collect(node: roxmltree::Node<'_, '_>, path: &str, out: &mut Vec<UiElement>) {
    let mut seen: std::collections::HashMap<&str, usize> = std::collections::HashMap::new();
    for child in node.children().filter(|n| n.is_element()) {
        let tag = child.tag_name().name();
        let index = seen.entry(tag).or_insert(0);
        *index += 1;
        let xpath = format!("{path}/{tag}[{index}]");
        out.push(element_from_node(child, xpath.clone()));
        collect(child, &xpath, out);
    }
}

/// Parses an Appium page-source document into elements in document order,
/// with absolute positional xpaths. Non-interactive elements are kept.
pub fn parse_page_source(xml: &str) -> Result<UiSnapshot, DeviceError> {
    let doc = roxmltree::Document::parse(xml).map_err(|e| DeviceError::Parse(e.to_string()))?;
    let root = doc.root_element();
    let root_tag = root.tag_name().name();
    let mut elements = Vec::new();
    if CONTAINER_ROOTS.contains(&root_tag) {
        collect(root, &format!("/{root_tag}"), &mut elements);
    } else {
        let xpath = format!("/{root_tag}[1]");
        elements.push(element_from_node(root, xpath.clone()));
        collect(root, &xpath, &mut elements);
    }
    UiSnapshot::new(elements)
        .map(|s| s.with_raw_source(Some(xml.to_string())))
        .map_err(|e| DeviceError::Parse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SOURCE: &str = r#"<?xml version="1.0" encoding="UTF-8"?>
<hierarchy rotation="0">
  <android.widget.FrameLayout class="android.widget.FrameLayout" bounds="[0,0][1080,2400]" clickable="false">
    <android.widget.EditText class="android.widget.EditText" resource-id="com.netease.mail:id/username" text="" hint="Email address" clickable="true" bounds="[40,300][1040,420]"/>
    <android.widget.CheckBox class="android.widget.CheckBox" resource-id="com.netease.mail:id/agree" checkable="true" checked="false" clickable="true" content-desc="Agree to the Terms of Service"/>
    <android.widget.Button class="android.widget.Button" text="Login" clickable="true"/>
    <android.widget.Button class="android.widget.Button" text="Help" clickable="true"/>
  </android.widget.FrameLayout>
</hierarchy>"#;

    #[test]
    fn maps_android_attributes() {
        let snap = parse_page_source(SOURCE).unwrap();
        let e = snap.elements();
        assert_eq!(e.len(), 5);
        assert_eq!(e[0].xpath, "/hierarchy/android.widget.FrameLayout[1]");
        assert!(!e[0].clickable);
        assert_eq!(e[0].bounds, Some(Bounds { left: 0, top: 0, right: 1080, bottom: 2400 }));

        let user = &e[1];
        assert_eq!(user.xpath, "/hierarchy/android.widget.FrameLayout[1]/android.widget.EditText[1]");
        assert_eq!(user.resource_id.as_deref(), Some("com.netease.mail:id/username"));
        assert_eq!(user.text, None);
        assert_eq!(user.hint.as_deref(), Some("Email address"));
        assert!(user.editable && user.clickable);

        let agree = &e[2];
        assert_eq!(agree.checked, Some(false));
        assert_eq!(agree.hint.as_deref(), Some("Agree to the Terms of Service"));

        assert_eq!(e[3].xpath, "/hierarchy/android.widget.FrameLayout[1]/android.widget.Button[1]");
        assert_eq!(e[4].xpath, "/hierarchy/android.widget.FrameLayout[1]/android.widget.Button[2]");
        assert_eq!(e[3].checked, None);
        assert_eq!(snap.raw_source(), Some(SOURCE));
    }

    #[test]
    fn malformed_xml_is_parse_error() {
        assert!(matches!(parse_page_source("<hierarchy><a></hierarchy>"), Err(DeviceError::Parse(_))));
    }

    #[test]
    fn bounds_parsing() {
        assert_eq!(parse_bounds("[1,2][3,4]"), Some(Bounds { left: 1, top: 2, right: 3, bottom: 4 }));
        assert_eq!(parse_bounds("[1,2]"), None);
        assert_eq!(parse_bounds("garbage"), None);
    }
}
