use std::fmt::Write as _;

use super::{PromptError, ScenarioStepSpec};
use crate::model::{
    Action, ChatMessage, ChatTranscript, DeviceConfig, Locator, MigrationKind, MigrationSpec,
    UiElement,
};
use crate::synth::validate_migration_spec;

const ONESHOT_CLOSING: &str = "Use the above information to generate a Python test script \
executable on the device. Ensure to set a wait time where loading is required.";

const ROLE_LINE: &str = "You are a software testing engineer.";

pub const SUMMARIZATION_PROMPT: &str = "Generate Appium test script for the testing process.";

/// First line of the message sent after an unparseable reply.
pub const CORRECTIVE_PREFIX: &str = "Your previous reply could not be parsed.";

/// Longest text/hint value forwarded per element; longer values are cut.
pub const MAX_ATTR_CHARS: usize = 80;

const MIGRATION_CLOSING: &str = "Please return the new test script.";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PageChange {
    First,
    NewPage,
    Unchanged,
}

fn locator_note(locator: &Locator) -> String {
    format!(" ({}: \"{}\")", locator.strategy.label(), locator.value)
}

/// Lowercases a leading capital so the sentence can follow a connector,
/// leaving acronyms such as "ID" alone.
fn decapitalize(s: &str) -> String {
    let mut chars = s.chars();
    match (chars.next(), chars.next()) {
        (Some(first), Some(second)) if first.is_ascii_uppercase() && !second.is_ascii_uppercase() => {
            let mut out = first.to_ascii_lowercase().to_string();
            out.push_str(&s[first.len_utf8()..]);
            out
        }
        _ => s.to_string(),
    }
}

fn step_sentence(step: &ScenarioStepSpec) -> String {
    let mut sentence = step.narration.trim().trim_end_matches('.').to_string();
    if let Some(locator) = &step.locator {
        sentence.push_str(&locator_note(locator));
    }
    sentence.push('.');
    sentence
}

fn page_line(number: usize, steps: &[&ScenarioStepSpec]) -> String {
    let mut line = format!("Page{number}:");
    let count = steps.len();
    for (index, step) in steps.iter().enumerate() {
        let sentence = step_sentence(step);
        let connector = match index {
            0 => None,
            i if i + 1 == count => Some("Finally,"),
            i if i % 2 == 1 => Some("Then,"),
            _ => Some("Next,"),
        };
        line.push(' ');
        match connector {
            Some(c) => {
                line.push_str(c);
                line.push(' ');
                line.push_str(&decapitalize(&sentence));
            }
            None => line.push_str(&sentence),
        }
    }
    line
}

/// Single message carrying every capability and step at once. Consecutive
/// steps with the same page label share one `PageN:` line.
pub fn build_oneshot_generation_prompt(
    config: &DeviceConfig,
    steps: &[ScenarioStepSpec],
) -> Result<ChatTranscript, PromptError> {
    if steps.is_empty() {
        return Err(PromptError::EmptySteps);
    }
    config
        .validate()
        .map_err(|e| PromptError::InvalidConfig(e.to_string()))?;
    for step in steps {
        step.validate()?;
    }

    let mut lines = Vec::new();
    let caps: Vec<String> = config
        .capabilities()
        .iter()
        .map(|(key, value)| match value {
            serde_json::Value::String(s) => format!("{key}={s}"),
            other => format!("{key}={other}"),
        })
        .collect();
    lines.push(format!("Here are the initial values: {}", caps.join(", ")));

    let mut groups: Vec<Vec<&ScenarioStepSpec>> = Vec::new();
    for step in steps {
        match groups.last_mut() {
            Some(group) if group[0].page_label == step.page_label => group.push(step),
            _ => groups.push(vec![step]),
        }
    }
    for (index, group) in groups.iter().enumerate() {
        lines.push(page_line(index + 1, group));
    }
    lines.push(ONESHOT_CLOSING.to_string());

    Ok(ChatTranscript::new().with(ChatMessage::user(lines.join("\n"))))
}

pub fn build_initiation_prompt(app_name: &str, function_name: &str) -> Result<ChatTranscript, PromptError> {
    if app_name.trim().is_empty() {
        return Err(PromptError::EmptyArg("app_name"));
    }
    if function_name.trim().is_empty() {
        return Err(PromptError::EmptyArg("function_name"));
    }
    let text = format!(
        "{ROLE_LINE}\n\
         You are asked to test function \"{function_name}\" in app \"{app_name}\".\n\
         You will be provided with necessary XML structure of the current page each turn.\n\
         You should perform the following tasks each turn:\n\
         <TASK-1> Check whether the function has been tested. If true, summarize all the actions you have done and say \"DONE\". Otherwise, perform TASK-2.\n\
         <TASK-2> Analyze the provided XML structure of the current page. If an appropriate element for operation can not be found, try drag operations. Describe what to do in JSON format with the following keys: \"element-xpath\", \"operation-type\", \"operation-text\".\n\
         Repeat what you are going to do and get ready."
    );
    Ok(ChatTranscript::new().with(ChatMessage::user(text)))
}

fn clip(value: &str) -> String {
    let flat: String = value
        .chars()
        .map(|c| match c {
            '\n' | '\r' | '\t' => ' ',
            '"' => '\'',
            other => other,
        })
        .collect();
    if flat.chars().count() > MAX_ATTR_CHARS {
        let mut cut: String = flat.chars().take(MAX_ATTR_CHARS).collect();
        cut.push_str("...");
        cut
    } else {
        flat
    }
}

/// One compact XML-like line per element.
pub fn render_element_line(element: &UiElement) -> String {
    let mut line = format!("<{} xpath=\"{}\"", element.class_name, element.xpath);
    if let Some(id) = &element.resource_id {
        let _ = write!(line, " resource-id=\"{}\"", clip(id));
    }
    if let Some(text) = element.text.as_deref().filter(|t| !t.is_empty()) {
        let _ = write!(line, " text=\"{}\"", clip(text));
    }
    if let Some(hint) = element.hint.as_deref().filter(|h| !h.is_empty()) {
        let _ = write!(line, " hint=\"{}\"", clip(hint));
    }
    let _ = write!(
        line,
        " clickable=\"{}\" editable=\"{}\"",
        element.clickable, element.editable
    );
    if let Some(checked) = element.checked {
        let _ = write!(line, " checked=\"{checked}\"");
    }
    line.push_str("/>");
    line
}

/// Message for one exploration round. The operation line appears whenever
/// a previous action is given; the page-state line is omitted on the first
/// round.
pub fn build_exploration_prompt(
    previous: Option<&Action>,
    page_change: PageChange,
    elements: &[UiElement],
) -> String {
    debug_assert_eq!(previous.is_none(), page_change == PageChange::First);
    let mut lines = Vec::with_capacity(elements.len() + 2);
    if let Some(action) = previous {
        lines.push(format!("Previous {} operation finished.", action.operation_type));
    }
    match page_change {
        PageChange::First => {}
        PageChange::NewPage => lines.push("Now we are in a new page.".to_string()),
        PageChange::Unchanged => lines.push("The page remains unchanged.".to_string()),
    }
    lines.extend(elements.iter().map(render_element_line));
    lines.join("\n")
}

pub fn build_summarization_prompt() -> String {
    SUMMARIZATION_PROMPT.to_string()
}

/// Sent once after an unparseable reply.
pub fn corrective_message(reason: &str) -> String {
    format!(
        "{CORRECTIVE_PREFIX} ({reason})\n\
         Reply with \"DONE\" if the function has been tested, otherwise with one JSON object with the keys \"element-xpath\", \"operation-type\" (one of click, input, drag) and \"operation-text\"."
    )
}

fn differential_lines(spec: &MigrationSpec) -> Vec<String> {
    spec.differential_steps
        .iter()
        .enumerate()
        .map(|(index, step)| {
            let mut line = format!("Step-{}: {}", index + 1, step.trim());
            for id in spec.identifiers_for(index + 1) {
                line.push_str(&format!(" ({}: \"{}\")", id.strategy.label(), id.value));
            }
            line
        })
        .collect()
}

fn migration_message(task: &str, target_lines: Vec<String>, spec: &MigrationSpec) -> String {
    let mut lines = vec![
        ROLE_LINE.to_string(),
        task.to_string(),
        "The information you know is list as follows:".to_string(),
    ];
    lines.extend(target_lines);
    lines.push("Different steps:".to_string());
    lines.extend(differential_lines(spec));
    lines.push("Old test script:".to_string());
    lines.push(spec.old_script_text.trim_end().to_string());
    lines.push(MIGRATION_CLOSING.to_string());
    lines.join("\n")
}

fn check_spec(spec: &MigrationSpec, kind: MigrationKind) -> Result<(), PromptError> {
    if spec.kind != kind {
        return Err(PromptError::WrongKind {
            expected: kind.as_str(),
        });
    }
    let missing = validate_migration_spec(spec);
    if !missing.is_empty() {
        return Err(PromptError::InvalidSpec(missing));
    }
    Ok(())
}

pub fn build_crossplatform_prompt(spec: &MigrationSpec) -> Result<ChatTranscript, PromptError> {
    check_spec(spec, MigrationKind::CrossPlatform)?;
    let info = spec.platform_info.as_ref().expect("validated");
    let text = migration_message(
        "You are asked to do test script migration for a new platform.",
        vec![
            format!("New device name: {}", info.new_device_name.trim()),
            format!("New Android version: {}", info.new_os_version_or_brand.trim()),
        ],
        spec,
    );
    Ok(ChatTranscript::new().with(ChatMessage::user(text)))
}

pub fn build_crossapp_prompt(spec: &MigrationSpec) -> Result<ChatTranscript, PromptError> {
    check_spec(spec, MigrationKind::CrossApp)?;
    let info = spec.app_info.as_ref().expect("validated");
    let text = migration_message(
        "You are asked to do test script migration for an app sharing the same function.",
        vec![
            "New app information:".to_string(),
            format!("Package name: {}", info.package_name.trim()),
            format!("Main activity name: {}", info.main_activity.trim()),
        ],
        spec,
    );
    Ok(ChatTranscript::new().with(ChatMessage::user(text)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AppInfo, ElementIdentifier, LocatorStrategy, PlatformInfo};

    fn config() -> DeviceConfig {
        DeviceConfig {
            device_name: "emulator-5554".into(),
            app_package: "com.netease.mail".into(),
            app_activity: ".LaunchActivity".into(),
            no_reset: false,
            full_reset: true,
        }
    }

    fn step(page: &str, narration: &str, id: &str) -> ScenarioStepSpec {
        ScenarioStepSpec {
            page_label: page.into(),
            narration: narration.into(),
            locator: Some(Locator::id(id)),
            input_text: None,
        }
    }

    fn only_message(t: &ChatTranscript) -> &str {
        assert_eq!(t.len(), 1);
        &t.messages()[0].content
    }

    #[test]
    fn oneshot_single_click() {
        let t = build_oneshot_generation_prompt(&config(), &[step("welcome", "Click the \"Login\" button", "login")]).unwrap();
        let msg = only_message(&t);
        assert!(msg.contains("appium:appPackage=com.netease.mail"));
        assert_eq!(msg.matches("Page1:").count(), 1);
        assert!(msg.contains("Page1: Click the \"Login\" button (ID: \"login\")."));
        assert!(msg.starts_with("Here are the initial values: appium:deviceName=emulator-5554, appium:appPackage=com.netease.mail, appium:appActivity=.LaunchActivity, appium:noReset=false, appium:fullReset=true"));
        assert!(msg.ends_with(ONESHOT_CLOSING));
    }

    #[test]
    fn oneshot_three_pages_in_order() {
        let steps = vec![
            step("a", "Click the \"Login\" button", "login"),
            ScenarioStepSpec {
                page_label: "b".into(),
                narration: "Pass \"alice\" to the \"Email\" text box".into(),
                locator: Some(Locator::id("email")),
                input_text: Some("alice".into()),
            },
            step("b", "Pass \"pw\" to the \"Password\" text box", "pw"),
            ScenarioStepSpec {
                page_label: "b".into(),
                narration: "Pass \"x\" to the \"Code\" text box".into(),
                locator: Some(Locator::xpath("//code")),
                input_text: Some("x".into()),
            },
            step("b", "Click the \"Submit\" button", "submit"),
            step("c", "Click the \"Inbox\" tab", "inbox"),
        ];
        let t = build_oneshot_generation_prompt(&config(), &steps).unwrap();
        let msg = only_message(&t);
        let page_lines: Vec<_> = msg.lines().filter(|l| l.starts_with("Page")).collect();
        assert_eq!(page_lines.len(), 3);
        assert!(page_lines[0].starts_with("Page1:"));
        assert!(page_lines[1].starts_with("Page2:"));
        assert!(page_lines[2].starts_with("Page3:"));
        assert_eq!(
            page_lines[1],
            "Page2: Pass \"alice\" to the \"Email\" text box (ID: \"email\"). Then, pass \"pw\" to the \"Password\" text box (ID: \"pw\"). Next, pass \"x\" to the \"Code\" text box (XPath: \"//code\"). Finally, click the \"Submit\" button (ID: \"submit\")."
        );
    }

    #[test]
    fn oneshot_rejects_empty_steps() {
        assert_eq!(build_oneshot_generation_prompt(&config(), &[]), Err(PromptError::EmptySteps));
    }

    #[test]
    fn initiation_contents() {
        let t = build_initiation_prompt("NetEase Mail", "login").unwrap();
        let msg = only_message(&t);
        assert_eq!(t.messages()[0].role, crate::model::Role::User);
        for needle in [
            "You are a software testing engineer.",
            "\"login\"",
            "\"NetEase Mail\"",
            "summarize all the actions you have done and say \"DONE\"",
            "try drag operations",
            "\"element-xpath\"",
            "\"operation-type\"",
            "\"operation-text\"",
            "Repeat what you are going to do and get ready",
        ] {
            assert!(msg.contains(needle), "missing {needle}");
        }
        assert_eq!(build_initiation_prompt("", "x"), Err(PromptError::EmptyArg("app_name")));
        assert_eq!(build_initiation_prompt("NetEase Mail", "login").unwrap(), t);
    }

    fn elements(n: usize) -> Vec<UiElement> {
        (0..n)
            .map(|i| {
                UiElement::new(format!("/hierarchy/E[{}]", i + 1), "android.widget.Button")
                    .clickable()
                    .with_id(format!("id{i}"))
                    .with_text("Log \"in\"\nnow")
            })
            .collect()
    }

    #[test]
    fn exploration_new_page() {
        let msg = build_exploration_prompt(Some(&Action::click("//x")), PageChange::NewPage, &elements(2));
        let lines: Vec<_> = msg.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "Previous click operation finished.");
        assert_eq!(lines[1], "Now we are in a new page.");
        assert_eq!(
            lines[2],
            "<android.widget.Button xpath=\"/hierarchy/E[1]\" resource-id=\"id0\" text=\"Log 'in' now\" clickable=\"true\" editable=\"false\"/>"
        );
    }

    #[test]
    fn exploration_unchanged_and_first() {
        let msg = build_exploration_prompt(Some(&Action::input("//x", "a")), PageChange::Unchanged, &elements(1));
        assert!(msg.starts_with("Previous input operation finished.\nThe page remains unchanged."));
        assert_eq!(build_exploration_prompt(None, PageChange::First, &[]), "");
    }

    #[test]
    fn long_values_are_clipped() {
        let e = UiElement::new("//x", "T").with_text("y".repeat(500));
        let line = render_element_line(&e);
        assert!(line.len() < 200);
    }

    #[test]
    fn summarization_is_template_sentence() {
        assert_eq!(build_summarization_prompt(), "Generate Appium test script for the testing process.");
        let t = ChatTranscript::new().with(ChatMessage::user("a")).with(ChatMessage::assistant("b"));
        let extended = t.clone().with(ChatMessage::user(build_summarization_prompt()));
        assert_eq!(&extended.messages()[..2], t.messages());
    }

    fn platform_spec() -> MigrationSpec {
        MigrationSpec {
            kind: MigrationKind::CrossPlatform,
            old_script_text: "driver.find_element(By.ID, \"login\").click()".into(),
            differential_steps: vec!["Tap the new consent dialog".into(), "Click \"Login\"".into()],
            element_identifiers: vec![
                ElementIdentifier { step_index: 1, strategy: LocatorStrategy::Id, value: "agree".into() },
                ElementIdentifier { step_index: 2, strategy: LocatorStrategy::Xpath, value: "//login".into() },
            ],
            platform_info: Some(PlatformInfo {
                new_device_name: "Pixel 7".into(),
                new_os_version_or_brand: "Android 14".into(),
            }),
            app_info: None,
        }
    }

    fn app_spec(package: &str) -> MigrationSpec {
        MigrationSpec {
            kind: MigrationKind::CrossApp,
            app_info: Some(AppInfo { package_name: package.into(), main_activity: ".Main".into() }),
            platform_info: None,
            ..platform_spec()
        }
    }

    #[test]
    fn crossplatform_layout() {
        let t = build_crossplatform_prompt(&platform_spec()).unwrap();
        let msg = only_message(&t);
        assert!(msg.contains("New device name: Pixel 7"));
        assert!(msg.contains("New Android version: Android 14"));
        assert!(msg.contains("Step-1: Tap the new consent dialog (ID: \"agree\")"));
        assert!(msg.contains("Step-2: Click \"Login\" (XPath: \"//login\")"));
        assert!(msg.contains("driver.find_element(By.ID, \"login\").click()"));
        assert!(msg.ends_with("Please return the new test script."));
    }

    #[test]
    fn crossplatform_errors() {
        assert_eq!(
            build_crossplatform_prompt(&app_spec("com.a.b")),
            Err(PromptError::WrongKind { expected: "cross_platform" })
        );
        let mut spec = platform_spec();
        spec.old_script_text.clear();
        assert!(matches!(build_crossplatform_prompt(&spec), Err(PromptError::InvalidSpec(m)) if m == ["old_script_text"]));
    }

    #[test]
    fn crossapp_layout_and_determinism() {
        let a = build_crossapp_prompt(&app_spec("com.tencent.qqmail")).unwrap();
        let b = build_crossapp_prompt(&app_spec("com.microsoft.outlook")).unwrap();
        let (a, b) = (only_message(&a), only_message(&b));
        assert!(a.contains("Package name: com.tencent.qqmail"));
        assert!(a.contains("Main activity name: .Main"));
        let diff: Vec<_> = a.lines().zip(b.lines()).filter(|(x, y)| x != y).collect();
        assert_eq!(diff, vec![("Package name: com.tencent.qqmail", "Package name: com.microsoft.outlook")]);
        let mut bad = app_spec("com.a.b");
        bad.app_info.as_mut().unwrap().main_activity.clear();
        assert!(matches!(build_crossapp_prompt(&bad), Err(PromptError::InvalidSpec(_))));
    }
}
