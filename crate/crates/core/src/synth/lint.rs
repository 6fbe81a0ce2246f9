use serde::{Deserialize, Serialize};

use crate::model::CAPABILITY_KEYS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LintRule {
    DeprecatedApi,
    MixedLocatorStyle,
    MissingWait,
    InputWithoutFocus,
    NoCaps,
}

impl LintRule {
    pub fn as_str(&self) -> &'static str {
        match self {
            LintRule::DeprecatedApi => "DEPRECATED_API",
            LintRule::MixedLocatorStyle => "MIXED_LOCATOR_STYLE",
            LintRule::MissingWait => "MISSING_WAIT",
            LintRule::InputWithoutFocus => "INPUT_WITHOUT_FOCUS",
            LintRule::NoCaps => "NO_CAPS",
        }
    }
}

impl std::fmt::Display for LintRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One lint result. `line` is 1-based; 0 means the whole file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub rule: LintRule,
    pub line: usize,
    pub message: String,
}

const DEPRECATED_CALLS: [&str; 2] = ["find_element_by_", "find_elements_by_"];
const NAVIGATION_WORDS: [&str; 4] = ["navigat", "new page", "page change", "loading"];
const WAIT_CONSTRUCTS: [&str; 5] = ["wait.until", "time.sleep", "WebDriverWait", "implicitly_wait", "sleep("];
const ACCESS_CALLS: [&str; 3] = ["find_element", "presence_of_element_located", "element_to_be_clickable"];
const SEND_CALLS: [&str; 2] = [".send_keys(", ".set_value("];

/// The three element-location idioms: explicit wait, plain locate, and the
/// deprecated per-strategy methods.
fn locator_variant(line: &str) -> Option<u8> {
    if line.contains("presence_of_element_located") {
        Some(1)
    } else if line.contains("find_element(") || line.contains("find_elements(") {
        Some(2)
    } else if DEPRECATED_CALLS.iter().any(|c| line.contains(c)) {
        Some(3)
    } else {
        None
    }
}

fn code_part(line: &str) -> &str {
    // Strips a trailing comment, skipping '#' inside string literals.
    let mut in_str: Option<char> = None;
    let mut escaped = false;
    for (i, c) in line.char_indices() {
        if escaped {
            escaped = false;
            continue;
        }
        match (c, in_str) {
            ('\\', Some(_)) => escaped = true,
            ('"' | '\'', None) => in_str = Some(c),
            (q, Some(open)) if q == open => in_str = None,
            ('#', None) => return &line[..i],
            _ => {}
        }
    }
    line
}

fn is_navigation_comment(line: &str) -> bool {
    let trimmed = line.trim_start();
    trimmed.starts_with('#') && {
        let lower = trimmed.to_lowercase();
        NAVIGATION_WORDS.iter().any(|w| lower.contains(w))
    }
}

/// Checks a script text with line-based heuristics. Findings are sorted by
/// line.
pub fn lint(script_text: &str) -> Vec<Finding> {
    let lines: Vec<&str> = script_text.lines().collect();
    let code: Vec<&str> = lines.iter().map(|l| code_part(l)).collect();
    let mut findings = Vec::new();

    for (i, line) in code.iter().enumerate() {
        if let Some(call) = DEPRECATED_CALLS.iter().find(|c| line.contains(*c)) {
            findings.push(Finding {
                rule: LintRule::DeprecatedApi,
                line: i + 1,
                message: format!("{call}* is deprecated; use wait.until(EC.presence_of_element_located(...))"),
            });
        }
    }

    let mut first_variant = None;
    for (i, line) in code.iter().enumerate() {
        let Some(variant) = locator_variant(line) else { continue };
        match first_variant {
            None => first_variant = Some(variant),
            Some(first) if first != variant => {
                findings.push(Finding {
                    rule: LintRule::MixedLocatorStyle,
                    line: i + 1,
                    message: format!("locator style {variant} mixed with style {first} used earlier"),
                });
                break;
            }
            _ => {}
        }
    }

    for (i, line) in lines.iter().enumerate() {
        if !is_navigation_comment(line) {
            continue;
        }
        let Some(access) = (i + 1..lines.len()).find(|&j| ACCESS_CALLS.iter().any(|c| code[j].contains(c)))
        else {
            continue;
        };
        let window = access.saturating_sub(3)..=access;
        let waited = code[window].iter().any(|l| WAIT_CONSTRUCTS.iter().any(|w| l.contains(w)));
        if !waited {
            findings.push(Finding {
                rule: LintRule::MissingWait,
                line: access + 1,
                message: "element access after navigation without a wait".into(),
            });
        }
    }

    let mut block_start = 0;
    for (i, line) in code.iter().enumerate() {
        if line.trim().is_empty() {
            block_start = i + 1;
            continue;
        }
        let Some(at) = SEND_CALLS.iter().filter_map(|c| line.find(c)).min() else {
            continue;
        };
        let receiver = line[..at].trim();
        let receiver = receiver.rsplit_once(" = ").map_or(receiver, |(_, r)| r.trim());
        let clicked = format!("{receiver}.click()");
        let clickable_assign = format!("{receiver} = ");
        let focused = code[block_start..i].iter().any(|l| {
            l.contains(&clicked)
                || (l.trim_start().starts_with(&clickable_assign) && l.contains("element_to_be_clickable"))
        });
        if !focused {
            findings.push(Finding {
                rule: LintRule::InputWithoutFocus,
                line: i + 1,
                message: format!("text sent to {receiver} without clicking it first"),
            });
        }
    }

    for key in CAPABILITY_KEYS {
        if !script_text.contains(key) {
            findings.push(Finding {
                rule: LintRule::NoCaps,
                line: 0,
                message: format!("capability {key} is missing"),
            });
        }
    }

    findings.sort_by_key(|f| (f.line, f.rule));
    findings
}

#[cfg(test)]
mod tests {
    use super::*;

    const CAPS: &str = r#"caps = {"appium:deviceName": "d", "appium:appPackage": "a.b", "appium:appActivity": ".A", "appium:noReset": False, "appium:fullReset": True}"#;

    fn with_caps(body: &str) -> String {
        format!("{CAPS}\n{body}")
    }

    fn rules(text: &str) -> Vec<(LintRule, usize)> {
        lint(text).into_iter().map(|f| (f.rule, f.line)).collect()
    }

    #[test]
    fn deprecated_call_flagged_once() {
        let text = with_caps("el = driver.find_element_by_id(\"x\")\nel.click()");
        assert_eq!(rules(&text), vec![(LintRule::DeprecatedApi, 2)]);
    }

    #[test]
    fn mixed_variants_flagged_at_second_style() {
        let text = with_caps(
            "a = wait.until(EC.presence_of_element_located((By.ID, \"id\")))\n\
             b = driver.find_element(By.ID, \"id\")\n\
             c = driver.find_element(By.ID, \"other\")",
        );
        assert_eq!(rules(&text), vec![(LintRule::MixedLocatorStyle, 3)]);
    }

    #[test]
    fn all_three_variants() {
        let text = with_caps(
            "wait.until(EC.presence_of_element_located((By.ID, \"id\")))\n\
             driver.find_element(By.ID, \"id\")\n\
             driver.find_element_by_id(\"id\")",
        );
        assert_eq!(
            rules(&text),
            vec![(LintRule::MixedLocatorStyle, 3), (LintRule::DeprecatedApi, 4)]
        );
    }

    #[test]
    fn missing_capabilities() {
        let found = lint("driver.quit()");
        assert_eq!(found.len(), 5);
        assert!(found.iter().all(|f| f.rule == LintRule::NoCaps && f.line == 0));
    }

    #[test]
    fn navigation_needs_wait() {
        let text = with_caps(
            "# navigate to the inbox\n\
             driver.find_element(By.ID, \"a\").click()\n\
             x = 1\n\
             y = 2\n\
             z = 3\n\
             w = 4\n\
             driver.find_element(By.ID, \"b\").click()",
        );
        assert_eq!(rules(&text), vec![(LintRule::MissingWait, 3)]);

        let ok = with_caps(
            "# new page loads here\n\
             time.sleep(2)\n\
             driver.find_element(By.ID, \"a\").click()",
        );
        assert!(lint(&ok).is_empty());
    }

    #[test]
    fn input_needs_focus_in_same_block() {
        let bad = with_caps("el = wait.until(EC.presence_of_element_located((By.ID, \"u\")))\nel.send_keys(\"x\")");
        assert_eq!(rules(&bad), vec![(LintRule::InputWithoutFocus, 3)]);

        let ok = with_caps("el = wait.until(EC.presence_of_element_located((By.ID, \"u\")))\nel.click()\nel.send_keys(\"x\")");
        assert!(lint(&ok).is_empty());

        let other_block = with_caps("el.click()\n\nel.send_keys(\"x\")");
        assert_eq!(rules(&other_block), vec![(LintRule::InputWithoutFocus, 4)]);

        let clickable = with_caps(
            "field = wait.until(EC.element_to_be_clickable((By.ID, \"u\")))\nfield.send_keys(\"x\")",
        );
        assert!(lint(&clickable).is_empty());
    }

    #[test]
    fn escaped_quotes_and_hashes_in_strings() {
        let text = with_caps("el = wait.until(EC.presence_of_element_located((By.XPATH, \"//a[@text=\\\"#x\\\"]\")))\nel.click()\nel.send_keys(\"a#b\")");
        assert!(lint(&text).is_empty(), "{:?}", lint(&text));
        assert_eq!(code_part(r##"x = "a\"#b" # c"##), r##"x = "a\"#b" "##);
    }

    #[test]
    fn comments_do_not_count_as_calls() {
        let text = with_caps("# do not use find_element_by_id here\nx = 1");
        assert!(lint(&text).is_empty());
    }
}
