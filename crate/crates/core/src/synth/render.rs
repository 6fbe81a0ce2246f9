use std::fmt::Write as _;

use crate::model::{DragDirection, Locator, LocatorStrategy, StepKind, TestScript, TestStep};

/// Comment emitted before every wait step.
pub const NAVIGATION_WAIT_COMMENT: &str = "# Wait for page load after navigation";

const INDENT: &str = "    ";

fn py_str(s: &str) -> String {
    // A JSON string literal is also a valid Python string literal.
    serde_json::to_string(s).expect("strings serialize")
}

fn py_bool(b: bool) -> &'static str {
    if b {
        "True"
    } else {
        "False"
    }
}

fn seconds(ms: u64) -> String {
    let whole = ms / 1000;
    let frac = ms % 1000;
    if frac == 0 {
        format!("{whole}.0")
    } else {
        format!("{whole}.{frac:03}").trim_end_matches('0').to_string()
    }
}

fn by(locator: &Locator) -> &'static str {
    match locator.strategy {
        LocatorStrategy::Id => "By.ID",
        LocatorStrategy::Xpath => "By.XPATH",
    }
}

fn locate(locator: &Locator) -> String {
    format!(
        "el = wait.until(EC.presence_of_element_located(({}, {})))",
        by(locator),
        py_str(&locator.value)
    )
}

/// Start and end points of a swipe over the middle half of a box given as
/// Python expressions for its origin and size.
fn swipe(x: &str, y: &str, w: &str, h: &str, direction: DragDirection) -> String {
    let cx = format!("{x} + {w} // 2");
    let cy = format!("{y} + {h} // 2");
    let (near_x, far_x) = (format!("{x} + {w} // 4"), format!("{x} + {w} * 3 // 4"));
    let (near_y, far_y) = (format!("{y} + {h} // 4"), format!("{y} + {h} * 3 // 4"));
    let (sx, sy, ex, ey) = match direction {
        DragDirection::Up => (&cx, &far_y, &cx, &near_y),
        DragDirection::Down => (&cx, &near_y, &cx, &far_y),
        DragDirection::Left => (&far_x, &cy, &near_x, &cy),
        DragDirection::Right => (&near_x, &cy, &far_x, &cy),
    };
    format!("driver.swipe({sx}, {sy}, {ex}, {ey}, 500)")
}

fn step_lines(number: usize, step: &TestStep) -> Vec<String> {
    let mut lines = Vec::new();
    if step.kind != StepKind::Wait && step.wait_before_ms > 0 {
        lines.push(format!("time.sleep({})", seconds(step.wait_before_ms)));
    }
    match step.kind {
        StepKind::Wait => {
            lines.push(NAVIGATION_WAIT_COMMENT.to_string());
            lines.push(format!("time.sleep({})", seconds(step.wait_before_ms)));
        }
        StepKind::Click => {
            let locator = step.locator.as_ref().expect("validated click");
            lines.push(format!("# Step {number}: click"));
            lines.push(locate(locator));
            lines.push("el.click()".to_string());
        }
        StepKind::Input => {
            let locator = step.locator.as_ref().expect("validated input");
            let text = step.text.as_deref().unwrap_or_default();
            lines.push(format!("# Step {number}: input"));
            lines.push(locate(locator));
            lines.push("el.click()".to_string());
            lines.push(format!("el.send_keys({})", py_str(text)));
        }
        StepKind::Drag => {
            let direction: DragDirection = step
                .text
                .as_deref()
                .and_then(|t| t.parse().ok())
                .expect("validated drag");
            lines.push(format!("# Step {number}: drag {direction}", direction = direction.as_str()));
            match &step.locator {
                Some(locator) => {
                    lines.push(locate(locator));
                    lines.push("r = el.rect".to_string());
                    lines.push(swipe(
                        "r[\"x\"]",
                        "r[\"y\"]",
                        "r[\"width\"]",
                        "r[\"height\"]",
                        direction,
                    ));
                }
                None => {
                    lines.push("size = driver.get_window_size()".to_string());
                    lines.push(swipe("0", "0", "size[\"width\"]", "size[\"height\"]", direction));
                }
            }
        }
    }
    lines
}

/// Renders `script` as a Python Appium test. Every element access uses an
/// explicit wait, and every input clicks the field before typing.
pub fn render(script: &TestScript) -> String {
    let mut out = String::new();
    out.push_str("import time\n\n");
    out.push_str("from appium import webdriver\n");
    out.push_str("from appium.options.common import AppiumOptions\n");
    out.push_str("from selenium.webdriver.common.by import By\n");
    out.push_str("from selenium.webdriver.support import expected_conditions as EC\n");
    out.push_str("from selenium.webdriver.support.ui import WebDriverWait\n\n");
    let _ = writeln!(out, "# Scenario: {}", script.scenario_name.replace('\n', " "));
    out.push_str("capabilities = {\n");
    let c = &script.config;
    let _ = writeln!(out, "{INDENT}\"appium:deviceName\": {},", py_str(&c.device_name));
    let _ = writeln!(out, "{INDENT}\"appium:appPackage\": {},", py_str(&c.app_package));
    let _ = writeln!(out, "{INDENT}\"appium:appActivity\": {},", py_str(&c.app_activity));
    let _ = writeln!(out, "{INDENT}\"appium:noReset\": {},", py_bool(c.no_reset));
    let _ = writeln!(out, "{INDENT}\"appium:fullReset\": {},", py_bool(c.full_reset));
    out.push_str("}\n\n");
    out.push_str("driver = webdriver.Remote(\"http://127.0.0.1:4723\", options=AppiumOptions().load_capabilities(capabilities))\n");
    out.push_str("wait = WebDriverWait(driver, 10)\n\n");
    out.push_str("try:\n");
    let mut number = 0;
    for (index, step) in script.steps.iter().enumerate() {
        if step.kind != StepKind::Wait {
            number += 1;
        }
        if index > 0 {
            out.push('\n');
        }
        for line in step_lines(number, step) {
            let _ = writeln!(out, "{INDENT}{line}");
        }
    }
    out.push_str("finally:\n");
    let _ = writeln!(out, "{INDENT}driver.quit()");
    out
}
