use serde_json::Value;

use super::Decision;
use crate::model::Action;

const KEY_XPATH: &str = "element-xpath";
const KEY_TYPE: &str = "operation-type";
const KEY_TEXT: &str = "operation-text";

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// True when `DONE` appears as a standalone, case-sensitive word.
fn contains_done(raw: &str) -> bool {
    raw.match_indices("DONE").any(|(start, token)| {
        let before = raw[..start].chars().next_back();
        let after = raw[start + token.len()..].chars().next();
        !before.is_some_and(is_word_char) && !after.is_some_and(is_word_char)
    })
}

/// End index (inclusive) of the balanced object opening at `start`.
fn balanced_object_end(s: &str, start: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (offset, ch) in s[start..].char_indices() {
        if in_string {
            match ch {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match ch {
            '"' => in_string = true,
            '{' => depth += 1,
            '}' => {
                depth = depth.checked_sub(1)?;
                if depth == 0 {
                    return Some(start + offset);
                }
            }
            _ => {}
        }
    }
    None
}

/// First balanced JSON object that carries at least one action key.
fn find_action_object(raw: &str) -> Option<serde_json::Map<String, Value>> {
    raw.char_indices()
        .filter(|&(_, c)| c == '{')
        .filter_map(|(start, _)| {
            let end = balanced_object_end(raw, start)?;
            match serde_json::from_str::<Value>(&raw[start..=end]) {
                Ok(Value::Object(map)) => Some(map),
                _ => None,
            }
        })
        .find(|map| [KEY_XPATH, KEY_TYPE, KEY_TEXT].iter().any(|k| map.contains_key(*k)))
}

fn field(map: &serde_json::Map<String, Value>, key: &str) -> String {
    match map.get(key) {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(other) => other.to_string(),
    }
}

/// Interprets an exploration reply. `DONE` wins over any JSON in the same
/// reply; otherwise the first JSON object carrying the action keys is
/// validated. Absent `operation-text` / `element-xpath` keys read as empty.
pub fn parse_exploration_reply(raw: &str) -> Decision {
    if contains_done(raw) {
        return Decision::Done {
            summary: raw.trim().to_string(),
        };
    }
    let unparseable = |reason: String| Decision::Unparseable {
        reason,
        raw: raw.to_string(),
    };
    let Some(map) = find_action_object(raw) else {
        return unparseable(if raw.trim().is_empty() {
            "empty reply".into()
        } else {
            format!("no JSON object with keys {KEY_XPATH}, {KEY_TYPE}, {KEY_TEXT}")
        });
    };
    if !map.contains_key(KEY_TYPE) {
        return unparseable(format!("bad-operation-type: missing key {KEY_TYPE}"));
    }
    match Action::from_parts(&field(&map, KEY_XPATH), &field(&map, KEY_TYPE), &field(&map, KEY_TEXT)) {
        Ok(action) => Decision::Act { action },
        Err(e) => unparseable(e.to_string()),
    }
}

/// Serializes an action the way the model is asked to.
pub fn action_reply_json(action: &Action) -> String {
    serde_json::json!({
        KEY_XPATH: action.element_xpath,
        KEY_TYPE: action.operation_type.as_str(),
        KEY_TEXT: action.operation_text,
    })
    .to_string()
}

const PY_BLOCK_KEYWORDS: [&str; 11] = [
    "def", "class", "try", "except", "finally", "if", "elif", "else", "for", "while", "with",
];

fn has_code_marker(line: &str) -> bool {
    line.contains('(') || line.contains('=') || line.contains("import")
}

fn looks_like_code(line: &str) -> bool {
    let trimmed = line.trim();
    if trimmed.is_empty() {
        return true;
    }
    if line.starts_with([' ', '\t']) || has_code_marker(line) {
        return true;
    }
    if trimmed.starts_with('#') || trimmed.starts_with('@') {
        return true;
    }
    let first_word = trimmed
        .split(|c: char| !c.is_alphanumeric() && c != '_')
        .next()
        .unwrap_or("");
    trimmed.ends_with(':') && PY_BLOCK_KEYWORDS.contains(&first_word)
}

fn fenced_block(raw: &str) -> Option<String> {
    let mut lines = raw.lines();
    lines.by_ref().find(|l| l.trim_start().starts_with("```"))?;
    let body: Vec<&str> = lines
        .take_while(|l| !l.trim_start().starts_with("```"))
        .collect();
    Some(body.join("\n"))
}

/// Harvests a script from a reply: the first fenced block, else the longest
/// run of code-looking lines (at least three non-blank lines, a majority of
/// them containing `(`, `=` or `import`).
pub fn extract_code_block(raw: &str) -> Option<String> {
    if let Some(block) = fenced_block(raw) {
        return Some(block);
    }
    let lines: Vec<&str> = raw.lines().collect();
    let mut best: Option<(usize, &[&str])> = None;
    let mut start = 0;
    while start < lines.len() {
        if !looks_like_code(lines[start]) {
            start += 1;
            continue;
        }
        let mut end = start;
        while end < lines.len() && looks_like_code(lines[end]) {
            end += 1;
        }
        let mut run = &lines[start..end];
        while run.first().is_some_and(|l| l.trim().is_empty()) {
            run = &run[1..];
        }
        while run.last().is_some_and(|l| l.trim().is_empty()) {
            run = &run[..run.len() - 1];
        }
        let non_blank: Vec<&&str> = run.iter().filter(|l| !l.trim().is_empty()).collect();
        let marked = non_blank.iter().filter(|l| has_code_marker(l)).count();
        if non_blank.len() >= 3 && marked * 2 > non_blank.len() && best.is_none_or(|(n, _)| non_blank.len() > n) {
            best = Some((non_blank.len(), run));
        }
        start = end;
    }
    best.map(|(_, run)| run.join("\n"))
}
