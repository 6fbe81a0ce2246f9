//! Regenerates the recorded model replies under `data/fixtures` and the
//! migration specs under `data/migration`.
//!
//! The replies were authored by hand against the bundled app models. They
//! are recorded through the gateway's record mode with a stub endpoint, so
//! each fixture carries the digest of the prompt the engine really sends.
//!
//!     cargo run -p guitest-core --example record_fixtures

use std::path::Path;

use guitest_core::bundled::{self, data_path, LOGIN_APP, LOGIN_FUNCTION};
use guitest_core::device::Simulator;
use guitest_core::explorer::{run_exploration, ExplorerConfig};
use guitest_core::gateway::{completion_stub, ChatGateway, Gateway, GatewayConfig, GatewayMode, ScriptedReplies};
use guitest_core::model::{
    Action, ElementIdentifier, LocatorStrategy, MigrationKind, MigrationSpec, PlatformInfo, AppInfo, Terminal,
};
use guitest_core::prompt::{action_reply_json, build_oneshot_generation_prompt, build_crossapp_prompt, build_crossplatform_prompt};
use guitest_core::synth::{render, synthesize_from_trace, synthesize_via_llm, DEFAULT_WAIT_MS};

const KEY_VAR: &str = "GUITEST_FIXTURE_RECORDING_KEY";
const ROOT: &str = "/hierarchy/android.widget.FrameLayout[1]";

fn xp(tail: &str) -> String {
    format!("{ROOT}/android.widget.{tail}")
}

fn act(prose: &str, action: Action) -> String {
    format!("{prose}\n{}", action_reply_json(&action))
}

fn recorder(path: &Path, replies: &[String]) -> Gateway {
    let config = GatewayConfig {
        mode: GatewayMode::Record,
        fixture_path: Some(path.to_path_buf()),
        api_key_env_var: KEY_VAR.into(),
        ..GatewayConfig::default()
    };
    Gateway::with_transport(config, Box::new(completion_stub(replies.to_vec()))).expect("record gateway")
}

fn fenced(script: &str) -> String {
    format!("Here is the Appium test script for the testing process:\n\n```python\n{script}```\n\nThe script waits for each element before using it and clicks every input box before typing.")
}

/// Runs the exploration twice: scripted to learn the synthesized script,
/// then recorded with that script as the summarization reply.
fn record_exploration(name: &str, dialogue: Vec<String>) -> String {
    let cfg = ExplorerConfig::default();
    let config = bundled::config(bundled::MAIL_CONFIG);

    let mut sim = Simulator::new(bundled::model(bundled::LOGIN_MODEL));
    let mut dry = Gateway::scripted(ScriptedReplies::new(dialogue.clone()));
    let run = run_exploration(LOGIN_APP, LOGIN_FUNCTION, &mut sim, &mut dry, &cfg).expect("dry run");
    assert_eq!(run.trace.terminal, Terminal::Done, "{name}: dry run did not finish");
    let script = render(&synthesize_from_trace(&run.trace, &config, DEFAULT_WAIT_MS).expect("synthesize"));

    let mut replies = dialogue;
    replies.push(fenced(&script));
    let path = data_path(&format!("fixtures/{name}.jsonl"));
    let mut gateway = recorder(&path, &replies);
    let mut sim = Simulator::new(bundled::model(bundled::LOGIN_MODEL));
    let run = run_exploration(LOGIN_APP, LOGIN_FUNCTION, &mut sim, &mut gateway, &cfg).expect("recorded run");
    assert_eq!(run.trace.terminal, Terminal::Done);
    let text = synthesize_via_llm(&run.transcript, &mut gateway, Some(cfg.token_budget))
        .expect("summarization")
        .expect("code block");
    assert_eq!(text.trim_end(), script.trim_end());
    println!("{}: {} calls", path.display(), gateway.calls());
    script
}

fn opening() -> String {
    "I am ready. I will test the \"Login\" function of \"Mail\". Each turn I will read the XML structure of the current page, check whether the function has been tested, and otherwise describe one operation in JSON with the keys \"element-xpath\", \"operation-type\" and \"operation-text\".".into()
}

fn sign_in() -> String {
    act(
        "This is the welcome page. The \"Sign in\" button should lead to the login form.",
        Action::click(xp("Button[1]")),
    )
}

fn username() -> String {
    act(
        "We are on the login page. I will enter the email address first.",
        Action::input(xp("EditText[1]"), "alice@example.com"),
    )
}

fn password() -> String {
    act("Next, I will enter the password.", Action::input(xp("EditText[2]"), "secret123"))
}

fn agree() -> String {
    act(
        "The \"I agree to the Terms of Service\" box is unchecked. I will check it.",
        Action::click(xp("CheckBox[1]")),
    )
}

fn login() -> String {
    act("Now I will click the \"Login\" button.", Action::click(xp("Button[1]")))
}

fn done() -> String {
    "The inbox is displayed, so the login succeeded. Summary of my actions: I clicked \"Sign in\", entered the email address and the password, checked the Terms of Service box and clicked \"Login\". DONE".into()
}

fn with_platform_steps(old: &str) -> String {
    let new_caps = old.replace(
        "    \"appium:deviceName\": \"emulator-5554\",\n",
        "    \"appium:deviceName\": \"Pixel 7\",\n    \"appium:platformVersion\": \"14\",\n",
    );
    new_caps.replacen(
        "try:\n",
        "try:\n    # Close the privacy dialog shown at first launch\n    el = wait.until(EC.presence_of_element_located((By.ID, \"com.example.mail:id/privacy_agree\")))\n    el.click()\n\n    # Allow notifications\n    el = wait.until(EC.presence_of_element_located((By.ID, \"com.android.permissioncontroller:id/permission_allow_button\")))\n    el.click()\n\n",
        1,
    )
}

fn with_app_changes(old: &str) -> String {
    let renamed = old
        .replace("com.example.mail", "com.example.qmail")
        .replace(".ui.LaunchActivity", ".LoginActivity");
    let mut out = Vec::new();
    let mut skipping = false;
    for line in renamed.lines() {
        if line.trim() == "# Step 1: click" {
            skipping = true;
            out.push("    # Switch to password login".to_string());
            out.push("    el = wait.until(EC.presence_of_element_located((By.ID, \"com.example.qmail:id/tab_password_login\")))".to_string());
            out.push("    el.click()".to_string());
            continue;
        }
        if skipping {
            if line.trim().starts_with("# Step 2") {
                skipping = false;
                out.push(String::new());
            } else {
                continue;
            }
        }
        out.push(line.to_string());
    }
    out.join("\n") + "\n"
}

fn write_json(relative: &str, value: &impl serde::Serialize) {
    let path = data_path(relative);
    std::fs::write(&path, serde_json::to_string_pretty(value).expect("serialize") + "\n").expect("write");
    println!("{}", path.display());
}

fn record_single(name: &str, transcript: &guitest_core::model::ChatTranscript, reply: String) {
    let path = data_path(&format!("fixtures/{name}.jsonl"));
    let mut gateway = recorder(&path, &[reply]);
    gateway.complete(transcript).expect("record");
    println!("{}: 1 call", path.display());
}

fn main() {
    // The recording key only satisfies the gateway's auth check; the stub
    // endpoint ignores it.
    std::env::set_var(KEY_VAR, "stub");

    let reference = record_exploration(
        "login_reference",
        vec![opening(), sign_in(), username(), password(), agree(), login(), done()],
    );
    let blocked = act(
        "Both fields are filled in. I will click the \"Login\" button.",
        Action::click(xp("Button[1]")),
    );
    let recover = act(
        "The page remains unchanged, so the \"Login\" button did not respond. The \"I agree to the Terms of Service\" box is still unchecked; I will check it and try again.",
        Action::click(xp("CheckBox[1]")),
    );
    record_exploration(
        "guard_recovery",
        vec![opening(), sign_in(), username(), password(), blocked, recover, login(), done()],
    );

    let config = bundled::config(bundled::MAIL_CONFIG);
    let prompt = build_oneshot_generation_prompt(&config, &bundled::login_steps()).expect("one-shot prompt");
    record_single("generate_login", &prompt, fenced(&reference));

    let crossplatform = MigrationSpec {
        kind: MigrationKind::CrossPlatform,
        old_script_text: reference.clone(),
        differential_steps: vec![
            "Click the \"Agree and continue\" button on the privacy dialog shown at first launch".into(),
            "Click the \"Allow\" button on the notification permission dialog".into(),
        ],
        element_identifiers: vec![
            ElementIdentifier {
                step_index: 1,
                strategy: LocatorStrategy::Id,
                value: "com.example.mail:id/privacy_agree".into(),
            },
            ElementIdentifier {
                step_index: 2,
                strategy: LocatorStrategy::Id,
                value: "com.android.permissioncontroller:id/permission_allow_button".into(),
            },
        ],
        platform_info: Some(PlatformInfo {
            new_device_name: "Pixel 7".into(),
            new_os_version_or_brand: "14".into(),
        }),
        app_info: None,
    };
    write_json("migration/crossplatform_login.json", &crossplatform);
    record_single(
        "migrate_crossplatform",
        &build_crossplatform_prompt(&crossplatform).expect("prompt"),
        format!("```python\n{}```", with_platform_steps(&reference)),
    );

    let crossapp = MigrationSpec {
        kind: MigrationKind::CrossApp,
        old_script_text: reference.clone(),
        differential_steps: vec![
            "The app opens on the login page; there is no welcome page with a \"Sign in\" button".into(),
            "Click the \"Password login\" tab before entering the email address".into(),
        ],
        element_identifiers: vec![ElementIdentifier {
            step_index: 2,
            strategy: LocatorStrategy::Id,
            value: "com.example.qmail:id/tab_password_login".into(),
        }],
        platform_info: None,
        app_info: Some(AppInfo {
            package_name: "com.example.qmail".into(),
            main_activity: ".LoginActivity".into(),
        }),
    };
    write_json("migration/crossapp_login.json", &crossapp);
    record_single(
        "migrate_crossapp",
        &build_crossapp_prompt(&crossapp).expect("prompt"),
        format!("```python\n{}```", with_app_changes(&reference)),
    );
}
