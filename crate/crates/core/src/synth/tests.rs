use proptest::prelude::*;

use super::*;
use crate::bundled::{self, data_path, LOGIN_APP, LOGIN_FUNCTION};
use crate::device::Simulator;
use crate::explorer::{run_exploration, ExplorerConfig};
use crate::gateway::{Gateway, GatewayConfig, GatewayMode, ScriptedReplies};
use crate::model::{DragDirection, UiSnapshot};
use crate::prompt::Decision;

fn replay_gateway(fixture: &str) -> Gateway {
    let config = GatewayConfig {
        mode: GatewayMode::Replay,
        fixture_path: Some(data_path(fixture)),
        ..GatewayConfig::default()
    };
    Gateway::from_config(config).unwrap()
}

fn reference_run() -> (crate::explorer::Exploration, Gateway) {
    let mut sim = Simulator::new(bundled::model(bundled::LOGIN_MODEL));
    let mut gw = replay_gateway("fixtures/login_reference.jsonl");
    let run = run_exploration(LOGIN_APP, LOGIN_FUNCTION, &mut sim, &mut gw, &ExplorerConfig::default()).unwrap();
    (run, gw)
}

fn mail() -> DeviceConfig {
    bundled::config(bundled::MAIL_CONFIG)
}

#[test]
fn login_trace_gives_five_actions_and_two_waits() {
    let (run, gw) = reference_run();
    assert!(gw.warnings().is_empty(), "{:?}", gw.warnings());
    let script = synthesize_from_trace(&run.trace, &mail(), DEFAULT_WAIT_MS).unwrap();
    let kinds: Vec<StepKind> = script.steps.iter().map(|s| s.kind).collect();
    use StepKind::*;
    assert_eq!(kinds, [Click, Wait, Input, Input, Click, Click, Wait]);
    assert!(script
        .steps
        .iter()
        .filter_map(|s| s.locator.as_ref())
        .all(|l| l.strategy == LocatorStrategy::Id));
    assert!(script.steps.iter().filter(|s| s.kind == Wait).all(|s| s.wait_before_ms == 2000));
}

#[test]
fn synthesized_script_replays_to_the_trace_terminal() {
    let (run, _) = reference_run();
    let script = synthesize_from_trace(&run.trace, &mail(), DEFAULT_WAIT_MS).unwrap();
    let mut sim = Simulator::new(bundled::model(bundled::LOGIN_MODEL));
    let report = replay_script(&script, &mut sim).unwrap();
    assert!(report.failures.is_empty(), "{:?}", report.failures);
    assert_eq!(report.reached_fingerprint, run.trace.final_fingerprint);
    assert_eq!(sim.clock_ms(), 4000);
    assert!(lint(&render(&script)).is_empty());
}

#[test]
fn unfinished_traces_are_rejected() {
    let (mut run, _) = reference_run();
    run.trace.terminal = Terminal::RoundCap;
    assert!(matches!(
        synthesize_from_trace(&run.trace, &mail(), DEFAULT_WAIT_MS),
        Err(SynthError::TraceNotDone("round_cap"))
    ));
    let empty = ExplorationTrace {
        scenario_name: "x".into(),
        rounds: vec![crate::model::TraceRound {
            snapshot: UiSnapshot::new(vec![]).unwrap(),
            decision: Decision::Done { summary: "DONE".into() },
            outcome: None,
            initiator: Initiator::Llm,
        }],
        terminal: Terminal::Done,
        final_fingerprint: crate::model::EMPTY_PAGE_FINGERPRINT.into(),
    };
    assert!(matches!(synthesize_from_trace(&empty, &mail(), DEFAULT_WAIT_MS), Err(SynthError::EmptyTrace)));
}

#[test]
fn wrong_xpath_fails_at_its_step() {
    let root = "/hierarchy/android.widget.FrameLayout[1]/android.widget.";
    let script = TestScript {
        config: mail(),
        steps: vec![
            TestStep::click(Locator::xpath(format!("{root}Button[1]"))),
            TestStep::input(Locator::xpath(format!("{root}EditText[1]")), "alice"),
            TestStep::click(Locator::xpath(format!("{root}Button[9]"))),
            TestStep::click(Locator::xpath(format!("{root}CheckBox[1]"))),
        ],
        scenario_name: "broken".into(),
    };
    let mut sim = Simulator::new(bundled::model(bundled::LOGIN_MODEL));
    let report = replay_script(&script, &mut sim).unwrap();
    assert_eq!(report.failures.len(), 1);
    assert_eq!(report.failures[0].step, 3);
    assert_eq!(report.failures[0].status, OutcomeStatus::ElementNotFound);
    let login = &bundled::model(bundled::LOGIN_MODEL).pages["login"];
    assert_eq!(report.reached_fingerprint, crate::model::fingerprint(&login.elements));
}

#[test]
fn unknown_id_is_a_replay_failure() {
    let script = TestScript {
        config: mail(),
        steps: vec![TestStep::click(Locator::id("com.example.mail:id/nope"))],
        scenario_name: "x".into(),
    };
    let mut sim = Simulator::new(bundled::model(bundled::LOGIN_MODEL));
    let report = replay_script(&script, &mut sim).unwrap();
    assert_eq!(report.failures[0].step, 1);
}

#[test]
fn llm_summary_extracted_or_none() {
    let (run, mut gw) = reference_run();
    let text = synthesize_via_llm(&run.transcript, &mut gw, Some(3500)).unwrap().unwrap();
    assert!(lint(&text).is_empty());

    let mut prose = Gateway::scripted(ScriptedReplies::new(["I clicked a few buttons and it worked."]));
    assert_eq!(synthesize_via_llm(&run.transcript, &mut prose, None).unwrap(), None);
}

fn crossplatform() -> MigrationSpec {
    bundled::migration_spec(bundled::CROSSPLATFORM_SPEC)
}

#[test]
fn migration_spec_validation() {
    assert!(validate_migration_spec(&crossplatform()).is_empty());
    assert!(validate_migration_spec(&bundled::migration_spec(bundled::CROSSAPP_SPEC)).is_empty());

    let mut spec = crossplatform();
    spec.element_identifiers.retain(|id| id.step_index != 2);
    assert_eq!(validate_migration_spec(&spec), ["element_identifiers[step 2]"]);

    let mut spec = bundled::migration_spec(bundled::CROSSAPP_SPEC);
    spec.app_info.as_mut().unwrap().main_activity.clear();
    assert_eq!(validate_migration_spec(&spec), ["main_activity"]);

    let empty = MigrationSpec {
        kind: MigrationKind::CrossPlatform,
        old_script_text: String::new(),
        differential_steps: vec![],
        element_identifiers: vec![],
        platform_info: None,
        app_info: None,
    };
    assert_eq!(
        validate_migration_spec(&empty),
        ["new_device_name", "new_os_version_or_brand", "differential_steps", "old_script_text"]
    );
}

#[test]
fn migrate_replayed_fixture() {
    let spec = crossplatform();
    let mut gw = replay_gateway("fixtures/migrate_crossplatform.jsonl");
    let report = migrate(&spec, &mut gw).unwrap();
    assert!(gw.warnings().is_empty());
    assert_eq!(gw.calls(), 1);
    assert!(report.changed_line_count >= spec.differential_steps.len());
    assert!(!report.suspicious_unchanged);
    assert!(report.findings.is_empty(), "{:?}", report.findings);

    let spec = bundled::migration_spec(bundled::CROSSAPP_SPEC);
    let mut gw = replay_gateway("fixtures/migrate_crossapp.jsonl");
    let report = migrate(&spec, &mut gw).unwrap();
    assert!(report.script_text.contains("com.example.qmail"));
    assert!(report.changed_line_count >= 2);
}

#[test]
fn verbatim_reply_is_flagged() {
    let spec = crossplatform();
    let reply = format!("```python\n{}```", spec.old_script_text);
    let mut gw = Gateway::scripted(ScriptedReplies::new([reply]));
    let report = migrate(&spec, &mut gw).unwrap();
    assert_eq!(report.changed_line_count, 0);
    assert!(report.suspicious_unchanged);
}

#[test]
fn invalid_spec_never_reaches_gateway() {
    let mut spec = crossplatform();
    spec.old_script_text.clear();
    let mut gw = Gateway::scripted(ScriptedReplies::new(["unused"]));
    match migrate(&spec, &mut gw) {
        Err(SynthError::InvalidSpec(missing)) => assert_eq!(missing, ["old_script_text"]),
        other => panic!("{other:?}"),
    }
    assert_eq!(gw.calls(), 0);
}

#[test]
fn extraction_failure() {
    let mut gw = Gateway::scripted(ScriptedReplies::new(["Sorry, I cannot help with that."]));
    assert!(matches!(migrate(&crossplatform(), &mut gw), Err(SynthError::ExtractionFailed)));
}

#[test]
fn changed_line_count_ignores_trailing_whitespace() {
    assert_eq!(changed_line_count("a\nb\n", "a  \nb"), 0);
    assert_eq!(changed_line_count("a\nb\n", "a\nc\n"), 2);
    assert_eq!(changed_line_count("a\n", "a\nb\nc\n"), 2);
}

#[test]
fn guard_recovery_fixture_has_one_no_effect() {
    let mut sim = Simulator::new(bundled::model(bundled::LOGIN_MODEL));
    let mut gw = replay_gateway("fixtures/guard_recovery.jsonl");
    let run = run_exploration(LOGIN_APP, LOGIN_FUNCTION, &mut sim, &mut gw, &ExplorerConfig::default()).unwrap();
    assert!(gw.warnings().is_empty(), "{:?}", gw.warnings());
    assert_eq!(run.trace.terminal, Terminal::Done);
    let no_effect = run
        .trace
        .rounds
        .iter()
        .filter(|r| r.outcome.as_ref().is_some_and(|o| o.status == OutcomeStatus::NoEffect))
        .count();
    assert_eq!(no_effect, 1);
    let script = synthesize_from_trace(&run.trace, &mail(), DEFAULT_WAIT_MS).unwrap();
    assert_eq!(script.steps.iter().filter(|s| s.kind != StepKind::Wait).count(), 5);
}

fn locator_strategy() -> impl Strategy<Value = Locator> {
    prop_oneof![
        "[a-z]{1,8}\\.[a-z]{1,8}:id/[a-z_]{1,12}".prop_map(Locator::id),
        "(/[A-Za-z.]{1,12}\\[[1-9]\\]){1,4}".prop_map(Locator::xpath),
        "//[a-z]{1,6}\\[@text=\"[ -~]{0,10}\"\\]".prop_map(Locator::xpath),
    ]
}

fn step_strategy() -> impl Strategy<Value = TestStep> {
    let direction = prop_oneof![
        Just(DragDirection::Up),
        Just(DragDirection::Down),
        Just(DragDirection::Left),
        Just(DragDirection::Right)
    ];
    prop_oneof![
        locator_strategy().prop_map(TestStep::click),
        (locator_strategy(), "[ -~]{1,20}").prop_map(|(l, t)| TestStep::input(l, t)),
        (proptest::option::of(locator_strategy()), direction).prop_map(|(l, d)| TestStep::drag(l, d)),
        (1u64..10_000).prop_map(TestStep::wait),
        (locator_strategy(), 1u64..5000).prop_map(|(l, ms)| TestStep { wait_before_ms: ms, ..TestStep::click(l) }),
    ]
}

pub(crate) fn script_strategy() -> impl Strategy<Value = TestScript> {
    (
        proptest::collection::vec(step_strategy(), 1..12),
        "[ -~]{1,30}",
        any::<bool>(),
    )
        .prop_map(|(steps, scenario_name, full_reset)| TestScript {
            config: DeviceConfig {
                full_reset,
                ..bundled::config(bundled::MAIL_CONFIG)
            },
            steps,
            scenario_name,
        })
}

proptest! {
    #[test]
    fn rendered_scripts_lint_clean(script in script_strategy()) {
        prop_assert!(script.validate().is_ok());
        let text = render(&script);
        prop_assert_eq!(lint(&text), vec![]);
        prop_assert_eq!(render(&script), text);
    }
}
