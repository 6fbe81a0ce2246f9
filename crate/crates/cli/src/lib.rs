//! The `guitest` command line: argument parsing, file loading and exit codes.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | lint findings or replay failures |
//! | 2 | configuration, file or schema error |
//! | 3 | gateway or device error |
//! | 4 | no script could be extracted from the model reply |
//! | 5 | exploration ended without `done` |
//! | 6 | migration spec is missing required items |

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use guitest_core::device::{load_app_model, DeviceError, Driver, Simulator, WebDriverClient};
use guitest_core::explorer::{run_exploration, ExplorerConfig, ExplorerError, PopupPolicy};
use guitest_core::gateway::{ChatGateway, Gateway, GatewayConfig, GatewayError, GatewayMode, ScriptedReplies};
use guitest_core::model::{DeviceConfig, MigrationKind, MigrationSpec, Terminal, TestScript};
use guitest_core::prompt::{build_oneshot_generation_prompt, extract_code_block, ScenarioStepSpec};
use guitest_core::synth::{
    lint, migrate, render, replay_script, synthesize_from_trace, synthesize_via_llm, validate_migration_spec,
    Finding, SynthError, DEFAULT_WAIT_MS,
};
use guitest_core::transport::ReqwestTransport;

pub mod exit {
    pub const OK: i32 = 0;
    pub const FINDINGS: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const GATEWAY: i32 = 3;
    pub const EXTRACTION: i32 = 4;
    pub const NOT_DONE: i32 = 5;
    pub const INVALID_SPEC: i32 = 6;
}

#[derive(Debug, Parser)]
#[command(name = "guitest", version, about = "Generate, explore, migrate, lint and replay mobile GUI test scripts")]
pub struct Cli {
    #[command(flatten)]
    pub gateway: GatewayArgs,
    #[command(flatten)]
    pub explorer: ExplorerArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GatewayArgs {
    /// live, record, replay or scripted. Defaults to replay, or scripted
    /// when --scripted is given.
    #[arg(long, global = true)]
    pub gateway_mode: Option<GatewayMode>,
    /// Fixture file (JSON lines) written in record mode and read in replay mode.
    #[arg(long, global = true)]
    pub fixtures: Option<PathBuf>,
    /// Reply file for scripted mode: {"replies": [...], "cycle": false}.
    #[arg(long, global = true)]
    pub scripted: Option<PathBuf>,
    #[arg(long, global = true)]
    pub model: Option<String>,
    #[arg(long, global = true)]
    pub temperature: Option<f64>,
    /// Base URL of the chat completion endpoint.
    #[arg(long, global = true)]
    pub endpoint: Option<String>,
    /// Environment variable holding the API key [default: OPENAI_API_KEY].
    #[arg(long, global = true)]
    pub api_key_env: Option<String>,
}

#[derive(Debug, Args)]
pub struct ExplorerArgs {
    #[arg(long, global = true)]
    pub token_budget: Option<usize>,
    #[arg(long, global = true)]
    pub max_rounds: Option<u32>,
    #[arg(long, global = true)]
    pub element_cap: Option<usize>,
    /// auto or surface.
    #[arg(long, global = true)]
    pub popup_policy: Option<PopupPolicy>,
    /// Wait inserted after steps that change the page.
    #[arg(long, global = true, default_value_t = DEFAULT_WAIT_MS)]
    pub wait_ms: u64,
}

/// Device config file plus per-field overrides.
#[derive(Debug, Args)]
pub struct DeviceArgs {
    /// JSON file with device_name, app_package, app_activity, no_reset, full_reset.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub device_name: Option<String>,
    #[arg(long)]
    pub app_package: Option<String>,
    #[arg(long)]
    pub app_activity: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    CrossPlatform,
    CrossApp,
}

impl From<KindArg> for MigrationKind {
    fn from(kind: KindArg) -> Self {
        match kind {
            KindArg::CrossPlatform => MigrationKind::CrossPlatform,
            KindArg::CrossApp => MigrationKind::CrossApp,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One-shot generation from a list of scenario steps.
    Generate {
        #[command(flatten)]
        device: DeviceArgs,
        /// JSON list of scenario steps.
        #[arg(long)]
        steps: PathBuf,
        /// Script output; the lint report goes next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Dialogue-driven exploration of one app function.
    Explore {
        #[command(flatten)]
        device: DeviceArgs,
        /// Simulate the app from this model file.
        #[arg(long)]
        app_model: Option<PathBuf>,
        /// Drive a real device through this WebDriver server.
        #[arg(long)]
        webdriver_url: Option<String>,
        #[arg(long)]
        app: String,
        #[arg(long)]
        function: String,
        /// Trace output (JSON lines).
        #[arg(long)]
        out_trace: PathBuf,
        /// Script output; the IR and lint report go next to it.
        #[arg(long)]
        out_script: PathBuf,
    },
    /// Migrate a script to another device or app.
    Migrate {
        /// Overrides the kind stored in the spec file.
        #[arg(long, value_enum)]
        kind: Option<KindArg>,
        #[arg(long)]
        spec: PathBuf,
        /// Migration report output (JSON).
        #[arg(long)]
        out: PathBuf,
        /// Also write the migrated script here.
        #[arg(long)]
        out_script: Option<PathBuf>,
    },
    /// Check a script for the known defect patterns.
    Lint {
        script: PathBuf,
        /// Print findings as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Run a script IR file against an app model.
    Replay {
        #[arg(long)]
        ir: PathBuf,
        #[arg(long)]
        app_model: PathBuf,
    },
}

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }
}

fn config_failure(e: impl std::fmt::Display) -> Failure {
    Failure::new(exit::CONFIG, e.to_string())
}

fn gateway_failure(e: GatewayError) -> Failure {
    let code = match e {
        GatewayError::InvalidConfig(_) | GatewayError::FixtureFile { .. } => exit::CONFIG,
        _ => exit::GATEWAY,
    };
    Failure::new(code, e.to_string())
}

fn device_failure(e: DeviceError) -> Failure {
    Failure::new(exit::GATEWAY, e.to_string())
}

fn explorer_failure(e: ExplorerError) -> Failure {
    match e {
        ExplorerError::Gateway(e) => gateway_failure(e),
        ExplorerError::Device(e) => device_failure(e),
        other => config_failure(other),
    }
}

fn synth_failure(e: SynthError) -> Failure {
    match e {
        SynthError::TraceNotDone(_) | SynthError::EmptyTrace => Failure::new(exit::NOT_DONE, e.to_string()),
        SynthError::InvalidSpec(_) => Failure::new(exit::INVALID_SPEC, e.to_string()),
        SynthError::ExtractionFailed => Failure::new(exit::EXTRACTION, e.to_string()),
        SynthError::Gateway(e) => gateway_failure(e),
        SynthError::Device(e) => device_failure(e),
        other => config_failure(other),
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::CONFIG } else { exit::OK };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            failure.code
        }
    }
}

pub fn execute(cli: &Cli) -> Result<i32, Failure> {
    match &cli.command {
        Command::Generate { device, steps, out } => cmd_generate(cli, device, steps, out),
        Command::Explore {
            device,
            app_model,
            webdriver_url,
            app,
            function,
            out_trace,
            out_script,
        } => {
            let backend = match (app_model, webdriver_url) {
                (Some(path), None) => Backend::Model(path),
                (None, Some(url)) => Backend::WebDriver(url),
                _ => return Err(config_failure("exactly one of --app-model and --webdriver-url is required")),
            };
            cmd_explore(cli, device, backend, app, function, out_trace, out_script)
        }
        Command::Migrate { kind, spec, out, out_script } => cmd_migrate(cli, *kind, spec, out, out_script.as_deref()),
        Command::Lint { script, json } => cmd_lint(script, *json),
        Command::Replay { ir, app_model } => cmd_replay(ir, app_model),
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| config_failure(format!("cannot read {}: {e}", path.display())))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    serde_json::from_str(&read_text(path)?).map_err(|e| config_failure(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| config_failure(format!("cannot write {}: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(config_failure)?;
    write_text(path, &(text + "\n"))
}

/// `out.py` -> `out.<suffix>`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    path.with_extension(suffix)
}

fn device_config(args: &DeviceArgs) -> Result<DeviceConfig, Failure> {
    let mut config: DeviceConfig = read_json(&args.config)?;
    if let Some(v) = &args.device_name {
        config.device_name = v.clone();
    }
    if let Some(v) = &args.app_package {
        config.app_package = v.clone();
    }
    if let Some(v) = &args.app_activity {
        config.app_activity = v.clone();
    }
    config.validate().map_err(config_failure)?;
    Ok(config)
}

fn explorer_config(args: &ExplorerArgs) -> Result<ExplorerConfig, Failure> {
    let mut cfg = ExplorerConfig::default();
    if let Some(v) = args.token_budget {
        cfg.token_budget = v;
    }
    if let Some(v) = args.max_rounds {
        cfg.max_rounds = v;
        cfg.stagnation_limit = cfg.stagnation_limit.min(v);
    }
    if let Some(v) = args.element_cap {
        cfg.element_cap = v;
    }
    if let Some(v) = args.popup_policy {
        cfg.popup_policy = v;
    }
    cfg.validate().map_err(config_failure)?;
    Ok(cfg)
}

#[derive(Deserialize)]
struct ScriptedFile {
    replies: Vec<String>,
    #[serde(default)]
    cycle: bool,
}

fn build_gateway(args: &GatewayArgs) -> Result<Gateway, Failure> {
    let mode = match (args.gateway_mode, &args.scripted) {
        (Some(mode), _) => mode,
        (None, Some(_)) => GatewayMode::Scripted,
        (None, None) => GatewayMode::Replay,
    };
    if mode == GatewayMode::Scripted {
        let path = args
            .scripted
            .as_ref()
            .ok_or_else(|| config_failure("scripted mode needs --scripted FILE"))?;
        let file: ScriptedFile = read_json(path)?;
        let mut replies = ScriptedReplies::new(file.replies);
        if file.cycle {
            replies = replies.cycling();
        }
        return Ok(Gateway::scripted(replies));
    }
    if args.scripted.is_some() {
        return Err(config_failure("--scripted only applies to scripted mode"));
    }
    let mut config = GatewayConfig {
        mode,
        fixture_path: args.fixtures.clone(),
        ..GatewayConfig::default()
    };
    if let Some(v) = &args.model {
        config.model_name = v.clone();
    }
    if let Some(v) = args.temperature {
        config.temperature = v;
    }
    if let Some(v) = &args.endpoint {
        config.endpoint_url = v.clone();
    }
    if let Some(v) = &args.api_key_env {
        config.api_key_env_var = v.clone();
    }
    Gateway::from_config(config).map_err(gateway_failure)
}

fn report_warnings(gateway: &Gateway) {
    for warning in gateway.warnings() {
        eprintln!("warning: {warning}");
    }
}

fn print_findings(findings: &[Finding]) {
    for f in findings {
        if f.line == 0 {
            println!("{}: {}", f.rule, f.message);
        } else {
            println!("line {}: {}: {}", f.line, f.rule, f.message);
        }
    }
}

fn cmd_generate(cli: &Cli, device: &DeviceArgs, steps: &Path, out: &Path) -> Result<i32, Failure> {
    let config = device_config(device)?;
    let steps: Vec<ScenarioStepSpec> = read_json(steps)?;
    let prompt = build_oneshot_generation_prompt(&config, &steps).map_err(config_failure)?;
    let mut gateway = build_gateway(&cli.gateway)?;
    let reply = gateway.complete(&prompt).map_err(gateway_failure)?;
    report_warnings(&gateway);
    let script = extract_code_block(&reply)
        .ok_or_else(|| Failure::new(exit::EXTRACTION, "extraction-failed: the reply holds no code block"))?;
    let findings = lint(&script);
    let report = sibling(out, "lint.json");
    write_text(out, &script)?;
    write_json(&report, &findings)?;
    print_findings(&findings);
    println!("wrote {} ({} findings)", out.display(), findings.len());
    Ok(exit::OK)
}

enum Backend<'a> {
    Model(&'a Path),
    WebDriver(&'a str),
}

fn cmd_explore(
    cli: &Cli,
    device: &DeviceArgs,
    backend: Backend<'_>,
    app: &str,
    function: &str,
    out_trace: &Path,
    out_script: &Path,
) -> Result<i32, Failure> {
    let config = device_config(device)?;
    let cfg = explorer_config(&cli.explorer)?;
    let mut gateway = build_gateway(&cli.gateway)?;
    let mut driver: Box<dyn Driver> = match backend {
        Backend::Model(path) => Box::new(Simulator::new(
            load_app_model(path).map_err(|e| config_failure(format!("{}: {e}", path.display())))?,
        )),
        Backend::WebDriver(url) => {
            let transport = ReqwestTransport::new().map_err(|e| Failure::new(exit::GATEWAY, e.to_string()))?;
            Box::new(WebDriverClient::connect(url, config.clone(), Box::new(transport)).map_err(device_failure)?)
        }
    };

    let run = run_exploration(app, function, &mut driver, &mut gateway, &cfg).map_err(explorer_failure)?;
    let mut trace_text = Vec::new();
    run.trace.write_jsonl(&mut trace_text).map_err(config_failure)?;
    write_text(out_trace, &String::from_utf8_lossy(&trace_text))?;
    let summary = run.trace.summary();
    println!(
        "terminal: {}, rounds: {} ({} by the model), final page: {}",
        summary.terminal.as_str(),
        summary.rounds,
        summary.llm_rounds,
        summary.final_fingerprint
    );
    if run.trace.terminal != Terminal::Done {
        report_warnings(&gateway);
        eprintln!("exploration ended without done; trace written to {}", out_trace.display());
        return Ok(exit::NOT_DONE);
    }

    let script = synthesize_from_trace(&run.trace, &config, cli.explorer.wait_ms).map_err(synth_failure)?;
    let rendered = render(&script);
    let from_model = match synthesize_via_llm(&run.transcript, &mut gateway, Some(cfg.token_budget)) {
        Ok(text) => text,
        Err(e) => {
            log::warn!("model summarization failed: {e}");
            None
        }
    };
    report_warnings(&gateway);
    let text = match from_model {
        Some(text) if lint(&text).is_empty() => text,
        Some(text) => {
            let kept = sibling(out_script, "llm.py");
            write_text(&kept, &text)?;
            eprintln!(
                "model script has lint findings; kept as {}, using the trace-synthesized script",
                kept.display()
            );
            rendered
        }
        None => rendered,
    };
    let findings = lint(&text);
    write_text(out_script, &text)?;
    write_json(&sibling(out_script, "ir.json"), &script)?;
    write_json(&sibling(out_script, "lint.json"), &findings)?;
    print_findings(&findings);
    println!("wrote {} and {}", out_trace.display(), out_script.display());
    Ok(exit::OK)
}

fn cmd_migrate(
    cli: &Cli,
    kind: Option<KindArg>,
    spec_path: &Path,
    out: &Path,
    out_script: Option<&Path>,
) -> Result<i32, Failure> {
    let mut value: serde_json::Value = read_json(spec_path)?;
    if let (Some(kind), Some(object)) = (kind, value.as_object_mut()) {
        let kind = MigrationKind::from(kind);
        object.insert("kind".into(), kind.as_str().into());
    }
    let spec: MigrationSpec =
        serde_json::from_value(value).map_err(|e| config_failure(format!("{}: {e}", spec_path.display())))?;
    let missing = validate_migration_spec(&spec);
    if !missing.is_empty() {
        return Err(Failure::new(
            exit::INVALID_SPEC,
            format!("invalid-spec: missing {}", missing.join(", ")),
        ));
    }
    let mut gateway = build_gateway(&cli.gateway)?;
    let report = migrate(&spec, &mut gateway).map_err(synth_failure)?;
    report_warnings(&gateway);
    write_json(out, &report)?;
    if let Some(path) = out_script {
        write_text(path, &report.script_text)?;
    }
    print_findings(&report.findings);
    if report.suspicious_unchanged {
        eprintln!("warning: the migrated script is identical to the old one");
    }
    println!("changed lines: {}; wrote {}", report.changed_line_count, out.display());
    Ok(exit::OK)
}

fn cmd_lint(path: &Path, json: bool) -> Result<i32, Failure> {
    let findings = lint(&read_text(path)?);
    if json {
        println!("{}", serde_json::to_string_pretty(&findings).map_err(config_failure)?);
    } else {
        print_findings(&findings);
    }
    Ok(if findings.is_empty() { exit::OK } else { exit::FINDINGS })
}

fn cmd_replay(ir: &Path, app_model: &Path) -> Result<i32, Failure> {
    let script: TestScript = read_json(ir)?;
    let model = load_app_model(app_model).map_err(|e| config_failure(format!("{}: {e}", app_model.display())))?;
    let mut simulator = Simulator::new(model);
    let report = replay_script(&script, &mut simulator).map_err(synth_failure)?;
    println!("reached: {}", report.reached_fingerprint);
    for failure in &report.failures {
        println!("step {}: {}: {}", failure.step, failure.status.as_str(), failure.detail);
    }
    Ok(if report.failures.is_empty() { exit::OK } else { exit::FINDINGS })
}
