//! End-to-end tests of the `prioloss` binary: rendered output, exit codes,
//! determinism, and the machine-readable artifacts.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use prioloss_cli::output::{to_json_bytes, OutputRecord};

const REFERENCE_CONFIG: &str = r#"{"model":{"servers":2,"protocol":"fcfd","classes":[{"rate":1.0,"service":{"type":"exponential","rate":10.0}},{"rate":1.0,"service":{"type":"exponential","rate":5.0}},{"rate":1.0,"service":{"type":"exponential","rate":2.0}}]}}"#;

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_prioloss"))
}

fn run_cli<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    binary().args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).expect("config written");
    path
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("stdout is UTF-8")
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8(output.stderr.clone()).expect("stderr is UTF-8")
}

#[test]
fn analyze_reproduces_reference_gammas_in_both_modes() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "ref.json", REFERENCE_CONFIG);

    let strict = run_cli([
        "analyze",
        config.to_str().unwrap(),
        "--gamma-mode",
        "strict-eq8",
    ]);
    assert_eq!(strict.status.code(), Some(0));
    let table = stdout_of(&strict);
    assert!(table.contains("0.3252"), "strict γ_3 missing: {table}");
    assert!(table.contains("0.004525"), "strict γ_1 missing: {table}");
    assert!(table.contains("loss mode strict-eq8"), "{table}");

    let composed = run_cli([
        "analyze",
        config.to_str().unwrap(),
        "--gamma-mode",
        "composed-eq7",
    ]);
    assert_eq!(composed.status.code(), Some(0));
    let table = stdout_of(&composed);
    assert!(table.contains("0.3580"), "composed γ_3 missing: {table}");
    assert!(table.contains("loss mode composed-eq7"), "{table}");
}

#[test]
fn analyze_protocol_override_is_reported_and_harmless_for_exponential() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "ref.json", REFERENCE_CONFIG);
    let output = run_cli([
        "analyze",
        config.to_str().unwrap(),
        "--protocol-override",
        "lcfd",
    ]);
    assert_eq!(output.status.code(), Some(0));
    let table = stdout_of(&output);
    assert!(table.contains("protocol lcfd"), "{table}");
    // Exponential services: both protocols yield the same loss vector.
    assert!(table.contains("0.3252"), "{table}");
}

#[test]
fn analyze_rejects_zero_servers_with_named_violation() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "bad.json",
        &REFERENCE_CONFIG.replace(r#""servers":2"#, r#""servers":0"#),
    );
    let output = run_cli(["analyze", config.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
    let message = stderr_of(&output);
    assert!(message.contains("servers must be >= 1"), "{message}");
}

#[test]
fn misspelled_config_key_reports_offending_path() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "typo.json",
        &REFERENCE_CONFIG.replace(r#""rate":10.0"#, r#""rte":10.0"#),
    );
    let output = run_cli(["analyze", config.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
    let message = stderr_of(&output);
    assert!(
        message.contains("model.classes[0].service.rte"),
        "{message}"
    );
    assert!(message.contains("unknown field"), "{message}");
}

#[test]
fn missing_config_file_is_a_config_error() {
    let output = run_cli(["analyze", "/definitely/not/here.json"]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn bad_flag_values_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "ref.json", REFERENCE_CONFIG);
    let bad_mode = run_cli([
        "analyze",
        config.to_str().unwrap(),
        "--gamma-mode",
        "strict",
    ]);
    assert_eq!(bad_mode.status.code(), Some(4));
    let bad_protocol = run_cli([
        "simulate",
        config.to_str().unwrap(),
        "--protocol-override",
        "fifo",
    ]);
    assert_eq!(bad_protocol.status.code(), Some(4));
    let no_subcommand = binary().output().unwrap();
    assert_eq!(no_subcommand.status.code(), Some(4));
    let help = run_cli(["--help"]);
    assert_eq!(help.status.code(), Some(0));
}

#[test]
fn simulate_is_deterministic_for_a_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "ref.json", REFERENCE_CONFIG);
    let args = [
        "simulate",
        config.to_str().unwrap(),
        "--arrivals",
        "20000",
        "--replications",
        "4",
        "--seed",
        "42",
    ];
    let first = run_cli(args);
    let second = run_cli(args);
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(second.status.code(), Some(0));
    assert!(!first.stdout.is_empty());
    assert_eq!(first.stdout, second.stdout, "stdout must be byte-identical");
}

#[test]
fn simulate_rejects_a_single_replication() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "ref.json", REFERENCE_CONFIG);
    let output = run_cli([
        "simulate",
        config.to_str().unwrap(),
        "--arrivals",
        "1000",
        "--replications",
        "1",
    ]);
    assert_eq!(output.status.code(), Some(4));
    assert!(
        stderr_of(&output).contains("replications"),
        "{}",
        stderr_of(&output)
    );
}

#[test]
fn simulate_rejects_warmup_at_least_as_long_as_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "ref.json", REFERENCE_CONFIG);
    let output = run_cli([
        "simulate",
        config.to_str().unwrap(),
        "--arrivals",
        "100",
        "--warmup",
        "200",
        "--replications",
        "2",
    ]);
    assert_eq!(output.status.code(), Some(4));
}

#[test]
fn simulation_section_in_the_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let with_section = format!(
        r#"{},"simulation":{{"arrivals_per_replication":4000,"replications":3,"base_seed":5}}}}"#,
        REFERENCE_CONFIG.strip_suffix('}').unwrap()
    );
    let config = write_config(dir.path(), "with_sim.json", &with_section);
    let output = run_cli(["simulate", config.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(0));
    let text = stdout_of(&output);
    assert!(text.contains("replications 3 x 4000 arrivals"), "{text}");
    assert!(text.contains("warmup 400"), "{text}");
    assert!(text.contains("seed 5"), "{text}");
}

#[test]
fn csv_export_has_the_contracted_header_and_shape() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "ref.json", REFERENCE_CONFIG);
    let csv_path = dir.path().join("reps.csv");
    let output = run_cli([
        "simulate",
        config.to_str().unwrap(),
        "--arrivals",
        "2000",
        "--replications",
        "3",
        "--csv",
        csv_path.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0));
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("replication,class,arrivals,blocked,preempted,completed,in_service_at_end")
    );
    assert_eq!(lines.count(), 3 * 3, "3 replications x 3 classes");
}

#[test]
fn json_document_round_trips_byte_stably() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "ref.json", REFERENCE_CONFIG);
    let json_path = dir.path().join("out.json");
    let output = run_cli([
        "compare",
        config.to_str().unwrap(),
        "--arrivals",
        "5000",
        "--replications",
        "3",
        "--seed",
        "9",
        "--json",
        json_path.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0));
    let written = std::fs::read(&json_path).unwrap();
    let parsed: OutputRecord = serde_json::from_slice(&written).unwrap();
    assert_eq!(parsed.seed, Some(9));
    assert!(parsed.analytic.is_some());
    assert!(parsed.simulation.is_some());
    assert!(parsed.comparison.is_some());
    let reserialized = to_json_bytes(&parsed).unwrap();
    assert_eq!(
        written, reserialized,
        "serialize → parse → serialize is stable"
    );
}

#[test]
fn compare_covers_the_reference_instance_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "ref.json", REFERENCE_CONFIG);
    let output = run_cli([
        "compare",
        config.to_str().unwrap(),
        "--arrivals",
        "20000",
        "--replications",
        "4",
        "--seed",
        "42",
        "--fail-on-noncoverage",
    ]);
    assert_eq!(output.status.code(), Some(0), "{}", stderr_of(&output));
    let table = stdout_of(&output);
    assert!(table.contains("covered"), "{table}");
    assert!(
        table.contains("analytic total loss inside simulation CI for all classes: yes"),
        "{table}"
    );
}

#[test]
fn fail_on_noncoverage_flips_exit_five_on_a_mismatching_instance() {
    // Two servers with deterministic services: the approximation misses the
    // simulated loss by ~10 half-widths, so noncoverage is seed-robust.
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "det.json",
        r#"{"model":{"servers":2,"protocol":"fcfd","classes":[{"rate":4.0,"service":{"type":"deterministic","value":0.5}},{"rate":2.0,"service":{"type":"deterministic","value":0.5}}]}}"#,
    );
    let args = |fail: bool| {
        let mut v = vec![
            "compare".to_string(),
            config.to_str().unwrap().to_string(),
            "--arrivals".to_string(),
            "40000".to_string(),
            "--replications".to_string(),
            "6".to_string(),
            "--seed".to_string(),
            "7".to_string(),
        ];
        if fail {
            v.push("--fail-on-noncoverage".to_string());
        }
        v
    };
    let informative = run_cli(args(false));
    assert_eq!(
        informative.status.code(),
        Some(0),
        "without the flag, comparison is informative"
    );
    assert!(stdout_of(&informative)
        .contains("analytic total loss inside simulation CI for all classes: no"));
    let enforced = run_cli(args(true));
    assert_eq!(enforced.status.code(), Some(5));
}

#[test]
fn light_traffic_deltas_are_small() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "light.json",
        r#"{"model":{"servers":2,"protocol":"fcfd","classes":[{"rate":0.02,"service":{"type":"exponential","rate":10.0}},{"rate":0.03,"service":{"type":"exponential","rate":10.0}}]}}"#,
    );
    let json_path = dir.path().join("light.json.out");
    let output = run_cli([
        "compare",
        config.to_str().unwrap(),
        "--arrivals",
        "20000",
        "--replications",
        "4",
        "--seed",
        "3",
        "--json",
        json_path.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0));
    let record: OutputRecord = serde_json::from_slice(&std::fs::read(&json_path).unwrap()).unwrap();
    for class in &record.comparison.unwrap().classes {
        for metric in [&class.arrival_loss, &class.preemption, &class.loss] {
            assert!(
                metric.absolute_delta.abs() < 1e-3,
                "class {} delta {}",
                class.class,
                metric.absolute_delta
            );
        }
    }
}

#[test]
fn hyperexponential_weight_normalization_warns_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "hyper.json",
        r#"{"model":{"servers":1,"protocol":"fcfd","classes":[{"rate":0.5,"service":{"type":"hyperexponential","branches":[{"weight":0.5,"rate":1.0},{"weight":0.6,"rate":3.0}]}}]}}"#,
    );
    let output = run_cli(["analyze", config.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(0));
    let message = stderr_of(&output);
    assert!(message.contains("warning:"), "{message}");
    assert!(message.contains("normalizing"), "{message}");
}
