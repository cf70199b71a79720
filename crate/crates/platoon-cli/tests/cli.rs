//! End-to-end tests of the binary: exit codes, file schemas, determinism,
//! and the reproduction gate.

use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

const A10_BUDGET: Duration = Duration::from_secs(300);

fn platoon(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_platoon"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("the binary launches")
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

#[test]
fn a10_reproduce_command() {
    let dir = tempfile::tempdir().expect("temp dir");
    let start = Instant::now();
    let output = platoon(&["reproduce", "--out", "repro"], dir.path());
    let elapsed = start.elapsed();

    let stdout = stdout_of(&output);
    let summary = read(&dir.path().join("repro/summary.csv"));
    let scenario_rows = summary.lines().count().saturating_sub(1);
    let pass = output.status.code() == Some(0)
        && elapsed < A10_BUDGET
        && scenario_rows >= 8
        && stdout.contains("all expectations met");
    println!(
        "A10 reproduce command: {} (exit {:?}, {} scenario rows, {} ms)",
        if pass { "PASS" } else { "FAIL" },
        output.status.code(),
        scenario_rows,
        elapsed.as_millis()
    );
    assert!(
        pass,
        "exit {:?}, rows {scenario_rows}, elapsed {elapsed:?}, stdout:\n{stdout}\nstderr:\n{}",
        output.status.code(),
        stderr_of(&output)
    );
}

#[test]
fn reproduce_negative_control_exits_three() {
    let dir = tempfile::tempdir().expect("temp dir");
    let output = platoon(
        &["reproduce", "--out", "repro", "--inject-mismatch"],
        dir.path(),
    );
    let stdout = stdout_of(&output);
    assert_eq!(output.status.code(), Some(3), "an injected mismatch must exit 3");
    assert!(stdout.contains("[MISS]"), "the mismatch is listed:\n{stdout}");
}

#[test]
fn run_on_a_collision_scenario_exits_two_with_the_time() {
    let dir = tempfile::tempdir().expect("temp dir");
    let output = platoon(&["run", "--scenario", "blowup-a0.5", "--out", "o"], dir.path());
    let stdout = stdout_of(&output);
    assert_eq!(
        output.status.code(),
        Some(2),
        "collision termination is informative, exit 2:\n{stdout}"
    );
    assert!(
        stdout.contains("close their gap inside"),
        "the collision bracket is reported:\n{stdout}"
    );
    let trace = read(&dir.path().join("o/trace.csv"));
    let last_t: f64 = trace
        .lines()
        .last()
        .and_then(|row| row.split(',').next())
        .expect("trace has rows")
        .parse()
        .expect("time parses");
    assert!(
        last_t <= 0.5 * (1.0 + 1e-6),
        "samples stop at the collision, before the analytic bound: t={last_t}"
    );
}

#[test]
fn run_writes_the_canonical_trace_schema() {
    let dir = tempfile::tempdir().expect("temp dir");
    let output = platoon(
        &["run", "--scenario", "formation-at-rest", "--override", "t_end=5", "--out", "o"],
        dir.path(),
    );
    assert_eq!(output.status.code(), Some(0), "stderr: {}", stderr_of(&output));

    let trace = read(&dir.path().join("o/trace.csv"));
    let mut lines = trace.lines();
    let header = lines.next().expect("header row");
    assert_eq!(
        header,
        "t,x_1,x_2,x_3,x_4,x_5,v_1,v_2,v_3,v_4,v_5,e1,e2,e_total,dissipation,e_gamma,min_gap_slack,formation_error,velocity_diameter",
        "five agents pin the column order"
    );
    let mut rows = 0;
    for line in lines {
        rows += 1;
        for field in line.split(',') {
            let value: f64 = field.parse().unwrap_or_else(|e| panic!("field {field:?}: {e}"));
            assert_eq!(
                format!("{value:.16e}"),
                field,
                "every field must be the canonical 17-digit form of its value"
            );
        }
    }
    assert!(rows > 10, "a 5-second run yields many samples, got {rows}");

    for plot in ["positions.csv", "energy.csv", "errors.csv"] {
        assert!(dir.path().join("o").join(plot).exists(), "{plot} is written");
    }
}

#[test]
fn format_selection_limits_what_is_written() {
    let dir = tempfile::tempdir().expect("temp dir");
    let output = platoon(
        &["run", "--scenario", "blowup-a0.9", "--formats", "csv", "--out", "only-csv"],
        dir.path(),
    );
    assert_eq!(output.status.code(), Some(2));
    assert!(dir.path().join("only-csv/trace.csv").exists());
    assert!(
        !dir.path().join("only-csv/trace.json").exists(),
        "csv-only must not emit structured json"
    );

    let output = platoon(
        &["run", "--scenario", "blowup-a0.9", "--formats", "structured-json", "--out", "only-json"],
        dir.path(),
    );
    assert_eq!(output.status.code(), Some(2));
    assert!(!dir.path().join("only-json/trace.csv").exists());
    let json = read(&dir.path().join("only-json/trace.json"));
    let doc: serde_json::Value = serde_json::from_str(&json).expect("trace.json parses");
    assert_eq!(doc["scenario"], "blowup-a0.9", "the mirror names its scenario");
    assert!(doc["samples"].is_array(), "samples are mirrored as an array");
}

#[test]
fn identical_invocations_give_byte_identical_outputs() {
    let dir = tempfile::tempdir().expect("temp dir");
    for out in ["a", "b"] {
        let output = platoon(
            &["run", "--scenario", "formation-moving", "--override", "t_end=3", "--out", out],
            dir.path(),
        );
        assert_eq!(output.status.code(), Some(0), "stderr: {}", stderr_of(&output));
    }
    for file in ["trace.csv", "trace.json", "certificates.txt", "certificates.json"] {
        let a = read(&dir.path().join("a").join(file));
        let b = read(&dir.path().join("b").join(file));
        assert_eq!(a, b, "{file} must be byte-identical across identical runs");
    }
}

#[test]
fn beta_override_flips_the_flocking_certificate() {
    let dir = tempfile::tempdir().expect("temp dir");
    let output = platoon(
        &[
            "run",
            "--scenario",
            "flocking-beta-1.025",
            "--override",
            "beta=4.1",
            "--override",
            "t_end=2",
            "--out",
            "o",
        ],
        dir.path(),
    );
    assert_eq!(
        output.status.code(),
        Some(0),
        "run completes regardless of verdicts: {}",
        stderr_of(&output)
    );
    let certificates = read(&dir.path().join("o/certificates.txt"));
    assert!(
        certificates.contains("[FAIL] flocking condition satisfied"),
        "the overridden exponent must fail the admission condition:\n{certificates}"
    );
}

#[test]
fn sweep_reports_the_admission_threshold_per_value() {
    let dir = tempfile::tempdir().expect("temp dir");
    let output = platoon(
        &[
            "sweep",
            "--scenario",
            "flocking-beta-1.025",
            "--param",
            "beta",
            "--values",
            "1.025,2,4.1",
            "--override",
            "t_end=2",
            "--out",
            "s",
        ],
        dir.path(),
    );
    assert_eq!(output.status.code(), Some(0), "stderr: {}", stderr_of(&output));

    let summary = read(&dir.path().join("s/summary.csv"));
    let mut lines = summary.lines();
    let header = lines.next().expect("header");
    assert!(header.starts_with("beta,threshold,flocking_condition,"), "header: {header}");
    let thresholds: Vec<f64> = lines
        .map(|row| row.split(',').nth(1).expect("threshold column").parse().expect("parses"))
        .collect();
    let expected = [20.0, 0.5, 0.5 / 3.1];
    assert_eq!(thresholds.len(), 3, "one row per value");
    for (got, want) in thresholds.iter().zip(expected) {
        assert!(
            (got - want).abs() <= 1e-9 * want,
            "threshold column: got {got}, want {want}"
        );
    }
}

#[test]
fn sweep_rejects_unknown_parameters() {
    let dir = tempfile::tempdir().expect("temp dir");
    let output = platoon(
        &["sweep", "--scenario", "formation-at-rest", "--param", "width", "--values", "1,2"],
        dir.path(),
    );
    assert_eq!(output.status.code(), Some(1));
    assert!(
        stderr_of(&output).contains("unknown sweep parameter"),
        "stderr names the problem: {}",
        stderr_of(&output)
    );
}

#[test]
fn check_prints_certificates_without_integrating() {
    let dir = tempfile::tempdir().expect("temp dir");
    let output = platoon(&["check", "--scenario", "blowup-a0.9", "--out", "c"], dir.path());
    assert_eq!(output.status.code(), Some(0), "stderr: {}", stderr_of(&output));
    let stdout = stdout_of(&output);
    assert!(stdout.contains("== blow-up =="), "two agents get the blow-up certificate:\n{stdout}");
    assert!(stdout.contains("t_star_bound"), "the analytic bound is derived:\n{stdout}");
    assert!(
        !dir.path().join("c/trace.csv").exists(),
        "check never writes a trace"
    );
}

#[test]
fn invalid_overrides_exit_one() {
    let dir = tempfile::tempdir().expect("temp dir");
    for args in [
        vec!["run", "--scenario", "formation-at-rest", "--override", "width=3"],
        vec!["run", "--scenario", "formation-at-rest", "--override", "beta=oops"],
        vec!["run", "--scenario", "formation-at-rest", "--seed", "7"],
        vec!["run", "--scenario", "no-such-scenario"],
    ] {
        let output = platoon(&args, dir.path());
        assert_eq!(
            output.status.code(),
            Some(1),
            "args {args:?} must exit 1, stderr: {}",
            stderr_of(&output)
        );
        assert!(!stderr_of(&output).is_empty(), "errors explain themselves");
    }
}

#[test]
fn config_files_build_runnable_scenarios() {
    let dir = tempfile::tempdir().expect("temp dir");
    let config = r#"
name = "two-agent-drift"

[params]
alpha = 2.1
beta = 0.8
delta = 1.0
z = 2.0

[initial]
x = [3.5, 0.0]
v = [-0.1, 0.1]

[integrator]
t_end = 5.0
gamma = 10.0

[[expectations]]
certificate = "collision free at every sample"
expected = true
"#;
    std::fs::write(dir.path().join("drift.toml"), config).expect("config written");
    let output = platoon(&["run", "--config", "drift.toml", "--out", "o"], dir.path());
    assert_eq!(output.status.code(), Some(0), "stderr: {}", stderr_of(&output));
    let stdout = stdout_of(&output);
    assert!(stdout.contains("two-agent-drift"), "the config names the run:\n{stdout}");
    assert!(
        stdout.contains("[ok]   collision free at every sample"),
        "config expectations are scored:\n{stdout}"
    );
}

#[test]
fn seeded_jitter_changes_the_data_deterministically() {
    let dir = tempfile::tempdir().expect("temp dir");
    let config = r#"
[params]
alpha = 2.1
beta = 0.8
delta = 2.0
z = 4.0

[initial]
builtin = "formation-at-rest"
jitter = 0.01
seed = 1

[integrator]
t_end = 1.0
"#;
    std::fs::write(dir.path().join("jitter.toml"), config).expect("config written");
    for (out, seed) in [("s5", "5"), ("s5-again", "5"), ("s6", "6")] {
        let output = platoon(
            &["run", "--config", "jitter.toml", "--seed", seed, "--out", out],
            dir.path(),
        );
        assert_eq!(output.status.code(), Some(0), "stderr: {}", stderr_of(&output));
    }
    let five = read(&dir.path().join("s5/trace.csv"));
    let five_again = read(&dir.path().join("s5-again/trace.csv"));
    let six = read(&dir.path().join("s6/trace.csv"));
    assert_eq!(five, five_again, "the same seed reproduces the run byte for byte");
    assert_ne!(five, six, "a different seed moves the initial data");
}
