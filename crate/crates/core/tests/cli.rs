//! End-to-end tests of the `fbvp` binary: exit codes, file outputs, CSV
//! round-trips, and resume behavior.

use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fbvp"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const TANH_CONFIG: &str = r#"
[domain]
kind = "interval"
L = 1.0
n = 100

[g]
builtin = "tanh"

[forcing]
p = "0.5 + 0.1*cos(pi*x)"

[sweep]
xi_min = -3.0
xi_max = 3.0
step = 0.1

[output]
directory = "out"
snapshots = [0.0]
plot_script = true
"#;

#[test]
fn check_writes_report_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", TANH_CONFIG);
    let out = run(dir.path(), &["check", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("hypothesis report"));
    assert!(stdout.contains("satisfied"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/report.json")).unwrap())
            .unwrap();
    assert!(report["satisfied"].as_bool().unwrap());
}

#[test]
fn sweep_writes_curve_snapshot_and_plot_script() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", TANH_CONFIG);
    let out = run(dir.path(), &["sweep", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let csv = std::fs::read_to_string(dir.path().join("out/curve.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("xi1,mu,b,sup_norm_U,newton_iters,cond_est"));
    assert!(lines.count() >= 61);
    assert!(dir.path().join("out/curve.meta.json").exists());
    assert!(dir.path().join("out/curve.gp").exists());

    // snapshot at ξ₁ = 0 has one row per node, columns x,u
    let snap = std::fs::read_to_string(dir.path().join("out/solution_0.csv")).unwrap();
    let mut snap_lines = snap.lines();
    assert_eq!(snap_lines.next(), Some("x,u"));
    assert_eq!(snap_lines.count(), 101);
}

#[test]
fn curve_csv_round_trips_through_the_reader() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", TANH_CONFIG);
    assert_eq!(run(dir.path(), &["sweep", &cfg]).status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("out/curve.csv")).unwrap();
    let prov = fbvp::continuation::Provenance {
        spec_hash: 0,
        newton_tolerance: 1e-10,
        k_step: 0.1,
        xi_step: 0.1,
    };
    let curve = fbvp::cli::curve_from_csv(&text, prov).unwrap();
    let rewritten = fbvp::cli::curve_to_csv(&curve);
    assert_eq!(text, rewritten, "CSV must round-trip byte for byte");
}

#[test]
fn trace_finds_one_solution_and_reuses_curve() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", TANH_CONFIG);
    assert_eq!(run(dir.path(), &["sweep", &cfg]).status.code(), Some(0));
    let curve_bytes = std::fs::read(dir.path().join("out/curve.csv")).unwrap();

    let out = run(dir.path(), &["trace", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["crossing_count"].as_u64(), Some(1));
    assert!(dir.path().join("out/solution_0.csv").exists());
    let root = summary["roots_xi1"][0].as_f64().unwrap();
    assert!((root - 0.5493).abs() < 0.05, "{root}");

    // the persisted curve was loaded, not recomputed
    assert_eq!(std::fs::read(dir.path().join("out/curve.csv")).unwrap(), curve_bytes);
}

#[test]
fn trace_outside_window_reports_zero_crossings() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", TANH_CONFIG);
    let out = run(dir.path(), &["trace", &cfg, "--mu0", "1.5", "--out", "t15"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("t15/summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["crossing_count"].as_u64(), Some(0));
    assert!(!dir.path().join("t15/solution_0.csv").exists());
}

#[test]
fn solve_writes_single_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", TANH_CONFIG);
    let out = run(dir.path(), &["solve", &cfg, "--xi1", "0.75", "--out", "s"]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("mu ="), "{stdout}");
    assert!(dir.path().join("s/solution_0.csv").exists());
}

#[test]
fn strict_check_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "strong.toml",
        r#"
[domain]
kind = "interval"
L = 1.0
n = 80

[g]
expr = "15*tanh(u)"

[forcing]
mu0 = 0.0
"#,
    );
    assert_eq!(run(dir.path(), &["check", &cfg, "--strict"]).status.code(), Some(2));
    // without strict it is a warning, exit 0
    let out = run(dir.path(), &["check", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
}

#[test]
fn malformed_expression_exits_four_with_offset() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.toml",
        r#"
[domain]
kind = "interval"
L = 1.0
n = 80

[g]
expr = "tanh(u"

[forcing]
mu0 = 0.0
"#,
    );
    let out = run(dir.path(), &["check", &cfg]);
    assert_eq!(out.status.code(), Some(4));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("offset 6"), "{stderr}");
}

#[test]
fn unknown_config_key_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "typo.toml",
        r#"
[domain]
kind = "interval"
L = 1.0
n = 80
subdivisions = 80

[g]
builtin = "tanh"

[forcing]
mu0 = 0.0
"#,
    );
    let out = run(dir.path(), &["check", &cfg]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("subdivisions"));
}

#[test]
fn missing_config_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["check", "nonexistent.toml"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn resume_extends_range_and_rejects_mismatched_problem() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", TANH_CONFIG);
    assert_eq!(run(dir.path(), &["sweep", &cfg]).status.code(), Some(0));

    // resume with an identical range reuses the curve as-is
    let out = run(dir.path(), &["sweep", &cfg, "--resume"]);
    assert_eq!(out.status.code(), Some(0));

    // widen the range and resume: the persisted part is kept
    let wide = write_config(
        dir.path(),
        "wide.toml",
        &TANH_CONFIG.replace("xi_min = -3.0", "xi_min = -6.0"),
    );
    let out = run(dir.path(), &["sweep", &wide, "--resume"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/curve.csv")).unwrap();
    let first_row = csv.lines().nth(1).unwrap();
    let first_xi: f64 = first_row.split(',').next().unwrap().parse().unwrap();
    assert!((first_xi + 6.0).abs() < 1e-12, "curve starts at {first_xi}");

    // a different problem must not silently reuse the curve
    let other = write_config(
        dir.path(),
        "other.toml",
        &TANH_CONFIG.replace("0.5 + 0.1*cos(pi*x)", "0.3 + 0.1*cos(pi*x)"),
    );
    let out = run(dir.path(), &["sweep", &other, "--resume"]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn stalled_sweep_exits_three_with_partial_file() {
    // g evaluates only for |u| < 5, so the march toward ξ₁ = 6 must stall
    // near 5 and leave a partial curve behind.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "stall.toml",
        r#"
[domain]
kind = "interval"
L = 1.0
n = 60

[g]
expr = "0.05*log(25 - u^2)*u"

[forcing]
mu0 = 0.0

[sweep]
xi_min = 0.0
xi_max = 6.0
step = 0.1
anchor = 0.0
"#,
    );
    let out = run(dir.path(), &["sweep", &cfg, "--out", "stall_out"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("stall_out/curve.csv.partial").exists());
    assert!(!dir.path().join("stall_out/curve.csv").exists());
    let text = std::fs::read_to_string(dir.path().join("stall_out/curve.csv.partial")).unwrap();
    let last = text.lines().last().unwrap();
    let last_xi: f64 = last.split(',').next().unwrap().parse().unwrap();
    assert!(last_xi > 4.0 && last_xi < 5.1, "stalled at {last_xi}");
}

#[test]
fn rectangle_domain_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "rect.toml",
        r#"
[domain]
kind = "rectangle"
Lx = 1.0
Ly = 1.0
nx = 12
ny = 12

[g]
builtin = "tanh"

[forcing]
p = "0.4 + 0.1*cos(pi*x)*cos(pi*y)"

[sweep]
xi_min = -2.0
xi_max = 2.0
step = 0.2

[output]
directory = "out"
snapshots = [0.4]
"#,
    );
    let out = run(dir.path(), &["trace", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["crossing_count"].as_u64(), Some(1));
    // 2D snapshots carry x,y,u columns
    let snap = std::fs::read_to_string(dir.path().join("out/solution_0.csv")).unwrap();
    assert!(snap.starts_with("x,y,u\n"));
    assert_eq!(snap.lines().count(), 1 + 13 * 13);
}
