use std::path::Path;
use std::process::{Command, Output};

fn calderon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_calderon"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

#[test]
fn usage_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_arg(&tmp.path().join("x"));
    let bad_rho = calderon(&["--command", "analytic-sweep", "--rho", "1.5", "--out", &out]);
    assert_eq!(bad_rho.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad_rho.stderr).contains("ρ"));
    assert_eq!(calderon(&["--bogus"]).status.code(), Some(2));
    assert_eq!(calderon(&[]).status.code(), Some(2));
    assert_eq!(calderon(&["--config", "/nonexistent/run.json"]).status.code(), Some(2));
    assert_eq!(calderon(&["--help"]).status.code(), Some(0));
}

#[test]
fn selftest_reports_are_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let first = calderon(&["--command", "selftest", "--out", &out_arg(&a)]);
    let second = calderon(&["--command", "selftest", "--out", &out_arg(&b)]);
    assert_eq!(
        first.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&first.stdout)
    );
    assert_eq!(second.status.code(), Some(0));
    let ra = std::fs::read(a.join("selftest.txt")).unwrap();
    let rb = std::fs::read(b.join("selftest.txt")).unwrap();
    assert_eq!(ra, rb);
    assert!(String::from_utf8_lossy(&ra).contains("14 of 14 checks passed"));
    assert!(a.join("meta.json").is_file());
}

#[test]
fn injected_fault_fails_the_selftest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = calderon(&[
        "--command",
        "selftest",
        "--selftest-fault",
        "--out",
        &out_arg(tmp.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().any(|l| l.starts_with("FAIL transmission")), "{text}");
}

#[test]
fn sweep_writes_csv_and_svg() {
    let tmp = tempfile::tempdir().unwrap();
    let out = calderon(&["--command", "analytic-sweep", "--out", &out_arg(tmp.path())]);
    assert_eq!(out.status.code(), Some(0));
    for name in ["fig4_left", "fig4_right"] {
        let csv = std::fs::read_to_string(tmp.path().join(format!("{name}.csv"))).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap().split(',').count(), 5);
        assert_eq!(lines.count(), 151);
    }
    let right = std::fs::read_to_string(tmp.path().join("fig5_right.csv")).unwrap();
    assert_eq!(right.lines().count(), 1 + 12 * 4);
    for name in ["fig4_left", "fig4_right", "fig5_left", "fig5_right"] {
        let svg = std::fs::read_to_string(tmp.path().join(format!("{name}.svg"))).unwrap();
        assert!(svg.starts_with("<svg") && svg.contains(r#"width="640" height="480""#));
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}

#[test]
fn forward_then_reconstruct_from_file() {
    let tmp = tempfile::tempdir().unwrap();
    let fwd = tmp.path().join("fwd");
    let status = calderon(&["--command", "forward", "--backend", "analytic", "--out", &out_arg(&fwd)]);
    assert_eq!(status.status.code(), Some(0));
    let config = tmp.path().join("run.json");
    let datum = fwd.join("datum.csv");
    std::fs::write(&config, format!(r#"{{"datum": {:?}}}"#, datum.to_str().unwrap())).unwrap();
    let rec = tmp.path().join("rec");
    let status = calderon(&[
        "--config",
        config.to_str().unwrap(),
        "--command",
        "reconstruct",
        "--backend",
        "analytic",
        "--out",
        &out_arg(&rec),
    ]);
    assert_eq!(
        status.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    let kappa = std::fs::read_to_string(rec.join("kappa.csv")).unwrap();
    assert_eq!(kappa.lines().count(), 5);
}

#[test]
fn meta_json_replays_a_run() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let first = calderon(&[
        "--command",
        "forward",
        "--backend",
        "cm",
        "--mesh-h",
        "0.1",
        "--J",
        "6",
        "--out",
        &out_arg(&a),
    ]);
    assert_eq!(first.status.code(), Some(0));
    let meta = a.join("meta.json");
    let second = calderon(&["--config", meta.to_str().unwrap(), "--out", &out_arg(&b)]);
    assert_eq!(second.status.code(), Some(0));
    let nd_a = std::fs::read(a.join("nd.csv")).unwrap();
    assert_eq!(nd_a, std::fs::read(b.join("nd.csv")).unwrap());
    assert_eq!(
        String::from_utf8_lossy(&nd_a)
            .lines()
            .filter(|l| !l.starts_with('#'))
            .count(),
        6
    );
}
