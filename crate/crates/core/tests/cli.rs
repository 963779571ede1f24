//! The command-line tool end to end.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use trekbench::report::load_report;

fn trekbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trekbench"))
        .args(args)
        .env_remove("TREKBENCH_WORKERS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = trekbench(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_report_and_replay() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let out = tmp.path().join("ope");
    ok(&["synth", "--out", s(&data), "--sequences", "3", "--seed", "5"]);
    let table = ok(&[
        "run", "--protocol", "ope", "--dataset", s(&data),
        "--tracker", "oracle=baseline:oracle",
        "--tracker", "tbyd=baseline:tbyd",
        "--workers", "2", "--out", s(&out),
    ]);
    assert!(table.lines().next().unwrap().contains("oracle"));
    let report = load_report(&out.join("report.json")).unwrap();
    assert_eq!(report.ranking.len(), 2);
    assert!(out.join("curves/tbyd.precision.csv").exists());

    // Regeneration from the stored runs gives the same bytes.
    let again = tmp.path().join("again/report.json");
    ok(&["report", "--runs", s(&out), "--out", s(&again)]);
    assert_eq!(fs::read(&again).unwrap(), fs::read(out.join("report.json")).unwrap());

    // The stored OPE runs replay as recorded results with identical scores.
    let replay = tmp.path().join("replay");
    let recorded = format!("tbyd=recorded:{}", s(&out.join("runs/tbyd")));
    ok(&["run", "--protocol", "ope", "--dataset", s(&data), "--tracker", &recorded, "--out", s(&replay)]);
    let replayed = load_report(&replay.join("report.json")).unwrap();
    assert_eq!(replayed.trackers[0].summary, report.trackers.iter().find(|t| t.name == "tbyd").unwrap().summary);
}

#[test]
fn every_protocol_runs_from_the_command_line() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    ok(&["synth", "--out", s(&data), "--sequences", "2"]);
    for (protocol, extra) in [
        ("oped", vec![]),
        ("mse", vec![]),
        ("rte", vec!["--latency", "period:2"]),
        ("rte", vec!["--latency", "const:0.05"]),
        ("hoi", vec![]),
        ("hoi", vec!["--oracle-init"]),
    ] {
        let out = tmp.path().join(format!("{protocol}{}", extra.len()));
        let mut args = vec!["run", "--protocol", protocol, "--dataset", s(&data), "--tracker", "baseline:ltmu", "--out", s(&out)];
        args.extend(extra);
        ok(&args);
        let report = load_report(&out.join("report.json")).unwrap();
        assert!(report.failures.is_empty(), "{protocol}: {:?}", report.failures);
        assert_eq!(report.ranking.len(), 1, "{protocol}");
    }
}

#[test]
fn dataset_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    ok(&["synth", "--out", s(&data), "--sequences", "2"]);
    let stats: serde_json::Value = serde_json::from_str(&ok(&["stats", "--dataset", s(&data)])).unwrap();
    assert_eq!(stats["sequences"], 2);
    let validation: serde_json::Value = serde_json::from_str(&ok(&["validate", "--dataset", s(&data)])).unwrap();
    assert_eq!(validation["attribute_mismatches"], serde_json::json!([]));
}

#[test]
fn hard_errors_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    ok(&["synth", "--out", s(&data), "--sequences", "1"]);
    let out = tmp.path().join("out");
    let cases: Vec<Vec<&str>> = vec![
        vec!["run", "--protocol", "xyz", "--dataset", s(&data), "--tracker", "baseline:oracle", "--out", s(&out)],
        vec!["run", "--protocol", "ope", "--dataset", "/nonexistent", "--tracker", "baseline:oracle", "--out", s(&out)],
        vec!["run", "--protocol", "ope", "--dataset", s(&data), "--tracker", "baseline:kcf", "--out", s(&out)],
        vec!["run", "--protocol", "mse", "--dataset", s(&data), "--tracker", "recorded:/x", "--out", s(&out)],
        vec!["run", "--protocol", "rte", "--dataset", s(&data), "--tracker", "baseline:oracle", "--latency", "fast", "--out", s(&out)],
        vec!["report", "--runs", "/nonexistent", "--out", s(&out)],
        vec!["validate", "--dataset", "/nonexistent"],
    ];
    for args in cases {
        let o = trekbench(&args);
        assert!(!o.status.success(), "{args:?} should fail");
        assert!(!o.stderr.is_empty());
    }
    // A broken sequence file is a hard error naming the file and line.
    fs::write(data.join("synth_000/groundtruth.txt"), "0,0,-5,10\n").unwrap();
    let o = trekbench(&["validate", "--dataset", s(&data)]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("groundtruth.txt"));
}
