use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use ikiwisi_core::stats::{AnalysisReport, Outcome};
use ikiwisi_service::EvalReport;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
}

fn ikiwisi(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_ikiwisi"))
        .args(args)
        .env_remove("IKIWISI_DATA_DIR")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    out
}

fn ok(args: &[&str]) -> String {
    let out = ikiwisi(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn eval_prints_metrics_table() {
    let tiny = fixture("tiny");
    let dir = tiny.to_str().unwrap();
    let text = ok(&[
        "eval",
        "--data-dir",
        dir,
        "--model",
        "cached",
        "--segment",
        "s0",
        "--objects",
        "Car,Person",
    ]);
    assert!(text.contains("f1         0.666667"), "{text}");
    assert!(text.contains("tp                2"), "{text}");
    let gt = ok(&[
        "eval",
        "--data-dir",
        dir,
        "--model",
        "gt",
        "--segment",
        "s0",
        "--objects",
        "Car,Person,*Chair",
    ]);
    assert!(gt.contains("f1         1.000000"), "{gt}");
    assert!(gt.contains("objects    Car, Person, *Chair"), "{gt}");
}

#[test]
fn eval_json_honours_frames_and_spies() {
    let tiny = fixture("tiny");
    let json = ok(&[
        "eval",
        "--data-dir",
        tiny.to_str().unwrap(),
        "--model",
        "cached",
        "--segment",
        "s0",
        "--objects",
        "*Chair,Car",
        "--frames",
        "0-1",
        "--format",
        "json",
    ]);
    let r: EvalReport = serde_json::from_str(&json).unwrap();
    assert_eq!(r.frames, vec![0, 1]);
    assert_eq!(r.objects.last().unwrap().name, "Chair");
    assert_eq!(r.missing_spy_rows, vec!["Chair".to_string()]);
    // Car: tp at 0, fn at 1; Chair: two tn
    assert_eq!(
        (r.summary.counts.tp, r.summary.counts.fn_, r.summary.counts.tn),
        (1, 1, 2)
    );
}

#[test]
fn eval_rejects_bad_input() {
    let tiny = fixture("tiny");
    let dir = tiny.to_str().unwrap();
    for args in [
        vec![
            "eval",
            "--data-dir",
            dir,
            "--model",
            "nope",
            "--segment",
            "s0",
            "--objects",
            "Car",
        ],
        vec![
            "eval",
            "--data-dir",
            dir,
            "--model",
            "gt",
            "--segment",
            "s9",
            "--objects",
            "Car",
        ],
        vec![
            "eval",
            "--data-dir",
            dir,
            "--model",
            "gt",
            "--segment",
            "s0",
            "--objects",
            "Dragon",
        ],
        vec![
            "eval",
            "--data-dir",
            dir,
            "--model",
            "gt",
            "--segment",
            "s0",
            "--objects",
            "Car",
            "--frames",
            "0-7",
        ],
    ] {
        let out = ikiwisi(&args);
        assert!(!out.status.success(), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

fn write_csv(dir: &std::path::Path, rows: &[(&str, &str, u8, f64)]) -> PathBuf {
    let path = dir.join("ratings.csv");
    let mut text = String::from("rater_id,model_id,segment_id,rating,f1_star,completion_seconds\n");
    for (i, (rater, model, rating, f1)) in rows.iter().enumerate() {
        text.push_str(&format!("{rater},{model},seg{},{rating},{f1},\n", i % 3));
    }
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn analyze_constant_single_rater() {
    let dir = tempfile::tempdir().unwrap();
    let rows: Vec<_> = ["a", "b", "c"]
        .iter()
        .flat_map(|m| (0..3).map(move |_| ("r", *m, 50u8, 0.5)))
        .collect();
    let csv = write_csv(dir.path(), &rows);
    let out = dir.path().join("report.json");
    ok(&["analyze", csv.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let report: AnalysisReport<f64> = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report.records, 9);
    assert!(report.normalized.iter().all(|r| r.normalized == 0.5));
    assert!(matches!(report.kruskal_wallis, Outcome::NotComputed { .. }));
}

#[test]
fn analyze_flags_separated_models() {
    let dir = tempfile::tempdir().unwrap();
    let mut rows = Vec::new();
    for rater in ["r1", "r2", "r3", "r4", "r5", "r6"] {
        rows.push((rater, "good", 90u8, 0.9));
        rows.push((rater, "good", 100, 0.95));
        rows.push((rater, "random", 0, 0.3));
        rows.push((rater, "random", 10, 0.35));
    }
    let csv = write_csv(dir.path(), &rows);
    let text = ok(&["analyze", csv.to_str().unwrap()]);
    let report: AnalysisReport<f64> = serde_json::from_str(&text).unwrap();
    let kw = report.kruskal_wallis.value().unwrap();
    assert!(kw.p_value < 1e-4, "{}", kw.p_value);
    let pairs = report.posthoc.value().unwrap();
    assert_eq!(pairs.len(), 1);
    assert!(pairs[0].significant);
    assert!(report.model("random").unwrap().is_random);
}

#[test]
fn analyze_reports_malformed_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_csv(dir.path(), &[("r", "m", 55, 0.5)]);
    assert!(!ikiwisi(&["analyze", csv.to_str().unwrap()]).status.success());
}

#[test]
fn gen_fixture_then_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&[
        "gen-fixture",
        "--seed",
        "4",
        "--out",
        data.to_str().unwrap(),
        "--objects",
        "30",
        "--segments",
        "6",
    ]);
    let loaded = ikiwisi_service::load_data_dir(&data).unwrap();
    assert_eq!(loaded.models.len(), 5);
    assert_eq!(loaded.datasets["fixture"].segments.len(), 6);

    let segs: Vec<String> = loaded.datasets["fixture"]
        .segments
        .iter()
        .take(3)
        .map(|s| s.segment_id.clone())
        .collect();
    let config = serde_json::json!({
        "models": [
            {"model_id": "gt", "kind": "ground-truth"},
            {"model_id": "random", "kind": "random", "seed": 3}
        ],
        "segments": segs,
        "raters": 4,
        "seed": 9
    });
    let cfg = dir.path().join("sim.json");
    fs::write(&cfg, config.to_string()).unwrap();
    let csv = dir.path().join("sim.csv");
    let report = dir.path().join("sim-report.json");
    // first from the data directory, then from the built-in reference fixture
    for source in [Some(data.to_str().unwrap()), None] {
        let mut args = vec![
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            csv.to_str().unwrap(),
            "--report",
            report.to_str().unwrap(),
        ];
        match source {
            Some(d) => args.extend(["--data-dir", d]),
            None => {
                let mut c = config.clone();
                c["segments"] = serde_json::json!(["seg-01", "seg-02", "seg-03"]);
                fs::write(&cfg, c.to_string()).unwrap();
            }
        }
        ok(&args);
        let rows = fs::read_to_string(&csv).unwrap();
        assert_eq!(rows.lines().count(), 1 + 4 * 3 * 2);
        let r: AnalysisReport<f64> = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
        assert!(r.model("random").unwrap().median_normalized < r.model("gt").unwrap().median_normalized);
    }
}
