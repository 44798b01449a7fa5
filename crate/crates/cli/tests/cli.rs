use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use groundsynth::dataset::{read_records, BenchmarkSample, InstructionKind, Quality, ReadMode, ReviewVerdict};
use groundsynth::eval::oracle_model;
use groundsynth::review::ReviewStore;

fn captures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/captures")
}

fn groundsynth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_groundsynth"))
        .args(args)
        .env_remove("GROUNDSYNTH_CONFIG")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = groundsynth(args);
    assert!(
        out.status.success(),
        "{args:?} exited {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(groundsynth(&["parse"]).status.code(), Some(1));
    assert_eq!(groundsynth(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(groundsynth(&["--help"]).status.code(), Some(0));

    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope");
    let out = groundsynth(&[
        "synthesize",
        "--in",
        s(&captures()),
        "--out",
        s(&tmp.path().join("r.jsonl")),
        "--fixtures",
        s(&missing),
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn runtime_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = groundsynth(&["parse", "--in", s(tmp.path()), "--out", s(&tmp.path().join("p.jsonl"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn pipeline_from_captures_to_report() {
    let tmp = tempfile::tempdir().unwrap();
    let p = |name: &str| tmp.path().join(name);

    ok(&["parse", "--in", s(&captures()), "--out", s(&p("pool.jsonl"))]);
    ok(&["sample", "--in", s(&p("pool.jsonl")), "--out", s(&p("sampled.jsonl")), "-n", "10", "--seed", "3"]);
    let stats: serde_json::Value =
        serde_json::from_str(&ok(&["stats", "--in", s(&p("sampled.jsonl")), "--kind", "pool"])).unwrap();
    assert!(stats.is_object());

    ok(&[
        "synthesize",
        "--in",
        s(&captures()),
        "--pool",
        s(&p("sampled.jsonl")),
        "--out",
        s(&p("records.jsonl")),
        "--mode",
        "no_llm",
    ]);
    let records = std::fs::read_to_string(p("records.jsonl")).unwrap();
    assert_eq!(records.lines().count(), 1 + 10, "header plus one record per sampled element");

    let build = p("build");
    ok(&["bench-build", "--records", s(&p("records.jsonl")), "--out", s(&build), "--per-type", "2"]);
    {
        let store = ReviewStore::open(&build).unwrap();
        let tasks = store.tasks().to_vec();
        assert!(!tasks.is_empty());
        for (i, t) in tasks.iter().enumerate() {
            let v = ReviewVerdict {
                task_id: t.task_id.clone(),
                box_quality: if i == 0 { Quality::Serious } else { Quality::Valid },
                instruction_quality: if i == 1 { Quality::Slight } else { Quality::Valid },
                instruction_kind: InstructionKind::Explicit,
                corrected_bbox: None,
                corrected_instruction: (i == 1).then(|| "press the fixed target".to_string()),
                reviewer_tag: "test".into(),
                timestamp: String::new(),
            };
            store.submit(&t.task_id, &v).unwrap();
        }
    }
    ok(&["bench-assemble", "--build", s(&build), "--out", s(&p("bench.jsonl"))]);
    let bench: Vec<BenchmarkSample> = read_records(p("bench.jsonl"), ReadMode::Strict).unwrap().records;
    assert_eq!(bench.len(), ReviewStore::open(&build).unwrap().tasks().len() - 1);
    assert!(bench.iter().any(|b| b.instruction == "press the fixed target"));
    let stats: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p("stats.json")).unwrap()).unwrap();
    assert!(stats.is_object());
    for b in &bench {
        assert!(Path::new(&b.screenshot_path).is_file(), "{}", b.screenshot_path);
    }

    let preds = oracle_model(&bench, 1.0, 0).unwrap();
    groundsynth::dataset::write_records(p("preds.jsonl"), &preds).unwrap();
    let md = ok(&["eval", "--bench", s(&p("bench.jsonl")), "--pred", s(&p("preds.jsonl"))]);
    assert!(md.starts_with("# Grounding accuracy"));
    assert!(md.contains("Overall: 100.0%"));
    let json: serde_json::Value = serde_json::from_str(&ok(&[
        "eval",
        "--bench",
        s(&p("bench.jsonl")),
        "--pred",
        s(&p("preds.jsonl")),
        "--format",
        "json",
    ]))
    .unwrap();
    assert_eq!(json["correct"], bench.len());
}

#[test]
fn eval_fail_under_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let screen = groundsynth::ScreenDims::new(100, 100).unwrap();
    let bench: Vec<BenchmarkSample> = (0..10)
        .map(|i| {
            let bbox = groundsynth::BoundingBox::new(10, 10, 30, 30).unwrap();
            BenchmarkSample {
                sample_id: format!("s{i}"),
                screenshot_path: "x.png".into(),
                instruction: "click".into(),
                bbox,
                element_type: groundsynth::ElementType::Icon,
                platform: groundsynth::Platform::Web,
                implicitness: InstructionKind::Explicit,
                ratio: groundsynth::element_to_screen_ratio(bbox, screen).unwrap(),
            }
        })
        .collect();
    let bench_path = tmp.path().join("bench.jsonl");
    let pred_path = tmp.path().join("pred.jsonl");
    groundsynth::dataset::write_records(&bench_path, &bench).unwrap();
    groundsynth::dataset::write_records(&pred_path, &oracle_model(&bench, 0.4, 1).unwrap()).unwrap();

    let args = ["eval", "--bench", s(&bench_path), "--pred", s(&pred_path), "--fail-under"];
    let below = groundsynth(&[&args[..], &["0.5"]].concat());
    assert_eq!(below.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&below.stderr).contains("below"));
    assert_eq!(groundsynth(&[&args[..], &["0.4"]].concat()).status.code(), Some(0));
    assert_eq!(groundsynth(&[&args[..], &["1.5"]].concat()).status.code(), Some(1));
}
