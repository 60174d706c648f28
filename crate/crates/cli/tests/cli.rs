use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

const BIN: &str = env!("CARGO_BIN_EXE_scene-forge");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env_remove("SCENE_FORGE_API_KEY")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn odd_eval_on_separable_corpus_is_perfect_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--seed", "42", "odd-eval", "--synthetic", "--condition", "all", "--out", "report.txt"];
    let first = run(dir.path(), &args);
    assert!(first.status.success(), "{}", stderr(&first));
    let a = fs::read(dir.path().join("report.txt")).unwrap();
    run(dir.path(), &args);
    let b = fs::read(dir.path().join("report.txt")).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("# scene-forge odd-eval | seed 42 | provider mock"), "{text}");
    let rows: Vec<&str> = text.lines().skip(3).collect();
    assert_eq!(rows.len(), 6, "{text}");
    for row in rows {
        assert!(row.ends_with("104  1.000"), "{row}");
    }
}

#[test]
fn sampling_without_a_seed_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["odd-eval", "--synthetic"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("seed"), "{}", stderr(&out));
}

#[test]
fn config_seed_applies_and_flag_overrides_it() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), "seed = 9\n").unwrap();
    let args = |extra: &[&'static str]| {
        let mut v = vec!["--config", "run.toml"];
        v.extend_from_slice(extra);
        v.extend(["sample-trials", "--synthetic", "--per-keyword", "1", "--out", "t.jsonl"]);
        v
    };
    assert!(run(dir.path(), &args(&[])).status.success());
    let from_file = fs::read_to_string(dir.path().join("t.jsonl")).unwrap();
    assert!(from_file.starts_with("# scene-forge sample-trials | seed 9 |"), "{from_file}");
    assert_eq!(from_file.lines().count(), 27);

    assert!(run(dir.path(), &args(&["--seed", "10"])).status.success());
    let from_flag = fs::read_to_string(dir.path().join("t.jsonl")).unwrap();
    assert!(from_flag.starts_with("# scene-forge sample-trials | seed 10 |"));
    assert_ne!(from_file.lines().nth(1), from_flag.lines().nth(1));

    fs::write(dir.path().join("bad.toml"), "sede = 1\n").unwrap();
    let bad = run(dir.path(), &["--config", "bad.toml", "odd-eval", "--synthetic"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn iaa_on_the_ratings_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let rows = [
        ("i1", 0, 0, 0),
        ("i2", 0, 0, 1),
        ("i3", 1, 1, 1),
        ("i4", 0, 1, 1),
    ];
    let mut tsv = String::from("item\trater\tcategory\n");
    for (item, a, b, c) in rows {
        for (r, cat) in [a, b, c].iter().enumerate() {
            tsv.push_str(&format!("{item}\tr{r}\t{cat}\n"));
        }
    }
    fs::write(dir.path().join("r.tsv"), tsv).unwrap();
    let out = run(dir.path(), &["iaa", "--ratings", "r.tsv", "--categories", "2"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let ac1_row = text.lines().find(|l| l.starts_with("Gwet's AC1")).unwrap();
    assert_eq!(ac1_row.split_whitespace().last(), Some("0.3333"), "{text}");
    assert!(text.contains("50.00%"), "{text}");

    let json_out = run(dir.path(), &["iaa", "--ratings", "r.tsv", "--categories", "2", "--format", "json"]);
    let v: Value = serde_json::from_slice(&json_out.stdout).unwrap();
    assert!((v["gwet_ac1"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(v["raters"], 3);
}

fn judgment(item: &str, who: &str, dim: &str, preferred: &str, rating: u8, reasons: &[&str]) -> Value {
    json!({
        "item_id": item,
        "dimension": dim,
        "annotator_id": who,
        "preferred": preferred,
        "rating": rating,
        "reasons": reasons,
        "elicitation_text": "written first",
        "blinding": "scene",
    })
}

#[test]
fn stats_reports_valid_judgments_and_flags_invalid_ones() {
    let dir = tempfile::tempdir().unwrap();
    let log = [
        judgment("x:engaged_events", "a", "engaged_events", "scene", 5, &[]),
        judgment("x:engaged_events", "b", "engaged_events", "atomic", 3, &["verbose", "false_info"]),
        judgment("x:evoked_emotions", "a", "evoked_emotions", "atomic", 4, &["not_applicable"]),
        judgment("x:evoked_emotions", "b", "evoked_emotions", "scene", 4, &[]),
    ]
    .iter()
    .map(Value::to_string)
    .collect::<Vec<_>>()
    .join("\n");
    fs::write(dir.path().join("judgments.jsonl"), log + "\n").unwrap();
    let out = run(dir.path(), &["stats", "--judgments", "judgments.jsonl"]);
    assert_eq!(out.status.code(), Some(1), "one judgment lacks reasons");
    assert!(stderr(&out).contains("x:evoked_emotions by b"), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("# scene-forge stats | seed none | provider mock | judgments 3"), "{text}");
    assert!(text.contains("Engaged Events") && text.contains("Evoked Emotions"), "{text}");

    let json_out = run(dir.path(), &["stats", "--judgments", "judgments.jsonl", "--format", "json"]);
    let v: Value = serde_json::from_slice(&json_out.stdout).unwrap();
    assert_eq!(v["overall"]["n"], 3);
    assert_eq!(v["dimensions"][0]["failure_breakdown"]["verbose"], 100.0);
}

#[test]
fn pipeline_from_generation_to_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let ok = |args: &[&str]| {
        let o = run(d, args);
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
        o
    };
    let g = ok(&["generate", "--sample", "--out", "scenes"]);
    assert!(stdout(&g).contains("scenes: 15/15 parse-valid (100.0%)"), "{}", stdout(&g));
    ok(&["atomic", "--sample", "--out", "atomic"]);
    assert_eq!(fs::read_dir(d.join("scenes")).unwrap().count(), 15);
    ok(&["--seed", "4", "sample-trials", "--sample", "--per-keyword", "1", "--keywords", "fire,raccoon", "--out", "trials.jsonl"]);
    let trials = fs::read_to_string(d.join("trials.jsonl")).unwrap();
    assert_eq!(trials.lines().filter(|l| !l.starts_with('#')).count(), 2);

    ok(&["embed", "--sample", "--scenes", "scenes", "--condition", "scene", "--out", "vec.json"]);
    assert_eq!(fs::read_to_string(d.join("vec.json.ids")).unwrap().lines().count(), 15);

    ok(&[
        "--seed", "4", "build-manifest", "--sample", "--scenes", "scenes", "--atomic", "atomic",
        "--trials", "trials.jsonl", "--annotators", "a1:expert,a2:crowd", "--out", "manifest.json",
    ]);
    let m: Value = serde_json::from_str(&fs::read_to_string(d.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["items"].as_array().unwrap().len(), 45);
    assert_eq!(m["sessions"].as_array().unwrap().len(), 2);

    // One scene gone: the item is skipped and the exit code says so.
    fs::remove_file(d.join("scenes/fire-a.json")).unwrap();
    let partial = run(d, &[
        "--seed", "4", "build-manifest", "--sample", "--scenes", "scenes", "--atomic", "atomic",
        "--annotators", "a1:expert", "--out", "m2.json",
    ]);
    assert_eq!(partial.status.code(), Some(1));
    assert!(stderr(&partial).contains("fire-a"), "{}", stderr(&partial));
    let m2: Value = serde_json::from_str(&fs::read_to_string(d.join("m2.json")).unwrap()).unwrap();
    assert_eq!(m2["items"].as_array().unwrap().len(), 42);

    let eval = ok(&["odd-eval", "--trials", "trials.jsonl", "--scenes", "scenes", "--condition", "text,scene"]);
    assert_eq!(stdout(&eval).lines().count(), 5, "{}", stdout(&eval));
}

#[test]
fn unknown_keyword_filter_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["--seed", "1", "sample-trials", "--sample", "--keywords", "owl", "--out", "t.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("t.jsonl").exists());
}
