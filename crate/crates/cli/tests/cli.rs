use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const TINY: &str = r#"
seed = 5

[teacher.video]
layers = 1
heads = 2
width = 16
ffn_hidden = 32

[teacher.crop.temporal]
layers = 1
heads = 2
width = 16
ffn_hidden = 32

[teacher.gaze]
layers = 1
heads = 2
width = 16
ffn_hidden = 32

[teacher.train]
epochs = 2
batch_size = 4
clips_per_recording = 1

[student.encoder]
layers = 1
heads = 2
width = 16
ffn_hidden = 32

[student.train]
epochs = 2
batch_size = 8
clips_per_recording = 2
"#;

fn skillsight(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skillsight"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .env_remove("SKILLSIGHT_OUT")
        .env_remove("SKILLSIGHT_CACHE")
        .output()
        .expect("spawn skillsight")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn tree_digest(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((
                    p.strip_prefix(root).unwrap().display().to_string(),
                    fs::read(&p).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn full_pipeline_writes_reports_and_leaves_data_untouched() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("tiny.toml"), TINY).unwrap();

    ok(&skillsight(
        d,
        &[
            "synth",
            "--task",
            "distillation",
            "--n",
            "5",
            "--seed",
            "7",
            "--out",
            "data",
        ],
    ));
    let before = tree_digest(&d.join("data"));

    ok(&skillsight(
        d,
        &[
            "train-teacher",
            "--config",
            "tiny.toml",
            "--data",
            "data",
            "--out",
            "teacher",
        ],
    ));
    let ckpt = json(&d.join("teacher/teacher.json"));
    assert!(
        ckpt["lambdas"]["synth"].is_number(),
        "lambda per scenario in the checkpoint"
    );
    let lines = fs::read_to_string(d.join("teacher/metrics.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 2);

    ok(&skillsight(
        d,
        &[
            "train-student",
            "--teacher",
            "teacher/teacher.json",
            "--config",
            "tiny.toml",
            "--data",
            "data",
            "--out",
            "student",
        ],
    ));
    ok(&skillsight(
        d,
        &[
            "eval",
            "--model",
            "student/student.json",
            "--data",
            "data",
            "--out",
            "eval",
        ],
    ));
    let report = json(&d.join("eval/eval.json"));
    assert_eq!(report["model"], "student");
    assert!(report["report"]["accuracy"].is_number());
    assert!(report["report"]["majority_vote"].is_number());
    assert!(report["report"]["per_scenario"]["synth"]["majority_vote"].is_number());

    ok(&skillsight(
        d,
        &["analyze", "--data", "data", "--group-by", "gt", "--out", "analysis"],
    ));
    assert!(d.join("analysis/report.json").is_file());
    assert!(d.join("analysis/hist_gaze_depth.png").is_file());

    ok(&skillsight(
        d,
        &[
            "power",
            "--arch",
            "builtin:student-full",
            "--sensors",
            "eye",
            "--interval",
            "8",
            "--out",
            "power/report.json",
        ],
    ));
    let power = json(&d.join("power/report.json"));
    let total = power["report"]["rows"][0]["total_mw"].as_f64().unwrap();
    assert!((8.5..=10.5).contains(&total), "{total}");
    assert!(fs::read_to_string(d.join("power/report.csv"))
        .unwrap()
        .starts_with("name,"));

    for dir in ["data", "teacher", "student", "eval", "analysis", "power"] {
        let run = json(&d.join(dir).join("run.json"));
        assert!(run["wall_time_s"].as_f64().unwrap() >= 0.0, "{dir}");
        assert_eq!(run["version"], env!("CARGO_PKG_VERSION"));
    }
    assert_eq!(json(&d.join("student/run.json"))["seed"], 5);
    assert_eq!(tree_digest(&d.join("data")), before, "dataset mutated");
}

#[test]
fn unknown_config_key_exits_2_naming_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(&skillsight(
        d,
        &[
            "synth",
            "--task",
            "gaze-separable",
            "--n",
            "2",
            "--out",
            "data",
            "--no-frames",
        ],
    ));
    fs::write(
        d.join("bad.toml"),
        "[student.encoder]\nlayers = 1\nheads = 2\nwidth = 16\nffn_hidden = 32\nwidht = 3\n",
    )
    .unwrap();
    let out = skillsight(
        d,
        &[
            "train-student",
            "--no-distill",
            "--config",
            "bad.toml",
            "--data",
            "data",
            "--out",
            "s",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("widht"), "{err}");
    assert!(err.contains("student.encoder"), "{err}");
    assert!(!d.join("s").exists(), "nothing computed before validation");
}

#[test]
fn invalid_values_exit_2_and_runtime_failures_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(
        d.join("heads.toml"),
        "[student.encoder]\nlayers = 1\nheads = 3\nwidth = 16\nffn_hidden = 32\n",
    )
    .unwrap();
    let out = skillsight(
        d,
        &[
            "train-student",
            "--no-distill",
            "--config",
            "heads.toml",
            "--data",
            ".",
            "--out",
            "s",
        ],
    );
    assert_eq!(out.status.code(), Some(2));

    fs::create_dir(d.join("empty")).unwrap();
    let out = skillsight(d, &["eval", "--model", "missing.json", "--data", "empty", "--out", "e"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn synth_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    for out in ["a", "b"] {
        ok(&skillsight(
            d,
            &[
                "synth",
                "--task",
                "gaze-separable",
                "--n",
                "3",
                "--seed",
                "11",
                "--out",
                out,
                "--no-frames",
            ],
        ));
    }
    let strip = |v: Vec<(String, Vec<u8>)>| v.into_iter().filter(|(p, _)| p != "run.json").collect::<Vec<_>>();
    assert_eq!(strip(tree_digest(&d.join("a"))), strip(tree_digest(&d.join("b"))));
}

#[test]
fn output_inside_dataset_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(&skillsight(
        d,
        &[
            "synth",
            "--task",
            "gaze-separable",
            "--n",
            "2",
            "--out",
            "data",
            "--no-frames",
        ],
    ));
    let out = skillsight(d, &["analyze", "--data", "data", "--out", "data/analysis"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!d.join("data/analysis").exists());
}
