use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qseg(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qseg"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

/// Small corpus plus gate and segment models, all in exact mode.
fn trained(dir: &Path) {
    let steps: [&[&str]; 3] = [
        &["synth-gen", "--count", "24", "--seed", "3", "--out-dir", "corpus"],
        &[
            "--shots",
            "0",
            "train-image-clf",
            "--corpus",
            "corpus",
            "--max-iters",
            "60",
            "--out-dir",
            "gate",
        ],
        &[
            "--shots",
            "0",
            "train-segment-clf",
            "--corpus",
            "corpus",
            "--max-iters",
            "60",
            "--out-dir",
            "seg",
        ],
    ];
    for args in steps {
        let o = qseg(dir, args);
        assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn synth_gen_writes_a_loadable_corpus_and_a_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let o = qseg(tmp.path(), &["synth-gen", "--count", "5", "--out-dir", "c"]);
    assert_eq!(code(&o), 0);
    let c = tmp.path().join("c");
    for i in 0..5 {
        assert!(c.join(format!("images/img_{i:04}.png")).is_file());
        assert!(c.join(format!("masks/img_{i:04}.png")).is_file());
    }
    let samples = qseg::corpus::load_corpus(&c).unwrap();
    assert_eq!(samples.len(), 5);
    let index = json(c.join("corpus.json"));
    assert_eq!(index["images"].as_array().unwrap().len(), 5);

    let m = json(c.join("manifest.json"));
    assert_eq!(m["command"], "synth-gen");
    assert_eq!(m["exit_code"], 0);
    let outputs = m["outputs"].as_array().unwrap();
    assert_eq!(outputs.len(), 11);
    for f in outputs {
        let bytes = std::fs::read(c.join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), qseg::model_file::sha256_tag(&bytes));
    }
}

#[test]
fn pipeline_run_is_repeatable_and_evaluate_reports_every_image() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    trained(d);
    let run = |out: &str| {
        qseg(
            d,
            &[
                "--shots",
                "0",
                "pipeline-run",
                "--input",
                "corpus/images/img_0000.png",
                "--mask",
                "corpus/masks/img_0000.png",
                "--gate-model",
                "gate/model.json",
                "--segment-model",
                "seg/model.json",
                "--out-dir",
                out,
            ],
        )
    };
    assert_eq!(code(&run("a")), 0);
    assert_eq!(code(&run("b")), 0);
    for f in ["mask.png", "result.json", "candidates.png", "overlay.png"] {
        assert_eq!(
            std::fs::read(d.join("a").join(f)).unwrap(),
            std::fs::read(d.join("b").join(f)).unwrap(),
            "{f}"
        );
    }
    let r = json(d.join("a/result.json"));
    assert_eq!(r["width"], 50);
    assert!(r["iou"].is_number());

    let o = qseg(
        d,
        &[
            "--shots",
            "0",
            "--jobs",
            "2",
            "evaluate",
            "--corpus",
            "corpus",
            "--gate-model",
            "gate/model.json",
            "--segment-model",
            "seg/model.json",
            "--save-masks",
            "--out-dir",
            "ev",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let metrics = json(d.join("ev/metrics.json"));
    assert_eq!(metrics["images"].as_array().unwrap().len(), 24);
    let per_image = std::fs::read_to_string(d.join("ev/per_image.csv")).unwrap();
    assert_eq!(per_image.lines().count(), 25);
    assert!(d.join("ev/masks/img_0023.png").is_file());
}

#[test]
fn evaluate_does_not_depend_on_the_worker_count() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    trained(d);
    for (jobs, out) in [("1", "one"), ("3", "three")] {
        let o = qseg(
            d,
            &[
                "--shots",
                "100",
                "--jobs",
                jobs,
                "evaluate",
                "--corpus",
                "corpus",
                "--gate-model",
                "gate/model.json",
                "--segment-model",
                "seg/model.json",
                "--out-dir",
                out,
            ],
        );
        assert_eq!(code(&o), 0);
    }
    assert_eq!(
        std::fs::read(d.join("one/metrics.json")).unwrap(),
        std::fs::read(d.join("three/metrics.json")).unwrap()
    );
}

#[test]
fn usage_errors_exit_with_one_and_still_write_a_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let o = qseg(d, &["pipeline-run", "--input", "x.png", "--out-dir", "e"]);
    assert_eq!(code(&o), 1);
    let m = json(d.join("e/manifest.json"));
    assert_eq!(m["exit_code"], 1);
    assert_eq!(m["command"], "pipeline-run");

    let o = qseg(
        d,
        &["--shots", "10,100", "qmeans", "--input", "x.png", "--out-dir", "e2"],
    );
    assert_eq!(code(&o), 1);
    let o = qseg(d, &["qmeans", "--input", "x.png", "--k", "0", "--out-dir", "e3"]);
    assert_eq!(code(&o), 1);
    assert_eq!(json(d.join("e3/manifest.json"))["exit_code"], 1);
}

#[test]
fn help_exits_cleanly_without_a_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let o = qseg(tmp.path(), &["--help"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("pipeline-run"));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn bad_inputs_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let o = qseg(d, &["qmeans", "--input", "missing.png", "--out-dir", "e"]);
    assert_eq!(code(&o), 2);
    assert!(json(d.join("e/manifest.json"))["error"]
        .as_str()
        .unwrap()
        .contains("missing.png"));

    std::fs::write(d.join("f.csv"), "a,b,label\n1,2,1\n3,x,-1\n").unwrap();
    let o = qseg(d, &["train-image-clf", "--features", "f.csv", "--out-dir", "e2"]);
    assert_eq!(code(&o), 2);

    std::fs::write(d.join("model.json"), "{\"format\": \"qseg-model\"").unwrap();
    let o = qseg(
        d,
        &[
            "classify",
            "--model",
            "model.json",
            "--features",
            "f.csv",
            "--out-dir",
            "e3",
        ],
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn a_model_of_the_wrong_kind_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    trained(d);
    let o = qseg(
        d,
        &[
            "pipeline-run",
            "--input",
            "corpus/images/img_0000.png",
            "--gate-model",
            "seg/model.json",
            "--segment-model",
            "seg/model.json",
            "--out-dir",
            "e",
        ],
    );
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("segment-filter"));
}

#[test]
fn config_file_values_apply_and_command_line_flags_win() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(code(&qseg(d, &["synth-gen", "--count", "1", "--out-dir", "c"])), 0);
    std::fs::write(
        d.join("q.toml"),
        "shots = 0\nseed = 5\n[qmeans]\nk = 3\n[segment]\nk = 9\n",
    )
    .unwrap();
    let input = "c/images/img_0000.png";

    assert_eq!(
        code(&qseg(
            d,
            &["--config", "q.toml", "qmeans", "--input", input, "--out-dir", "a"]
        )),
        0
    );
    let a = json(d.join("a/clusters.json"));
    assert_eq!(a["config"]["k"], 3);
    assert_eq!(a["config"]["shots"], 0);

    let args = [
        "--config",
        "q.toml",
        "--shots",
        "7",
        "qmeans",
        "--input",
        input,
        "--k",
        "2",
        "--out-dir",
        "b",
    ];
    assert_eq!(code(&qseg(d, &args)), 0);
    let b = json(d.join("b/clusters.json"));
    assert_eq!(b["config"]["k"], 2);
    assert_eq!(b["config"]["shots"], 7);
    assert_eq!(json(d.join("b/manifest.json"))["seed"], 5);

    std::fs::write(d.join("bad.toml"), "no_such_flag = 1\n").unwrap();
    let o = qseg(
        d,
        &["--config", "bad.toml", "qmeans", "--input", input, "--out-dir", "e"],
    );
    assert_eq!(code(&o), 1);
}

#[test]
fn tabular_models_train_and_classify_feature_files() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let steps: [&[&str]; 3] = [
        &[
            "synth-gen",
            "--kind",
            "features",
            "--rows",
            "120",
            "--dims",
            "3",
            "--out-dir",
            "f",
        ],
        &[
            "--shots",
            "0",
            "train-image-clf",
            "--features",
            "f/features.csv",
            "--qubits",
            "3",
            "--max-iters",
            "80",
            "--out-dir",
            "m",
        ],
        &[
            "--shots",
            "0",
            "classify",
            "--model",
            "m/model.json",
            "--features",
            "f/features.csv",
            "--out-dir",
            "p",
        ],
    ];
    for args in steps {
        let o = qseg(d, args);
        assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(json(d.join("m/model.json"))["model"]["kind"], "tabular");
    let metrics = json(d.join("p/metrics.json"));
    assert_eq!(metrics["rows"], 120);
    assert!(metrics["accuracy"].as_f64().unwrap() > 0.8);
    let preds = std::fs::read_to_string(d.join("p/predictions.csv")).unwrap();
    assert_eq!(preds.lines().next(), Some("id,score,label,truth"));

    // Image inputs need an image-gate model.
    assert_eq!(code(&qseg(d, &["synth-gen", "--count", "1", "--out-dir", "c"])), 0);
    let o = qseg(
        d,
        &[
            "classify",
            "--model",
            "m/model.json",
            "--input",
            "c/images/img_0000.png",
            "--out-dir",
            "e",
        ],
    );
    assert_eq!(code(&o), 1);
}

#[test]
fn bench_distance_writes_one_row_per_protocol_shots_and_c() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let o = qseg(
        d,
        &[
            "--shots",
            "10,1000",
            "bench-distance",
            "--protocol",
            "swap,overlap",
            "--c",
            "0,200",
            "--p",
            "0,100,255",
            "--seeds",
            "4",
            "--plots",
            "--out-dir",
            "b",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mut r = csv::Reader::from_path(d.join("b/distance_error.csv")).unwrap();
    assert_eq!(
        r.headers().unwrap().iter().collect::<Vec<_>>(),
        ["protocol", "shots", "c", "mean_abs_err", "std_err_abs", "seed_count"]
    );
    assert_eq!(r.records().count(), 8);
    assert!(d.join("b/distance_error.png").is_file());
}
