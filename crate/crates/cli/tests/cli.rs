use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use braidkit::io::{predictions_to_json, scene_from_json};
use braidkit::PredictionSet;
use serde_json::Value;

fn braidkit(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_braidkit"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) {
    let out = braidkit(args, cwd);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read_json(p: impl AsRef<Path>) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn csv_rows(p: impl AsRef<Path>) -> Vec<Vec<String>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(p).unwrap();
    r.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect()
}

fn files(dir: impl AsRef<Path>) -> Vec<PathBuf> {
    let mut v: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

fn synth(cwd: &Path, kinds: &str, n: &str, out: &str) {
    ok(&["synth", "--kinds", kinds, "--n", n, "--seed", "5", "--out", out], cwd);
}

#[test]
fn empty_label_run_succeeds_with_header_only() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("none")).unwrap();
    ok(&["label", "none", "--out", "lab"], dir.path());
    let text = std::fs::read_to_string(dir.path().join("lab/label_summary.csv")).unwrap();
    assert_eq!(text.lines().count(), 1);
    let m = read_json(dir.path().join("lab/manifest.json"));
    assert_eq!(m["command"], "label");
    assert!(m["failures"].as_array().unwrap().is_empty());
}

#[test]
fn parallel_scenes_never_cross() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "parallel", "20", "syn");
    ok(&["label", "syn/scenes", "--out", "lab"], dir.path());
    let rows = csv_rows(dir.path().join("lab/label_summary.csv"));
    let total = rows.last().unwrap();
    assert_eq!(total[0], "TOTAL");
    assert!(total[3].parse::<usize>().unwrap() > 0);
    assert_eq!(total[4], "0");
    assert_eq!(total[5], "0");
    assert_eq!(total[6], total[3]);
}

#[test]
fn labels_match_synth_sidecars() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "crossing_paths,overtake,yield,merge", "5", "syn");
    ok(&["label", "syn/scenes", "--out", "lab"], dir.path());
    let mut expected = [0usize; 3];
    for p in files(dir.path().join("syn/expected")) {
        let side = read_json(&p);
        for e in side["graph"]["edges"].as_array().unwrap() {
            let i = ["below", "over", "no_crossing"]
                .iter()
                .position(|c| e["label"] == *c)
                .unwrap();
            expected[i] += 1;
        }
        let stem = p.file_name().unwrap();
        let got = read_json(dir.path().join("lab/graphs").join(stem));
        let (a, b) = (got["edges"].as_array().unwrap(), side["graph"]["edges"].as_array().unwrap());
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            for key in ["src", "dst", "label"] {
                assert_eq!(x[key], y[key], "{}", p.display());
            }
            let (dx, dy) = (x["distance_t0"].as_f64().unwrap(), y["distance_t0"].as_f64().unwrap());
            assert!((dx - dy).abs() < 1e-9);
        }
    }
    let rows = csv_rows(dir.path().join("lab/label_summary.csv"));
    let total = rows.last().unwrap();
    let got: Vec<usize> = total[4..7].iter().map(|v| v.parse().unwrap()).collect();
    assert_eq!(got, expected);
}

#[test]
fn braid_words_match_synth_sidecars() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "crossing_paths,overtake,merge", "5", "syn");
    ok(&["braid-word", "syn/scenes", "--frame", "agent:0", "--out", "bw"], dir.path());
    let gens = |v: &Value| -> Vec<(u64, i64)> {
        v["word"]
            .as_array()
            .unwrap()
            .iter()
            .map(|l| (l["index"].as_u64().unwrap(), l["sign"].as_i64().unwrap()))
            .collect()
    };
    for p in files(dir.path().join("syn/expected")) {
        let side = read_json(&p)["braid_word"].clone();
        let got = read_json(dir.path().join("bw/words").join(p.file_name().unwrap()));
        assert_eq!(gens(&got), gens(&side), "{}", p.display());
        assert_eq!(got["permutation"], side["permutation"]);
        assert_eq!(got["frame"], "agent:0");
    }
}

#[test]
fn unknown_frame_agent_is_a_per_scene_failure() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "parallel", "2", "syn");
    let out = braidkit(&["braid-word", "syn/scenes", "--frame", "agent:nope", "--out", "bw"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let m = read_json(dir.path().join("bw/manifest.json"));
    let failures = m["failures"].as_array().unwrap();
    assert_eq!(failures.len(), 2);
    assert_eq!(failures[0]["code"], "missing_agent");
}

fn write_gt_predictions(dir: &Path, scenes: &str, out: &str) {
    std::fs::create_dir_all(dir.join(out)).unwrap();
    for p in files(dir.join(scenes)) {
        let scene = scene_from_json(&std::fs::read_to_string(&p).unwrap()).unwrap();
        let preds = PredictionSet::from_ground_truth(&scene, 6).unwrap();
        std::fs::write(dir.join(out).join(p.file_name().unwrap()), predictions_to_json(&preds)).unwrap();
    }
}

#[test]
fn ground_truth_predictions_score_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "crossing_paths,yield", "4", "syn");
    write_gt_predictions(dir.path(), "syn/scenes", "gt");
    ok(
        &["evaluate", "--scenes", "syn/scenes", "--predictions", "gt", "--out", "ev"],
        dir.path(),
    );
    let rows = csv_rows(dir.path().join("ev/per_scene.csv"));
    assert_eq!(rows.len(), 8);
    for r in &rows {
        for c in [4, 5, 6, 7] {
            assert_eq!(r[c].parse::<f64>().unwrap(), 0.0, "{r:?}");
        }
        assert_eq!(r[9], "1");
        assert_eq!(r[10], "1");
    }
    let agg = read_json(dir.path().join("ev/aggregate.json"));
    assert_eq!(agg["candidate"]["brsim_k"], 1.0);
}

#[test]
fn missing_predictions_are_unmatched_failures() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "yield", "3", "syn");
    write_gt_predictions(dir.path(), "syn/scenes", "gt");
    std::fs::remove_file(files(dir.path().join("gt"))[0].clone()).unwrap();
    let out = braidkit(
        &["evaluate", "--scenes", "syn/scenes", "--predictions", "gt", "--out", "ev"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let m = read_json(dir.path().join("ev/manifest.json"));
    assert_eq!(m["failures"][0]["code"], "unmatched_scene");
    assert_eq!(csv_rows(dir.path().join("ev/per_scene.csv")).len(), 2);
}

#[test]
fn baseline_filter_keeps_improved_scenes() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "crossing_paths,overtake", "4", "syn");
    write_gt_predictions(dir.path(), "syn/scenes", "gt");
    // a constant-position baseline never crosses anything
    std::fs::create_dir_all(dir.path().join("still")).unwrap();
    for p in files(dir.path().join("syn/scenes")) {
        let scene = scene_from_json(&std::fs::read_to_string(&p).unwrap()).unwrap();
        let gt = PredictionSet::from_ground_truth(&scene, 6).unwrap();
        let still = gt.with_agents(
            gt.agents()
                .iter()
                .map(|a| {
                    let mut a = a.clone();
                    let p0 = scene.agent(&a.agent_id).unwrap().position_at(0).unwrap();
                    for mode in &mut a.modes {
                        mode.iter_mut().for_each(|q| *q = p0);
                    }
                    a
                })
                .collect(),
        );
        std::fs::write(
            dir.path().join("still").join(p.file_name().unwrap()),
            predictions_to_json(&still.unwrap()),
        )
        .unwrap();
    }
    ok(
        &[
            "evaluate", "--scenes", "syn/scenes", "--predictions", "gt", "--baseline", "still",
            "--filter-improved", "--out", "ev",
        ],
        dir.path(),
    );
    let improved = csv_rows(dir.path().join("ev/per_scene_improved.csv"));
    assert!(!improved.is_empty());
    let agg = read_json(dir.path().join("ev/aggregate_improved.json"));
    assert_eq!(agg["candidate"]["num_scenes"].as_u64().unwrap() as usize, improved.len());
    assert!(agg["candidate"]["brsim_k"].as_f64().unwrap() > agg["baseline"]["brsim_k"].as_f64().unwrap());
}

fn tree_bytes(root: &Path, skip: &[&str]) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for p in files(&d) {
            if p.is_dir() {
                stack.push(p);
            } else if !skip.iter().any(|s| p.ends_with(s)) {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn outputs_are_byte_identical_across_runs_and_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for (out, jobs) in [("a", "1"), ("b", "1"), ("c", "4")] {
        ok(&["synth", "--n", "6", "--seed", "11", "--jobs", jobs, "--out", &format!("{out}/syn")], d);
        ok(&["label", &format!("{out}/syn/scenes"), "--jobs", jobs, "--out", &format!("{out}/lab")], d);
        ok(
            &["braid-word", &format!("{out}/syn/scenes"), "--jobs", jobs, "--out", &format!("{out}/bw")],
            d,
        );
    }
    // manifests record argv, timing and paths; label_summary records input paths
    let skip = ["manifest.json", "label_summary.csv"];
    let a = tree_bytes(&d.join("a"), &skip);
    assert!(a.len() > 60);
    assert_eq!(a, tree_bytes(&d.join("b"), &skip));
    assert_eq!(a, tree_bytes(&d.join("c"), &skip));
    let counts = |o: &str| -> Vec<Vec<String>> {
        csv_rows(d.join(o).join("lab/label_summary.csv"))
            .into_iter()
            .map(|mut r| {
                r.remove(1);
                r
            })
            .collect()
    };
    assert_eq!(counts("a"), counts("c"));
}

#[test]
fn train_toy_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["r1", "r2"] {
        ok(
            &["train-toy", "--scenes-per-kind", "4", "--epochs", "2", "--seed", "9", "--out", out],
            dir.path(),
        );
    }
    for f in ["trace.csv", "model.json", "aggregate.json"] {
        let a = std::fs::read(dir.path().join("r1").join(f)).unwrap();
        assert_eq!(a, std::fs::read(dir.path().join("r2").join(f)).unwrap(), "{f}");
    }
    let trace = std::fs::read_to_string(dir.path().join("r1/trace.csv")).unwrap();
    assert!(trace.starts_with('#'));
    assert_eq!(csv_rows(dir.path().join("r1/trace.csv")).len(), 2);
}

#[test]
fn invalid_config_is_fatal_with_field_name() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), r#"{"K": 0}"#).unwrap();
    let out = braidkit(&["train-toy", "--config", "c.json", "--out", "x"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains('K'));

    std::fs::write(dir.path().join("s.json"), r#"{"speed_range": [5, 1]}"#).unwrap();
    let out = braidkit(&["synth", "--config", "s.json", "--out", "y"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("speed_range"));
}

#[test]
fn report_collects_runs_in_long_format() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "yield", "3", "syn");
    ok(&["label", "syn/scenes", "--out", "lab"], dir.path());
    ok(&["train-toy", "--scenes-per-kind", "2", "--epochs", "1", "--out", "tr"], dir.path());
    ok(&["report", "lab", "tr", "--out", "rep"], dir.path());
    let rows = csv_rows(dir.path().join("rep/report.csv"));
    assert!(rows.iter().any(|r| r[0] == "lab" && r[3] == "TOTAL.below"));
    assert!(rows.iter().any(|r| r[0] == "tr" && r[2] == "1" && r[3] == "brsim_k"));
    assert!(rows.iter().all(|r| r[4].parse::<f64>().is_ok()));
}
