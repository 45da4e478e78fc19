use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_proposalkit"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn golden_report_is_reproduced_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    ok(&[
        "evaluate",
        "--gt",
        p(&fixture("golden_gt.json")),
        "--det",
        p(&fixture("golden_det.json")),
        "--out",
        p(&out),
    ]);
    assert_eq!(
        fs::read_to_string(&out).unwrap(),
        fs::read_to_string(fixture("golden_report.json")).unwrap()
    );
}

#[test]
fn iou_point_six_subcase() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let stdout = ok(&[
        "evaluate",
        "--gt",
        p(&fixture("subcase_gt.json")),
        "--det",
        p(&fixture("subcase_det.json")),
        "--out",
        p(&out),
    ])
    .stdout;
    let m = &read_json(&out)["metrics"];
    assert_eq!(m["AR@1"], 0.3);
    assert_eq!(m["AP@.5"], 1.0);
    assert_eq!(m["AP@.75"], 0.0);
    assert_eq!(m["AP"], 0.3);
    let text = String::from_utf8(stdout).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split_whitespace().collect();
    assert_eq!(
        header,
        ["AR@100", "AP", "AP@.5", "AP@.75", "AR@1", "AR@10", "AR@300", "AR@1000"]
    );
    let values: Vec<&str> = lines.next().unwrap().split_whitespace().collect();
    assert_eq!(values[..4], ["30.00", "30.00", "100.00", "0.00"]);
}

#[test]
fn gt_as_detections_and_empty_detections() {
    let dir = tempfile::tempdir().unwrap();
    let gt = read_json(&fixture("subcase_gt.json"));
    let dets: Vec<Value> = gt["annotations"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| serde_json::json!({"image_id": a["image_id"], "bbox": a["bbox"], "score": 1.0}))
        .collect();
    let det_path = dir.path().join("d.json");
    fs::write(&det_path, serde_json::to_string(&dets).unwrap()).unwrap();
    let out = dir.path().join("r.json");
    let gt_path = fixture("subcase_gt.json");
    ok(&[
        "evaluate",
        "--gt",
        p(&gt_path),
        "--det",
        p(&det_path),
        "--out",
        p(&out),
    ]);
    for (k, v) in read_json(&out)["metrics"].as_object().unwrap() {
        assert_eq!(v, 1.0, "{k}");
    }

    fs::write(&det_path, "[]").unwrap();
    ok(&[
        "evaluate",
        "--gt",
        p(&gt_path),
        "--det",
        p(&det_path),
        "--out",
        p(&out),
    ]);
    for (k, v) in read_json(&out)["metrics"].as_object().unwrap() {
        assert_eq!(v, 0.0, "{k}");
    }
}

#[test]
fn single_threshold_and_max_dets_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    ok(&[
        "evaluate",
        "--gt",
        p(&fixture("golden_gt.json")),
        "--det",
        p(&fixture("golden_det.json")),
        "--iou-thr",
        "0.5",
        "--max-dets",
        "1",
        "--out",
        p(&out),
    ]);
    let r = read_json(&out);
    assert_eq!(r["ap_per_threshold"].as_array().unwrap().len(), 1);
    assert_eq!(r["metrics"]["AR@10"], 0.75);
    assert!(r["metrics"].get("AP@.75").is_none());
}

#[test]
fn evaluate_reports_parse_errors_with_context() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(
        &bad,
        "[{\"image_id\": 1, \"bbox\": [0, 0, 1], \"score\": 1}]",
    )
    .unwrap();
    let out = run(&[
        "evaluate",
        "--gt",
        p(&fixture("golden_gt.json")),
        "--det",
        p(&bad),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("bad.json") && err.contains("[0].bbox"),
        "{err}"
    );

    let missing = run(&["evaluate", "--gt", "/nonexistent/gt.json", "--det", p(&bad)]);
    assert!(!missing.status.success());
}

#[test]
fn detections_on_unknown_images_are_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let det = dir.path().join("d.json");
    fs::write(
        &det,
        r#"[{"image_id": 42, "bbox": [0, 0, 5, 5], "score": 0.5}]"#,
    )
    .unwrap();
    let out = dir.path().join("r.json");
    let res = ok(&[
        "evaluate",
        "--gt",
        p(&fixture("subcase_gt.json")),
        "--det",
        p(&det),
        "--out",
        p(&out),
    ]);
    assert!(!read_json(&out)["warnings"].as_array().unwrap().is_empty());
    assert!(String::from_utf8_lossy(&res.stderr).contains("warning"));
}

#[test]
fn assign_on_bundled_fixture_has_full_overlap() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a.json");
    ok(&[
        "assign",
        "--gt",
        p(&fixture("assign_gt.json")),
        "--out",
        p(&out),
    ]);
    let r = read_json(&out);
    assert_eq!(r["summary"]["overlap_fraction"], 1.0);
    assert_eq!(r["summary"]["gts"], 5);
    assert!(r["warnings"].as_array().unwrap().is_empty());
    for img in r["images"].as_array().unwrap() {
        for g in img["gts"].as_array().unwrap() {
            assert!(g["cls_positives"].as_u64() <= g["reg_positives"].as_u64());
            assert!(g["reg_positives"].as_u64().unwrap() > 0);
        }
    }
}

#[test]
fn assign_on_empty_gt_gives_empty_diagnostics() {
    let out = ok(&["assign", "--gt", p(&fixture("empty_gt.json"))]);
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(r["images"].as_array().unwrap().is_empty());
    assert_eq!(r["summary"]["cls_positives"], 0);
}

#[test]
fn assign_warns_when_cls_top_k_exceeds_reg() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(
        &cfg,
        r#"{"cls_sampler": {"top_k": 30}, "reg_sampler": {"top_k": 10}}"#,
    )
    .unwrap();
    let out = ok(&[
        "assign",
        "--gt",
        p(&fixture("assign_gt.json")),
        "--config",
        p(&cfg),
    ]);
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    let warnings = r["warnings"].as_array().unwrap();
    assert_eq!(warnings.len(), 1);
    assert!(warnings[0].as_str().unwrap().contains("top_k"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
}

#[test]
fn config_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"reg_sampler": {"center_ratio": 0}}"#).unwrap();
    let out = run(&[
        "assign",
        "--gt",
        p(&fixture("assign_gt.json")),
        "--config",
        p(&cfg),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("reg_sampler.center_ratio"));

    fs::write(&cfg, r#"{"crop": {"margin": 20, "patch": 3}}"#).unwrap();
    let out = run(&[
        "assign",
        "--gt",
        p(&fixture("assign_gt.json")),
        "--config",
        p(&cfg),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("crop.patch"));
}

#[test]
fn assign_accepts_prediction_files() {
    let dir = tempfile::tempdir().unwrap();
    // 64 x 64 image with a single stride-32 level: 2 x 2 anchors.
    let gt = dir.path().join("gt.json");
    fs::write(
        &gt,
        r#"{"images": [{"id": 1, "width": 64, "height": 64}],
            "annotations": [{"id": 1, "image_id": 1, "bbox": [0, 0, 40, 40], "iscrowd": 0}],
            "categories": []}"#,
    )
    .unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"pyramid": {"strides": [32], "base_scale": 1}}"#).unwrap();
    let pred = dir.path().join("p.json");
    fs::write(
        &pred,
        r#"[{"image_id": 1, "scores": [0.9, 0.1, 0.1, 0.1],
             "boxes": [[0, 0, 40, 40], [32, 0, 32, 32], [0, 32, 32, 32], [32, 32, 32, 32]]}]"#,
    )
    .unwrap();
    let out = ok(&[
        "assign",
        "--gt",
        p(&gt),
        "--config",
        p(&cfg),
        "--pred",
        p(&pred),
    ]);
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["images"][0]["num_anchors"], 4);
    assert_eq!(r["images"][0]["gts"][0]["cls_positives"], 1);

    fs::write(
        &pred,
        r#"[{"image_id": 1, "scores": [0.9], "boxes": [[0, 0, 4, 4]]}]"#,
    )
    .unwrap();
    let out = run(&[
        "assign",
        "--gt",
        p(&gt),
        "--config",
        p(&cfg),
        "--pred",
        p(&pred),
    ]);
    assert!(!out.status.success());
}

#[test]
fn synth_is_deterministic_and_zero_jitter_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        ok(&[
            "synth",
            "--seed",
            "11",
            "--n-images",
            "40",
            "--jitter",
            "0",
            "--out",
            p(d),
        ]);
    }
    for f in ["gt.json", "detections.json"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let out = dir.path().join("r.json");
    ok(&[
        "evaluate",
        "--gt",
        p(&a.join("gt.json")),
        "--det",
        p(&a.join("detections.json")),
        "--out",
        p(&out),
    ]);
    let m = &read_json(&out)["metrics"];
    // At most 15 boxes per image, so every budget from 100 up is uncapped.
    for k in ["AP", "AP@.5", "AP@.75", "AR@100", "AR@300", "AR@1000"] {
        assert_eq!(m[k], 1.0, "{k}");
    }
}

#[test]
fn heavy_jitter_scores_below_one() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "synth",
        "--seed",
        "5",
        "--n-images",
        "30",
        "--jitter",
        "0.5",
        "--out",
        p(dir.path()),
    ]);
    let out = dir.path().join("r.json");
    ok(&[
        "evaluate",
        "--gt",
        p(&dir.path().join("gt.json")),
        "--det",
        p(&dir.path().join("detections.json")),
        "--out",
        p(&out),
    ]);
    for (k, v) in read_json(&out)["metrics"].as_object().unwrap() {
        assert!(v.as_f64().unwrap() < 1.0, "{k} = {v}");
    }
}

#[test]
fn nms_command_filters_per_image() {
    let dir = tempfile::tempdir().unwrap();
    let det = dir.path().join("d.json");
    fs::write(
        &det,
        r#"[
            {"image_id": 2, "bbox": [0, 0, 10, 10], "score": 0.9},
            {"image_id": 1, "bbox": [1, 1, 9, 9], "score": 0.8},
            {"image_id": 1, "bbox": [0, 0, 10, 10], "score": 0.9},
            {"image_id": 1, "bbox": [50, 50, 10, 10], "score": 0.3}
        ]"#,
    )
    .unwrap();
    let out = dir.path().join("o.json");
    ok(&[
        "nms",
        "--det",
        p(&det),
        "--iou-thr",
        "0.5",
        "--out",
        p(&out),
    ]);
    let kept = read_json(&out);
    let ids: Vec<u64> = kept
        .as_array()
        .unwrap()
        .iter()
        .map(|d| d["image_id"].as_u64().unwrap())
        .collect();
    assert_eq!(ids, [1, 1, 2]);
    assert_eq!(kept[0]["score"], 0.9);
    assert_eq!(kept[1]["score"], 0.3);

    // IoU of the overlapping pair is 81/100, above the 0.8 default.
    ok(&["nms", "--det", p(&det), "--out", p(&out)]);
    assert_eq!(read_json(&out).as_array().unwrap().len(), 3);
    ok(&[
        "nms",
        "--det",
        p(&det),
        "--iou-thr",
        "0.9",
        "--max-dets",
        "1",
        "--out",
        p(&out),
    ]);
    assert_eq!(read_json(&out).as_array().unwrap().len(), 2);
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "synth",
        "--seed",
        "9",
        "--n-images",
        "60",
        "--out",
        p(dir.path()),
    ]);
    let mut reports = Vec::new();
    for threads in ["1", "4"] {
        let out = dir.path().join(format!("r{threads}.json"));
        let res = bin()
            .env("PROPOSALKIT_THREADS", threads)
            .args([
                "evaluate",
                "--gt",
                p(&dir.path().join("gt.json")),
                "--det",
                p(&dir.path().join("detections.json")),
                "--out",
                p(&out),
            ])
            .output()
            .unwrap();
        assert!(res.status.success());
        reports.push((fs::read(&out).unwrap(), res.stdout));
    }
    assert_eq!(reports[0], reports[1]);

    let bad = bin()
        .env("PROPOSALKIT_THREADS", "0")
        .args(["assign", "--gt", p(&fixture("empty_gt.json"))])
        .output()
        .unwrap();
    assert!(!bad.status.success());
}
