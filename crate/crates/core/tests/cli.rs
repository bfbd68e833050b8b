use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn sigflip(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sigflip"))
        .args(args)
        .env_remove("SIGFLIP_THREADS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn report(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("JSON report")
}

fn write_config(dir: &Path, name: &str, value: &Value) -> String {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

fn csv(o: &Output) -> (Vec<String>, Vec<Vec<String>>) {
    let text = String::from_utf8(o.stdout.clone()).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

fn minkowski_config() -> Value {
    serde_json::json!({
        "mode": "metric",
        "dimension": 2,
        "coords": ["t", "x"],
        "domain": [[-1, 1], [-1, 1]],
        "grid": [5, 5],
        "metric": [["-1", "0"], ["0", "1"]]
    })
}

#[test]
fn analyze_kriele() {
    let o = sigflip(&["analyze", "gallery:kriele2d"]);
    assert_eq!(code(&o), 0);
    let r = report(&o);
    let h = r["h_points"].as_array().unwrap();
    assert!(!h.is_empty());
    for p in h {
        assert_eq!(p["radical_class"], "Tangent");
        assert_eq!(p["induced_signature"], serde_json::json!([0, 1, 0]));
        assert!(p["q"][1].as_f64().unwrap().abs() <= 1e-10);
    }
    assert_eq!(r["verdicts"]["positivity"]["pass"], true);
    assert_eq!(r["verdicts"]["biconditional"]["pass"], true);
    assert!(r.get("timings").is_none());
}

#[test]
fn analyze_transverse2d() {
    let o = sigflip(&["analyze", "gallery:transverse2d"]);
    assert_eq!(code(&o), 0);
    let r = report(&o);
    let h = r["h_points"].as_array().unwrap();
    assert!(!h.is_empty());
    for p in h {
        assert_eq!(p["radical_class"], "Transverse");
        assert_eq!(p["induced_signature"], serde_json::json!([0, 0, 1]));
    }
}

#[test]
fn analyze_minkowski_has_no_h() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "m.json", &minkowski_config());
    let o = sigflip(&["analyze", "--config", &cfg]);
    assert_eq!(code(&o), 0);
    let r = report(&o);
    assert!(r["h_points"].as_array().unwrap().is_empty());
    let grid = r["signature_grid"].as_array().unwrap();
    assert_eq!(grid.len(), 25);
    for cell in grid {
        assert_eq!(cell["signature"], serde_json::json!([1, 0, 1]));
    }
}

#[test]
fn report_key_order_is_fixed() {
    let o = sigflip(&["analyze", "gallery:transverse2d"]);
    let text = String::from_utf8(o.stdout).unwrap();
    let pos = |k: &str| text.find(&format!("\"{k}\"")).unwrap();
    assert!(pos("command") < pos("config_echo"));
    assert!(pos("config_echo") < pos("signature_grid"));
    assert!(pos("signature_grid") < pos("h_points"));
    assert!(pos("h_points") < pos("verdicts"));
}

#[test]
fn h_points_sorted_by_grid_index() {
    let r = report(&sigflip(&["analyze", "gallery:kriele2d"]));
    let idx: Vec<Vec<u64>> = r["h_points"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| {
            p["grid_index"]
                .as_array()
                .unwrap()
                .iter()
                .map(|v| v.as_u64().unwrap())
                .collect()
        })
        .collect();
    let mut sorted = idx.clone();
    sorted.sort();
    assert_eq!(idx, sorted);
}

#[test]
fn analyze_is_repeatable() {
    let a = sigflip(&["analyze", "gallery:kriele2d", "--seed", "7"]);
    let b = sigflip(&["analyze", "gallery:kriele2d", "--seed", "7"]);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(report(&a)["config_echo"]["seed"], 7);
}

#[test]
fn timings_are_opt_in() {
    let r = report(&sigflip(&["analyze", "gallery:transverse2d", "--timings"]));
    assert!(r["timings"]["total_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn transform_kriele_values() {
    let o = sigflip(&["transform", "gallery:kriele2d"]);
    assert_eq!(code(&o), 0);
    let (header, rows) = csv(&o);
    assert_eq!(header, ["t", "x", "gt_00", "gt_01", "gt_11", "f", "det_gt"]);
    assert_eq!(rows.len(), 121);
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "k.json",
        &serde_json::json!({
            "mode": "triple", "dimension": 2, "coords": ["t", "x"],
            "domain": [[-1, 1], [-1, 1]], "grid": [5, 5],
            "g": [["-1", "0"], ["0", "1"]], "V": ["1", "0"], "f": "1+x"
        }),
    );
    let (header, rows) = csv(&sigflip(&["transform", "--config", &cfg]));
    let row = rows
        .iter()
        .find(|r| num(&r[0]) == 0.0 && (num(&r[1]) - 0.5).abs() < 1e-12)
        .unwrap();
    assert!((num(&row[column(&header, "gt_00")]) - 0.5).abs() < 1e-12);
    assert!((num(&row[column(&header, "f")]) - 1.5).abs() < 1e-12);
    assert!((num(&row[column(&header, "det_gt")]) - 0.5).abs() < 1e-12);
}

#[test]
fn transform_transverse_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "t.json",
        &serde_json::json!({
            "mode": "triple", "dimension": 2, "coords": ["t", "x"],
            "domain": [[-1, 1], [-1, 1]], "grid": [9, 3],
            "g": [["-1", "0"], ["0", "1"]], "V": ["1", "0"], "f": "1+t"
        }),
    );
    let (header, rows) = csv(&sigflip(&["transform", "--config", &cfg]));
    let row = rows
        .iter()
        .find(|r| num(&r[0]) == 0.25 && num(&r[1]) == 0.0)
        .unwrap();
    assert_eq!(num(&row[column(&header, "gt_00")]), 0.25);
    assert_eq!(num(&row[column(&header, "f")]), 1.25);
}

#[test]
fn transform_with_zero_f_copies_g() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "z.json",
        &serde_json::json!({
            "mode": "triple", "dimension": 2, "coords": ["t", "x"],
            "domain": [[-1, 1], [-1, 1]], "grid": [4, 4],
            "g": [["-1", "0.5*x"], ["0.5*x", "1+x^2"]],
            "V": ["1", "0"], "f": "0"
        }),
    );
    let (header, rows) = csv(&sigflip(&["transform", "--config", &cfg]));
    for r in &rows {
        let x = num(&r[1]);
        assert_eq!(num(&r[column(&header, "gt_00")]), -1.0);
        assert!((num(&r[column(&header, "gt_01")]) - 0.5 * x).abs() < 1e-15);
        assert!((num(&r[column(&header, "gt_11")]) - (1.0 + x * x)).abs() < 1e-15);
    }
}

#[test]
fn transform_rejects_metric_mode() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "m.json", &minkowski_config());
    assert_eq!(code(&sigflip(&["transform", "--config", &cfg])), 2);
}

#[test]
fn decompose_kriele() {
    let o = sigflip(&["decompose", "gallery:kriele2d"]);
    assert_eq!(code(&o), 0);
    let (header, rows) = csv(&o);
    assert_eq!(
        header,
        ["t", "x", "f", "g_00", "g_01", "g_11", "extrapolated"]
    );
    for r in &rows {
        let x = num(&r[1]);
        assert!((num(&r[2]) - (1.0 + x)).abs() <= 1e-12);
        assert!((num(&r[3]) + 1.0).abs() <= 1e-9);
        assert_eq!(r[6] == "1", x.abs() < 1e-6);
    }
}

#[test]
fn decompose_rescaled_vector() {
    let o = sigflip(&["decompose", "gallery:kriele2d", "--vector", "2,0"]);
    assert_eq!(code(&o), 0);
    let (_, rows) = csv(&o);
    for r in &rows {
        let x = num(&r[1]);
        assert!((num(&r[2]) - (1.0 + 4.0 * x)).abs() <= 1e-12);
    }
}

#[test]
fn decompose_minkowski_gives_zero_f() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "m.json", &minkowski_config());
    let (_, rows) = csv(&sigflip(&["decompose", "--config", &cfg]));
    for r in &rows {
        assert_eq!(num(&r[2]), 0.0);
    }
}

#[test]
fn decompose_spacelike_vector_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "m.json", &minkowski_config());
    let o = sigflip(&["decompose", "--config", &cfg, "--vector", "0,1"]);
    assert_eq!(code(&o), 3);
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "NotTimelikeInLorentzSector");
}

#[test]
fn verify_gallery_passes() {
    for name in ["kriele2d", "transverse2d", "transverse3d"] {
        let o = sigflip(&["verify", &format!("gallery:{name}")]);
        assert_eq!(code(&o), 0, "{name}");
        let v = &report(&o)["verdicts"];
        for key in [
            "biconditional",
            "det_factorization",
            "positivity",
            "round_trip",
            "frame_identities",
            "rescaling",
        ] {
            assert_eq!(v[key]["pass"], true, "{name} {key}");
        }
    }
}

#[test]
fn verify_broken_normalization() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "b.json",
        &serde_json::json!({
            "mode": "triple", "dimension": 2, "coords": ["t", "x"],
            "domain": [[-1, 1], [-1, 1]], "grid": [3, 3],
            "g": [["-2", "0"], ["0", "1"]], "V": ["1", "0"], "f": "1+x"
        }),
    );
    let o = sigflip(&["verify", "--config", &cfg]);
    assert_eq!(code(&o), 3);
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "NormalizationError");
    assert_eq!(err["error"]["code"], 3);
}

#[test]
fn verify_failing_verdict_exits_one() {
    // A steep f amplifies rounding past the absolute rescaling tolerance.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "f.json",
        &serde_json::json!({
            "mode": "triple", "dimension": 2, "coords": ["t", "x"],
            "domain": [[-1, 1], [-1, 1]], "grid": [5, 6],
            "g": [["-1", "0"], ["0", "1"]], "V": ["1", "0"], "f": "1+1e5*x"
        }),
    );
    let o = sigflip(&["verify", "--config", &cfg]);
    assert_eq!(code(&o), 1);
    let r = report(&o);
    assert_eq!(r["verdicts"]["rescaling"]["pass"], false);
    assert_eq!(r["verdicts"]["round_trip"]["pass"], true);
}

#[test]
fn verify_metric_mode_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "m.json", &minkowski_config());
    assert_eq!(code(&sigflip(&["verify", "--config", &cfg])), 2);
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut bad_len = minkowski_config();
    bad_len["grid"] = serde_json::json!([5]);
    let mut bad_expr = minkowski_config();
    bad_expr["metric"][0][0] = serde_json::json!("-1+z");
    let mut bad_key = minkowski_config();
    bad_key["extra"] = serde_json::json!(1);
    let mut bad_domain = minkowski_config();
    bad_domain["domain"][1] = serde_json::json!([1, -1]);
    for (i, c) in [bad_len, bad_expr, bad_key, bad_domain].iter().enumerate() {
        let cfg = write_config(dir.path(), &format!("bad{i}.json"), c);
        let o = sigflip(&["analyze", "--config", &cfg]);
        assert_eq!(code(&o), 2, "case {i}");
        let err: Value = serde_json::from_slice(&o.stderr).unwrap();
        assert_eq!(err["error"]["code"], 2);
    }
    assert_eq!(
        code(&sigflip(&["analyze", "--config", "/nonexistent.json"])),
        2
    );
    assert_eq!(code(&sigflip(&["analyze", "gallery:unknown"])), 2);
    assert_eq!(code(&sigflip(&["analyze"])), 2);
    assert_eq!(code(&sigflip(&["frobnicate"])), 2);
    assert_eq!(code(&sigflip(&["--help"])), 0);
}

#[test]
fn analysis_error_exits_three() {
    // The zero metric has a two-dimensional kernel everywhere.
    let dir = tempfile::tempdir().unwrap();
    let mut c = minkowski_config();
    c["metric"] = serde_json::json!([["t^2", "t*x"], ["t*x", "x^2"]]);
    let cfg = write_config(dir.path(), "k.json", &c);
    let o = sigflip(&["analyze", "--config", &cfg]);
    assert_eq!(code(&o), 3);
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["code"], 3);
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = sigflip(&[
        "analyze",
        "gallery:kriele2d",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    let r: Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(r["command"], "analyze");
}

#[test]
fn bad_thread_count_is_config_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_sigflip"))
        .args(["analyze", "gallery:kriele2d"])
        .env("SIGFLIP_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}
