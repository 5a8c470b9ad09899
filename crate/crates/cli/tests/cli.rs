use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn cpcl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cpcl")).args(args).output().unwrap()
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/scenarios")
        .join(format!("{name}.json"))
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_accepts_bundled_scenarios() {
    for name in ["fig4_analog", "static_scene", "sparse_three_users", "multistatic_fix"] {
        let out = cpcl(&["validate", arg(&scenario(name))]);
        assert_eq!(out.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn malformed_scenario_exits_2_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let text = fs::read_to_string(scenario("static_scene")).unwrap();
    fs::write(&path, text.replacen("\"snr_db\"", "\"snr_dB\"", 1)).unwrap();
    for cmd in ["validate", "run"] {
        let out = cpcl(&[cmd, arg(&path)]);
        assert_eq!(out.status.code(), Some(2));
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains("line "), "{err}");
        assert!(err.contains("snr_dB"), "{err}");
    }
}

#[test]
fn missing_file_is_a_runtime_error() {
    let out = cpcl(&["run", "/nonexistent/scenario.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn zero_targets_give_empty_detection_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let out = cpcl(&["run", arg(&scenario("static_scene")), "--out", arg(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for pair in ["rx1", "rx2"] {
        let csv = fs::read_to_string(dir.path().join(format!("{pair}_detections.csv"))).unwrap();
        assert_eq!(csv.lines().count(), 1, "{csv}");
        assert!(dir.path().join(format!("{pair}.map")).exists());
    }
    assert!(dir.path().join("manifest.json").exists());
    assert!(!dir.path().join("positions.csv").exists());
}

#[test]
fn heatmap_renders_a_run_map() {
    let dir = tempfile::tempdir().unwrap();
    let out = cpcl(&["run", arg(&scenario("static_scene")), "--out", arg(dir.path()), "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let image = dir.path().join("rx1_30.pgm");
    let out = cpcl(&["heatmap", arg(&dir.path().join("rx1.map")), arg(&image), "--floor-db", "30"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let bytes = fs::read(&image).unwrap();
    assert!(bytes.starts_with(b"P5\n256 128\n255\n"));
    assert_eq!(bytes.len(), "P5\n256 128\n255\n".len() + 256 * 128);
}

#[test]
fn heatmap_rejects_garbage() {
    let dir = tempfile::tempdir().unwrap();
    let map = dir.path().join("x.map");
    fs::write(&map, b"not a map").unwrap();
    let out = cpcl(&["heatmap", arg(&map), arg(&dir.path().join("x.pgm"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unreadable map"));
}

#[test]
fn seed_flag_is_recorded_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let out = cpcl(&["run", arg(&scenario("sparse_three_users")), "--out", arg(d), "--seed", "41"]);
        assert_eq!(out.status.code(), Some(0));
    }
    for name in ["enb_rx.map", "enb_rx_detections.csv", "manifest.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let manifest = fs::read_to_string(a.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"grid\": 41"), "{manifest}");
    assert!(manifest.contains("\"noise\": 43"), "{manifest}");
}

#[test]
fn multistatic_run_writes_positions() {
    let dir = tempfile::tempdir().unwrap();
    let out = cpcl(&["run", arg(&scenario("multistatic_fix")), "--out", arg(dir.path())]);
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("positions.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("target_hint,x_m,y_m,residual_rms_m,n_pairs"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "drone");
    let (x, y): (f64, f64) = (row[1].parse().unwrap(), row[2].parse().unwrap());
    assert!((x - 110.0).hypot(y - 140.0) < 5.0, "{csv}");
    assert_eq!(row[4], "3");
}
