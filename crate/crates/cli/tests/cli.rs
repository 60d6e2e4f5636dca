use std::path::Path;
use std::process::{Command, Output};

use relay_core::harness::config::Config;

fn relay(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relay"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn small_config(dir: &Path) -> String {
    let mut cfg = Config::default();
    cfg.study.users = 6;
    cfg.study.los_table_users = 100;
    cfg.study.los_table_samples = 10;
    cfg.study.clusters = 2;
    cfg.study.cluster_users = 4;
    let path = dir.join("small.toml");
    std::fs::write(&path, cfg.to_toml()).unwrap();
    path.to_str().unwrap().to_string()
}

fn stderr_json(o: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&o.stderr);
    let line = text
        .lines()
        .rev()
        .find(|l| l.starts_with('{'))
        .expect("json error line");
    serde_json::from_str(line).unwrap()
}

#[test]
fn search_writes_trajectory_and_result() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = relay(&["search", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("step,x,y,"));
    let result: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("result.json")).unwrap()).unwrap();
    assert_eq!(result["lengths"]["within_bound"], true);
    assert_eq!(
        result["waypoints"].as_u64().unwrap() as usize,
        csv.lines().count() - 1
    );
    assert!(std::fs::read_to_string(out.join("trajectory.svg"))
        .unwrap()
        .contains("<polyline"));
}

#[test]
fn explicit_user_and_af_cost() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = relay(&["search", "--out", out, "--user", "510,10", "--cost", "af"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let result: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("result.json")).unwrap()).unwrap();
    assert_eq!(result["cost"], "af_outage");
    assert_eq!(result["user"]["x"], 510.0);
}

#[test]
fn verify_passes_on_reference() {
    let dir = tempfile::tempdir().unwrap();
    let o = relay(&["verify", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("verify.json")).unwrap()).unwrap();
    for c in report["checks"].as_array().unwrap() {
        assert_eq!(c["passed"], true, "{c}");
    }
}

#[test]
fn missing_key_exits_one_naming_it() {
    let dir = tempfile::tempdir().unwrap();
    let text = Config::default().to_toml().replace("h_uav = 50.0\n", "");
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, text).unwrap();
    let o = relay(&[
        "map",
        "--config",
        path.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr_json(&o);
    assert_eq!(err["error"], "validation");
    assert!(err["message"].as_str().unwrap().contains("h_uav"), "{err}");
}

#[test]
fn invalid_value_exits_one_with_key() {
    let dir = tempfile::tempdir().unwrap();
    let text = Config::default()
        .to_toml()
        .replace("h_bs = 45.0", "h_bs = 20.0");
    let path = dir.path().join("low.toml");
    std::fs::write(&path, text).unwrap();
    let o = relay(&[
        "map",
        "--config",
        path.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr_json(&o)["key"], "scenario.h_bs");
}

#[test]
fn indoor_user_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let map = relay(&["map", "--out", dir.path().to_str().unwrap()]);
    assert!(map.status.success());
    let text = std::fs::read_to_string(dir.path().join("map.txt")).unwrap();
    let b: Vec<f64> = text
        .lines()
        .find(|l| l.starts_with("building"))
        .unwrap()
        .split_whitespace()
        .skip(1)
        .map(|v| v.parse().unwrap())
        .collect();
    let inside = format!("{},{}", (b[0] + b[2]) / 2.0, (b[1] + b[3]) / 2.0);
    let o = relay(&[
        "search",
        "--user",
        &inside,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr_json(&o)["key"], "user");
}

#[test]
fn studies_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        for kind in ["single", "cluster"] {
            let o = relay(&[
                "study",
                kind,
                "--config",
                &cfg,
                "--jobs",
                "2",
                "--out",
                out.to_str().unwrap(),
            ]);
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        }
    }
    for f in [
        "results.csv",
        "cdf.csv",
        "bars.csv",
        "lostable.csv",
        "cluster_results.csv",
        "cluster_bars.csv",
    ] {
        let x = std::fs::read(a.join(f)).unwrap();
        assert!(!x.is_empty(), "{f}");
        assert_eq!(x, std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let results = std::fs::read_to_string(a.join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 1 + 6 * 5);
}

#[test]
fn seed_flag_changes_the_map() {
    let dir = tempfile::tempdir().unwrap();
    let read = |seed: &str| {
        let out = dir.path().join(seed);
        assert!(
            relay(&["map", "--seed", seed, "--out", out.to_str().unwrap()])
                .status
                .success()
        );
        std::fs::read_to_string(out.join("map.txt")).unwrap()
    };
    assert_ne!(read("1"), read("2"));
}

#[test]
fn maps_emit_csv_and_heatmaps() {
    let dir = tempfile::tempdir().unwrap();
    let o = relay(&[
        "maps",
        "--user",
        "510,10",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("power_capacity.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 100 * 100);
    assert!(std::fs::read_to_string(dir.path().join("capacity_map.svg"))
        .unwrap()
        .contains("<polyline"));
}

#[test]
fn unknown_subcommand_is_rejected() {
    let o = relay(&["fly"]);
    assert_eq!(o.status.code(), Some(1));
}
