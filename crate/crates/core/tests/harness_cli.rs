use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_filterlab")).args(args).output().unwrap()
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    cli(&args)
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn summary(out: &Path, stem: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join(format!("{stem}.json"))).unwrap()).unwrap()
}

const LR: &str = r#"{
  "graph": {"type": "chain", "n": 6},
  "model": {"type": "tfim", "j": 1.0, "g": 2.0},
  "experiment": {"kind": "lr", "b": 0.5, "b_prime": 1.0,
    "a": {"pauli": "X", "sites": [0]}, "b_obs": {"pauli": "X", "sites": [4]},
    "t_max": 1.0, "points": 6}
}"#;

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "cluster.json",
        r#"{
  "seed": 9,
  "graph": {"type": "chain", "n": 8, "periodic": true},
  "model": {"type": "tfim", "j": 1.0, "g": 2.0},
  "experiment": {"kind": "cluster", "random_states": 4, "pairs": [
    [{"pauli": "Z", "sites": [0]}, {"pauli": "Z", "sites": [2]}],
    [{"pauli": "Z", "sites": [0]}, {"pauli": "Z", "sites": [3]}],
    [{"pauli": "Z", "sites": [0]}, {"pauli": "Z", "sites": [4]}]
  ]}
}"#,
    );
    let mut csv = Vec::new();
    let mut json = Vec::new();
    for (k, threads) in [None, Some("1"), Some("2")].into_iter().enumerate() {
        let out = dir.path().join(format!("run{k}"));
        let extra: Vec<&str> = threads.map(|t| vec!["--threads", t]).unwrap_or_default();
        let o = run(&config, &out, &extra);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        csv.push(std::fs::read(out.join("cluster.csv")).unwrap());
        json.push(std::fs::read(out.join("cluster.json")).unwrap());
    }
    assert!(csv.windows(2).all(|w| w[0] == w[1]));
    assert!(json.windows(2).all(|w| w[0] == w[1]));
    let text = String::from_utf8(csv[0].clone()).unwrap();
    assert!(text.starts_with("x,value,bound,margin\n"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "liou.json",
        r#"{
  "seed": 1,
  "graph": {"type": "chain", "n": 5},
  "model": {"type": "tfim", "j": 1.0, "g": 2.0},
  "experiment": {"kind": "liouvillian", "check": "residual", "beta_grid": [0.5, 0.8]}
}"#,
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run(&config, &a, &[]).status.success());
    assert!(run(&config, &b, &["--seed", "2"]).status.success());
    assert_eq!(summary(&a, "liou")["seed"], 1);
    assert_eq!(summary(&b, "liou")["seed"], 2);
    assert_ne!(
        std::fs::read(a.join("liou.csv")).unwrap(),
        std::fs::read(b.join("liou.csv")).unwrap()
    );
}

#[test]
fn bound_checks_write_a_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "lr.json", LR);
    let out = dir.path().join("out");
    let o = run(&config, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out, "lr");
    assert_eq!(s["kind"], "lr");
    assert_eq!(s["verdict"]["holds"], true);
    assert!(s["verdict"]["min_margin"].as_f64().unwrap() >= 0.0);
    assert_eq!(s["config"]["experiment"]["b_prime"], 1.0);
    let csv = std::fs::read_to_string(out.join("lr.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let cells: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cells.len(), 4);
        assert!(cells[1] <= cells[2]);
        assert_eq!(cells[3], cells[2] - cells[1]);
    }
}

#[test]
fn schema_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let bad_pair = write_config(dir.path(), "pair.json", &LR.replace("\"b\": 0.5", "\"b\": 1.0"));
    let o = run(&bad_pair, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("b_prime must exceed b"));

    let unknown = write_config(dir.path(), "unknown.json", &LR.replace("\"points\": 6", "\"points\": 6, \"colour\": 1"));
    assert_eq!(run(&unknown, &out, &[]).status.code(), Some(2));
    let broken = write_config(dir.path(), "broken.json", "{ not json");
    assert_eq!(run(&broken, &out, &[]).status.code(), Some(2));
    assert_eq!(cli(&["run"]).status.code(), Some(2));
    assert_eq!(run(&dir.path().join("missing.json"), &out, &[]).status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn assumption_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let gapless = LR.replace("\"experiment\"", "\"min_gap\": 50.0, \"experiment\"").replace(
        r#"{"kind": "lr", "b": 0.5, "b_prime": 1.0,
    "a": {"pauli": "X", "sites": [0]}, "b_obs": {"pauli": "X", "sites": [4]},
    "t_max": 1.0, "points": 6}"#,
        r#"{"kind": "liouvillian", "check": "residual", "beta_grid": [0.5]}"#,
    );
    let config = write_config(dir.path(), "gap.json", &gapless);
    let o = run(&config, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gap"));
}

#[test]
fn shipped_perturbation_config_gives_seven_distances() {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/lppl.json");
    let dir = tempfile::tempdir().unwrap();
    let o = run(&config, dir.path(), &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("lppl.csv")).unwrap();
    let xs: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(xs, (2..=8).map(f64::from).collect::<Vec<_>>());
    let s = summary(dir.path(), "lppl");
    assert!(s["fit"]["rate"].as_f64().unwrap() > 0.0);
}
