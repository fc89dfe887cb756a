use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn amnm(args: &[&str], threads: Option<usize>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_amnm"));
    cmd.args(args);
    match threads {
        Some(n) => cmd.env("AMNM_THREADS", n.to_string()),
        None => cmd.env_remove("AMNM_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn json_stdout(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn suite_on_defaults_passes() {
    let out = amnm(&["suite", "--seed", "7"], None);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = json_stdout(&out);
    assert_eq!(report["schema"], 1);
    assert_eq!(report["passed"], true);
}

#[test]
fn malformed_configs_exit_two() {
    let dir = TempDir::new().unwrap();
    let cases = [
        ("truncated.json", r#"{"schema": 1, "seed":"#),
        ("unknown.json", r#"{"schema": 1, "seed": 1, "colour": "red"}"#),
        ("schema.json", r#"{"schema": 2, "seed": 1}"#),
        ("noseed.json", r#"{"schema": 1}"#),
        ("dims.json", r#"{"schema": 1, "seed": 1, "dims": {"k": 9, "m": 1}}"#),
        ("command.json", r#"{"schema": 1, "seed": 1, "command": "defect"}"#),
    ];
    for (name, text) in cases {
        let path = write_config(dir.path(), name, text);
        let out = amnm(&["stabilize", "--config", &path], None);
        assert_eq!(code(&out), 2, "{name}: {}", stderr(&out));
        assert!(stderr(&out).contains("configuration error"), "{name}");
    }
    let missing = dir.path().join("absent.json");
    assert_eq!(code(&amnm(&["suite", "--config", missing.to_str().unwrap()], None)), 2);
}

#[test]
fn seed_is_required() {
    assert_eq!(code(&amnm(&["defect"], None)), 2);
    assert_eq!(code(&amnm(&["stabilize"], None)), 2);
}

#[test]
fn bad_thread_count_is_a_configuration_error() {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_amnm"));
    let out = cmd.args(["defect", "--seed", "1"]).env("AMNM_THREADS", "zero").output().unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn large_perturbation_is_refused() {
    let dir = TempDir::new().unwrap();
    let path = write_config(dir.path(), "big.json", r#"{"schema": 1, "seed": 5, "gamma_norm": 0.2}"#);
    let out = amnm(&["stabilize", "--config", &path], None);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("precondition"), "{}", stderr(&out));
}

#[test]
fn stabilize_writes_json_and_csv() {
    let dir = TempDir::new().unwrap();
    let out = amnm(&["stabilize", "--seed", "3", "--out", dir.path().to_str().unwrap()], None);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("stabilize.json")).unwrap()).unwrap();
    assert_eq!(report["report"]["converged"], true);
    let csv = fs::read_to_string(dir.path().join("stabilize.csv")).unwrap();
    assert!(csv.starts_with("iter,step_norm_lo,step_norm_hi,def_da_lo,def_da_hi,claim_step,claim_defect\n"));
    assert!(csv.lines().count() > 1);
}

#[test]
fn defect_report_orders_its_intervals() {
    let out = amnm(&["defect", "--seed", "11"], None);
    assert_eq!(code(&out), 0);
    let r = json_stdout(&out);
    for key in ["norm_phi", "def", "def_da", "def_ad", "def_dd"] {
        let (lo, hi) = (r[key]["lo"].as_f64().unwrap(), r[key]["hi"].as_f64().unwrap());
        assert!(0.0 <= lo && lo <= hi, "{key}: [{lo}, {hi}]");
    }
}

#[test]
fn reports_are_byte_identical_across_runs_and_threads() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "suite.json", r#"{"schema": 1, "seed": 9, "suite": {"instances": 3}}"#);
    let mut seen: Vec<(String, Vec<u8>)> = Vec::new();
    for (i, threads) in [Some(1), Some(8), None, Some(1)].into_iter().enumerate() {
        let out_dir = dir.path().join(format!("run{i}"));
        let out_str = out_dir.to_str().unwrap();
        assert_eq!(code(&amnm(&["suite", "--config", &config, "--out", out_str], threads)), 0);
        assert_eq!(code(&amnm(&["stabilize", "--seed", "4", "--out", out_str], threads)), 0);
        for name in ["suite.json", "stabilize.json", "stabilize.csv"] {
            let bytes = fs::read(out_dir.join(name)).unwrap();
            match seen.iter().find(|(n, _)| n == name) {
                Some((_, first)) => assert!(first == &bytes, "{name} differs in run {i}"),
                None => seen.push((name.to_owned(), bytes)),
            }
        }
    }
}

#[test]
fn tsirelson_norm_of_a_given_vector() {
    let out = amnm(&["tsirelson", "norm", "--vector", "[0, 1, 1, 1]"], None);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    // at most two sets may start at 2, so every split gives 1/2 · 2
    let r = json_stdout(&out);
    assert_eq!(r["norm"].as_f64().unwrap(), 1.0);
    let out = amnm(&["tsirelson", "norm", "--vector", "[0, 0, 1, 1, 1]"], None);
    // three singletons starting at 3 are admissible
    assert_eq!(json_stdout(&out)["norm"].as_f64().unwrap(), 1.5);
    assert_eq!(code(&amnm(&["tsirelson", "norm", "--vector", "not json"], None)), 2);
}

#[test]
fn clone_families_from_flags() {
    let out = amnm(&["clones", "--word", "0110", "--word", "0111", "--n", "12", "--horizon", "20"], None);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = json_stdout(&out);
    assert_eq!(r["passed"], true);
    let terms: Vec<u64> = serde_json::from_value(r["families"][0]["terms"].clone()).unwrap();
    assert_eq!(&terms[..5], &[1, 2, 5, 11, 22]);
    assert_eq!(r["intersections"][0]["intersection"]["count"], 4);
    assert_eq!(code(&amnm(&["clones", "--word", "01x0"], None)), 2);
}
