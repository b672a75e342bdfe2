use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_godel-lattice");

fn fixture() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| std::fs::write(dir.path().join(name), text).unwrap();
    write("config.json", r#"{"machine": {"lengths": "2..4"}, "reading": {"lengths": "2..6"}}"#);
    write("superposed.json", r#"{"spin": 1, "sites": [{"site": [0,0,0], "amps": [[0.6,0],[0.8,0],[0,0]]}]}"#);
    dir
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).current_dir(dir).args(args).output().unwrap()
}

fn stderr_line(out: &Output) -> String {
    let text = String::from_utf8(out.stderr.clone()).unwrap();
    assert_eq!(text.lines().count(), 1, "stderr: {text}");
    text.trim_end().to_string()
}

fn read(dir: &Path, rel: &str) -> String {
    std::fs::read_to_string(dir.join(rel)).unwrap()
}

#[test]
fn encode_then_decode() {
    let dir = fixture();
    assert!(run(dir.path(), &["--config", "config.json", "encode", "--expr", "0110"]).status.success());
    let out = run(dir.path(), &["--config", "config.json", "--out-dir", "dec", "decode", "--state", "out/state.json"]);
    assert!(out.status.success());
    let decoded: serde_json::Value = serde_json::from_str(&read(dir.path(), "dec/decoded.json")).unwrap();
    assert_eq!(decoded["expression"], "0110");
    assert_eq!(decoded["mode"], "exact");
}

#[test]
fn outputs_lead_with_digest() {
    let dir = fixture();
    assert!(run(dir.path(), &["--config", "config.json", "read-cost", "--rule", "line"]).status.success());
    let json = read(dir.path(), "out/read_cost.json");
    assert!(json.starts_with("{\"config_digest\":\""), "{json}");
    let csv = read(dir.path(), "out/read_cost.csv");
    let digest: serde_json::Value = serde_json::from_str(&json).unwrap();
    let first = csv.lines().next().unwrap();
    assert_eq!(first, format!("# config_digest={}", digest["config_digest"].as_str().unwrap()));
    assert_eq!(csv.lines().nth(1), Some("n,worst_travel,worst_turns"));
}

#[test]
fn digest_ignores_out_dir_but_not_seed() {
    let dir = fixture();
    let digest = |out: &str, seed: &str| {
        let args = ["--config", "config.json", "--out-dir", out, "--seed", seed, "godel-number", "--expr", "01"];
        assert!(run(dir.path(), &args).status.success());
        let v: serde_json::Value = serde_json::from_str(&read(dir.path(), &format!("{out}/godel_number.json"))).unwrap();
        v["config_digest"].as_str().unwrap().to_string()
    };
    assert_eq!(digest("a", "5"), digest("b", "5"));
    assert_ne!(digest("a", "5"), digest("c", "6"));
}

#[test]
fn huge_numbers_round_trip() {
    let dir = fixture();
    let n = "98765432109876543210987654321098765432109876543210";
    assert!(run(dir.path(), &["--out-dir", "a", "godel-number", "--number", n]).status.success());
    let v: serde_json::Value = serde_json::from_str(&read(dir.path(), "a/godel_number.json")).unwrap();
    let expr = v["expression"].as_str().unwrap().to_string();
    assert!(run(dir.path(), &["--out-dir", "b", "godel-number", "--expr", &expr]).status.success());
    let text = read(dir.path(), "b/godel_number.json");
    assert!(text.contains(&format!("\"number\":{n}")), "{text}");
}

#[test]
fn config_errors_exit_2() {
    let dir = fixture();
    let out = run(dir.path(), &["--config", "missing.json", "encode", "--expr", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_line(&out).starts_with("error: config: "));

    let out = run(dir.path(), &["encode"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_line(&out).starts_with("error: config: "));

    let out = run(dir.path(), &["simulate", "--target", "01", "--lambda", "-1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_line(&out).contains("lambda"));

    std::fs::write(dir.path().join("typo.json"), r#"{"machine": {"lamda": 1}}"#).unwrap();
    let out = run(dir.path(), &["--config", "typo.json", "encode", "--expr", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_line(&out).contains("machine"));
}

#[test]
fn guard_exits_3() {
    let dir = fixture();
    let out = run(dir.path(), &["read-cost", "--lengths", "2..20"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr_line(&out).starts_with("error: guard: "));
}

#[test]
fn short_horizon_exits_4_after_writing_the_trace() {
    let dir = fixture();
    let out = run(dir.path(), &["simulate", "--target", "01", "--horizon", "2"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr_line(&out).starts_with("error: criterion: "));
    assert!(read(dir.path(), "out/trace.csv").lines().nth(1) == Some("t,p,pbar"));
}

#[test]
fn bad_input_exits_5() {
    let dir = fixture();
    let out = run(dir.path(), &["decode", "--state", "superposed.json"]);
    assert_eq!(out.status.code(), Some(5));
    assert!(stderr_line(&out).starts_with("error: input: "));

    let out = run(dir.path(), &["encode", "--expr", "012"]);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn unwritable_out_dir_exits_1() {
    let dir = fixture();
    std::fs::write(dir.path().join("blocker"), "").unwrap();
    let out = run(dir.path(), &["--out-dir", "blocker/sub", "encode", "--expr", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_line(&out).starts_with("error: io: "));
}

#[test]
fn sampling_depends_only_on_seed() {
    let dir = fixture();
    std::fs::write(
        dir.path().join("dense.json"),
        r#"{"spin": 1, "sites": [[0,0,0]], "basis": ["0", "1"], "amps": [[0.7071067811865476,0],[0.7071067811865476,0]]}"#,
    )
    .unwrap();
    let sample = |out: &str, seed: &str| {
        let args = ["--out-dir", out, "--seed", seed, "decode", "--state", "dense.json", "--draws", "1000"];
        assert!(run(dir.path(), &args).status.success());
        let v: serde_json::Value = serde_json::from_str(&read(dir.path(), &format!("{out}/decoded.json"))).unwrap();
        v
    };
    let a = sample("a", "3");
    assert_eq!(a, sample("b", "3"));
    assert_ne!(a["samples"], sample("c", "4")["samples"]);
    let zeros = a["counts"]["0"].as_u64().unwrap() as f64 / 1000.0;
    assert!((zeros - 0.5).abs() < 0.05, "{zeros}");
}
