use std::path::PathBuf;
use std::process::{Command, Output};

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn lsts(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lsts")).args(args).output().unwrap()
}

#[test]
fn graph_prints_the_doorkey_graph() {
    let dir = tempfile::tempdir().unwrap();
    let dot = dir.path().join("g.dot");
    let spec = configs().join("doorkey.spec");
    let out = lsts(&["graph", "--spec", spec.to_str().unwrap(), "--dot", dot.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("NODES 5\nINIT 0\n"), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("EDGE")).count(), 5);
    assert!(std::fs::read_to_string(dot).unwrap().contains("digraph"));
}

#[test]
fn unknown_config_field_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs().join("doorkey.toml")).unwrap().replace("eta = 0.95", "etaa = 0.95");
    let layout = configs().join("doorkey.layout");
    let spec = configs().join("doorkey.spec");
    let text = text
        .replace("\"doorkey.layout\"", &format!("{:?}", layout.to_str().unwrap()))
        .replace("\"doorkey.spec\"", &format!("{:?}", spec.to_str().unwrap()));
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, text).unwrap();
    let out = lsts(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("teacher"), "{err}");
}

#[test]
fn unknown_algorithm_exits_with_2() {
    let config = configs().join("doorkey.toml");
    let out = lsts(&["run", "--config", config.to_str().unwrap(), "--algo", "ppo"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unconverged_run_exits_with_3_and_compare_reads_it() {
    let dir = tempfile::tempdir().unwrap();
    let config = configs().join("doorkey.toml");
    let out_dir = dir.path().join("out");
    let out = lsts(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--algo",
        "lsts,dirl_c",
        "--seeds",
        "0,1",
        "--budget",
        "2000",
        "--out",
        out_dir.to_str().unwrap(),
        "--require-convergence",
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["trials.csv", "timings.csv", "curves.csv", "events.csv"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    let out = lsts(&["compare", "--in", out_dir.to_str().unwrap(), "--algos", "lsts,dirl_c"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("Welch"), "{text}");
}
