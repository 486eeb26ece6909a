use std::path::Path;
use std::process::{Command, Output};

fn xaidrop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xaidrop"))
        .args(args)
        .env("XAIDROP_LOG", "error")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn generate(dir: &Path) {
    let out = xaidrop(&[
        "generate-synthetic",
        "--kind",
        "ba-house",
        "--base-nodes",
        "40",
        "--houses",
        "6",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&xaidrop(&["--help"])), 0);
    assert_eq!(code(&xaidrop(&["train-node", "--help"])), 0);
    assert_eq!(code(&xaidrop(&["--version"])), 0);
}

#[test]
fn config_errors_exit_one() {
    assert_eq!(code(&xaidrop(&["train-node", "--bogus"])), 1);
    assert_eq!(code(&xaidrop(&["train-node", "--p", "1.5"])), 1);
    assert_eq!(code(&xaidrop(&["train-node", "--set", "drop.nope=1"])), 1);
    assert_eq!(code(&xaidrop(&["train-node", "--criterion", "Sometimes"])), 1);
    assert_eq!(code(&xaidrop(&["train-link", "--method", "node"])), 1);
    assert_eq!(code(&xaidrop(&["sweep", "--axis", "k", "--values", "1"])), 1);
}

#[test]
fn runtime_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nothing-here");
    let out = xaidrop(&["train-node", "--data", missing.to_str().unwrap(), "--seeds", "0"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn end_to_end_node_run_writes_results() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    generate(&data);
    let out_dir = dir.path().join("out");
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "seeds = [0]\n[train]\nepochs = 40\n[drop]\nmethod = \"node\"\np = 0.2\n",
    )
    .unwrap();
    let out = xaidrop(&[
        "train-node",
        "--config",
        cfg.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--epochs",
        "8",
        "--theta",
        "0.6",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = xaidrop::harness::read_results_csv(out_dir.join("results.csv")).unwrap();
    assert!(rows.iter().any(|(s, m, v)| *s == 0 && m == "epochs_run" && *v == 8.0));
    let summary = std::fs::read_to_string(out_dir.join("summary.md")).unwrap();
    assert!(summary.contains("p = 0.2, theta = 0.6"));
}

#[test]
fn sweep_link_and_explain_dump_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    generate(&data);
    let d = data.to_str().unwrap();

    let sweep_dir = dir.path().join("sweep");
    let out = xaidrop(&[
        "sweep",
        "--axis",
        "p",
        "--values",
        "0.1,0.5",
        "--data",
        d,
        "--seeds",
        "0",
        "--epochs",
        "3",
        "--method",
        "node",
        "--out",
        sweep_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let sweep = std::fs::read_to_string(sweep_dir.join("sweep.csv")).unwrap();
    assert!(sweep.starts_with("axis,value,metric,mean,std,runs\n"));
    assert!(sweep.contains("p,0.1,test_accuracy,") && sweep.contains("p,0.5,test_accuracy,"));

    let out = xaidrop(&[
        "train-link",
        "--data",
        d,
        "--seeds",
        "0",
        "--epochs",
        "3",
        "--method",
        "edge",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("test_auc"));

    let dump = dir.path().join("dump");
    let ckpt = dir.path().join("model.json");
    let out = xaidrop(&[
        "explain-dump",
        "--data",
        d,
        "--seeds",
        "0",
        "--epochs",
        "3",
        "--out",
        dump.to_str().unwrap(),
        "--save-checkpoint",
        ckpt.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let first = std::fs::read_to_string(dump.join("explanations.csv")).unwrap();
    assert_eq!(first.lines().count(), 40 + 5 * 6 + 1);
    let out = xaidrop(&[
        "explain-dump",
        "--data",
        d,
        "--out",
        dump.to_str().unwrap(),
        "--checkpoint",
        ckpt.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(dump.join("explanations.csv")).unwrap(), first);
}
