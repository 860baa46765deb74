//! End-to-end runs of the `asymsat` binary.

use std::path::Path;
use std::process::{Command, Output};

fn asymsat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_asymsat"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn oracle_solve_uses_competition_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let unsat = write(dir.path(), "u.cnf", "p cnf 1 2\n1 0\n-1 0\n");
    let o = asymsat(&["oracle-solve", &unsat]);
    assert_eq!(o.status.code(), Some(20));
    assert_eq!(stdout(&o).trim(), "s UNSATISFIABLE");

    let sat = write(dir.path(), "s.cnf", "p cnf 2 2\n1 2 0\n-1 2 0\n");
    let o = asymsat(&["oracle-solve", &sat]);
    assert_eq!(o.status.code(), Some(10));
    let v = stdout(&o).lines().find(|l| l.starts_with("v ")).unwrap().to_string();
    assert!(v.ends_with(" 0"));
    assert!(v.split_whitespace().any(|t| t == "2"));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(asymsat(&["oracle-solve", "/no/such/file.cnf"]).status.code(), Some(2));
    assert_eq!(asymsat(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(asymsat(&["gen-sr", "--bogus"]).status.code(), Some(2));
    assert_eq!(asymsat(&["convert", "--to-circuit", "a", "--to-cnf", "b"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.cnf", "p cnf 1 1\n1 -1 0\n");
    let o = asymsat(&["oracle-solve", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    let cfg = write(dir.path(), "c.toml", "epochs = 3\n");
    assert_eq!(asymsat(&["train", "--config", &cfg]).status.code(), Some(2));
    let cfg = write(dir.path(), "d.toml", "epochz = 3\n");
    assert_eq!(asymsat(&["train", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn convert_not_circuit_to_three_clauses() {
    let dir = tempfile::tempdir().unwrap();
    let c = write(dir.path(), "not.circ", "circuit 2 1\n0 I\n1 N 0\noutput 1\n");
    let o = asymsat(&["convert", "--to-cnf", &c]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("p cnf 2 3"));
    let cnf = write(dir.path(), "not.cnf", &text);
    assert_eq!(asymsat(&["oracle-solve", &cnf]).status.code(), Some(10));

    let o = asymsat(&["convert", "--to-circuit", &cnf]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("circuit "));
}

#[test]
fn generators_write_loadable_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().display().to_string();
    let sr = format!("{d}/sr");
    let o = asymsat(&["gen-sr", "--n", "3", "--n-max", "5", "--count", "6", "--seed", "4", "--out", &sr]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = std::fs::read_to_string(format!("{sr}/manifest.txt")).unwrap();
    assert!(manifest.contains("# seed = 4"));
    assert_eq!(manifest.lines().filter(|l| !l.starts_with('#')).count(), 6);
    let o = asymsat(&["oracle-solve", &format!("{sr}/cnf/000000.unsat.cnf")]);
    assert_eq!(o.status.code(), Some(20));
    let o = asymsat(&["oracle-solve", &format!("{sr}/cnf/000000.sat.cnf")]);
    assert_eq!(o.status.code(), Some(10));

    let aig = format!("{d}/aig");
    let o = asymsat(&["gen-aig", "--inputs", "4", "--gates", "20", "--count", "3", "--out", &aig]);
    assert_eq!(o.status.code(), Some(0));
    assert!(Path::new(&format!("{aig}/circuits/000002.circ")).exists());
}

#[test]
fn train_then_eval_including_ablation() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().display().to_string();
    let o = asymsat(&["gen-symmetric", "--out", &format!("{d}/sym")]);
    assert_eq!(o.status.code(), Some(0));
    let cfg = write(
        dir.path(),
        "train.toml",
        "epochs = 300\nseed = 1\nstop_when_solved = true\ntrain_manifest = \"sym/manifest.txt\"\ntest_manifest = \"sym/manifest.txt\"\n\n[model]\niterations = 5\nhidden_dim = 32\nmessage_hidden = 32\n",
    );
    let o = asymsat(&["train", "--config", &cfg, "--out", &format!("{d}/run")]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("100.00%"));
    for f in ["final.ckpt", "final.toml", "best.ckpt", "loss.csv", "config.toml", "report.jsonl"] {
        assert!(Path::new(&format!("{d}/run/{f}")).exists(), "{f}");
    }
    assert!(std::fs::read_to_string(format!("{d}/run/loss.csv")).unwrap().starts_with("step,loss\n0,"));

    let ck = format!("{d}/run/final.ckpt");
    let ds = format!("{d}/sym/manifest.txt");
    let o = asymsat(&["eval", "--checkpoint", &ck, "--dataset", &ds, "--jobs", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("100.00%"));
    let report = std::fs::read_to_string(format!("{d}/run/final.eval.jsonl")).unwrap();
    assert!(report.lines().next().unwrap().contains("\"kind\":\"config\""));

    let o = asymsat(&["eval", "--checkpoint", &ck, "--dataset", &ds, "--ablation", "--report", &format!("{d}/abl.jsonl")]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("  all        0       10    0.00%"), "{}", stdout(&o));
}

#[test]
fn gradcheck_passes() {
    let o = asymsat(&["gradcheck", "--seeds", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("all passed"));
}
