use std::path::Path;
use std::process::{Command, Output};

fn realism(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_realism"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn demo_fixture_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    assert!(realism(&["demo-fixture", "demo"], root).status.success());
    let cfg = ["--config", "demo/config.toml"];
    let with = |rest: &[&'static str]| -> Vec<&'static str> { [&cfg[..], rest].concat() };

    let dry = realism(&with(&["--dry-run", "judge"]), root);
    assert!(dry.status.success());
    assert_eq!(stdout(&dry), "judge: 720 of 720 calls not cached\n");

    let early = realism(&with(&["score"]), root);
    assert_eq!(early.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&early.stderr).contains("run `fit` first"));

    let run = realism(&with(&["run"]), root);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(root.join("demo/out/report.json").is_file());
    assert!(root.join("demo/out/report.txt").is_file());

    let verify = realism(&with(&["verify"]), root);
    assert!(verify.status.success());
    assert!(stdout(&verify).contains("0 mismatches"));

    let analyze = realism(&with(&["analyze"]), root);
    assert!(analyze.status.success());
    assert!(stdout(&analyze).contains("qwen"));
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = realism(&["--config", "nope.toml", "fit"], dir.path());
    assert_eq!(missing.status.code(), Some(2));
    assert!(realism(&["demo-fixture", "d"], dir.path()).status.success());
    let unknown = realism(&["--config", "d/config.toml", "judge", "--judges", "gpt-9"], dir.path());
    assert_eq!(unknown.status.code(), Some(2));
}
