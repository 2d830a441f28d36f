//! Runs the binary through a whole workflow on a tiny corpus.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn mvd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mvd"))
        .args(args)
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn c_files(dir: &Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "c"))
        .collect();
    files.sort();
    files
}

#[test]
fn corpus_analyze_train_detect_eval() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    let out = mvd(&["gen-corpus", "--out", s(&corpus), "--n", "1", "--seed", "2"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let files = c_files(&corpus);
    assert_eq!(files.len(), 10);

    let data = tmp.path().join("graphs.jsonl");
    let mut args = vec!["analyze", "--out", s(&data)];
    args.extend(files.iter().map(|p| s(p)));
    let out = mvd(&args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(std::fs::read_to_string(&data).unwrap().lines().count() >= 10);

    let dot = mvd(&["analyze", "--emit-dot", s(&files[0])]);
    assert!(String::from_utf8_lossy(&dot.stdout).contains("digraph"));

    let config = tmp.path().join("train.toml");
    std::fs::write(
        &config,
        "node_dim = 8\nbases = 2\nepochs = 2\ndoc2vec_epochs = 2\ninfer_steps = 5\n",
    )
    .unwrap();
    let model = tmp.path().join("model.bin");
    let out = mvd(&[
        "train",
        "--data",
        s(&data),
        "--config",
        s(&config),
        "--out",
        s(&model),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let detect = |extra: &[&str]| {
        let mut args = vec!["detect", "--model", s(&model), "--json", "--files"];
        args.extend(files.iter().map(|p| s(p)));
        args.extend(extra);
        mvd(&args)
    };
    let first = detect(&[]);
    let code = first.status.code().unwrap();
    assert!(
        code == 0 || code == 1,
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    let report: serde_json::Value = serde_json::from_slice(&first.stdout).unwrap();
    assert_eq!(report["findings"].as_array().unwrap().is_empty(), code == 0);
    assert_eq!(detect(&[]).stdout, first.stdout);

    let missing = tmp.path().join("missing.c");
    assert_eq!(detect(&[s(&missing)]).status.code(), Some(2));

    let eval = mvd(&["eval", "--model", s(&model), "--data", s(&data)]);
    assert!(
        eval.status.success(),
        "{}",
        String::from_utf8_lossy(&eval.stderr)
    );
    let text = String::from_utf8_lossy(&eval.stdout);
    assert!(
        text.contains("statements:") && text.contains("recall="),
        "{text}"
    );
}

#[test]
fn bad_inputs_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.c");
    std::fs::write(&bad, "void f( {\n").unwrap();
    assert_eq!(mvd(&["analyze", s(&bad)]).status.code(), Some(2));
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "learning_rate = 1\n").unwrap();
    let out = mvd(&[
        "train",
        "--data",
        s(&bad),
        "--config",
        s(&cfg),
        "--out",
        s(&tmp.path().join("m")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}
