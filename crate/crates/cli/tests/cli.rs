use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn demo() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../resources/demo")
}

fn hytag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hytag")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn tag(config: &str, resources: &Path, input: &Path) -> Output {
    hytag(&["tag", "--config", config, "--resources", path(resources), "--in", path(input)])
}

#[test]
fn every_configuration_tags_the_demo() {
    for config in ["D0", "D1", "D2", "D3a", "D3b", "D4", "D5"] {
        let out = tag(config, &demo(), &demo().join("sample.txt"));
        assert_eq!(code(&out), 0, "{config}: {}", stderr(&out));
        assert!(String::from_utf8(out.stdout).unwrap().starts_with("\"<The>\"\n\t"));
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let first = tag("D3b", &demo(), &demo().join("sample.txt"));
    let second = tag("D3b", &demo(), &demo().join("sample.txt"));
    assert_eq!(code(&first), 0);
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn missing_grammar_is_a_resource_error() {
    let dir = TempDir::new().unwrap();
    for name in ["fine.lex", "guesser.rules", "policy.tok"] {
        fs::copy(demo().join(name), dir.path().join(name)).unwrap();
    }
    assert_eq!(code(&tag("D0", dir.path(), &demo().join("sample.txt"))), 0);
    let out = tag("D1", dir.path(), &demo().join("sample.txt"));
    assert_eq!(code(&out), 3);
    let msg = stderr(&out);
    assert!(msg.contains("grammar.cg") && msg.contains("cg"), "{msg}");
}

#[test]
fn malformed_corpus_is_a_data_error_with_line_number() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.cg");
    fs::write(&bad, "\"<a>\"\n\tX\nnot a word line\n").unwrap();
    let out = hytag(&["disambiguate", "--grammar", path(&demo().join("grammar.cg")), "--in", path(&bad)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(code(&hytag(&["frobnicate"])), 1);
    assert_eq!(code(&hytag(&["tag", "--config", "D9", "--resources", "."])), 1);
    let help = hytag(&["--help"]);
    assert_eq!(code(&help), 0);
    assert!(String::from_utf8_lossy(&help.stdout).contains("train-hmm"));
}

#[test]
fn analyze_then_disambiguate_matches_tag() {
    let dir = TempDir::new().unwrap();
    let analyzed = dir.path().join("d0.cg");
    let out = hytag(&[
        "analyze",
        "--lexicon",
        path(&demo().join("fine.lex")),
        "--guesser",
        path(&demo().join("guesser.rules")),
        "--policy",
        path(&demo().join("policy.tok")),
        "--in",
        path(&demo().join("sample.txt")),
        "--out",
        path(&analyzed),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(fs::read(&analyzed).unwrap(), tag("D0", &demo(), &demo().join("sample.txt")).stdout);

    let out = hytag(&[
        "disambiguate",
        "--grammar",
        path(&demo().join("grammar.cg")),
        "--tier",
        "grammar",
        "--in",
        path(&analyzed),
        "--trace",
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(out.stdout, tag("D1", &demo(), &demo().join("sample.txt")).stdout);
    assert!(!out.stderr.is_empty());
}

#[test]
fn train_hmm_writes_a_usable_model() {
    let dir = TempDir::new().unwrap();
    for name in ["fine.lex", "guesser.rules", "policy.tok", "grammar.cg", "coarse.lex", "coarse.rules", "mapping.map"] {
        fs::copy(demo().join(name), dir.path().join(name)).unwrap();
    }
    let model = dir.path().join("model.hmm");
    let out = hytag(&[
        "train-hmm",
        "--coarse-lexicon",
        path(&demo().join("coarse.lex")),
        "--coarse-guesser",
        path(&demo().join("coarse.rules")),
        "--bias",
        path(&demo().join("bias.txt")),
        "--corpus",
        path(&demo().join("train.txt")),
        "--iterations",
        "3",
        "--block",
        "4",
        "--out",
        path(&model),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(fs::read_to_string(&model).unwrap().starts_with("HMM v1\n"));
    assert_eq!(code(&tag("D5", dir.path(), &demo().join("sample.txt"))), 0);

    let bad = hytag(&[
        "train-hmm",
        "--coarse-lexicon",
        path(&demo().join("coarse.lex")),
        "--corpus",
        path(&demo().join("train.txt")),
        "--iterations",
        "1",
        "--block",
        "0",
        "--out",
        path(&model),
    ]);
    assert_eq!(code(&bad), 2);
}

#[test]
fn eval_prints_one_row_per_output() {
    let dir = TempDir::new().unwrap();
    let mut outputs = Vec::new();
    for config in ["D0", "D2", "D3b"] {
        let p = dir.path().join(format!("{config}.cg"));
        fs::write(&p, tag(config, &demo(), &demo().join("sample.txt")).stdout).unwrap();
        outputs.push(p);
    }
    let gold = demo().join("gold.cg");
    let mut args = vec!["eval", "--gold", path(&gold), "--out"];
    args.extend(outputs.iter().map(|p| path(p)));
    let table = hytag(&args);
    assert_eq!(code(&table), 0, "{}", stderr(&table));
    let text = String::from_utf8(table.stdout).unwrap();
    let labels: Vec<&str> = text.lines().skip(1).map(|l| l.split_whitespace().next().unwrap()).collect();
    assert_eq!(labels, ["D0", "D2", "D3b"]);

    args.extend(["--format", "tsv"]);
    let tsv = String::from_utf8(hytag(&args).stdout).unwrap();
    assert_eq!(tsv.lines().count(), 4);
    assert!(tsv.lines().all(|l| l.split('\t').count() == 6));
}
