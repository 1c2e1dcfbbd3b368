//! The offline pipeline end to end through the CLI entry point.

use std::path::Path;

use clap::Parser;
use serde_json::Value;
use tutorkit_core::fixtures;
use tutorkit_service::cli::{execute, Cli};

fn run(args: &[&str]) -> String {
    let cli = Cli::try_parse_from(std::iter::once("tutorkit").chain(args.iter().copied())).unwrap();
    let mut out = Vec::new();
    execute(cli, &mut out).unwrap();
    String::from_utf8(out).unwrap()
}

fn json(args: &[&str]) -> Value {
    serde_json::from_str(&run(args)).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let corpus = d.join("corpus.txt");
    let expert = d.join("expert.jsonl");
    std::fs::write(&corpus, fixtures::CORPUS).unwrap();
    std::fs::write(&expert, fixtures::EXPERT).unwrap();

    let parsed = json(&["parse", p(&corpus), "--out", p(&d.join("norm.txt"))]);
    assert_eq!(parsed["sessions"], 5);
    assert_eq!(parsed["act_utterances"], 339);
    assert_eq!(
        std::fs::read_to_string(d.join("norm.txt")).unwrap().trim_end(),
        fixtures::CORPUS.trim_end()
    );

    let stats = json(&["stats", p(&corpus)]);
    assert_eq!(stats["stats"]["n_sessions"], 5);
    assert_eq!(stats["stats"]["act_histogram"]["t.teach.repair"], 2);

    let split = json(&[
        "split",
        p(&corpus),
        "--n-test",
        "2",
        "--seed",
        "3",
        "--out-dir",
        p(&d.join("split")),
    ]);
    assert_eq!(split["test"].as_array().unwrap().len(), 2);
    assert_eq!(
        split,
        json(&[
            "split",
            p(&corpus),
            "--n-test",
            "2",
            "--seed",
            "3",
            "--out-dir",
            p(&d.join("split2"))
        ])
    );

    let built = json(&[
        "build-instructions",
        p(&corpus),
        "--expert",
        p(&expert),
        "--out-dir",
        p(&d.join("tasks")),
    ]);
    assert_eq!(built["files"]["tasks-1.jsonl"], 211);
    assert_eq!(built["files"]["tasks-3.jsonl"], 201);
    assert_eq!(built["files"]["tasks-4.jsonl"], 4);
    let lines = std::fs::read_to_string(d.join("tasks/tasks-2.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 211);

    let scen = d.join("scenarios.jsonl");
    let s = json(&[
        "--sequential",
        "build-scenarios",
        p(&corpus),
        "--per-act",
        "1",
        "--seed",
        "9",
        "--out",
        p(&scen),
    ]);
    assert_eq!(s["scenarios"], 22);
    let first = std::fs::read(&scen).unwrap();
    json(&[
        "build-scenarios",
        p(&corpus),
        "--per-act",
        "1",
        "--seed",
        "9",
        "--out",
        p(&scen),
    ]);
    assert_eq!(std::fs::read(&scen).unwrap(), first);

    let run_dir = d.join("run-1shot");
    let e = json(&[
        "eval",
        "--scenarios",
        p(&scen),
        "--mode",
        "one_shot",
        "--train",
        p(&corpus),
        "--provider",
        "gold",
        "--run-dir",
        p(&run_dir),
    ]);
    assert_eq!((e["scenarios"].as_u64(), e["failed"].as_u64()), (Some(22), Some(0)));
    assert_eq!(
        std::fs::read_to_string(run_dir.join("prompts.jsonl"))
            .unwrap()
            .lines()
            .count(),
        44
    );
    let base_dir = d.join("run-base");
    json(&[
        "eval",
        "--scenarios",
        p(&scen),
        "--mode",
        "baseline",
        "--provider",
        "gold",
        "--run-dir",
        p(&base_dir),
    ]);

    let rep = json(&[
        "report",
        "--run",
        &format!("one_shot={}", p(&run_dir)),
        "--run",
        &format!("baseline={}", p(&base_dir)),
        "--target",
        "1",
    ]);
    assert_eq!(rep[0]["report"]["accuracy"], 1.0);
    assert_eq!(rep[0]["report"]["invariability"], 0.0);
    assert_eq!(rep[0]["report"]["corpus_bleu"], 100.0);
    assert!(rep[1]["report"]["accuracy"].is_null());

    let table = run(&[
        "report",
        "--run",
        &format!("gold={}", p(&run_dir)),
        "--target",
        "1",
        "--format",
        "table",
    ]);
    assert!(table.lines().next().unwrap().starts_with("Model"));
    assert!(table.contains("gold"));
}

#[test]
fn bad_inputs_fail() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "tutor: [t.nope]hello\n").unwrap();
    let cli = Cli::try_parse_from(["tutorkit", "parse", bad.to_str().unwrap()]).unwrap();
    let err = execute(cli, &mut Vec::new()).unwrap_err();
    assert!(format!("{err:#}").contains("t.nope"));
    assert!(Cli::try_parse_from(["tutorkit", "eval", "--mode", "two_shot"]).is_err());
}
