//! End-to-end evaluation with a provider that answers from the gold data.

use std::sync::Arc;

use tutorkit_core::engine::{
    evaluate, ChatProvider, Engine, EngineError, ExampleIndex, GoldReplayProvider, Mode, RecordingProvider, RunOptions,
    ScriptedProvider, TaskInput,
};
use tutorkit_core::metrics::{build_report, HashEmbedder};
use tutorkit_core::scenario::{build_scenarios, ScenarioOptions, TestScenario};
use tutorkit_core::{fixtures, Exec, Taxonomy};

fn scenarios() -> Vec<TestScenario> {
    let opts = ScenarioOptions {
        per_act: 2,
        seed: 7,
        max_turns: Some(12),
    };
    build_scenarios(&fixtures::corpus(), Taxonomy::bundled(), opts, Exec::default()).unwrap()
}

fn engine(provider: Arc<dyn ChatProvider>, mode: Mode) -> Engine {
    Engine::new(provider, Arc::new(Taxonomy::bundled().clone()), mode)
        .with_index(Arc::new(ExampleIndex::build(&fixtures::corpus(), Some(12))))
}

#[test]
fn gold_replay_scores_perfectly() {
    let sc = scenarios();
    assert_eq!(sc.len(), 44);
    let teaching = Taxonomy::bundled().teaching_acts();
    let embedder = HashEmbedder::default();
    for mode in [Mode::ZeroShot, Mode::OneShot, Mode::Baseline] {
        let e = engine(Arc::new(GoldReplayProvider::new(&sc)), mode);
        for exec in [Exec::Sequential, Exec::Parallel] {
            let recs = evaluate(&e, &sc, RunOptions { concurrency: 3, exec });
            assert!(
                recs.iter().all(|r| r.failure.is_none()),
                "{mode}: {:?}",
                recs.iter().find_map(|r| r.failure.as_ref())
            );
            let rep = build_report(&recs, &embedder, &teaching, 2, exec, 3).unwrap();
            assert_eq!((rep.n, rep.n_scored, rep.n_failed), (44, 44, 0));
            assert!((rep.corpus_bleu.unwrap() - 100.0).abs() < 1e-9);
            assert!((rep.embed_match.unwrap().f1 - 1.0).abs() < 1e-9);
            if mode.is_two_step() {
                assert_eq!(rep.accuracy, Some(1.0));
                assert_eq!(rep.invariability, Some(0.0));
            } else {
                assert_eq!((rep.accuracy, rep.invariability), (None, None));
            }
        }
    }
}

#[test]
fn prompt_log_records_every_call() {
    let sc = scenarios();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("prompts.jsonl");
    let rec = RecordingProvider::new(GoldReplayProvider::new(&sc), &path).unwrap();
    let e = engine(Arc::new(rec), Mode::OneShot);
    let recs = evaluate(&e, &sc[..5], RunOptions::default());
    assert!(recs.iter().all(|r| r.failure.is_none()));
    let lines = std::fs::read_to_string(&path).unwrap();
    assert_eq!(lines.lines().count(), 10);
}

#[test]
fn unparseable_replies_fail_after_retries() {
    let sc = scenarios();
    let p = Arc::new(ScriptedProvider::new(["I'd say hint", "hmm", "t.teach.nonexistent"]));
    let e = engine(p.clone(), Mode::ZeroShot);
    let input = TaskInput {
        context: sc[0].context.clone(),
        plain_context: sc[0].plain_context.clone(),
        content: sc[0].content.clone(),
    };
    let err = e.run_two_step(&input, None).unwrap_err();
    let EngineError::ActSelectionFailed { replies } = err else {
        panic!("{err}");
    };
    assert_eq!(replies.len(), 3);
    assert_eq!(p.calls(), 3);

    let recs = evaluate(
        &engine(Arc::new(ScriptedProvider::new(Vec::<String>::new())), Mode::ZeroShot),
        &sc[..3],
        RunOptions::default(),
    );
    assert!(recs.iter().all(|r| r.failure.is_some() && r.predicted_act.is_none()));
}
