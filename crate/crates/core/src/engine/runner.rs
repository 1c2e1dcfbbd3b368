use super::{Engine, EngineError, Mode, TaskInput};
use crate::metrics::PredictionRecord;
use crate::scenario::TestScenario;
use crate::Exec;

pub const DEFAULT_CONCURRENCY: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunOptions {
    /// Maximum provider calls in flight.
    pub concurrency: usize,
    pub exec: Exec,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            concurrency: DEFAULT_CONCURRENCY,
            exec: Exec::default(),
        }
    }
}

pub fn scenario_input(s: &TestScenario) -> TaskInput {
    TaskInput {
        context: s.context.clone(),
        plain_context: s.plain_context.clone(),
        content: s.content.clone(),
    }
}

fn run_one(engine: &Engine, s: &TestScenario) -> PredictionRecord {
    let input = scenario_input(s);
    let mut rec = PredictionRecord {
        scenario_id: s.id.clone(),
        predicted_act: None,
        generated: None,
        gold_act: s.target_act.clone(),
        gold_utterance: s.gold_utterance.clone(),
        prev_utterance: s.prev_utterance.clone(),
        failure: None,
        act_step: engine.mode().is_two_step(),
    };
    if engine.mode() == Mode::Baseline {
        match engine.run_baseline(&input) {
            Ok(text) => rec.generated = Some(text),
            // baseline runs have no act step, so a failure only shows as a missing utterance
            Err(e) => rec.failure = Some(e.to_string()),
        }
        return rec;
    }
    match engine.run_two_step(&input, Some(&s.target_act)) {
        Ok(step) => {
            rec.predicted_act = Some(step.act);
            rec.generated = Some(step.utterance);
        }
        Err(EngineError::Generation { act, source }) => {
            rec.predicted_act = Some(act);
            rec.failure = Some(source.to_string());
        }
        Err(e) => rec.failure = Some(e.to_string()),
    }
    rec
}

/// Runs the engine over every scenario. Failures become records with a
/// `failure` note rather than aborting the run. Output is ordered by
/// scenario id.
pub fn evaluate(engine: &Engine, scenarios: &[TestScenario], options: RunOptions) -> Vec<PredictionRecord> {
    let mut out = options
        .exec
        .map_bounded(scenarios, options.concurrency.max(1), |s| run_one(engine, s));
    out.sort_by(|a, b| a.scenario_id.cmp(&b.scenario_id));
    out
}
