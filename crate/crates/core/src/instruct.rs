//! Instruction-tuning records built from an annotated corpus.
//!
//! Every builder enumerates tutor act-level utterances in session, turn,
//! utterance order; the dialogue context of a sample is everything strictly
//! before its utterance (see [`DialogueContext::before`]).

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::context::DialogueContext;
use crate::corpus::Session;
use crate::jsonl::{self, JsonlError};
use crate::taxonomy::{ActId, Role, Taxonomy};
use crate::Exec;

pub const ACT_PREDICTION_INSTRUCTION: &str = "Select an appropriate next tutor act based on the given 'dialogue context' and 'act candidates'. In the context, tutor uses various tutor act and contents(activities or passages), depending on the student's abilities and questions. Tutor act represents a teaching method that you can exploit. Choose the best act catering to the context and understanding the meaning of each act.";
pub const UTTERANCE_GENERATION_INSTRUCTION: &str = "As an English tutor for a Korean student, your job is to create coherent and tailored responses based on the given 'dialogue context' and 'tutor's act'. In the context, tutor uses various teaching acts and contents(activities or passages), depending on the student's abilities and questions. The given action is a teaching method that you have to exploit.";
pub const MISSING_CONTEXT_INSTRUCTION: &str = "Predict a speaker and their utterance to fit between the given 'dialogue context' of a student and a teacher and the final 'utterance' made by the teacher.";
pub const MINORITY_ACT_INSTRUCTION: &str = "As an English teacher for Korean students, generate tutor's utterance to teach the given learning content with the act.";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    ActPrediction,
    UtteranceGeneration,
    MissingContext,
    MinorityAct,
    JointBaseline,
}

impl Task {
    pub const ALL: [Task; 5] = [
        Task::ActPrediction,
        Task::UtteranceGeneration,
        Task::MissingContext,
        Task::MinorityAct,
        Task::JointBaseline,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            Task::ActPrediction => "tasks-1.jsonl",
            Task::UtteranceGeneration => "tasks-2.jsonl",
            Task::MissingContext => "tasks-3.jsonl",
            Task::MinorityAct => "tasks-4.jsonl",
            Task::JointBaseline => "tasks-baseline.jsonl",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turn_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utterance_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub act: Option<ActId>,
    /// Missing-context samples: act of the removed utterance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub removed_act: Option<ActId>,
    /// Missing-context samples: context turn the removed utterance came from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub removed_turn: Option<usize>,
    /// Minority-act samples: zero-based row in the expert file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionSample {
    pub task: Task,
    pub instruction: String,
    pub input: String,
    pub response: String,
    pub meta: SampleMeta,
}

#[derive(Debug, thiserror::Error)]
pub enum InstructError {
    #[error("act `{0}` has an empty description")]
    EmptyDescription(ActId),
    #[error("expert row {row}: `{raw}` is not a registered tutor act")]
    UnknownExpertAct { row: usize, raw: String },
    #[error("expert row {row}: field `{field}` is empty")]
    EmptyExpertField { row: usize, field: &'static str },
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error("sample rate must lie in [0, 1], got {0}")]
    BadSampleRate(f64),
}

/// One row of the expert-written minority-act file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpertRow {
    pub content: String,
    pub act: String,
    pub utterance: String,
}

struct Cut<'a> {
    session: &'a Session,
    turn: usize,
    utt: usize,
    act: &'a ActId,
    text: &'a str,
    context: DialogueContext,
}

impl Cut<'_> {
    fn meta(&self) -> SampleMeta {
        SampleMeta {
            session_id: Some(self.session.id.clone()),
            turn_index: Some(self.turn),
            utterance_index: Some(self.utt),
            act: Some(self.act.clone()),
            ..SampleMeta::default()
        }
    }
}

fn tutor_cuts(session: &Session) -> impl Iterator<Item = Cut<'_>> {
    session
        .positions()
        .filter(|(_, _, t, _)| t.speaker == Role::Tutor)
        .map(move |(ti, ui, _, u)| Cut {
            session,
            turn: ti,
            utt: ui,
            act: &u.act,
            text: &u.text,
            context: DialogueContext::before(session, ti, ui),
        })
}

pub fn act_prediction_input(context: &str, candidates: &str) -> String {
    format!("- Context:\n{context}\n- Act candidates:\n{candidates}")
}

pub fn utterance_generation_input(context: &str, act: &ActId, description: &str) -> String {
    format!("- Context:\n{context}\n- Act: {act}, {description}")
}

/// Task 1: predict the next tutor act from the context and the full candidate list.
pub fn build_act_prediction(corpus: &[Session], taxonomy: &Taxonomy, exec: Exec) -> Vec<InstructionSample> {
    let candidates = taxonomy.candidate_list(Role::Tutor);
    exec.flat_map(corpus, |s| {
        tutor_cuts(s)
            .map(|c| InstructionSample {
                task: Task::ActPrediction,
                instruction: ACT_PREDICTION_INSTRUCTION.to_string(),
                input: act_prediction_input(&c.context.render(), &candidates),
                response: c.act.to_string(),
                meta: c.meta(),
            })
            .collect()
    })
}

fn description<'t>(taxonomy: &'t Taxonomy, act: &ActId) -> Result<&'t str, InstructError> {
    taxonomy
        .get(act)
        .map(|d| d.description.as_str())
        .filter(|d| !d.trim().is_empty())
        .ok_or_else(|| InstructError::EmptyDescription(act.clone()))
}

/// Task 2: generate the tutor utterance given the context and the act with its description.
pub fn build_utterance_generation(
    corpus: &[Session],
    taxonomy: &Taxonomy,
    exec: Exec,
) -> Result<Vec<InstructionSample>, InstructError> {
    exec.map(corpus, |s| {
        tutor_cuts(s)
            .map(|c| {
                Ok(InstructionSample {
                    task: Task::UtteranceGeneration,
                    instruction: UTTERANCE_GENERATION_INSTRUCTION.to_string(),
                    input: utterance_generation_input(&c.context.render(), c.act, description(taxonomy, c.act)?),
                    response: c.text.to_string(),
                    meta: c.meta(),
                })
            })
            .collect::<Result<Vec<_>, _>>()
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()
    .map(|v| v.into_iter().flatten().collect())
}

/// Sampling of missing-context cut points. A rate of 1.0 keeps every
/// eligible cut; lower rates keep each one independently with that
/// probability, drawn from a per-session stream of `seed`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MissingContextOptions {
    pub sample_rate: f64,
    pub seed: u64,
}

impl Default for MissingContextOptions {
    fn default() -> Self {
        MissingContextOptions {
            sample_rate: 1.0,
            seed: 0,
        }
    }
}

/// Task 3: recover the last utterance of the context, given the rest of the
/// context and the tutor utterance that follows. Cuts whose context holds
/// fewer than two act-level utterances are skipped.
pub fn build_missing_context(
    corpus: &[Session],
    options: MissingContextOptions,
    exec: Exec,
) -> Result<Vec<InstructionSample>, InstructError> {
    if !(0.0..=1.0).contains(&options.sample_rate) {
        return Err(InstructError::BadSampleRate(options.sample_rate));
    }
    let indexed: Vec<(u64, &Session)> = corpus.iter().enumerate().map(|(i, s)| (i as u64, s)).collect();
    Ok(exec.flat_map(&indexed, |&(i, s)| {
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        rng.set_stream(i);
        tutor_cuts(s)
            .filter(|c| c.context.utterance_count() >= 2)
            .filter(|_| options.sample_rate >= 1.0 || rng.gen::<f64>() < options.sample_rate)
            .map(|c| {
                let (partial, removed) = c.context.without_last().expect("context has utterances");
                InstructionSample {
                    task: Task::MissingContext,
                    instruction: MISSING_CONTEXT_INSTRUCTION.to_string(),
                    input: format!("- Context:\n{}\n- Utterance: {}", partial.render(), c.text),
                    response: format!("{}, {}", removed.speaker, removed.utterance.text),
                    meta: SampleMeta {
                        removed_act: Some(removed.utterance.act.clone()),
                        removed_turn: Some(removed.turn_index),
                        ..c.meta()
                    },
                }
            })
            .collect()
    }))
}

/// Task 4: expert-written utterances for selected acts, with no dialogue context.
pub fn build_minority_act(rows: &[ExpertRow], taxonomy: &Taxonomy) -> Result<Vec<InstructionSample>, InstructError> {
    rows.iter()
        .enumerate()
        .map(|(row, r)| {
            let act = taxonomy
                .validate_act(&r.act)
                .ok()
                .filter(|a| a.role() == Role::Tutor)
                .ok_or_else(|| InstructError::UnknownExpertAct {
                    row,
                    raw: r.act.clone(),
                })?;
            for (field, value) in [("content", &r.content), ("utterance", &r.utterance)] {
                if value.trim().is_empty() {
                    return Err(InstructError::EmptyExpertField { row, field });
                }
            }
            Ok(InstructionSample {
                task: Task::MinorityAct,
                instruction: MINORITY_ACT_INSTRUCTION.to_string(),
                input: format!(
                    "- Content: {}\n- Act: {}, {}",
                    r.content,
                    act,
                    description(taxonomy, &act)?
                ),
                response: r.utterance.clone(),
                meta: SampleMeta {
                    act: Some(act),
                    row: Some(row),
                    ..SampleMeta::default()
                },
            })
        })
        .collect()
}

pub fn load_expert_file(path: impl AsRef<Path>) -> Result<Vec<ExpertRow>, InstructError> {
    Ok(jsonl::read(path)?)
}

/// Joint act-and-utterance target with no instruction: `[<act>]<text>`.
pub fn build_joint_baseline(corpus: &[Session], exec: Exec) -> Vec<InstructionSample> {
    exec.flat_map(corpus, |s| {
        tutor_cuts(s)
            .map(|c| InstructionSample {
                task: Task::JointBaseline,
                instruction: String::new(),
                input: c.context.render(),
                response: format!("[{}]{}", c.act, c.text),
                meta: c.meta(),
            })
            .collect()
    })
}

/// `### Instruction / ### Input / ### Response` layout; the joint baseline
/// has no instruction section.
pub fn render_sample(sample: &InstructionSample) -> String {
    let body = format!("### Input:\n{}\n### Response:\n{}", sample.input, sample.response);
    if sample.task == Task::JointBaseline {
        body
    } else {
        format!("### Instruction:\n{}\n{body}", sample.instruction)
    }
}

/// All five datasets for one corpus.
#[derive(Clone, Debug, Default)]
pub struct InstructionSets {
    pub act_prediction: Vec<InstructionSample>,
    pub utterance_generation: Vec<InstructionSample>,
    pub missing_context: Vec<InstructionSample>,
    pub minority_act: Vec<InstructionSample>,
    pub joint_baseline: Vec<InstructionSample>,
}

impl InstructionSets {
    pub fn build(
        corpus: &[Session],
        expert: &[ExpertRow],
        taxonomy: &Taxonomy,
        missing: MissingContextOptions,
        exec: Exec,
    ) -> Result<Self, InstructError> {
        Ok(InstructionSets {
            act_prediction: build_act_prediction(corpus, taxonomy, exec),
            utterance_generation: build_utterance_generation(corpus, taxonomy, exec)?,
            missing_context: build_missing_context(corpus, missing, exec)?,
            minority_act: build_minority_act(expert, taxonomy)?,
            joint_baseline: build_joint_baseline(corpus, exec),
        })
    }

    pub fn get(&self, task: Task) -> &[InstructionSample] {
        match task {
            Task::ActPrediction => &self.act_prediction,
            Task::UtteranceGeneration => &self.utterance_generation,
            Task::MissingContext => &self.missing_context,
            Task::MinorityAct => &self.minority_act,
            Task::JointBaseline => &self.joint_baseline,
        }
    }

    /// Writes one `tasks-*.jsonl` file per task into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<(), InstructError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|source| JsonlError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        for task in Task::ALL {
            jsonl::write(dir.join(task.file_name()), self.get(task))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_transcript;

    const DOC: &str = "\
tutor: [A1][Gap Fills: x ___ y] [t.assess.display_question]답이 몇번일까요?
student: [s.answer.answer][high]내면을 바라보는?
tutor: [t.engage.encourage]너무 좋아요. [t.teach.method.vocab_expression.etymology]intro는 안을 보는 것을 의미해요.";

    fn corpus() -> Vec<Session> {
        vec![parse_transcript(DOC, Taxonomy::bundled()).unwrap()]
    }

    #[test]
    fn act_prediction_targets() {
        let v = build_act_prediction(&corpus(), Taxonomy::bundled(), Exec::Sequential);
        assert_eq!(v.len(), 3);
        assert_eq!(v[2].response, "t.teach.method.vocab_expression.etymology");
        assert!(v[0]
            .input
            .starts_with("- Context:\ntutor: [A1][Gap Fills: x ___ y]\n- Act candidates:\n"));
        for d in Taxonomy::bundled().acts_by(Role::Tutor, None) {
            assert!(v[0].input.contains(&format!("\n{}, ", d.id)));
        }
        assert!(render_sample(&v[0]).starts_with("### Instruction:\n"));
    }

    #[test]
    fn generation_carries_description() {
        let v = build_utterance_generation(&corpus(), Taxonomy::bundled(), Exec::Sequential).unwrap();
        assert!(v[2]
            .input
            .ends_with("- Act: t.teach.method.vocab_expression.etymology, Explain a word or a phrase based on its etymology. When possible, discuss the prefix and suffix of the word."));
        assert_eq!(v[2].response, "intro는 안을 보는 것을 의미해요.");
    }

    #[test]
    fn missing_context_response_and_skip() {
        let v = build_missing_context(&corpus(), MissingContextOptions::default(), Exec::Sequential).unwrap();
        // cuts: (0,0) has 0 prior, (2,0) has 2, (2,1) has 3
        assert_eq!(v.len(), 2);
        assert_eq!(v[1].response, "tutor, 너무 좋아요.");
        assert!(v[1]
            .input
            .ends_with("[s.answer.answer][high]내면을 바라보는?\n- Utterance: intro는 안을 보는 것을 의미해요."));
        assert_eq!(v[0].response, "student, 내면을 바라보는?");
        let none = build_missing_context(
            &corpus(),
            MissingContextOptions {
                sample_rate: 0.0,
                seed: 1,
            },
            Exec::Sequential,
        )
        .unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn baseline_format() {
        let v = build_joint_baseline(&corpus(), Exec::Sequential);
        assert_eq!(
            v[2].response,
            "[t.teach.method.vocab_expression.etymology]intro는 안을 보는 것을 의미해요."
        );
        assert!(v.iter().all(|s| s.instruction.is_empty()));
        assert!(render_sample(&v[0]).starts_with("### Input:\n"));
    }

    #[test]
    fn expert_rows() {
        let t = Taxonomy::bundled();
        assert!(build_minority_act(&[], t).unwrap().is_empty());
        let bad = ExpertRow {
            content: "c".into(),
            act: "t.nonexistent".into(),
            utterance: "u".into(),
        };
        let good = ExpertRow {
            act: "t.teach.hint".into(),
            ..bad.clone()
        };
        let err = build_minority_act(&[good.clone(), bad], t).unwrap_err();
        assert!(matches!(err, InstructError::UnknownExpertAct { row: 1, .. }), "{err}");
        let v = build_minority_act(&[good], t).unwrap();
        assert!(v[0].input.starts_with("- Content: c\n- Act: t.teach.hint, "));
    }

    #[test]
    fn empty_description_is_an_error() {
        let src = Taxonomy::bundled_source().replace(
            "General conversation such as greetings, farewells, small talk, and short replies that do not teach or assess.",
            "",
        );
        let t = Taxonomy::from_toml_str(&src).unwrap();
        let s = parse_transcript("tutor: [t.general]안녕하세요.", &t).unwrap();
        let err = build_utterance_generation(&[s], &t, Exec::Sequential).unwrap_err();
        assert!(matches!(err, InstructError::EmptyDescription(ref a) if a.as_str() == "t.general"));
    }
}
