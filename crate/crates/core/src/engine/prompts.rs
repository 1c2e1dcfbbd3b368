//! Prompt templates. All prompts are byte-deterministic in their inputs.

use super::index::Exemplar;
use super::provider::ChatMessage;
use crate::instruct::{ACT_PREDICTION_INSTRUCTION, UTTERANCE_GENERATION_INSTRUCTION};
use crate::taxonomy::{ActId, Role, Taxonomy};

pub(crate) const TASK_CONTEXT_MARKER: &str = "[Task Scenario]\n- Context:\n";
pub(crate) const CONTENT_MARKER: &str = "\n- Learning content:\n";
pub(crate) const BASELINE_CONTEXT_HEADER: &str = "[1] Dialogue Context:\n";
pub(crate) const BASELINE_CONTENT_HEADER: &str = "\n\n[2] Learning Content:";

/// Note appended after a reply that held no registered tutor act.
pub const CORRECTION_NOTE: &str =
    "That reply did not contain a valid tutor act id. Answer with exactly one act id copied from the act candidates list.";

/// What the engine sees of a dialogue at the moment the tutor speaks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaskInput {
    /// Annotated context in transcript style.
    pub context: String,
    /// Same context as untagged `speaker: text` lines.
    pub plain_context: String,
    pub content: String,
}

fn scenario_block(label: &str, context: &str, content: &str) -> String {
    format!("{label}\n- Context:\n{context}{CONTENT_MARKER}{content}")
}

pub fn selection_prompt(taxonomy: &Taxonomy, input: &TaskInput) -> Vec<ChatMessage> {
    let body = format!(
        "### Instruction:\n{ACT_PREDICTION_INSTRUCTION}\n### Input:\n{}\n- Act candidates:\n{}\n### Response:\n",
        scenario_block("[Task Scenario]", &input.context, &input.content),
        taxonomy.candidate_list(Role::Tutor),
    );
    vec![ChatMessage::user(body)]
}

pub fn generation_prompt(
    input: &TaskInput,
    act: &ActId,
    description: &str,
    exemplar: Option<(&Exemplar, &str)>,
) -> Vec<ChatMessage> {
    let mut body = format!("### Instruction:\n{UTTERANCE_GENERATION_INSTRUCTION}\n### Input:\n");
    if let Some((ex, ex_desc)) = exemplar {
        body.push_str(&scenario_block("[Example Scenario]", &ex.context, &ex.content));
        body.push_str(&format!(
            "\n- Act: {}, {ex_desc}\n- Utterance: {}\n\n",
            ex.act, ex.utterance
        ));
    }
    body.push_str(&scenario_block("[Task Scenario]", &input.context, &input.content));
    body.push_str(&format!("\n- Act: {act}, {description}\n### Response:\n"));
    vec![ChatMessage::user(body)]
}

/// Single-call prompt with no act step: dialogue context and learning content
/// in numbered sections.
pub fn baseline_prompt(input: &TaskInput) -> Vec<ChatMessage> {
    let body = format!(
        "You are an English tutor teaching a Korean ESL student. Write the tutor's next response so that it suits the student's needs and the dialogue so far.

[Process] The utterance should:
    - Fit the dialogue context and the learning content under discussion.
    - Use the single teaching strategy that best keeps the student engaged and understanding.
    - Bring in new learning content when needed while keeping the session continuous.
    - Help the student understand and master the provided learning content.

[Language Note] Teach mainly in Korean; these instructions are in English for clarity.

[Task Scenario]
The dialogue context comes first, then the learning content.

{BASELINE_CONTEXT_HEADER}{}{BASELINE_CONTENT_HEADER}
{}

[Your Task]
Write the tutor utterance that comes right after the dialogue context, teaching the learning content in relation to it.",
        input.plain_context, input.content,
    );
    vec![ChatMessage::user(body)]
}
