//! Two-step tutor: pick a tutor act, then generate an utterance for it.
//!
//! [`Engine`] talks to any [`ChatProvider`]. In [`Mode::OneShot`] the
//! generation prompt is prefixed with a training exemplar of the same act;
//! [`Mode::Baseline`] skips the act step and asks for an utterance directly.

mod index;
mod prompts;
mod provider;
mod runner;

use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::taxonomy::{ActId, Role, Taxonomy};

pub use index::{ExampleIndex, Exemplar};
pub use prompts::{baseline_prompt, generation_prompt, selection_prompt, TaskInput, CORRECTION_NOTE};
pub use provider::{
    ChatExchange, ChatMessage, ChatProvider, ChatRole, FnProvider, GoldReplayProvider, HttpProvider, ProviderConfig,
    ProviderError, RecordingProvider, ScriptedProvider, API_KEY_ENV, BASE_URL_ENV,
};
pub use runner::{evaluate, scenario_input, RunOptions, DEFAULT_CONCURRENCY};

/// Invalid replies tolerated after the first before act selection gives up.
pub const ACT_RETRIES: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// One call, no act step.
    Baseline,
    ZeroShot,
    OneShot,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::ZeroShot => "zero_shot",
            Mode::OneShot => "one_shot",
        }
    }

    pub fn is_two_step(self) -> bool {
        self != Mode::Baseline
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.replace('-', "_").as_str() {
            "baseline" => Ok(Mode::Baseline),
            "zero_shot" | "0_shot" => Ok(Mode::ZeroShot),
            "one_shot" | "1_shot" => Ok(Mode::OneShot),
            _ => Err(format!("unknown mode `{s}` (expected baseline, zero_shot or one_shot)")),
        }
    }
}

/// Which act keys the one-shot exemplar lookup.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExemplarPolicy {
    /// The scenario's gold act, when one is supplied (evaluation).
    GoldAct,
    /// The act the engine just selected (live use).
    #[default]
    PredictedAct,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TutorStep {
    pub act: ActId,
    pub utterance: String,
    pub raw_act_reply: String,
    pub attempts: usize,
    /// Act of the exemplar shown to the generator, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exemplar_act: Option<ActId>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("no valid tutor act after {} replies", .replies.len())]
    ActSelectionFailed { replies: Vec<String> },
    #[error("provider returned an empty utterance")]
    EmptyReply,
    #[error("`{0}` is not a registered tutor act")]
    UnknownAct(ActId),
    #[error("generation for {act} failed: {source}")]
    Generation {
        act: ActId,
        #[source]
        source: Box<EngineError>,
    },
    #[error("mode {0} has no act step")]
    NotTwoStep(Mode),
}

fn act_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?:^|[^a-z0-9_.])([ts]\.[a-z_]+(?:\.[a-z_]+)*)").expect("static pattern"))
}

/// The first act-id-shaped substring of `reply`, if it names a registered
/// tutor act. Later matches are ignored.
pub fn parse_act_reply(taxonomy: &Taxonomy, reply: &str) -> Option<ActId> {
    let raw = act_pattern().captures(reply)?.get(1)?.as_str();
    let act = ActId::parse(raw).ok()?;
    (act.role() == Role::Tutor && taxonomy.contains(&act)).then_some(act)
}

/// Stateless two-step tutor over a chat provider.
#[derive(Clone)]
pub struct Engine {
    provider: Arc<dyn ChatProvider>,
    taxonomy: Arc<Taxonomy>,
    index: Arc<ExampleIndex>,
    mode: Mode,
    policy: ExemplarPolicy,
    rotation_seed: Option<u64>,
}

impl Engine {
    pub fn new(provider: Arc<dyn ChatProvider>, taxonomy: Arc<Taxonomy>, mode: Mode) -> Self {
        Engine {
            provider,
            taxonomy,
            index: Arc::new(ExampleIndex::default()),
            mode,
            policy: ExemplarPolicy::default(),
            rotation_seed: None,
        }
    }

    pub fn with_index(mut self, index: Arc<ExampleIndex>) -> Self {
        self.index = index;
        self
    }

    pub fn with_policy(mut self, policy: ExemplarPolicy) -> Self {
        self.policy = policy;
        self
    }

    /// Rotate exemplars within an act by a seeded hash of the context
    /// instead of always taking the first.
    pub fn with_rotation(mut self, seed: Option<u64>) -> Self {
        self.rotation_seed = seed;
        self
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn taxonomy(&self) -> &Taxonomy {
        &self.taxonomy
    }

    /// Asks for the next tutor act, retrying with a correction note after
    /// each reply that holds no registered tutor act.
    pub fn select_act(&self, input: &TaskInput) -> Result<(ActId, String, usize), EngineError> {
        let mut messages = selection_prompt(&self.taxonomy, input);
        let mut replies = Vec::new();
        for attempt in 1..=ACT_RETRIES + 1 {
            let reply = self.provider.complete(&messages)?;
            if let Some(act) = parse_act_reply(&self.taxonomy, &reply) {
                return Ok((act, reply, attempt));
            }
            messages.push(ChatMessage::assistant(reply.clone()));
            messages.push(ChatMessage::user(CORRECTION_NOTE));
            replies.push(reply);
        }
        Err(EngineError::ActSelectionFailed { replies })
    }

    fn description(&self, act: &ActId) -> Result<&str, EngineError> {
        self.taxonomy
            .get(act)
            .filter(|d| d.role() == Role::Tutor)
            .map(|d| d.description.as_str())
            .ok_or_else(|| EngineError::UnknownAct(act.clone()))
    }

    /// Generates an utterance realising `act`, optionally after an exemplar.
    pub fn generate_utterance(
        &self,
        input: &TaskInput,
        act: &ActId,
        exemplar: Option<&Exemplar>,
    ) -> Result<String, EngineError> {
        let description = self.description(act)?;
        let ex = match exemplar {
            Some(e) => Some((e, self.description(&e.act)?)),
            None => None,
        };
        let reply = self
            .provider
            .complete(&generation_prompt(input, act, description, ex))?;
        let text = reply.trim();
        if text.is_empty() {
            return Err(EngineError::EmptyReply);
        }
        Ok(text.to_string())
    }

    fn exemplar_for(&self, selected: &ActId, gold: Option<&ActId>, input: &TaskInput) -> Option<&Exemplar> {
        if self.mode != Mode::OneShot {
            return None;
        }
        let key = match (self.policy, gold) {
            (ExemplarPolicy::GoldAct, Some(g)) => g,
            _ => selected,
        };
        self.index
            .pick(key, self.rotation_seed.map(|s| (s, input.context.as_str())))
    }

    /// Act selection followed by generation. `gold` is only consulted for
    /// exemplar lookup under [`ExemplarPolicy::GoldAct`]. A selection
    /// failure returns before any generation call.
    pub fn run_two_step(&self, input: &TaskInput, gold: Option<&ActId>) -> Result<TutorStep, EngineError> {
        if !self.mode.is_two_step() {
            return Err(EngineError::NotTwoStep(self.mode));
        }
        let (act, raw, attempts) = self.select_act(input)?;
        let exemplar = self.exemplar_for(&act, gold, input);
        let utterance = self
            .generate_utterance(input, &act, exemplar)
            .map_err(|e| EngineError::Generation {
                act: act.clone(),
                source: Box::new(e),
            })?;
        Ok(TutorStep {
            exemplar_act: exemplar.map(|e| e.act.clone()),
            act,
            utterance,
            raw_act_reply: raw,
            attempts,
        })
    }

    /// Single call with the baseline prompt; no act is predicted.
    pub fn run_baseline(&self, input: &TaskInput) -> Result<String, EngineError> {
        let reply = self.provider.complete(&baseline_prompt(input))?;
        let text = reply.trim();
        if text.is_empty() {
            return Err(EngineError::EmptyReply);
        }
        Ok(text.to_string())
    }
}
