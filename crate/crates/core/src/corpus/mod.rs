//! Annotated tutoring transcripts.
//!
//! A transcript is a sequence of speaker turns; each turn carries optional
//! content tags (the learning activity in play) followed by one or more
//! act-level utterances:
//!
//! ```text
//! === session S001 tutor=T01 student=S01 ===
//! tutor: [Activity3-9][Gap Fills: ...] [t.assess.display_question]답이 몇번일까요?
//! student: [s.answer.answer][high]navigate?
//! ```
//!
//! See [`parse_transcript`] for the exact grammar.

mod parse;
mod render;
mod split;
mod stats;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::taxonomy::{ActId, Category, Role, Taxonomy};

pub use parse::{load_corpus, parse_archive, parse_transcript, ParseError, ParseErrorKind};
pub use render::{render_archive, render_transcript, render_turn};
pub use split::{split_corpus, SplitError};
pub use stats::{act_distribution, corpus_stats, CorpusStats, RolePair, StatsError};

/// Learning activity reference bound to a turn.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContentTag {
    pub activity_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content_text: Option<String>,
}

impl ContentTag {
    pub fn new(activity_id: impl Into<String>, content_text: Option<String>) -> Self {
        ContentTag {
            activity_id: activity_id.into(),
            content_text,
        }
    }

    /// `[id] body` form used for scenario content and prompts.
    pub fn display_line(&self) -> String {
        match &self.content_text {
            Some(body) => format!("[{}] {}", self.activity_id, body),
            None => format!("[{}]", self.activity_id),
        }
    }
}

/// Graded correctness of a student answer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Correctness {
    High,
    Middle,
    Low,
}

impl Correctness {
    pub fn as_str(self) -> &'static str {
        match self {
            Correctness::High => "high",
            Correctness::Middle => "middle",
            Correctness::Low => "low",
        }
    }
}

impl fmt::Display for Correctness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Correctness {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "high" => Ok(Correctness::High),
            "middle" => Ok(Correctness::Middle),
            "low" => Ok(Correctness::Low),
            _ => Err(()),
        }
    }
}

/// One segment of a turn carrying exactly one dialogue act.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActUtterance {
    pub act: ActId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correctness: Option<Correctness>,
    pub text: String,
}

impl ActUtterance {
    pub fn new(act: ActId, text: impl Into<String>) -> Self {
        ActUtterance {
            act,
            correctness: None,
            text: text.into(),
        }
    }

    pub fn with_correctness(mut self, c: Correctness) -> Self {
        self.correctness = Some(c);
        self
    }

    pub fn word_count(&self) -> usize {
        self.text.split_whitespace().count()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: Role,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub content_tags: Vec<ContentTag>,
    pub utterances: Vec<ActUtterance>,
}

impl Turn {
    pub fn new(speaker: Role, utterances: Vec<ActUtterance>) -> Self {
        Turn {
            speaker,
            content_tags: Vec::new(),
            utterances,
        }
    }

    pub fn with_content(mut self, tags: Vec<ContentTag>) -> Self {
        self.content_tags = tags;
        self
    }

    pub fn word_count(&self) -> usize {
        self.utterances.iter().map(ActUtterance::word_count).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub tutor_id: String,
    pub student_id: String,
    pub turns: Vec<Turn>,
}

/// Position of one act-level utterance inside a session.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Anchor {
    pub session_id: String,
    pub turn_index: usize,
    pub utterance_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InvalidSession {
    #[error("session id, tutor id and student id must be non-empty and free of whitespace")]
    BadIds,
    #[error("session has no turns")]
    NoTurns,
    #[error("turn {0} has no act-level utterances")]
    EmptyTurn(usize),
    #[error("turn {turn}: act {act} does not belong to speaker {speaker}")]
    SpeakerMismatch { turn: usize, act: ActId, speaker: Role },
    #[error("turn {turn}: act {act} is not registered")]
    UnknownAct { turn: usize, act: ActId },
    #[error("turn {turn}: correctness on {act}, which is not a student answer act")]
    IllegalCorrectness { turn: usize, act: ActId },
    #[error("turn {turn}: utterance text is empty or not representable in the transcript grammar")]
    BadText { turn: usize },
    #[error("turn {turn}: content tag is empty or not representable")]
    BadContentTag { turn: usize },
}

fn id_ok(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(char::is_whitespace) && !s.contains("===")
}

/// Text that survives a render/parse cycle unchanged.
pub(crate) fn text_representable(text: &str) -> bool {
    !text.is_empty()
        && text.trim() == text
        && !text.contains(['[', ']', '\r'])
        && !text.lines().skip(1).any(parse::is_structural_line)
}

fn tag_representable(text: &str) -> bool {
    !text.is_empty() && !text.contains(['[', ']', '\n', '\r'])
}

impl Session {
    /// Checks every structural invariant, including that each act is registered.
    pub fn validate(&self, taxonomy: &Taxonomy) -> Result<(), InvalidSession> {
        if !(id_ok(&self.id) && id_ok(&self.tutor_id) && id_ok(&self.student_id)) {
            return Err(InvalidSession::BadIds);
        }
        if self.turns.is_empty() {
            return Err(InvalidSession::NoTurns);
        }
        for (i, turn) in self.turns.iter().enumerate() {
            validate_turn(i, turn, taxonomy, true)?;
        }
        Ok(())
    }

    pub fn utterance_count(&self) -> usize {
        self.turns.iter().map(|t| t.utterances.len()).sum()
    }

    /// Iterates `(turn_index, utterance_index, turn, utterance)` in transcript order.
    pub fn positions(&self) -> impl Iterator<Item = (usize, usize, &Turn, &ActUtterance)> {
        self.turns
            .iter()
            .enumerate()
            .flat_map(|(ti, t)| t.utterances.iter().enumerate().map(move |(ui, u)| (ti, ui, t, u)))
    }

    pub fn anchor(&self, turn_index: usize, utterance_index: usize) -> Anchor {
        Anchor {
            session_id: self.id.clone(),
            turn_index,
            utterance_index,
        }
    }

    pub fn utterance_at(&self, turn_index: usize, utterance_index: usize) -> Option<&ActUtterance> {
        self.turns.get(turn_index)?.utterances.get(utterance_index)
    }
}

pub(crate) fn validate_turn(
    index: usize,
    turn: &Turn,
    taxonomy: &Taxonomy,
    require_utterances: bool,
) -> Result<(), InvalidSession> {
    if require_utterances && turn.utterances.is_empty() {
        return Err(InvalidSession::EmptyTurn(index));
    }
    for (k, tag) in turn.content_tags.iter().enumerate() {
        let last = k + 1 == turn.content_tags.len();
        let body_ok = match &tag.content_text {
            Some(b) => tag_representable(b),
            // a body-less tag followed by another tag would re-parse as id + body
            None => last,
        };
        if !tag_representable(&tag.activity_id)
            || !body_ok
            || tag.activity_id.parse::<Correctness>().is_ok()
            || crate::taxonomy::is_act_id(&tag.activity_id)
        {
            return Err(InvalidSession::BadContentTag { turn: index });
        }
    }
    for u in &turn.utterances {
        if u.act.role() != turn.speaker {
            return Err(InvalidSession::SpeakerMismatch {
                turn: index,
                act: u.act.clone(),
                speaker: turn.speaker,
            });
        }
        let Some(def) = taxonomy.get(&u.act) else {
            return Err(InvalidSession::UnknownAct {
                turn: index,
                act: u.act.clone(),
            });
        };
        if u.correctness.is_some() && !(def.role() == Role::Student && def.category == Category::Answer) {
            return Err(InvalidSession::IllegalCorrectness {
                turn: index,
                act: u.act.clone(),
            });
        }
        if !text_representable(&u.text) {
            return Err(InvalidSession::BadText { turn: index });
        }
    }
    Ok(())
}
