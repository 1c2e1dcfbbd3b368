//! In-memory state of a live session, rebuilt by folding its event log.

use chrono::{DateTime, Utc};
use serde::Serialize;
use tutorkit_core::corpus::render_transcript;
use tutorkit_core::engine::{Mode, TaskInput};
use tutorkit_core::{ActId, ActUtterance, ContentTag, DialogueContext, Role, Session, Taxonomy, Turn};

use crate::store::{EventBody, SessionEvent};

/// Act recorded for student messages that arrive without one.
pub const DEFAULT_STUDENT_ACT: &str = "s.answer.answer";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LiveSession {
    pub id: String,
    pub content_pack: Vec<ContentTag>,
    pub transcript: Session,
    pub mode: Mode,
    pub created_at: DateTime<Utc>,
    /// Sequence number of the next event.
    pub next_seq: u64,
    pub last_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReplayError {
    #[error("event log is empty")]
    Empty,
    #[error("first event must be `created`, found `{0}`")]
    NotCreated(&'static str),
    #[error("event {seq} belongs to session {found}")]
    WrongSession { seq: u64, found: String },
    #[error("expected sequence number {expected}, found {found}")]
    Sequence { expected: u64, found: u64 },
    #[error("duplicate `created` event at {0}")]
    DuplicateCreated(u64),
}

/// Folds whitespace to single spaces and swaps square brackets for round
/// ones, so free text always fits the transcript grammar.
pub fn clean_text(raw: &str) -> String {
    raw.replace('[', "(")
        .replace(']', ")")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

impl LiveSession {
    pub fn new(id: String, content_pack: Vec<ContentTag>, mode: Mode, created_at: DateTime<Utc>) -> Self {
        LiveSession {
            transcript: Session {
                id: id.clone(),
                tutor_id: mode.as_str().to_string(),
                student_id: "student".into(),
                turns: Vec::new(),
            },
            id,
            content_pack,
            mode,
            created_at,
            next_seq: 1,
            last_error: None,
        }
    }

    pub fn replay(events: &[SessionEvent]) -> Result<LiveSession, ReplayError> {
        let first = events.first().ok_or(ReplayError::Empty)?;
        let EventBody::Created { content_pack, mode } = &first.body else {
            return Err(ReplayError::NotCreated(first.body.kind()));
        };
        if first.seq != 0 {
            return Err(ReplayError::Sequence {
                expected: 0,
                found: first.seq,
            });
        }
        let mut s = LiveSession::new(first.session_id.clone(), content_pack.clone(), *mode, first.at);
        for e in &events[1..] {
            s.apply(e)?;
        }
        Ok(s)
    }

    /// Applies one event after `created`.
    pub fn apply(&mut self, event: &SessionEvent) -> Result<(), ReplayError> {
        if event.session_id != self.id {
            return Err(ReplayError::WrongSession {
                seq: event.seq,
                found: event.session_id.clone(),
            });
        }
        if event.seq != self.next_seq {
            return Err(ReplayError::Sequence {
                expected: self.next_seq,
                found: event.seq,
            });
        }
        match &event.body {
            EventBody::Created { .. } => return Err(ReplayError::DuplicateCreated(event.seq)),
            EventBody::StudentMessage { act, text } => {
                self.push(Role::Student, ActUtterance::new(act.clone(), text.clone()));
                self.last_error = None;
            }
            EventBody::TutorStep { act, utterance, .. } => {
                self.push(Role::Tutor, ActUtterance::new(act.clone(), utterance.clone()));
                self.last_error = None;
            }
            EventBody::Error { message } => self.last_error = Some(message.clone()),
        }
        self.next_seq += 1;
        Ok(())
    }

    /// Builds the next event with the right sequence number; the caller
    /// persists it before applying.
    pub fn event(&self, body: EventBody) -> SessionEvent {
        SessionEvent {
            session_id: self.id.clone(),
            seq: self.next_seq,
            at: Utc::now(),
            body,
        }
    }

    // A message from the same speaker as the last turn joins that turn, which
    // keeps turns alternating after a failed tutor step.
    fn push(&mut self, speaker: Role, u: ActUtterance) {
        let turns = &mut self.transcript.turns;
        match turns.last_mut() {
            Some(t) if t.speaker == speaker => t.utterances.push(u),
            _ => {
                let mut turn = Turn::new(speaker, vec![u]);
                if turns.is_empty() {
                    turn = turn.with_content(self.content_pack.clone());
                }
                turns.push(turn);
            }
        }
    }

    pub fn task_input(&self) -> TaskInput {
        let ctx = DialogueContext::from_turns(self.transcript.turns.clone());
        TaskInput {
            context: ctx.render(),
            plain_context: ctx.render_plain(),
            content: self
                .content_pack
                .iter()
                .map(ContentTag::display_line)
                .collect::<Vec<_>>()
                .join("\n"),
        }
    }

    /// Transcript in the corpus grammar. A session with no turns yet renders
    /// as a bare header line.
    pub fn export(&self) -> String {
        render_transcript(&self.transcript)
    }
}

/// Resolves the act for a student message.
pub fn student_act(taxonomy: &Taxonomy, raw: Option<&str>) -> Result<ActId, String> {
    let raw = raw.unwrap_or(DEFAULT_STUDENT_ACT);
    let act = taxonomy.validate_act(raw).map_err(|e| e.to_string())?;
    if act.role() != Role::Student {
        return Err(format!("{act} is not a student act"));
    }
    Ok(act)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tutorkit_core::corpus::parse_transcript;

    fn created(id: &str) -> SessionEvent {
        SessionEvent {
            session_id: id.into(),
            seq: 0,
            at: Utc::now(),
            body: EventBody::Created {
                content_pack: vec![ContentTag::new("Activity2-1", Some("Key Sentence: hello".into()))],
                mode: Mode::ZeroShot,
            },
        }
    }

    #[test]
    fn replay_folds_events() {
        let mut events = vec![created("x1")];
        let mut s = LiveSession::replay(&events).unwrap();
        assert_eq!(s.export(), "=== session x1 tutor=zero_shot student=student ===\n");
        let bodies = [
            EventBody::StudentMessage {
                act: ActId::parse("s.answer.answer").unwrap(),
                text: "navigate?".into(),
            },
            EventBody::Error {
                message: "timeout".into(),
            },
            EventBody::StudentMessage {
                act: ActId::parse("s.general").unwrap(),
                text: "hello?".into(),
            },
            EventBody::TutorStep {
                act: ActId::parse("t.teach.hint").unwrap(),
                utterance: "가이드를 생각해 보세요.".into(),
                raw_act_reply: "t.teach.hint".into(),
                attempts: 1,
            },
        ];
        for b in bodies {
            let e = s.event(b);
            s.apply(&e).unwrap();
            events.push(e);
        }
        assert_eq!(LiveSession::replay(&events).unwrap(), s);
        assert_eq!(s.transcript.turns.len(), 2);
        assert_eq!(s.transcript.turns[0].utterances.len(), 2);
        assert_eq!(s.transcript.turns[0].content_tags.len(), 1);
        let parsed = parse_transcript(&s.export(), Taxonomy::bundled()).unwrap();
        assert_eq!(parsed, s.transcript);
    }

    #[test]
    fn replay_rejects_bad_logs() {
        assert_eq!(LiveSession::replay(&[]).unwrap_err(), ReplayError::Empty);
        let mut e = created("x");
        let s = LiveSession::replay(&[e.clone()]).unwrap();
        let mut bad = s.event(EventBody::Error { message: "m".into() });
        bad.seq = 5;
        assert_eq!(
            LiveSession::replay(&[e.clone(), bad]).unwrap_err(),
            ReplayError::Sequence { expected: 1, found: 5 }
        );
        e.body = EventBody::Error { message: "m".into() };
        assert_eq!(LiveSession::replay(&[e]).unwrap_err(), ReplayError::NotCreated("error"));
    }

    #[test]
    fn text_cleanup_and_student_acts() {
        assert_eq!(clean_text("  a [b]\n tutor: c  "), "a (b) tutor: c");
        let t = Taxonomy::bundled();
        assert_eq!(student_act(t, None).unwrap().as_str(), DEFAULT_STUDENT_ACT);
        assert!(student_act(t, Some("t.teach.hint")).is_err());
        assert!(student_act(t, Some("s.nope")).is_err());
    }
}
