//! Dialogue prefixes as seen by prompts and training samples.

use crate::corpus::{render_turn, ActUtterance, Session, Turn};
use crate::taxonomy::Role;

/// Everything in a session strictly before one act-level utterance.
///
/// When the cut falls at the start of a turn that carries content tags, the
/// prefix ends with a tags-only "shell" of that turn, so the learning content
/// in play is visible even for the first utterance of a session. A cut in the
/// middle of a turn keeps that turn's earlier utterances.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DialogueContext {
    turns: Vec<Turn>,
}

/// The utterance taken off the end of a context by [`DialogueContext::without_last`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RemovedUtterance {
    /// Index (within the context) of the turn the utterance came from.
    pub turn_index: usize,
    pub speaker: Role,
    pub utterance: ActUtterance,
    /// The source turn held nothing else and was removed with it.
    pub dropped_turn: bool,
}

impl DialogueContext {
    pub fn from_turns(turns: Vec<Turn>) -> Self {
        DialogueContext { turns }
    }

    /// Prefix of `session` before utterance `utterance_index` of turn `turn_index`.
    pub fn before(session: &Session, turn_index: usize, utterance_index: usize) -> Self {
        let mut turns: Vec<Turn> = session.turns[..turn_index].to_vec();
        if let Some(cur) = session.turns.get(turn_index) {
            if utterance_index > 0 || !cur.content_tags.is_empty() {
                turns.push(Turn {
                    speaker: cur.speaker,
                    content_tags: cur.content_tags.clone(),
                    utterances: cur.utterances[..utterance_index].to_vec(),
                });
            }
        }
        DialogueContext { turns }
    }

    pub fn turns(&self) -> &[Turn] {
        &self.turns
    }

    /// Keeps only the last `max_turns` turns (the shell counts as a turn).
    pub fn truncate(mut self, max_turns: Option<usize>) -> Self {
        if let Some(n) = max_turns {
            if self.turns.len() > n {
                self.turns.drain(..self.turns.len() - n);
            }
        }
        self
    }

    pub fn utterance_count(&self) -> usize {
        self.turns.iter().map(|t| t.utterances.len()).sum()
    }

    /// True when no act-level utterance precedes the cut (content tags alone
    /// do not count).
    pub fn is_empty(&self) -> bool {
        self.utterance_count() == 0
    }

    pub fn last_utterance(&self) -> Option<(Role, &ActUtterance)> {
        self.turns
            .iter()
            .rev()
            .find_map(|t| t.utterances.last().map(|u| (t.speaker, u)))
    }

    /// Annotated transcript lines, without a session header.
    pub fn render(&self) -> String {
        self.turns.iter().map(render_turn).collect::<Vec<_>>().join("\n")
    }

    /// One `speaker: text` line per act-level utterance, no tags.
    pub fn render_plain(&self) -> String {
        self.turns
            .iter()
            .flat_map(|t| t.utterances.iter().map(move |u| format!("{}: {}", t.speaker, u.text)))
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// Removes the final act-level utterance. A turn left with neither
    /// utterances nor content tags is dropped.
    pub fn without_last(&self) -> Option<(DialogueContext, RemovedUtterance)> {
        let idx = self.turns.iter().rposition(|t| !t.utterances.is_empty())?;
        let mut turns = self.turns.clone();
        let utterance = turns[idx].utterances.pop().expect("non-empty");
        let speaker = turns[idx].speaker;
        let dropped_turn = turns[idx].utterances.is_empty() && turns[idx].content_tags.is_empty();
        if dropped_turn {
            turns.remove(idx);
        }
        Some((
            DialogueContext { turns },
            RemovedUtterance {
                turn_index: idx,
                speaker,
                utterance,
                dropped_turn,
            },
        ))
    }

    /// Inverse of [`without_last`](Self::without_last).
    pub fn reinsert(&self, removed: &RemovedUtterance) -> DialogueContext {
        let mut turns = self.turns.clone();
        let i = removed.turn_index;
        if removed.dropped_turn {
            turns.insert(i, Turn::new(removed.speaker, vec![removed.utterance.clone()]));
        } else {
            turns[i].utterances.push(removed.utterance.clone());
        }
        DialogueContext { turns }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_transcript;
    use crate::Taxonomy;

    const DOC: &str = "\
tutor: [A1][Gap Fills: x ___ y] [t.assess.display_question]답이 몇번일까요?
student: [s.answer.answer][high]navigate?
tutor: [t.engage.encourage]너무 좋아요. [t.teach.method.vocab_expression.etymology]intro는 안을 보는 것을 의미해요.
tutor: [A2][Next] [t.operational.transition]다음으로 가요.";

    fn session() -> Session {
        parse_transcript(DOC, Taxonomy::bundled()).unwrap()
    }

    #[test]
    fn first_utterance_sees_only_content() {
        let c = DialogueContext::before(&session(), 0, 0);
        assert!(c.is_empty());
        assert_eq!(c.render(), "tutor: [A1][Gap Fills: x ___ y]");
        assert_eq!(c.render_plain(), "");
    }

    #[test]
    fn mid_turn_cut_keeps_earlier_utterances() {
        let c = DialogueContext::before(&session(), 2, 1);
        assert_eq!(c.utterance_count(), 3);
        assert!(c.render().ends_with("tutor: [t.engage.encourage]너무 좋아요."));
        assert_eq!(c.last_utterance().unwrap().1.text, "너무 좋아요.");
        assert_eq!(c.render_plain().lines().last(), Some("tutor: 너무 좋아요."));
    }

    #[test]
    fn removal_round_trips() {
        let s = session();
        for (t, u) in [(2, 1), (1, 0), (3, 0), (2, 0)] {
            let c = DialogueContext::before(&s, t, u);
            let (partial, removed) = c.without_last().unwrap();
            assert_eq!(partial.utterance_count() + 1, c.utterance_count());
            assert_eq!(partial.reinsert(&removed), c);
        }
        let (partial, removed) = DialogueContext::before(&s, 2, 1).without_last().unwrap();
        assert_eq!(
            (removed.speaker, removed.utterance.text.as_str()),
            (Role::Tutor, "너무 좋아요.")
        );
        assert!(removed.dropped_turn);
        assert!(partial.render().ends_with("[s.answer.answer][high]navigate?"));
        assert!(DialogueContext::before(&s, 0, 0).without_last().is_none());
    }

    #[test]
    fn truncation_keeps_tail() {
        let c = DialogueContext::before(&session(), 3, 0).truncate(Some(2));
        assert_eq!(c.turns().len(), 2);
        assert_eq!(c.turns()[1].content_tags[0].activity_id, "A2");
    }
}
