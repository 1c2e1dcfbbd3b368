use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Session;
use crate::taxonomy::{ActId, Role};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StatsError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("corpus has no tutor act-level utterances")]
    NoTutorActs,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RolePair {
    pub tutor: f64,
    pub student: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_sessions: usize,
    pub avg_turns_per_session: f64,
    pub avg_words_per_turn: RolePair,
    pub avg_act_utterances_per_session: RolePair,
    pub act_histogram: BTreeMap<ActId, usize>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn corpus_stats(corpus: &[Session]) -> Result<CorpusStats, StatsError> {
    if corpus.is_empty() {
        return Err(StatsError::EmptyCorpus);
    }
    let mut turns = 0;
    // indexed by role: tutor = 0, student = 1
    let mut role_turns = [0usize; 2];
    let mut role_words = [0usize; 2];
    let mut role_utts = [0usize; 2];
    let mut hist = BTreeMap::new();
    for s in corpus {
        turns += s.turns.len();
        for t in &s.turns {
            let r = usize::from(t.speaker == Role::Student);
            role_turns[r] += 1;
            role_words[r] += t.word_count();
            role_utts[r] += t.utterances.len();
            for u in &t.utterances {
                *hist.entry(u.act.clone()).or_insert(0) += 1;
            }
        }
    }
    let n = corpus.len();
    Ok(CorpusStats {
        n_sessions: n,
        avg_turns_per_session: ratio(turns, n),
        avg_words_per_turn: RolePair {
            tutor: ratio(role_words[0], role_turns[0]),
            student: ratio(role_words[1], role_turns[1]),
        },
        avg_act_utterances_per_session: RolePair {
            tutor: ratio(role_utts[0], n),
            student: ratio(role_utts[1], n),
        },
        act_histogram: hist,
    })
}

/// Relative frequency of each tutor act over all tutor act-level utterances.
pub fn act_distribution(corpus: &[Session]) -> Result<BTreeMap<ActId, f64>, StatsError> {
    if corpus.is_empty() {
        return Err(StatsError::EmptyCorpus);
    }
    let mut counts: BTreeMap<ActId, usize> = BTreeMap::new();
    for s in corpus {
        for (_, _, t, u) in s.positions() {
            if t.speaker == Role::Tutor {
                *counts.entry(u.act.clone()).or_insert(0) += 1;
            }
        }
    }
    let total: usize = counts.values().sum();
    if total == 0 {
        return Err(StatsError::NoTutorActs);
    }
    Ok(counts.into_iter().map(|(a, c)| (a, c as f64 / total as f64)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{ActUtterance, Turn};

    fn act(s: &str) -> ActId {
        ActId::parse(s).unwrap()
    }

    fn one_turn(text: &str) -> Session {
        Session {
            id: "A".into(),
            tutor_id: "T".into(),
            student_id: "S".into(),
            turns: vec![Turn::new(Role::Tutor, vec![ActUtterance::new(act("t.general"), text)])],
        }
    }

    #[test]
    fn single_tutor_turn() {
        let st = corpus_stats(&[one_turn("a b c")]).unwrap();
        assert_eq!(st.avg_words_per_turn.tutor, 3.0);
        assert_eq!(st.avg_words_per_turn.student, 0.0);
        assert_eq!(st.avg_turns_per_session, 1.0);
        assert_eq!(st.act_histogram[&act("t.general")], 1);
    }

    #[test]
    fn only_general_distribution() {
        let d = act_distribution(&[one_turn("x"), one_turn("y z")]).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[&act("t.general")], 1.0);
    }

    #[test]
    fn empty_corpus() {
        assert_eq!(corpus_stats(&[]).unwrap_err(), StatsError::EmptyCorpus);
        assert_eq!(act_distribution(&[]).unwrap_err(), StatsError::EmptyCorpus);
    }
}
