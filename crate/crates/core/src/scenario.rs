//! Evaluation scenarios anchored at gold tutor utterances of teaching acts.

use std::fmt;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::context::DialogueContext;
use crate::corpus::{Anchor, Session};
use crate::taxonomy::{ActId, Role, Taxonomy};
use crate::Exec;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestScenario {
    pub id: String,
    pub target_act: ActId,
    /// Annotated prefix before the anchor, transcript style.
    pub context: String,
    /// Same prefix as `speaker: text` lines without tags.
    pub plain_context: String,
    /// Learning content in play at the anchor, one `[id] body` line per tag.
    pub content: String,
    pub gold_utterance: String,
    /// The utterance immediately before the anchor.
    pub prev_utterance: String,
    pub anchor: Anchor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScenarioOptions {
    pub per_act: usize,
    pub seed: u64,
    pub max_turns: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScenarioError {
    #[error("per_act must be at least 1")]
    ZeroPerAct,
    #[error("`{0}` is not a teaching act")]
    NotTeaching(ActId),
    #[error("not enough anchors for {per_act} scenarios per act: {}", DeficitList(.deficits))]
    Deficit {
        per_act: usize,
        deficits: Vec<(ActId, usize)>,
    },
}

struct DeficitList<'a>(&'a [(ActId, usize)]);

impl fmt::Display for DeficitList<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (act, n)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{act} has {n}")?;
        }
        Ok(())
    }
}

/// Positions of `act` whose preceding context holds at least one
/// act-level utterance, in (session, turn, utterance) order.
pub fn anchor_candidates(corpus: &[Session], taxonomy: &Taxonomy, act: &ActId) -> Result<Vec<Anchor>, ScenarioError> {
    if !taxonomy.is_teaching(act) {
        return Err(ScenarioError::NotTeaching(act.clone()));
    }
    Ok(corpus
        .iter()
        .flat_map(|s| {
            let mut seen = 0usize;
            s.positions()
                .filter_map(move |(ti, ui, t, u)| {
                    let prior = seen;
                    seen += 1;
                    (t.speaker == Role::Tutor && &u.act == act && prior > 0).then(|| s.anchor(ti, ui))
                })
                .collect::<Vec<_>>()
        })
        .collect())
}

/// Content tags of the anchor turn, or of the nearest earlier turn that has any.
pub fn content_at(session: &Session, turn_index: usize) -> String {
    session.turns[..=turn_index]
        .iter()
        .rev()
        .find(|t| !t.content_tags.is_empty())
        .map(|t| {
            t.content_tags
                .iter()
                .map(|c| c.display_line())
                .collect::<Vec<_>>()
                .join("\n")
        })
        .unwrap_or_default()
}

fn scenario_at(session: &Session, anchor: &Anchor, act: &ActId, max_turns: Option<usize>) -> TestScenario {
    let full = DialogueContext::before(session, anchor.turn_index, anchor.utterance_index);
    let prev = full.last_utterance().map(|(_, u)| u.text.clone()).unwrap_or_default();
    let ctx = full.truncate(max_turns);
    TestScenario {
        id: String::new(),
        target_act: act.clone(),
        context: ctx.render(),
        plain_context: ctx.render_plain(),
        content: content_at(session, anchor.turn_index),
        gold_utterance: session
            .utterance_at(anchor.turn_index, anchor.utterance_index)
            .expect("anchor in range")
            .text
            .clone(),
        prev_utterance: prev,
        anchor: anchor.clone(),
    }
}

/// Samples `per_act` anchors without replacement for each teaching act.
///
/// Act `k` (in canonical order) draws from its own stream of `seed`, so the
/// result does not depend on execution order. Scenario ids run `s0000`,
/// `s0001`, ... over acts in canonical order and anchors in corpus order.
pub fn build_scenarios(
    corpus: &[Session],
    taxonomy: &Taxonomy,
    options: ScenarioOptions,
    exec: Exec,
) -> Result<Vec<TestScenario>, ScenarioError> {
    if options.per_act == 0 {
        return Err(ScenarioError::ZeroPerAct);
    }
    let acts: Vec<(u64, ActId)> = taxonomy
        .teaching_acts()
        .into_iter()
        .enumerate()
        .map(|(k, a)| (k as u64, a))
        .collect();
    let pools: Vec<Vec<Anchor>> = exec.map(&acts, |(_, a)| {
        anchor_candidates(corpus, taxonomy, a).expect("teaching act")
    });
    let deficits: Vec<(ActId, usize)> = acts
        .iter()
        .zip(&pools)
        .filter(|(_, p)| p.len() < options.per_act)
        .map(|((_, a), p)| (a.clone(), p.len()))
        .collect();
    if !deficits.is_empty() {
        return Err(ScenarioError::Deficit {
            per_act: options.per_act,
            deficits,
        });
    }
    let jobs: Vec<(&(u64, ActId), &Vec<Anchor>)> = acts.iter().zip(&pools).collect();
    let per_act = exec.map(&jobs, |((k, act), pool)| {
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        rng.set_stream(*k);
        let mut picked = index::sample(&mut rng, pool.len(), options.per_act).into_vec();
        picked.sort_unstable();
        picked
            .into_iter()
            .map(|i| {
                let a = &pool[i];
                let session = corpus.iter().find(|s| s.id == a.session_id).expect("anchor session");
                scenario_at(session, a, act, options.max_turns)
            })
            .collect::<Vec<_>>()
    });
    let mut out: Vec<TestScenario> = per_act.into_iter().flatten().collect();
    for (i, s) in out.iter_mut().enumerate() {
        s.id = format!("s{i:04}");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_transcript;

    fn act(s: &str) -> ActId {
        ActId::parse(s).unwrap()
    }

    const DOC: &str = "\
tutor: [A1][body one] [t.teach.method.vocab_expression.etymology]first
student: [s.answer.answer]ok
tutor: [t.teach.method.vocab_expression.etymology]second
tutor: [A2][body two] [t.general]hi [t.teach.method.vocab_expression.etymology]third";

    #[test]
    fn candidates_skip_empty_context() {
        let s = parse_transcript(DOC, Taxonomy::bundled()).unwrap();
        let c = anchor_candidates(
            &[s],
            Taxonomy::bundled(),
            &act("t.teach.method.vocab_expression.etymology"),
        )
        .unwrap();
        let pos: Vec<_> = c.iter().map(|a| (a.turn_index, a.utterance_index)).collect();
        assert_eq!(pos, vec![(2, 0), (3, 1)]);
        let s = parse_transcript(DOC, Taxonomy::bundled()).unwrap();
        assert!(
            anchor_candidates(std::slice::from_ref(&s), Taxonomy::bundled(), &act("t.teach.repair"))
                .unwrap()
                .is_empty()
        );
        assert_eq!(
            anchor_candidates(&[s], Taxonomy::bundled(), &act("t.general")).unwrap_err(),
            ScenarioError::NotTeaching(act("t.general"))
        );
    }

    #[test]
    fn content_falls_back_to_earlier_turn() {
        let s = parse_transcript(DOC, Taxonomy::bundled()).unwrap();
        assert_eq!(content_at(&s, 2), "[A1] body one");
        assert_eq!(content_at(&s, 3), "[A2] body two");
    }

    #[test]
    fn deficit_names_every_short_act() {
        let s = parse_transcript(DOC, Taxonomy::bundled()).unwrap();
        let opts = ScenarioOptions {
            per_act: 1,
            seed: 0,
            max_turns: None,
        };
        let ScenarioError::Deficit { deficits, .. } =
            build_scenarios(&[s], Taxonomy::bundled(), opts, Exec::Sequential).unwrap_err()
        else {
            panic!("expected deficit");
        };
        assert_eq!(deficits.len(), 21);
        assert!(deficits.iter().all(|(_, n)| *n == 0));
        assert!(!deficits.iter().any(|(a, _)| a.as_str().ends_with("etymology")));
    }
}
