use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::context::DialogueContext;
use crate::corpus::Session;
use crate::scenario::content_at;
use crate::taxonomy::{ActId, Role};

/// A training-split example of one tutor act in context.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub context: String,
    pub content: String,
    pub act: ActId,
    pub utterance: String,
}

/// Tutor utterances from the training split, grouped by act.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExampleIndex {
    by_act: BTreeMap<ActId, Vec<Exemplar>>,
}

impl ExampleIndex {
    /// Every tutor act-level utterance with a non-empty context becomes an
    /// exemplar under its act, in session, turn, utterance order.
    pub fn build(train: &[Session], max_turns: Option<usize>) -> Self {
        let mut by_act: BTreeMap<ActId, Vec<Exemplar>> = BTreeMap::new();
        for s in train {
            for (ti, ui, t, u) in s.positions() {
                if t.speaker != Role::Tutor {
                    continue;
                }
                let ctx = DialogueContext::before(s, ti, ui);
                if ctx.is_empty() {
                    continue;
                }
                by_act.entry(u.act.clone()).or_default().push(Exemplar {
                    context: ctx.truncate(max_turns).render(),
                    content: content_at(s, ti),
                    act: u.act.clone(),
                    utterance: u.text.clone(),
                });
            }
        }
        ExampleIndex { by_act }
    }

    pub fn exemplars(&self, act: &ActId) -> &[Exemplar] {
        self.by_act.get(act).map_or(&[], Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.by_act.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.by_act.is_empty()
    }

    /// First exemplar of `act`, or with `rotation = Some((seed, key))` a
    /// pseudo-random one chosen deterministically from `seed` and `key`.
    pub fn pick(&self, act: &ActId, rotation: Option<(u64, &str)>) -> Option<&Exemplar> {
        let list = self.exemplars(act);
        if list.is_empty() {
            return None;
        }
        let i = match rotation {
            None => 0,
            Some((seed, key)) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ key_hash(key));
                rng.gen_range(0..list.len())
            }
        };
        list.get(i)
    }
}

fn key_hash(key: &str) -> u64 {
    key.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}
