use std::collections::BTreeMap;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Session;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SplitError {
    #[error("cannot hold out {n_test} sessions from a corpus of {len}")]
    TooManyTest { n_test: usize, len: usize },
}

/// Session-granular train/test split, deterministic for a fixed seed.
///
/// When `n_test` equals the number of distinct tutors plus one and at least
/// one tutor has two sessions, one randomly chosen tutor contributes two test
/// sessions and every other tutor one. Otherwise `n_test` sessions are drawn
/// uniformly. Both halves keep corpus order.
pub fn split_corpus(corpus: &[Session], n_test: usize, seed: u64) -> Result<(Vec<Session>, Vec<Session>), SplitError> {
    if n_test > corpus.len() {
        return Err(SplitError::TooManyTest {
            n_test,
            len: corpus.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_tutor: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, s) in corpus.iter().enumerate() {
        by_tutor.entry(s.tutor_id.as_str()).or_default().push(i);
    }
    let doubles: Vec<&str> = by_tutor.iter().filter(|(_, v)| v.len() >= 2).map(|(k, _)| *k).collect();

    let mut test_idx: Vec<usize> = if n_test > 0 && n_test == by_tutor.len() + 1 && !doubles.is_empty() {
        let doubled = *doubles.choose(&mut rng).expect("non-empty");
        by_tutor
            .iter()
            .flat_map(|(tutor, idx)| {
                let take = if *tutor == doubled { 2 } else { 1 };
                idx.choose_multiple(&mut rng, take).copied().collect::<Vec<_>>()
            })
            .collect()
    } else {
        index::sample(&mut rng, corpus.len(), n_test).into_vec()
    };
    test_idx.sort_unstable();

    let mut train = Vec::with_capacity(corpus.len() - n_test);
    let mut test = Vec::with_capacity(n_test);
    let mut next = test_idx.iter().peekable();
    for (i, s) in corpus.iter().enumerate() {
        if next.peek() == Some(&&i) {
            next.next();
            test.push(s.clone());
        } else {
            train.push(s.clone());
        }
    }
    Ok((train, test))
}
