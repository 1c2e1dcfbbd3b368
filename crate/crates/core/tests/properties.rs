//! Invariants of the metrics, taxonomy and corpus split.

use std::collections::HashSet;

use proptest::prelude::*;
use tutorkit_core::corpus::{act_distribution, split_corpus};
use tutorkit_core::metrics::{
    corpus_bleu, embed_match_f1, fleiss_kappa, learning_gain, EmbeddingProvider, GainRecord, HashEmbedder, MetricError,
    RatingMatrix,
};
use tutorkit_core::{fixtures, Category, Role, Taxonomy};

fn sentence() -> impl Strategy<Value = String> {
    prop::collection::vec("[a-z가-힣]{1,6}", 1..12).prop_map(|w| w.join(" "))
}

proptest! {
    #[test]
    fn bleu_identity(v in prop::collection::vec(sentence(), 1..8)) {
        let score = corpus_bleu(&v, &v).unwrap();
        // without a single 4-gram the geometric mean collapses to 0
        if v.iter().any(|s| s.split(' ').count() >= 4) {
            prop_assert!((score - 100.0).abs() < 1e-9);
        } else {
            prop_assert_eq!(score, 0.0);
        }
    }

    #[test]
    fn bleu_bounded(h in prop::collection::vec(sentence(), 1..6), r in prop::collection::vec(sentence(), 1..6)) {
        let n = h.len().min(r.len());
        let s = corpus_bleu(&h[..n], &r[..n]).unwrap();
        prop_assert!((0.0..=100.0).contains(&s));
    }

    #[test]
    fn match_f1_symmetric(a in sentence(), b in sentence()) {
        let e = HashEmbedder::default();
        let ab = embed_match_f1(&e.embed_tokens(&a).unwrap(), &e.embed_tokens(&b).unwrap()).unwrap();
        let ba = embed_match_f1(&e.embed_tokens(&b).unwrap(), &e.embed_tokens(&a).unwrap()).unwrap();
        prop_assert!((ab.f1 - ba.f1).abs() < 1e-12);
        prop_assert!((ab.precision - ba.recall).abs() < 1e-12);
        let aa = embed_match_f1(&e.embed_tokens(&a).unwrap(), &e.embed_tokens(&a).unwrap()).unwrap();
        prop_assert!((aa.f1 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn unanimous_items_give_kappa_one(cats in prop::collection::vec(0..4usize, 2..10), raters in 2..6u32) {
        prop_assume!(cats.iter().collect::<HashSet<_>>().len() > 1);
        let rows = cats.iter().map(|&c| {
            let mut r = vec![0; 4];
            r[c] = raters;
            r
        }).collect();
        prop_assert!((fleiss_kappa(&RatingMatrix::new(rows).unwrap()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_category_kappa_undefined(n in 1..10usize, raters in 2..6u32) {
        let m = RatingMatrix::new(vec![vec![raters, 0]; n]).unwrap();
        prop_assert_eq!(fleiss_kappa(&m).unwrap_err(), MetricError::UndefinedKappa);
    }

    #[test]
    fn gain_antisymmetric(pre in 0.0..=100.0f64, post in 0.0..=100.0f64) {
        let g = learning_gain(&GainRecord { pre, post }).unwrap();
        let back = learning_gain(&GainRecord { pre: post, post: pre }).unwrap();
        prop_assert!((g + back).abs() < 1e-12);
        prop_assert!((-1.0..=1.0).contains(&g));
    }

    #[test]
    fn split_partitions(n_test in 0..=5usize, seed in any::<u64>()) {
        let c = fixtures::corpus();
        let (train, test) = split_corpus(&c, n_test, seed).unwrap();
        prop_assert_eq!(test.len(), n_test);
        prop_assert_eq!(train.len() + test.len(), c.len());
        let mut ids: Vec<_> = train.iter().chain(&test).map(|s| s.id.clone()).collect();
        ids.sort();
        prop_assert_eq!(ids, c.iter().map(|s| s.id.clone()).collect::<Vec<_>>());
        prop_assert_eq!(split_corpus(&c, n_test, seed).unwrap(), (train, test));
    }

    #[test]
    fn validate_act_round_trip(i in 0..43usize) {
        let t = Taxonomy::bundled();
        let def = t.iter().nth(i).unwrap();
        prop_assert_eq!(t.validate_act(def.id.as_str()).unwrap(), def.id.clone());
        let upper = def.id.as_str().to_uppercase();
        prop_assert!(t.validate_act(&upper).is_err());
    }
}

#[test]
fn split_rejects_oversized_test_set() {
    assert!(split_corpus(&fixtures::corpus(), 6, 0).is_err());
}

#[test]
fn distribution_sums_to_one() {
    let d = act_distribution(&fixtures::corpus()).unwrap();
    assert!((d.values().sum::<f64>() - 1.0).abs() < 1e-9);
    assert!(d.keys().all(|a| a.role() == Role::Tutor));
}

#[test]
fn acts_by_partitions_each_role() {
    let t = Taxonomy::bundled();
    assert_eq!(t.len(), 43);
    for role in [Role::Tutor, Role::Student] {
        let all: HashSet<_> = t.acts_by(role, None).into_iter().map(|d| d.id.clone()).collect();
        let mut union = HashSet::new();
        for &cat in Category::for_role(role) {
            let part = t.acts_by(role, Some(cat));
            assert_eq!(Some(part.len()), cat.expected_count(role), "{cat:?}");
            for d in part {
                assert!(union.insert(d.id.clone()), "{} listed twice", d.id);
            }
        }
        assert_eq!(union, all);
    }
    assert_eq!(t.acts_by(Role::Tutor, None).len(), 34);
    assert_eq!(t.acts_by(Role::Student, None).len(), 9);
    assert_eq!(t.teaching_acts().len(), 22);
}
