use mepf_core::oracle::{ClassSet, QueryOracle};
use mepf_core::{exhaustive_search, ProbabilityVector};
use proptest::prelude::*;

fn public_view(o: &QueryOracle, upto: usize) -> (u64, usize, Vec<u64>, usize) {
    (
        o.query_count(),
        o.samples_touched(),
        (0..upto).map(|j| o.queries_for(j)).collect(),
        o.num_classes(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    // Two oracles with different hidden samples are indistinguishable through
    // everything except the answers themselves.
    #[test]
    fn only_answers_depend_on_hidden_samples(
        a in prop::collection::vec(0usize..6, 1..30),
        b_seed in any::<u64>(),
        calls in prop::collection::vec((0usize..30, prop::collection::btree_set(0usize..6, 1..6)), 0..60),
    ) {
        let b: Vec<usize> = a.iter().enumerate().map(|(i, _)| ((b_seed >> (i % 60)) as usize + i) % 6).collect();
        let mut oa = QueryOracle::replay(6, a.clone()).unwrap();
        let mut ob = QueryOracle::replay(6, b).unwrap();
        for (j, set) in calls {
            let j = j % a.len();
            let s = ClassSet::from_classes(6, set);
            let ra = oa.query(j, &s);
            let rb = ob.query(j, &s);
            prop_assert_eq!(ra.is_ok(), rb.is_ok());
            prop_assert_eq!(public_view(&oa, a.len()), public_view(&ob, a.len()));
        }
        let total: u64 = (0..a.len()).map(|j| oa.queries_for(j)).sum();
        prop_assert_eq!(total, oa.query_count());
    }
}

#[test]
fn fresh_oracle_is_empty() {
    let pv = ProbabilityVector::new(&[0.5, 0.5 - 1e-3, 1e-3]).unwrap();
    let o = QueryOracle::iid(&pv, 1);
    assert_eq!((o.query_count(), o.samples_touched()), (0, 0));
}

#[test]
fn replay_example_sequence() {
    let mut o = QueryOracle::replay(3, vec![1, 0, 0]).unwrap();
    assert!(!o.query(0, &ClassSet::from_classes(3, [0, 2])).unwrap());
    assert_eq!(o.query_count(), 1);
    assert!(o.query(0, &ClassSet::from_classes(3, [1])).unwrap());
    assert_eq!(o.query_count(), 2);
    assert_eq!(o.queries_for(0), 2);
}

#[test]
fn identifying_one_sample_over_eight_classes() {
    let mut o = QueryOracle::replay(8, vec![6]).unwrap();
    let est = exhaustive_search(&mut o, 1).unwrap();
    assert_eq!(est.class, 6);
    assert_eq!((o.query_count(), o.samples_touched()), (3, 1));
}
