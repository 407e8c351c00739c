use std::collections::BTreeSet;

use cbir_core::simulation::compute_factors;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Membership-table recount over the whole corpus `0..corpus`.
fn oracle(returned: &[bool], relevant: &[bool]) -> [usize; 6] {
    let mut c = [0; 6];
    for i in 0..returned.len() {
        match (returned[i], relevant[i]) {
            (true, true) => c[2] += 1,
            (true, false) => c[3] += 1,
            (false, true) => c[4] += 1,
            (false, false) => c[5] += 1,
        }
    }
    c[0] = c[2] + c[3];
    c[1] = c[2] + c[4];
    c
}

#[test]
fn thousand_random_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let corpus = rng.random_range(0..200usize);
        let p_ret = rng.random::<f64>();
        let p_rel = rng.random::<f64>();
        let returned: Vec<bool> = (0..corpus).map(|_| rng.random_bool(p_ret)).collect();
        let relevant: Vec<bool> = (0..corpus).map(|_| rng.random_bool(p_rel)).collect();
        let to_set = |m: &[bool]| -> BTreeSet<u64> { (0..corpus).filter(|&i| m[i]).map(|i| i as u64).collect() };

        let f = compute_factors("q", &to_set(&returned), &to_set(&relevant), corpus).unwrap();
        let [ri, ai, rai, iri, anr, inr] = oracle(&returned, &relevant);
        assert_eq!((f.ri, f.ai, f.rai, f.iri, f.anr, f.inr), (ri, ai, rai, iri, anr, inr));
        let p = if ri == 0 { 0.0 } else { rai as f64 / ri as f64 };
        let r = if ai == 0 { 0.0 } else { rai as f64 / ai as f64 };
        assert!((f.precision - p).abs() < 1e-12);
        assert!((f.recall - r).abs() < 1e-12);
        f.check(corpus).unwrap();
    }
}

proptest! {
    #[test]
    fn counts_partition_the_corpus(
        returned in proptest::collection::btree_set(0u64..100, 0..60),
        relevant in proptest::collection::btree_set(0u64..100, 0..60),
        extra in 0usize..50,
    ) {
        let corpus = returned.union(&relevant).count() + extra;
        let f = compute_factors("q", &returned, &relevant, corpus).unwrap();
        prop_assert!(f.check(corpus).is_ok());
        prop_assert_eq!(f.inr, extra);
    }

    #[test]
    fn undersized_corpus_is_rejected(
        returned in proptest::collection::btree_set(0u64..100, 1..60),
        relevant in proptest::collection::btree_set(0u64..100, 0..60),
    ) {
        let needed = returned.union(&relevant).count();
        prop_assert!(compute_factors("q", &returned, &relevant, needed - 1).is_err());
    }
}
