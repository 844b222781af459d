mod common;

use common::*;
use proptest::prelude::*;
use recdata::processing::{self, BinarizeMode, KCoreMode, TimeKeep};
use recdata::ParamValue;

#[test]
fn iterative_kcore_matches_brute_force_fixpoint() {
    let mut rng = seeded(7);
    for case in 0..200 {
        let d = random_dataset(&mut rng, &Shape::default());
        for k in [2, 3, 5] {
            let got = processing::kcore(&d, k, KCoreMode::Iterative, None).unwrap();
            let want = brute_kcore(&d, k);
            assert_eq!(got.multiset(), multiset_of(&want), "case {case} k {k}");
            let step = got.history().last().unwrap();
            assert_eq!(step.outcome.get("fixpoint"), Some(&ParamValue::Bool(true)), "case {case}");
            let mut du = std::collections::HashMap::new();
            let mut di = std::collections::HashMap::new();
            for x in got.interactions() {
                *du.entry(x.user.clone()).or_insert(0) += 1;
                *di.entry(x.item.clone()).or_insert(0) += 1;
            }
            assert!(du.values().chain(di.values()).all(|&n| n >= k), "case {case} k {k}");
        }
    }
}

#[test]
fn d0_examples() {
    let d = d0();
    let b = processing::binarize(&d, 4.0, BinarizeMode::DropBelow).unwrap();
    assert_eq!(
        pairs(&b),
        [("u1", "i1"), ("u2", "i1"), ("u3", "i3")].map(|(u, i)| (u.to_string(), i.to_string()))
    );
    assert!(b.interactions().iter().all(|x| x.rating == Some(1.0)));
    assert_eq!(processing::kcore(&d, 2, KCoreMode::User, None).unwrap().len(), 4);
    assert!(processing::kcore(&d, 2, KCoreMode::Iterative, None).unwrap().is_empty());
    assert_eq!(processing::drop_cold_users(&d, 10).unwrap().len(), 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn kcore_is_idempotent(d in arb_dataset(120), k in 1usize..5) {
        let once = processing::kcore(&d, k, KCoreMode::Iterative, None).unwrap();
        let twice = processing::kcore(&once, k, KCoreMode::Iterative, None).unwrap();
        prop_assert_eq!(once.multiset(), twice.multiset());
    }

    #[test]
    fn time_filters_partition(d in arb_dataset(80), cutoff in -10i64..2100) {
        let before = processing::filter_by_time(&d, cutoff, TimeKeep::Before).unwrap();
        let after = processing::filter_by_time(&d, cutoff, TimeKeep::After).unwrap();
        prop_assert_eq!(union(&[&before, &after]), d.multiset());
        prop_assert!(timestamps(&before).all(|t| t < cutoff));
        prop_assert!(timestamps(&after).all(|t| t >= cutoff));
    }

    #[test]
    fn binarize_keeps_only_ones(d in arb_dataset(80), t in 0.0f64..6.0) {
        let b = processing::binarize(&d, t, BinarizeMode::DropBelow).unwrap();
        prop_assert!(b.interactions().iter().all(|x| x.rating == Some(1.0)));
        let all = pairs(&d);
        prop_assert!(pairs(&b).iter().all(|p| all.binary_search(p).is_ok()));
        let z = processing::binarize(&d, t, BinarizeMode::ZeroOne).unwrap();
        prop_assert_eq!(z.len(), d.len());
        prop_assert_eq!(z.interactions().iter().filter(|x| x.rating == Some(1.0)).count(), b.len());
    }

    #[test]
    fn cold_users_equals_user_kcore(d in arb_dataset(80), k in 1usize..6) {
        let a = processing::drop_cold_users(&d, k).unwrap();
        let b = processing::kcore(&d, k, KCoreMode::User, None).unwrap();
        prop_assert_eq!(a.multiset(), b.multiset());
    }
}
