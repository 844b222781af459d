mod common;

use common::*;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use recdata::{build_dataset, Interaction};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn permutation_does_not_change_the_digest(d in arb_dataset(80), seed in any::<u64>()) {
        let mut rows = d.interactions().to_vec();
        rows.shuffle(&mut seeded(seed));
        prop_assert_eq!(build_dataset(rows).unwrap().checksum(), d.checksum());
    }

    #[test]
    fn any_single_field_change_changes_the_digest(d in arb_dataset(80), pick in any::<prop::sample::Index>(), field in 0usize..4) {
        let mut rows = d.interactions().to_vec();
        let i = pick.index(rows.len());
        let x: &mut Interaction = &mut rows[i];
        match field {
            0 => x.user = format!("{}x", x.user).into(),
            1 => x.item = format!("{}x", x.item).into(),
            2 => x.rating = x.rating.map(|r| r + 0.5),
            _ => x.timestamp = x.timestamp.map(|t| t + 1),
        }
        prop_assert_ne!(build_dataset(rows).unwrap().checksum(), d.checksum());
    }
}

#[test]
fn digest_is_md5_of_the_canonical_form() {
    let d = d0();
    let bytes = recdata::canonical_serialize(&d);
    assert_eq!(
        String::from_utf8(bytes.clone()).unwrap(),
        "u1\ti1\t5\t100\nu1\ti2\t3\t200\nu2\ti1\t4\t150\nu2\ti3\t2\t300\nu3\ti3\t5\t50\n"
    );
    assert_eq!(recdata::Digest::of(&bytes), d.checksum());
}
