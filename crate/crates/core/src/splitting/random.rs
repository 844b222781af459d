use crate::checksum::canonical_order;
use crate::dataset::{params, Dataset, ProvenanceStep, StepCategory};
use crate::error::{Error, Result};

use super::rng::{shuffle, SplitMix64};
use super::{assemble, check_fraction, portion, user_runs, FoldKind, FoldSet, Part, SplitResult, Stratify};

/// Seeded random hold-out. `val_ratio` is a fraction of the whole dataset,
/// drawn after the test part; validation is absent when it is zero.
///
/// In user mode the ratios apply to each user's history, and users with fewer
/// than two interactions stay entirely in train.
pub fn random_holdout(d: &Dataset, test_ratio: f64, val_ratio: f64, seed: u64, stratify: Stratify) -> Result<SplitResult> {
    check_ratios(test_ratio, val_ratio)?;
    let assign = holdout_assignment(d, test_ratio, val_ratio, seed, stratify);
    let mut p = params([
        ("test_ratio", test_ratio.into()),
        ("val_ratio", val_ratio.into()),
        ("seed", seed.into()),
    ]);
    if stratify == Stratify::User {
        p.insert("stratify".into(), "user".into());
    }
    let step = ProvenanceStep::new(StepCategory::Split, "RandomHoldOut", p);
    Ok(assemble(d, &assign, val_ratio > 0.0, step))
}

fn check_ratios(test_ratio: f64, val_ratio: f64) -> Result<()> {
    check_fraction("test_ratio", test_ratio)?;
    if !(val_ratio >= 0.0 && val_ratio.is_finite()) {
        return Err(Error::BadRatio(format!("val_ratio must be >= 0, got {val_ratio}")));
    }
    if test_ratio + val_ratio >= 1.0 {
        return Err(Error::BadRatio(format!(
            "test_ratio + val_ratio must be below 1, got {}",
            test_ratio + val_ratio
        )));
    }
    Ok(())
}

fn holdout_assignment(d: &Dataset, test_ratio: f64, val_ratio: f64, seed: u64, stratify: Stratify) -> Vec<Part> {
    let xs = d.interactions();
    let mut assign = vec![Part::Train; xs.len()];
    let mut rng = SplitMix64::new(seed);
    let mut deal = |idx: &mut [usize], n_test: usize, n_val: usize| {
        shuffle(idx, &mut rng);
        for &i in &idx[..n_test] {
            assign[i] = Part::Test;
        }
        for &i in &idx[n_test..n_test + n_val] {
            assign[i] = Part::Val;
        }
    };
    match stratify {
        Stratify::System => {
            let mut order = canonical_order(xs);
            let n = order.len();
            let n_test = portion(n, test_ratio);
            let n_val = portion(n, val_ratio).min(n - n_test);
            deal(&mut order, n_test, n_val);
        }
        Stratify::User => {
            for mut run in user_runs(xs) {
                let n = run.len();
                if n < 2 {
                    continue;
                }
                let n_test = portion(n, test_ratio).min(n - 1);
                let n_val = portion(n, val_ratio).min(n - 1 - n_test);
                deal(&mut run, n_test, n_val);
            }
        }
    }
    assign
}

/// `k` independent random hold-outs; repetition `i` uses seed `seed + i`.
pub fn k_repeated_holdout(d: &Dataset, k: usize, test_ratio: f64, seed: u64, stratify: Stratify) -> Result<FoldSet> {
    if k == 0 {
        return Err(Error::BadArgument("k must be positive".into()));
    }
    check_ratios(test_ratio, 0.0)?;
    let folds = (0..k)
        .map(|i| {
            let assign = holdout_assignment(d, test_ratio, 0.0, seed.wrapping_add(i as u64), stratify);
            let mut p = params([("k", k.into()), ("test_ratio", test_ratio.into()), ("seed", seed.into())]);
            if stratify == Stratify::User {
                p.insert("stratify".into(), "user".into());
            }
            let step = ProvenanceStep::new(StepCategory::Split, "KRepeatedHoldOut", p).with_outcome("fold", i);
            assemble(d, &assign, false, step)
        })
        .collect();
    Ok(FoldSet {
        folds,
        kind: FoldKind::KRepeatedHoldOut,
    })
}

/// k-fold cross-validation. System mode deals the shuffled interactions into
/// `k` folds of near-equal size. User mode deals each user's shuffled history
/// round-robin, continuing the deal across users so fold sizes stay balanced;
/// users with a single interaction are kept in train in every fold.
pub fn cross_validation(d: &Dataset, k: usize, seed: u64, stratify: Stratify) -> Result<FoldSet> {
    if k < 2 {
        return Err(Error::BadArgument(format!("k must be at least 2, got {k}")));
    }
    if d.len() < k {
        return Err(Error::TooFewInteractions { have: d.len(), folds: k });
    }
    let xs = d.interactions();
    let mut fold_of: Vec<Option<usize>> = vec![None; xs.len()];
    let mut rng = SplitMix64::new(seed);
    match stratify {
        Stratify::System => {
            let mut order = canonical_order(xs);
            shuffle(&mut order, &mut rng);
            for (p, &i) in order.iter().enumerate() {
                fold_of[i] = Some(p % k);
            }
        }
        Stratify::User => {
            let mut offset = 0;
            for mut run in user_runs(xs) {
                if run.len() < 2 {
                    continue;
                }
                shuffle(&mut run, &mut rng);
                for (j, &i) in run.iter().enumerate() {
                    fold_of[i] = Some((offset + j) % k);
                }
                offset += run.len();
            }
        }
    }
    let folds = (0..k)
        .map(|f| {
            let assign: Vec<Part> = fold_of
                .iter()
                .map(|&g| if g == Some(f) { Part::Test } else { Part::Train })
                .collect();
            let mut p = params([("k", k.into()), ("seed", seed.into())]);
            if stratify == Stratify::User {
                p.insert("stratify".into(), "user".into());
            }
            let step = ProvenanceStep::new(StepCategory::Split, "CrossValidation", p).with_outcome("fold", f);
            assemble(d, &assign, false, step)
        })
        .collect();
    Ok(FoldSet {
        folds,
        kind: FoldKind::CrossValidation,
    })
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::d0;
    use super::*;
    use crate::dataset::{build_dataset, Interaction};

    #[test]
    fn d0_system_holdout_sizes() {
        let s = random_holdout(&d0(), 0.2, 0.0, 42, Stratify::System).unwrap();
        assert_eq!((s.test.len(), s.train.len()), (1, 4));
        assert!(s.val.is_none());
        let again = random_holdout(&d0(), 0.2, 0.0, 42, Stratify::System).unwrap();
        assert_eq!(s.checksums, again.checksums);
    }

    #[test]
    fn paired_ratios_use_the_whole_dataset() {
        let rows = (0..100)
            .map(|i| Interaction::new(format!("u{}", i % 7), format!("i{i}")))
            .collect();
        let d = build_dataset(rows).unwrap();
        let s = random_holdout(&d, 0.2, 0.1, 42, Stratify::System).unwrap();
        assert_eq!((s.train.len(), s.val.as_ref().unwrap().len(), s.test.len()), (70, 10, 20));
    }

    #[test]
    fn ratio_preconditions() {
        for (t, v) in [
            (0.0, 0.0),
            (1.0, 0.0),
            (1.5, 0.0),
            (-0.1, 0.0),
            (0.5, 0.5),
            (0.2, -0.1),
            (f64::NAN, 0.0),
        ] {
            assert!(
                matches!(random_holdout(&d0(), t, v, 0, Stratify::System), Err(Error::BadRatio(_))),
                "{t} {v}"
            );
        }
    }

    #[test]
    fn user_mode_keeps_small_profiles_in_train() {
        let s = random_holdout(&d0(), 0.5, 0.0, 3, Stratify::User).unwrap();
        // u1 and u2 have two interactions: one each to test. u3 stays in train.
        assert_eq!(s.test.len(), 2);
        let test_users = s.test.users();
        assert!(!test_users.iter().any(|u| &**u == "u3"));
        for u in test_users {
            assert!(s.train.interactions().iter().any(|x| x.user == u));
        }
    }

    #[test]
    fn k_repeated_folds() {
        let f = k_repeated_holdout(&d0(), 3, 0.2, 7, Stratify::System).unwrap();
        assert_eq!(f.folds.len(), 3);
        assert!(f.folds.iter().all(|s| s.test.len() == 1));
        let single = k_repeated_holdout(&d0(), 1, 0.2, 7, Stratify::System).unwrap();
        let plain = random_holdout(&d0(), 0.2, 0.0, 7, Stratify::System).unwrap();
        assert_eq!(single.folds[0].checksums, plain.checksums);
        assert_eq!(
            f.digests(),
            k_repeated_holdout(&d0(), 3, 0.2, 7, Stratify::System).unwrap().digests()
        );
    }

    #[test]
    fn cv_system_partitions() {
        let f = cross_validation(&d0(), 5, 11, Stratify::System).unwrap();
        assert_eq!(f.folds.len(), 5);
        let mut all = Vec::new();
        for s in &f.folds {
            assert_eq!(s.test.len(), 1);
            assert_eq!(s.train.len(), 4);
            all.extend(s.test.interactions().iter().cloned());
        }
        assert!(build_dataset(all).unwrap().same_interactions(&d0()));
        assert!(matches!(
            cross_validation(&d0(), 6, 0, Stratify::System),
            Err(Error::TooFewInteractions { have: 5, folds: 6 })
        ));
        assert!(matches!(
            cross_validation(&d0(), 1, 0, Stratify::System),
            Err(Error::BadArgument(_))
        ));
    }

    #[test]
    fn cv_user_spreads_each_user() {
        for seed in 0..20 {
            let f = cross_validation(&d0(), 2, seed, Stratify::User).unwrap();
            let u1_in = |s: &SplitResult| s.test.interactions().iter().filter(|x| &*x.user == "u1").count();
            assert_eq!(u1_in(&f.folds[0]), 1);
            assert_eq!(u1_in(&f.folds[1]), 1);
        }
    }
}
