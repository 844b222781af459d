use crate::checksum::canonical_order;
use crate::dataset::{params, Dataset, ParamValue, ProvenanceStep, StepCategory};
use crate::error::{Error, Result};

use super::rng::{shuffle, SplitMix64};
use super::{assemble, check_fraction, portion, sort_chronological, user_runs, Direction, Order, Part, SplitResult, Stratify};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TemporalMode {
    /// Train is `t < cutoff`, test is `t >= cutoff`.
    FixedTimestamp(i64),
    /// The observed timestamp whose cutoff gives the test fraction closest to
    /// the ratio; ties go to the earlier cutoff.
    BestRatioCutoff(f64),
    /// The most recent `round(n * ratio)` interactions go to test, over the
    /// whole dataset or within each user.
    ByRatio(f64, Stratify),
}

pub fn temporal_split(d: &Dataset, mode: TemporalMode) -> Result<SplitResult> {
    if !d.has_timestamps() {
        return Err(Error::NoTimestamps);
    }
    let xs = d.interactions();
    let ts = |i: usize| xs[i].timestamp.unwrap();
    match mode {
        TemporalMode::FixedTimestamp(cutoff) => {
            let assign = by_cutoff(d, cutoff);
            let step = ProvenanceStep::new(
                StepCategory::Split,
                "TemporalFixedTimestamp",
                params([("cutoff", cutoff.into())]),
            );
            Ok(assemble(d, &assign, false, step))
        }
        TemporalMode::BestRatioCutoff(ratio) => {
            check_fraction("test_ratio", ratio)?;
            let mut sorted: Vec<i64> = (0..xs.len()).map(ts).collect();
            sorted.sort_unstable();
            let n = sorted.len();
            let target = ratio * n as f64;
            let mut best: Option<(f64, i64, usize)> = None;
            for j in 0..n {
                if j > 0 && sorted[j] == sorted[j - 1] {
                    continue;
                }
                let diff = ((n - j) as f64 - target).abs();
                if best.is_none_or(|(b, _, _)| diff < b) {
                    best = Some((diff, sorted[j], n - j));
                }
            }
            let (_, cutoff, n_test) = best.ok_or(Error::EmptyDataset)?;
            let assign = by_cutoff(d, cutoff);
            let step = ProvenanceStep::new(
                StepCategory::Split,
                "TemporalBestRatio",
                params([("test_ratio", ratio.into())]),
            )
            .with_outcome("cutoff", cutoff)
            .with_outcome("achieved_ratio", n_test as f64 / n as f64);
            Ok(assemble(d, &assign, false, step))
        }
        TemporalMode::ByRatio(ratio, stratify) => {
            check_fraction("test_ratio", ratio)?;
            let mut assign = vec![Part::Train; xs.len()];
            match stratify {
                Stratify::System => {
                    let mut order = canonical_order(xs);
                    sort_chronological(&mut order, xs);
                    let n_test = portion(order.len(), ratio);
                    for &i in &order[order.len() - n_test..] {
                        assign[i] = Part::Test;
                    }
                }
                Stratify::User => {
                    for mut run in user_runs(xs) {
                        if run.len() < 2 {
                            continue;
                        }
                        sort_chronological(&mut run, xs);
                        let n_test = portion(run.len(), ratio).min(run.len() - 1);
                        for &i in &run[run.len() - n_test..] {
                            assign[i] = Part::Test;
                        }
                    }
                }
            }
            let mut p = params([("test_ratio", ratio.into())]);
            if stratify == Stratify::User {
                p.insert("stratify".into(), "user".into());
            }
            let step = ProvenanceStep::new(StepCategory::Split, "TemporalHoldOut", p);
            Ok(assemble(d, &assign, false, step))
        }
    }
}

fn by_cutoff(d: &Dataset, cutoff: i64) -> Vec<Part> {
    d.interactions()
        .iter()
        .map(|x| {
            if x.timestamp.unwrap() < cutoff {
                Part::Train
            } else {
                Part::Test
            }
        })
        .collect()
}

/// Per-user leave-n. `Out` moves `n` interactions of each user with more
/// than `n` to test; `In` keeps `n` in train and moves the rest. Users
/// with `n` or fewer interactions stay entirely in train.
///
/// Temporal order takes the most recent interactions for test; random order
/// picks them with the seeded shuffle.
pub fn leave_n_split(d: &Dataset, n: usize, direction: Direction, order: Order) -> Result<SplitResult> {
    if n == 0 {
        return Err(Error::BadArgument("n must be positive".into()));
    }
    if order == Order::Temporal && !d.has_timestamps() {
        return Err(Error::NoTimestamps);
    }
    let xs = d.interactions();
    let mut assign = vec![Part::Train; xs.len()];
    let mut rng = match order {
        Order::Random(seed) => Some(SplitMix64::new(seed)),
        Order::Temporal => None,
    };
    for mut run in user_runs(xs) {
        match rng.as_mut() {
            Some(rng) => shuffle(&mut run, rng),
            // Oldest first, so the test picks come from the end.
            None => sort_chronological(&mut run, xs),
        }
        let len = run.len();
        if len <= n {
            continue;
        }
        let n_test = match direction {
            Direction::Out => n,
            Direction::In => len - n,
        };
        for &i in &run[len - n_test..] {
            assign[i] = Part::Test;
        }
    }
    let (operation, mut p) = match direction {
        Direction::Out => ("LeaveNOut", params([("n", n.into())])),
        Direction::In => ("LeaveNIn", params([("n", n.into())])),
    };
    match order {
        Order::Temporal => {
            p.insert("order".into(), "temporal".into());
        }
        Order::Random(seed) => {
            p.insert("order".into(), "random".into());
            p.insert("seed".into(), ParamValue::from(seed));
        }
    }
    let step = ProvenanceStep::new(StepCategory::Split, operation, p);
    Ok(assemble(d, &assign, false, step))
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::{d0, keys, pairs};
    use super::*;
    use crate::dataset::{build_dataset, Interaction};

    #[test]
    fn leave_one_out_temporal() {
        let s = leave_n_split(&d0(), 1, Direction::Out, Order::Temporal).unwrap();
        assert_eq!(keys(&s.test), pairs(&[("u1", "i2"), ("u2", "i3")]));
        assert_eq!(s.train.len(), 3);
        assert!(s.val.is_none());
    }

    #[test]
    fn leave_one_in_temporal() {
        let s = leave_n_split(&d0(), 1, Direction::In, Order::Temporal).unwrap();
        assert_eq!(keys(&s.train), pairs(&[("u1", "i1"), ("u2", "i1"), ("u3", "i3")]));
        assert_eq!(s.test.len(), 2);
    }

    #[test]
    fn single_interaction_users_stay_in_train() {
        let d = build_dataset(vec![Interaction::new("a", "x"), Interaction::new("b", "x")]).unwrap();
        let s = leave_n_split(&d, 1, Direction::Out, Order::Random(5)).unwrap();
        assert!(s.test.is_empty());
        assert!(s.train.same_interactions(&d));
    }

    #[test]
    fn temporal_order_needs_timestamps() {
        let d = build_dataset(vec![Interaction::new("a", "x")]).unwrap();
        assert!(matches!(
            leave_n_split(&d, 1, Direction::Out, Order::Temporal),
            Err(Error::NoTimestamps)
        ));
        assert!(matches!(
            temporal_split(&d, TemporalMode::FixedTimestamp(0)),
            Err(Error::NoTimestamps)
        ));
    }

    #[test]
    fn fixed_timestamp() {
        let s = temporal_split(&d0(), TemporalMode::FixedTimestamp(150)).unwrap();
        assert_eq!(keys(&s.test), pairs(&[("u2", "i1"), ("u1", "i2"), ("u2", "i3")]));
        assert_eq!(s.train.len(), 2);
    }

    #[test]
    fn by_ratio_system_takes_most_recent() {
        let s = temporal_split(&d0(), TemporalMode::ByRatio(0.4, Stratify::System)).unwrap();
        assert_eq!(keys(&s.test), pairs(&[("u1", "i2"), ("u2", "i3")]));
    }

    #[test]
    fn by_ratio_user() {
        let s = temporal_split(&d0(), TemporalMode::ByRatio(0.5, Stratify::User)).unwrap();
        assert_eq!(keys(&s.test), pairs(&[("u1", "i2"), ("u2", "i3")]));
    }

    #[test]
    fn best_ratio_cutoff() {
        let s = temporal_split(&d0(), TemporalMode::BestRatioCutoff(0.4)).unwrap();
        let step = s.test.history().last().unwrap();
        assert_eq!(step.outcome["cutoff"], ParamValue::Int(200));
        assert_eq!(step.outcome["achieved_ratio"], ParamValue::Float(0.4));
        assert_eq!(s.test.len(), 2);
    }

    #[test]
    fn best_ratio_ties_go_earlier() {
        // Cutoffs 10, 20, 30 give test fractions 1, 2/3, 1/3; ratio 0.5 is
        // equally far from 2/3 and 1/3.
        let d = build_dataset(
            [10, 20, 30]
                .iter()
                .enumerate()
                .map(|(k, &t)| Interaction::new("u", format!("i{k}")).with_timestamp(t))
                .collect(),
        )
        .unwrap();
        let s = temporal_split(&d, TemporalMode::BestRatioCutoff(0.5)).unwrap();
        assert_eq!(s.test.history().last().unwrap().outcome["cutoff"], ParamValue::Int(20));
    }

    #[test]
    fn chronological_ties_use_canonical_order() {
        let d = build_dataset(vec![
            Interaction::new("b", "x").with_timestamp(5),
            Interaction::new("a", "y").with_timestamp(5),
            Interaction::new("a", "x").with_timestamp(5),
        ])
        .unwrap();
        let s = temporal_split(&d, TemporalMode::ByRatio(0.34, Stratify::System)).unwrap();
        assert_eq!(keys(&s.test), pairs(&[("b", "x")]));
    }
}
