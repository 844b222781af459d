//! Train/validation/test partitioning.
//!
//! Every strategy returns parts whose histories end in the same split step,
//! carrying the digests of all parts. Within each part, interactions keep
//! their order from the input.
//!
//! Randomized strategies follow the shuffle contract in [`rng`]. Temporal
//! orderings sort by timestamp and break ties by canonical order.

mod precomputed;
mod random;
pub mod rng;
mod temporal;

use std::sync::Arc;

use indexmap::IndexMap;

use crate::checksum::{canonical_order, checksum_of};
use crate::dataset::{Dataset, Digest, Interaction, ProvenanceStep, SplitDigests, StepChecksum};
use crate::error::{Error, Result};

pub use precomputed::precomputed_split;
pub use random::{cross_validation, k_repeated_holdout, random_holdout};
pub use temporal::{leave_n_split, temporal_split, TemporalMode};

/// Whether a strategy runs over the whole dataset or within each user.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Stratify {
    #[default]
    System,
    User,
}

impl Stratify {
    pub fn as_str(self) -> &'static str {
        match self {
            Stratify::System => "system",
            Stratify::User => "user",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "system" | "sys" | "global" => Some(Stratify::System),
            "user" => Some(Stratify::User),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// Move `n` interactions per user to test.
    Out,
    /// Keep `n` interactions per user in train, the rest go to test.
    In,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Order {
    Random(u64),
    Temporal,
}

#[derive(Clone, Debug)]
pub struct SplitResult {
    pub train: Dataset,
    pub test: Dataset,
    pub val: Option<Dataset>,
    /// Part name to digest, in the order test, val, train.
    pub checksums: IndexMap<String, Digest>,
}

impl SplitResult {
    pub fn digests(&self) -> SplitDigests {
        SplitDigests {
            test: self.checksums["test"],
            val: self.checksums.get("val").copied(),
            train: self.checksums["train"],
        }
    }

    /// `(name, part)` pairs in the order test, val, train.
    pub fn parts(&self) -> Vec<(&'static str, &Dataset)> {
        let mut out = vec![("test", &self.test)];
        if let Some(v) = &self.val {
            out.push(("val", v));
        }
        out.push(("train", &self.train));
        out
    }

    /// Warnings recorded on the split step.
    pub fn warnings(&self) -> Vec<String> {
        self.train
            .history()
            .last()
            .map(|s| s.warnings().map(str::to_string).collect())
            .unwrap_or_default()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FoldKind {
    KRepeatedHoldOut,
    CrossValidation,
}

#[derive(Clone, Debug)]
pub struct FoldSet {
    pub folds: Vec<SplitResult>,
    pub kind: FoldKind,
}

impl FoldSet {
    pub fn digests(&self) -> Vec<SplitDigests> {
        self.folds.iter().map(SplitResult::digests).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Part {
    Train,
    Val,
    Test,
}

/// Builds the parts from a per-interaction assignment. `with_val` makes the
/// validation part present even when nothing was assigned to it.
pub(crate) fn assemble(d: &Dataset, assign: &[Part], with_val: bool, step: ProvenanceStep) -> SplitResult {
    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut test = Vec::new();
    for (x, part) in d.interactions().iter().zip(assign) {
        match part {
            Part::Train => train.push(x.clone()),
            Part::Val => val.push(x.clone()),
            Part::Test => test.push(x.clone()),
        }
    }
    let val = (with_val || !val.is_empty()).then_some(val);
    finish(step, (d, train), (d, test), val.map(|v| (d, v)))
}

/// Attaches the split step, checksummed over all parts, to each part.
pub(crate) fn finish(
    step: ProvenanceStep,
    train: (&Dataset, Vec<Interaction>),
    test: (&Dataset, Vec<Interaction>),
    val: Option<(&Dataset, Vec<Interaction>)>,
) -> SplitResult {
    let digests = SplitDigests {
        test: checksum_of(&test.1),
        val: val.as_ref().map(|v| checksum_of(&v.1)),
        train: checksum_of(&train.1),
    };
    let step = step.with_checksum(StepChecksum::Split(digests.clone()));
    let mut checksums = IndexMap::new();
    checksums.insert("test".to_string(), digests.test);
    if let Some(v) = digests.val {
        checksums.insert("val".to_string(), v);
    }
    checksums.insert("train".to_string(), digests.train);
    SplitResult {
        test: test.0.derive(test.1, step.clone()),
        val: val.map(|(base, v)| base.derive(v, step.clone())),
        train: train.0.derive(train.1, step),
        checksums,
    }
}

/// Interaction indices grouped by user, users and indices in canonical order.
pub(crate) fn user_runs(interactions: &[Interaction]) -> Vec<Vec<usize>> {
    let mut runs: Vec<Vec<usize>> = Vec::new();
    let mut current: Option<&Arc<str>> = None;
    for i in canonical_order(interactions) {
        let user = &interactions[i].user;
        if current != Some(user) {
            runs.push(Vec::new());
            current = Some(user);
        }
        runs.last_mut().unwrap().push(i);
    }
    runs
}

/// Sorts indices by timestamp, stably, so ties keep their incoming order.
pub(crate) fn sort_chronological(idx: &mut [usize], interactions: &[Interaction]) {
    idx.sort_by_key(|&i| interactions[i].timestamp.unwrap_or(i64::MIN));
}

pub(crate) fn check_fraction(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::BadRatio(format!("{name} must be in (0, 1), got {v}")));
    }
    Ok(())
}

/// `round(n * ratio)` with halves away from zero.
pub(crate) fn portion(n: usize, ratio: f64) -> usize {
    ((n as f64 * ratio).round() as usize).min(n)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use crate::dataset::{build_dataset, Dataset, Interaction};

    pub fn d0() -> Dataset {
        build_dataset(
            [
                ("u1", "i1", 5.0, 100),
                ("u1", "i2", 3.0, 200),
                ("u2", "i1", 4.0, 150),
                ("u2", "i3", 2.0, 300),
                ("u3", "i3", 5.0, 50),
            ]
            .into_iter()
            .map(|(u, i, r, t)| Interaction::new(u, i).with_rating(r).with_timestamp(t))
            .collect(),
        )
        .unwrap()
    }

    pub fn keys(d: &Dataset) -> Vec<(String, String)> {
        let mut v: Vec<_> = d
            .interactions()
            .iter()
            .map(|x| (x.user.to_string(), x.item.to_string()))
            .collect();
        v.sort();
        v
    }

    pub fn pairs(p: &[(&str, &str)]) -> Vec<(String, String)> {
        let mut v: Vec<_> = p.iter().map(|(u, i)| (u.to_string(), i.to_string())).collect();
        v.sort();
        v
    }
}
