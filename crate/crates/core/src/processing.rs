//! Dataset transformations: binarization, the k-core family, rating and time
//! filters.
//!
//! Every threshold keeps values `>=` the threshold and drops values below it.

use std::collections::HashMap;

use crate::dataset::{params, Dataset, Interaction, ParamValue, Params, ProvenanceStep, StepCategory};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BinarizeMode {
    /// Keep interactions rated `>= threshold`, with rating 1.
    #[default]
    DropBelow,
    /// Keep everything; rating becomes 1 at or above the threshold, else 0.
    ZeroOne,
}

pub fn binarize(d: &Dataset, threshold: f64, mode: BinarizeMode) -> Result<Dataset> {
    if !d.has_ratings() {
        return Err(Error::NoRatings);
    }
    if !threshold.is_finite() {
        return Err(Error::BadArgument(format!("threshold {threshold} is not finite")));
    }
    let out: Vec<Interaction> = match mode {
        BinarizeMode::DropBelow => d
            .interactions()
            .iter()
            .filter(|x| x.rating.unwrap() >= threshold)
            .map(|x| Interaction {
                rating: Some(1.0),
                ..x.clone()
            })
            .collect(),
        BinarizeMode::ZeroOne => d
            .interactions()
            .iter()
            .map(|x| {
                let r = if x.rating.unwrap() >= threshold { 1.0 } else { 0.0 };
                Interaction {
                    rating: Some(r),
                    ..x.clone()
                }
            })
            .collect(),
    };
    let mut p = params([("threshold", threshold.into())]);
    if mode == BinarizeMode::ZeroOne {
        p.insert("mode".into(), "zero_one".into());
    }
    Ok(d.derive(out, ProvenanceStep::new(StepCategory::Process, "Binarize", p)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KCoreMode {
    /// One pass removing users with fewer than k interactions.
    User,
    /// One pass removing items with fewer than k interactions.
    Item,
    /// Alternating user and item passes until nothing changes.
    Iterative,
}

impl KCoreMode {
    pub fn operation(self) -> &'static str {
        match self {
            KCoreMode::User => "UserKCore",
            KCoreMode::Item => "ItemKCore",
            KCoreMode::Iterative => "UserItemIterativeKCore",
        }
    }
}

/// k-core filtering.
///
/// An iterative round is one user pass followed by one item pass; the
/// fixpoint is checked after the full round, so an input that is already a
/// k-core takes one round. With `max_rounds`, the result after that many
/// rounds is returned even if it is not yet a k-core. The appended step
/// records `rounds` and `fixpoint` in its outcome.
pub fn kcore(d: &Dataset, k: usize, mode: KCoreMode, max_rounds: Option<usize>) -> Result<Dataset> {
    if k == 0 {
        return Err(Error::BadArgument("k must be at least 1".into()));
    }
    if max_rounds == Some(0) {
        return Err(Error::BadArgument("max_rounds must be at least 1".into()));
    }
    let graph = Graph::new(d.interactions());
    let mut alive = vec![true; graph.users.len()];
    let mut p = params([("cores", k.into())]);
    let step = match mode {
        KCoreMode::User => {
            let removed = graph.prune(&mut alive, Side::User, k);
            ProvenanceStep::new(StepCategory::Process, mode.operation(), p).with_outcome("removed", removed)
        }
        KCoreMode::Item => {
            let removed = graph.prune(&mut alive, Side::Item, k);
            ProvenanceStep::new(StepCategory::Process, mode.operation(), p).with_outcome("removed", removed)
        }
        KCoreMode::Iterative => {
            let mut rounds = 0;
            let fixpoint = loop {
                rounds += 1;
                let removed = graph.prune(&mut alive, Side::User, k) + graph.prune(&mut alive, Side::Item, k);
                if removed == 0 {
                    break true;
                }
                if max_rounds == Some(rounds) {
                    break graph.is_core(&alive, k);
                }
            };
            if let Some(n) = max_rounds {
                p.insert("max_rounds".into(), n.into());
            }
            ProvenanceStep::new(StepCategory::Process, mode.operation(), p)
                .with_outcome("rounds", rounds)
                .with_outcome("fixpoint", fixpoint)
        }
    };
    Ok(d.derive(graph.keep(d.interactions(), &alive), step))
}

/// Keeps only users with at least `min_interactions` interactions. Same
/// result as a single user k-core pass, recorded under its own name.
pub fn drop_cold_users(d: &Dataset, min_interactions: usize) -> Result<Dataset> {
    if min_interactions == 0 {
        return Err(Error::BadArgument("min_interactions must be at least 1".into()));
    }
    let graph = Graph::new(d.interactions());
    let mut alive = vec![true; graph.users.len()];
    let removed = graph.prune(&mut alive, Side::User, min_interactions);
    let step = ProvenanceStep::new(
        StepCategory::Process,
        "ColdUsers",
        params([("min_interactions", min_interactions.into())]),
    )
    .with_outcome("removed", removed);
    Ok(d.derive(graph.keep(d.interactions(), &alive), step))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RatingThreshold {
    Fixed(f64),
    /// Mean rating over the whole dataset.
    GlobalMean,
    /// Each user's own mean rating.
    UserMean,
}

impl RatingThreshold {
    pub fn to_param(self) -> ParamValue {
        match self {
            RatingThreshold::Fixed(v) => v.into(),
            RatingThreshold::GlobalMean => "global_mean".into(),
            RatingThreshold::UserMean => "user_mean".into(),
        }
    }

    pub fn from_param(v: &ParamValue) -> Option<Self> {
        match v {
            ParamValue::Str(s) if s == "global_mean" => Some(RatingThreshold::GlobalMean),
            ParamValue::Str(s) if s == "user_mean" => Some(RatingThreshold::UserMean),
            other => other.as_f64().filter(|x| x.is_finite()).map(RatingThreshold::Fixed),
        }
    }
}

pub fn filter_by_rating(d: &Dataset, threshold: RatingThreshold) -> Result<Dataset> {
    if !d.has_ratings() {
        return Err(Error::NoRatings);
    }
    let rating = |x: &Interaction| x.rating.unwrap();
    let out: Vec<Interaction> = match threshold {
        RatingThreshold::Fixed(t) => {
            if !t.is_finite() {
                return Err(Error::BadArgument(format!("threshold {t} is not finite")));
            }
            d.interactions().iter().filter(|x| rating(x) >= t).cloned().collect()
        }
        RatingThreshold::GlobalMean => {
            let mean = d.interactions().iter().map(rating).sum::<f64>() / d.len().max(1) as f64;
            d.interactions().iter().filter(|x| rating(x) >= mean).cloned().collect()
        }
        RatingThreshold::UserMean => {
            let mut sums: HashMap<&str, (f64, usize)> = HashMap::new();
            for x in d.interactions() {
                let e = sums.entry(&x.user).or_default();
                e.0 += rating(x);
                e.1 += 1;
            }
            d.interactions()
                .iter()
                .filter(|x| {
                    let (s, n) = sums[&*x.user];
                    rating(x) >= s / n as f64
                })
                .cloned()
                .collect()
        }
    };
    let step = ProvenanceStep::new(
        StepCategory::Process,
        "FilterByRating",
        params([("threshold", threshold.to_param())]),
    );
    Ok(d.derive(out, step))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimeKeep {
    /// `timestamp < cutoff`
    Before,
    /// `timestamp >= cutoff`
    After,
}

impl TimeKeep {
    pub fn as_str(self) -> &'static str {
        match self {
            TimeKeep::Before => "before",
            TimeKeep::After => "after",
        }
    }
}

pub fn filter_by_time(d: &Dataset, cutoff: i64, keep: TimeKeep) -> Result<Dataset> {
    if !d.has_timestamps() {
        return Err(Error::NoTimestamps);
    }
    let out = d
        .interactions()
        .iter()
        .filter(|x| (x.timestamp.unwrap() < cutoff) == (keep == TimeKeep::Before))
        .cloned()
        .collect();
    let step = ProvenanceStep::new(
        StepCategory::Process,
        "FilterByTime",
        params([("cutoff", cutoff.into()), ("keep", keep.as_str().into())]),
    );
    Ok(d.derive(out, step))
}

/// Drops repeated `(user, item, rating, timestamp)` records, keeping the
/// first occurrence.
pub fn deduplicate(d: &Dataset) -> Dataset {
    let mut seen = std::collections::HashSet::with_capacity(d.len());
    let out: Vec<Interaction> = d.interactions().iter().filter(|x| seen.insert(x.key())).cloned().collect();
    let removed = d.len() - out.len();
    d.derive(
        out,
        ProvenanceStep::new(StepCategory::Process, "Deduplicate", Params::new()).with_outcome("removed", removed),
    )
}

#[derive(Clone, Copy)]
enum Side {
    User,
    Item,
}

/// Interactions as dense `(user, item)` index pairs.
struct Graph {
    users: Vec<u32>,
    items: Vec<u32>,
    n_users: usize,
    n_items: usize,
}

impl Graph {
    fn new(xs: &[Interaction]) -> Graph {
        let mut user_ids: HashMap<&str, u32> = HashMap::new();
        let mut item_ids: HashMap<&str, u32> = HashMap::new();
        let mut users = Vec::with_capacity(xs.len());
        let mut items = Vec::with_capacity(xs.len());
        for x in xs {
            let n = user_ids.len() as u32;
            users.push(*user_ids.entry(&x.user).or_insert(n));
            let n = item_ids.len() as u32;
            items.push(*item_ids.entry(&x.item).or_insert(n));
        }
        Graph {
            users,
            items,
            n_users: user_ids.len(),
            n_items: item_ids.len(),
        }
    }

    fn side(&self, side: Side) -> (&[u32], usize) {
        match side {
            Side::User => (&self.users, self.n_users),
            Side::Item => (&self.items, self.n_items),
        }
    }

    fn degrees(&self, alive: &[bool], side: Side) -> Vec<usize> {
        let (ids, n) = self.side(side);
        let mut deg = vec![0usize; n];
        for (&id, _) in ids.iter().zip(alive).filter(|(_, &a)| a) {
            deg[id as usize] += 1;
        }
        deg
    }

    /// Removes interactions whose entity on `side` has degree below `k`.
    fn prune(&self, alive: &mut [bool], side: Side, k: usize) -> usize {
        let deg = self.degrees(alive, side);
        let (ids, _) = self.side(side);
        let mut removed = 0;
        for (a, &id) in alive.iter_mut().zip(ids) {
            if *a && deg[id as usize] < k {
                *a = false;
                removed += 1;
            }
        }
        removed
    }

    fn is_core(&self, alive: &[bool], k: usize) -> bool {
        [Side::User, Side::Item].into_iter().all(|side| {
            let deg = self.degrees(alive, side);
            let (ids, _) = self.side(side);
            ids.iter().zip(alive).all(|(&id, &a)| !a || deg[id as usize] >= k)
        })
    }

    fn keep(&self, xs: &[Interaction], alive: &[bool]) -> Vec<Interaction> {
        xs.iter().zip(alive).filter(|(_, &a)| a).map(|(x, _)| x.clone()).collect()
    }
}
