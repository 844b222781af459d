//! Dataset characterization metrics and popularity classes.
//!
//! With `|U|` users, `|I|` items and `|R|` interactions:
//!
//! * space size = `sqrt(|U| * |I|)`
//! * shape = `|U| / |I|`
//! * density = `|R| / (|U| * |I|)`
//! * Gini over per-user (per-item) interaction counts
//!
//! "Average ratings" is reported both as mean profile size (`|R|/|U|`,
//! `|R|/|I|`) and, when ratings exist, as the mean over entities of each
//! entity's mean rating.

use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_users: usize,
    pub n_items: usize,
    pub n_interactions: usize,
    pub space_size: f64,
    pub shape: f64,
    pub density: f64,
    pub gini_users: f64,
    pub gini_items: f64,
    pub mean_profile_user: f64,
    pub mean_profile_item: f64,
    pub mean_rating_user: Option<f64>,
    pub mean_rating_item: Option<f64>,
}

pub fn metrics_report(d: &Dataset) -> Result<MetricsReport> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let user_counts = counts(d, Axis::Users);
    let item_counts = counts(d, Axis::Items);
    let (nu, ni, nr) = (user_counts.len(), item_counts.len(), d.len());
    let cells = nu as f64 * ni as f64;
    let gini_of = |c: &IndexMap<Arc<str>, u64>| gini(&c.values().copied().collect::<Vec<_>>());
    Ok(MetricsReport {
        n_users: nu,
        n_items: ni,
        n_interactions: nr,
        space_size: cells.sqrt(),
        shape: nu as f64 / ni as f64,
        density: nr as f64 / cells,
        gini_users: gini_of(&user_counts)?,
        gini_items: gini_of(&item_counts)?,
        mean_profile_user: nr as f64 / nu as f64,
        mean_profile_item: nr as f64 / ni as f64,
        mean_rating_user: d.has_ratings().then(|| mean_of_means(d, Axis::Users)),
        mean_rating_item: d.has_ratings().then(|| mean_of_means(d, Axis::Items)),
    })
}

/// Gini coefficient of a count distribution:
/// `G = 2 * sum(i * x_i) / (n * sum(x)) - (n + 1) / n` over counts sorted
/// ascending with 1-based `i`, clamped to `[0, 1]`.
///
/// The numerator and denominator are accumulated exactly in integers, so
/// scaling every count by the same factor gives the same result.
pub fn gini(counts: &[u64]) -> Result<f64> {
    let total: u128 = counts.iter().map(|&c| c as u128).sum();
    if total == 0 {
        return Err(Error::AllZero);
    }
    let mut sorted = counts.to_vec();
    sorted.sort_unstable();
    let n = sorted.len() as u128;
    let weighted: u128 = sorted.iter().enumerate().map(|(i, &x)| (i as u128 + 1) * x as u128).sum();
    // G = (2 * weighted - (n + 1) * total) / (n * total)
    let num = 2 * weighted as i128 - ((n + 1) * total) as i128;
    let den = (n * total) as i128;
    Ok((num as f64 / den as f64).clamp(0.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    Users,
    Items,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PopularityClass {
    LongTail,
    Common,
    Popular,
    MostPopular,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopularityClasses {
    /// Quartile boundaries of the count distribution.
    pub quartiles: [f64; 3],
    /// Entity id to class, in first-seen order.
    pub classes: IndexMap<Arc<str>, PopularityClass>,
}

impl PopularityClasses {
    pub fn get(&self, id: &str) -> Option<PopularityClass> {
        self.classes.get(id).copied()
    }

    pub fn members(&self, class: PopularityClass) -> impl Iterator<Item = &str> {
        self.classes.iter().filter(move |(_, &c)| c == class).map(|(id, _)| &**id)
    }
}

/// Classifies entities by interaction count against the quartiles `Q1..Q3`
/// of the count distribution (linear interpolation between order
/// statistics): long tail `<= Q1 <` common `<= Q2 <` popular `<= Q3 <` most
/// popular. When every entity has the same count there is no spread to
/// rank and all of them are classed as common.
pub fn popularity_classify(d: &Dataset, axis: Axis) -> Result<PopularityClasses> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let per_entity = counts(d, axis);
    let mut sorted: Vec<f64> = per_entity.values().map(|&c| c as f64).collect();
    sorted.sort_by(f64::total_cmp);
    let quartiles = [quantile(&sorted, 0.25), quantile(&sorted, 0.5), quantile(&sorted, 0.75)];
    let uniform = sorted[0] == sorted[sorted.len() - 1];
    let classes = per_entity
        .into_iter()
        .map(|(id, c)| {
            let c = c as f64;
            let class = if uniform {
                PopularityClass::Common
            } else if c <= quartiles[0] {
                PopularityClass::LongTail
            } else if c <= quartiles[1] {
                PopularityClass::Common
            } else if c <= quartiles[2] {
                PopularityClass::Popular
            } else {
                PopularityClass::MostPopular
            };
            (id, class)
        })
        .collect();
    Ok(PopularityClasses { quartiles, classes })
}

/// Linear-interpolation quantile of an ascending, non-empty slice.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Interactions per entity, in first-seen order.
pub fn counts(d: &Dataset, axis: Axis) -> IndexMap<Arc<str>, u64> {
    let mut out: IndexMap<Arc<str>, u64> = IndexMap::new();
    for x in d.interactions() {
        let id = match axis {
            Axis::Users => &x.user,
            Axis::Items => &x.item,
        };
        *out.entry(Arc::clone(id)).or_insert(0) += 1;
    }
    out
}

fn mean_of_means(d: &Dataset, axis: Axis) -> f64 {
    let mut sums: IndexMap<&str, (f64, u64)> = IndexMap::new();
    for x in d.interactions() {
        let id = match axis {
            Axis::Users => &*x.user,
            Axis::Items => &*x.item,
        };
        let e = sums.entry(id).or_insert((0.0, 0));
        e.0 += x.rating.unwrap_or(0.0);
        e.1 += 1;
    }
    sums.values().map(|&(s, n)| s / n as f64).sum::<f64>() / sums.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{build_dataset, Interaction};

    fn d0() -> Dataset {
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

    #[test]
    fn d0_report() {
        let r = metrics_report(&d0()).unwrap();
        assert_eq!((r.n_users, r.n_items, r.n_interactions), (3, 3, 5));
        assert!((r.density - 5.0 / 9.0).abs() < 1e-12);
        assert_eq!(r.shape, 1.0);
        assert_eq!(r.space_size, 3.0);
        assert!((r.mean_profile_user - 5.0 / 3.0).abs() < 1e-12);
        assert!((r.mean_profile_item - 5.0 / 3.0).abs() < 1e-12);
        // users: u1 (5+3)/2 = 4, u2 (4+2)/2 = 3, u3 5 -> 4
        assert!((r.mean_rating_user.unwrap() - 4.0).abs() < 1e-12);
        // items: i1 4.5, i2 3, i3 3.5 -> 11/3
        assert!((r.mean_rating_item.unwrap() - 11.0 / 3.0).abs() < 1e-12);
        // users 2,2,1 and items 2,1,2 both give 2/15
        assert!((r.gini_users - 2.0 / 15.0).abs() < 1e-12);
    }

    #[test]
    fn singleton_report() {
        let d = build_dataset(vec![Interaction::new("u1", "i1")]).unwrap();
        let r = metrics_report(&d).unwrap();
        assert_eq!((r.density, r.shape, r.gini_users), (1.0, 1.0, 0.0));
        assert!(r.mean_rating_user.is_none());
    }

    #[test]
    fn empty_dataset_is_an_error() {
        let d = build_dataset(vec![]).unwrap();
        assert!(matches!(metrics_report(&d), Err(Error::EmptyDataset)));
        assert!(matches!(popularity_classify(&d, Axis::Items), Err(Error::EmptyDataset)));
    }

    #[test]
    fn gini_values() {
        assert_eq!(gini(&[3, 3, 3]).unwrap(), 0.0);
        assert!((gini(&[1, 2, 2]).unwrap() - 2.0 / 15.0).abs() < 1e-12);
        assert!((gini(&[0, 0, 10]).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(gini(&[7]).unwrap(), 0.0);
        assert!(matches!(gini(&[0, 0]), Err(Error::AllZero)));
        assert!(matches!(gini(&[]), Err(Error::AllZero)));
    }

    #[test]
    fn d0_item_classes() {
        let c = popularity_classify(&d0(), Axis::Items).unwrap();
        assert_eq!(c.quartiles, [1.5, 2.0, 2.0]);
        assert_eq!(c.get("i2"), Some(PopularityClass::LongTail));
        assert_eq!(c.get("i1"), Some(PopularityClass::Common));
        assert_eq!(c.get("i3"), Some(PopularityClass::Common));
    }

    #[test]
    fn uniform_counts_are_all_common() {
        let d = build_dataset(vec![
            Interaction::new("a", "x"),
            Interaction::new("b", "y"),
            Interaction::new("c", "z"),
        ])
        .unwrap();
        let c = popularity_classify(&d, Axis::Users).unwrap();
        assert!(c.classes.values().all(|&k| k == PopularityClass::Common));
    }

    #[test]
    fn eight_items_two_per_class() {
        // item k has k interactions, k = 1..=8
        let mut rows = Vec::new();
        for k in 1..=8 {
            for u in 0..k {
                rows.push(Interaction::new(format!("u{u}"), format!("i{k}")));
            }
        }
        let c = popularity_classify(&build_dataset(rows).unwrap(), Axis::Items).unwrap();
        assert_eq!(c.quartiles, [2.75, 4.5, 6.25]);
        for (class, expected) in [
            (PopularityClass::LongTail, ["i1", "i2"]),
            (PopularityClass::Common, ["i3", "i4"]),
            (PopularityClass::Popular, ["i5", "i6"]),
            (PopularityClass::MostPopular, ["i7", "i8"]),
        ] {
            assert_eq!(c.members(class).collect::<Vec<_>>(), expected);
        }
    }
}
