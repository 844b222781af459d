#![allow(dead_code)]

use std::collections::HashMap;

use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use recdata::dataset::InteractionKey;
use recdata::{build_dataset, Dataset, Interaction};

pub fn d0() -> Dataset {
    records(&[
        ("u1", "i1", 5.0, 100),
        ("u1", "i2", 3.0, 200),
        ("u2", "i1", 4.0, 150),
        ("u2", "i3", 2.0, 300),
        ("u3", "i3", 5.0, 50),
    ])
}

pub fn records(rows: &[(&str, &str, f64, i64)]) -> Dataset {
    build_dataset(
        rows.iter()
            .map(|&(u, i, r, t)| Interaction::new(u, i).with_rating(r).with_timestamp(t))
            .collect(),
    )
    .unwrap()
}

pub struct Shape {
    pub users: usize,
    pub items: usize,
    pub max_rows: usize,
    pub ratings: bool,
    pub timestamps: bool,
}

impl Default for Shape {
    fn default() -> Self {
        Shape {
            users: 30,
            items: 30,
            max_rows: 300,
            ratings: true,
            timestamps: true,
        }
    }
}

/// Random dataset with repeated pairs and tied timestamps.
pub fn random_dataset(rng: &mut StdRng, shape: &Shape) -> Dataset {
    let n = rng.gen_range(1..=shape.max_rows);
    let users = rng.gen_range(1..=shape.users);
    let items = rng.gen_range(1..=shape.items);
    let rows = (0..n)
        .map(|_| {
            let mut x = Interaction::new(
                format!("u{}", rng.gen_range(0..users)),
                format!("i{}", rng.gen_range(0..items)),
            );
            if shape.ratings {
                x = x.with_rating(rng.gen_range(1..=10) as f64 / 2.0);
            }
            if shape.timestamps {
                x = x.with_timestamp(rng.gen_range(0..500));
            }
            x
        })
        .collect();
    build_dataset(rows).unwrap()
}

pub fn seeded(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

fn arb_interaction() -> impl Strategy<Value = Interaction> {
    ("u[0-9]{1,2}", "[a-z][a-z0-9.:-]{0,6}", 1u8..=10, -5i64..2000)
        .prop_map(|(u, i, r, t)| Interaction::new(u, i).with_rating(r as f64 / 2.0).with_timestamp(t))
}

pub fn arb_dataset(max: usize) -> impl Strategy<Value = Dataset> {
    prop::collection::vec(arb_interaction(), 1..max).prop_map(|v| build_dataset(v).unwrap())
}

pub fn pairs(d: &Dataset) -> Vec<(String, String)> {
    let mut v: Vec<_> = d
        .interactions()
        .iter()
        .map(|x| (x.user.to_string(), x.item.to_string()))
        .collect();
    v.sort();
    v
}

pub fn union(parts: &[&Dataset]) -> HashMap<InteractionKey, usize> {
    let mut out = HashMap::new();
    for p in parts {
        for (k, n) in p.multiset() {
            *out.entry(k).or_insert(0) += n;
        }
    }
    out
}

/// Degree maps recomputed from scratch until nothing changes.
pub fn brute_kcore(d: &Dataset, k: usize) -> Vec<Interaction> {
    let mut rows = d.interactions().to_vec();
    loop {
        let mut du: HashMap<&str, usize> = HashMap::new();
        let mut di: HashMap<&str, usize> = HashMap::new();
        for x in &rows {
            *du.entry(&x.user).or_default() += 1;
            *di.entry(&x.item).or_default() += 1;
        }
        let kept: Vec<Interaction> = rows
            .iter()
            .filter(|x| du[&*x.user] >= k && di[&*x.item] >= k)
            .cloned()
            .collect();
        if kept.len() == rows.len() {
            return kept;
        }
        rows = kept;
    }
}

pub fn multiset_of(rows: &[Interaction]) -> HashMap<InteractionKey, usize> {
    let mut out = HashMap::new();
    for x in rows {
        *out.entry(x.key()).or_insert(0) += 1;
    }
    out
}

pub fn timestamps(d: &Dataset) -> impl Iterator<Item = i64> + '_ {
    d.interactions().iter().map(|x| x.timestamp.unwrap())
}
