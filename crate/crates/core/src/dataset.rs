//! The interaction data model shared by every other module.
//!
//! A [`Dataset`] is an immutable value: an ordered multiset of
//! [`Interaction`]s plus the [`ProvenanceStep`]s that produced it. Every
//! transformation in this crate returns a new `Dataset` with one more step in
//! its history; the input is never touched.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::checksum;
use crate::error::{Error, Result};

/// One user-item event.
///
/// Identifiers are opaque text: `"0042"` and `"42"` are different users.
#[derive(Clone, Debug, PartialEq)]
pub struct Interaction {
    pub user: Arc<str>,
    pub item: Arc<str>,
    pub rating: Option<f64>,
    pub timestamp: Option<i64>,
}

impl Interaction {
    pub fn new(user: impl Into<Arc<str>>, item: impl Into<Arc<str>>) -> Self {
        Interaction {
            user: user.into(),
            item: item.into(),
            rating: None,
            timestamp: None,
        }
    }

    pub fn with_rating(mut self, rating: f64) -> Self {
        self.rating = Some(rating);
        self
    }

    pub fn with_timestamp(mut self, timestamp: i64) -> Self {
        self.timestamp = Some(timestamp);
        self
    }

    /// Hashable identity of the record, used for multiset comparisons.
    pub fn key(&self) -> InteractionKey {
        InteractionKey {
            user: self.user.clone(),
            item: self.item.clone(),
            rating_bits: self.rating.map(f64::to_bits),
            timestamp: self.timestamp,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InteractionKey {
    pub user: Arc<str>,
    pub item: Arc<str>,
    rating_bits: Option<u64>,
    pub timestamp: Option<i64>,
}

impl InteractionKey {
    pub fn rating(&self) -> Option<f64> {
        self.rating_bits.map(f64::from_bits)
    }
}

/// 128-bit content digest, rendered as 32 lowercase hex characters.
///
/// Used as an integrity and versioning fingerprint only.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Digest(pub [u8; 16]);

impl Digest {
    pub fn of(bytes: &[u8]) -> Digest {
        use md5::Digest as _;
        Digest(md5::Md5::digest(bytes).into())
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({self})")
    }
}

impl FromStr for Digest {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bytes = s.as_bytes();
        if bytes.len() != 32 || !bytes.iter().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
            return Err(Error::BadDigest(s.to_string()));
        }
        let mut out = [0u8; 16];
        for (i, pair) in bytes.chunks(2).enumerate() {
            let hi = (pair[0] as char).to_digit(16).unwrap();
            let lo = (pair[1] as char).to_digit(16).unwrap();
            out[i] = (hi * 16 + lo) as u8;
        }
        Ok(Digest(out))
    }
}

impl Serialize for Digest {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The four step categories a history may contain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepCategory {
    Load,
    Process,
    Split,
    Export,
}

impl StepCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            StepCategory::Load => "load",
            StepCategory::Process => "process",
            StepCategory::Split => "split",
            StepCategory::Export => "export",
        }
    }
}

impl fmt::Display for StepCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StepCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "load" => Ok(StepCategory::Load),
            "process" => Ok(StepCategory::Process),
            "split" => Ok(StepCategory::Split),
            "export" => Ok(StepCategory::Export),
            other => Err(Error::BadStep(other.to_string())),
        }
    }
}

/// A scalar operation parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            ParamValue::Int(v) => Some(v as f64),
            ParamValue::Float(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match *self {
            ParamValue::Int(v) => Some(v),
            ParamValue::Float(v) if v.fract() == 0.0 && v.abs() < 9.0e15 => Some(v as i64),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match *self {
            ParamValue::Bool(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            ParamValue::Str(s) => Some(s),
            _ => None,
        }
    }

    /// Text form of any scalar; `version: 2018` and `version: "2018"` agree.
    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Bool(v) => write!(f, "{v}"),
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Float(v) => write!(f, "{v}"),
            ParamValue::Str(v) => f.write_str(v),
        }
    }
}

macro_rules! param_from {
    ($($t:ty => $variant:ident as $conv:ty),* $(,)?) => {
        $(impl From<$t> for ParamValue {
            fn from(v: $t) -> Self {
                ParamValue::$variant(v as $conv)
            }
        })*
    };
}

param_from!(i64 => Int as i64, i32 => Int as i64, u32 => Int as i64, usize => Int as i64, u64 => Int as i64, f64 => Float as f64);

impl From<bool> for ParamValue {
    fn from(v: bool) -> Self {
        ParamValue::Bool(v)
    }
}

impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Str(v.to_string())
    }
}

impl From<String> for ParamValue {
    fn from(v: String) -> Self {
        ParamValue::Str(v)
    }
}

/// Ordered parameter map; insertion order is preserved on export.
pub type Params = IndexMap<String, ParamValue>;

pub(crate) fn params<const N: usize>(pairs: [(&str, ParamValue); N]) -> Params {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Digests of the three parts of a split, in the order they are exported.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitDigests {
    pub test: Digest,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub val: Option<Digest>,
    pub train: Digest,
}

/// Checksum recorded for a step: one digest, a split map, or one map per fold.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StepChecksum {
    Single(Digest),
    Split(SplitDigests),
    Folds(Vec<SplitDigests>),
}

/// One entry of a dataset's history.
#[derive(Clone, Debug, PartialEq)]
pub struct ProvenanceStep {
    pub name: StepCategory,
    pub operation: String,
    pub params: Params,
    pub checksum: Option<StepChecksum>,
    /// What the operation observed while running (rounds executed, warnings).
    /// Not part of the replayable configuration.
    pub outcome: Params,
}

impl ProvenanceStep {
    pub fn new(name: StepCategory, operation: impl Into<String>, params: Params) -> Self {
        ProvenanceStep {
            name,
            operation: operation.into(),
            params,
            checksum: None,
            outcome: Params::new(),
        }
    }

    /// Builds a step from a textual category, rejecting anything but the four
    /// known names.
    pub fn parse(name: &str, operation: impl Into<String>, params: Params) -> Result<Self> {
        Ok(Self::new(name.parse()?, operation, params))
    }

    pub fn with_checksum(mut self, checksum: StepChecksum) -> Self {
        self.checksum = Some(checksum);
        self
    }

    pub fn with_outcome(mut self, key: &str, value: impl Into<ParamValue>) -> Self {
        self.outcome.insert(key.to_string(), value.into());
        self
    }

    pub fn warnings(&self) -> impl Iterator<Item = &str> {
        self.outcome
            .iter()
            .filter(|(k, _)| k.starts_with("warning"))
            .filter_map(|(_, v)| v.as_str())
    }
}

/// An immutable collection of interactions with its provenance.
#[derive(Clone, Debug)]
pub struct Dataset {
    interactions: Arc<[Interaction]>,
    history: Vec<ProvenanceStep>,
    has_ratings: bool,
    has_timestamps: bool,
}

/// Validates `records` and wraps them in a [`Dataset`] whose history holds a
/// single load step.
pub fn build_dataset(records: Vec<Interaction>) -> Result<Dataset> {
    Dataset::from_records(records)
}

impl Dataset {
    pub fn from_records(records: Vec<Interaction>) -> Result<Dataset> {
        Self::build(records, None, |d| {
            ProvenanceStep::new(StepCategory::Load, "Records", Params::new()).with_checksum(StepChecksum::Single(d.checksum()))
        })
    }

    /// Validates records and attaches the load step produced by `step`.
    /// `lines` maps record positions to source line numbers for error messages.
    pub(crate) fn build(
        records: Vec<Interaction>,
        lines: Option<&[usize]>,
        step: impl FnOnce(&Dataset) -> ProvenanceStep,
    ) -> Result<Dataset> {
        let (has_ratings, has_timestamps) = validate_records(&records, lines)?;
        let mut d = Dataset {
            interactions: records.into(),
            history: Vec::new(),
            has_ratings,
            has_timestamps,
        };
        let step = step(&d);
        d.history.push(step);
        Ok(d)
    }

    pub fn interactions(&self) -> &[Interaction] {
        &self.interactions
    }

    pub fn history(&self) -> &[ProvenanceStep] {
        &self.history
    }

    pub fn len(&self) -> usize {
        self.interactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interactions.is_empty()
    }

    pub fn has_ratings(&self) -> bool {
        self.has_ratings
    }

    pub fn has_timestamps(&self) -> bool {
        self.has_timestamps
    }

    pub fn checksum(&self) -> Digest {
        checksum::checksum_of(&self.interactions)
    }

    /// Returns a copy of this dataset with `step` appended to its history.
    pub fn append_history(&self, step: ProvenanceStep) -> Dataset {
        let mut history = self.history.clone();
        history.push(step);
        Dataset {
            interactions: Arc::clone(&self.interactions),
            history,
            has_ratings: self.has_ratings,
            has_timestamps: self.has_timestamps,
        }
    }

    /// Distinct users in first-seen order.
    pub fn users(&self) -> Vec<Arc<str>> {
        distinct(self.interactions.iter().map(|x| &x.user))
    }

    /// Distinct items in first-seen order.
    pub fn items(&self) -> Vec<Arc<str>> {
        distinct(self.interactions.iter().map(|x| &x.item))
    }

    pub fn multiset(&self) -> HashMap<InteractionKey, usize> {
        multiset(&self.interactions)
    }

    /// True when both datasets hold the same interactions, ignoring order and
    /// history.
    pub fn same_interactions(&self, other: &Dataset) -> bool {
        self.len() == other.len() && self.multiset() == other.multiset()
    }

    /// New dataset with the same schema flags, `interactions`, and `step`
    /// appended. The step's checksum is filled in when missing.
    pub(crate) fn derive(&self, interactions: Vec<Interaction>, step: ProvenanceStep) -> Dataset {
        self.derive_with_schema(interactions, step, self.has_ratings, self.has_timestamps)
    }

    pub(crate) fn derive_with_schema(
        &self,
        interactions: Vec<Interaction>,
        mut step: ProvenanceStep,
        has_ratings: bool,
        has_timestamps: bool,
    ) -> Dataset {
        let interactions: Arc<[Interaction]> = interactions.into();
        if step.checksum.is_none() {
            step.checksum = Some(StepChecksum::Single(checksum::checksum_of(&interactions)));
        }
        let mut history = self.history.clone();
        history.push(step);
        Dataset {
            interactions,
            history,
            has_ratings,
            has_timestamps,
        }
    }

    /// Same interactions and schema, with `step` replacing the whole history.
    pub(crate) fn rebased(&self, step: ProvenanceStep) -> Dataset {
        Dataset {
            interactions: Arc::clone(&self.interactions),
            history: vec![step],
            has_ratings: self.has_ratings,
            has_timestamps: self.has_timestamps,
        }
    }

    pub(crate) fn last_step_mut(&mut self) -> Option<&mut ProvenanceStep> {
        self.history.last_mut()
    }
}

pub(crate) fn multiset(interactions: &[Interaction]) -> HashMap<InteractionKey, usize> {
    let mut out = HashMap::with_capacity(interactions.len());
    for x in interactions {
        *out.entry(x.key()).or_insert(0) += 1;
    }
    out
}

fn distinct<'a>(ids: impl Iterator<Item = &'a Arc<str>>) -> Vec<Arc<str>> {
    let mut seen = std::collections::HashSet::new();
    ids.filter(|id| seen.insert(Arc::clone(id))).cloned().collect()
}

fn validate_records(records: &[Interaction], lines: Option<&[usize]>) -> Result<(bool, bool)> {
    let position = |i: usize| lines.map_or(i + 1, |l| l[i]);
    let Some(first) = records.first() else {
        return Ok((false, false));
    };
    let has_ratings = first.rating.is_some();
    let has_timestamps = first.timestamp.is_some();
    for (i, r) in records.iter().enumerate() {
        if r.user.trim().is_empty() {
            return Err(Error::EmptyField {
                record: position(i),
                field: "user",
            });
        }
        if r.item.trim().is_empty() {
            return Err(Error::EmptyField {
                record: position(i),
                field: "item",
            });
        }
        if let Some(v) = r.rating {
            if !v.is_finite() {
                return Err(Error::InvalidRecord {
                    record: position(i),
                    detail: format!("rating {v} is not finite"),
                });
            }
        }
        if r.rating.is_some() != has_ratings {
            return Err(Error::MixedSchema {
                record: position(i),
                detail: presence_detail("rating", has_ratings),
            });
        }
        if r.timestamp.is_some() != has_timestamps {
            return Err(Error::MixedSchema {
                record: position(i),
                detail: presence_detail("timestamp", has_timestamps),
            });
        }
    }
    Ok((has_ratings, has_timestamps))
}

fn presence_detail(field: &str, expected: bool) -> String {
    if expected {
        format!("lacks a {field} while earlier records have one")
    } else {
        format!("has a {field} while earlier records do not")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(u: &str, i: &str, r: f64, t: i64) -> Interaction {
        Interaction::new(u, i).with_rating(r).with_timestamp(t)
    }

    #[test]
    fn empty_records_build_an_empty_dataset() {
        let d = build_dataset(vec![]).unwrap();
        assert_eq!(d.len(), 0);
        assert!(!d.has_ratings());
        assert!(!d.has_timestamps());
        assert_eq!(d.history().len(), 1);
        assert_eq!(d.history()[0].name, StepCategory::Load);
    }

    #[test]
    fn singleton_sets_both_flags() {
        let d = build_dataset(vec![rec("u1", "i1", 5.0, 100)]).unwrap();
        assert_eq!(d.len(), 1);
        assert!(d.has_ratings());
        assert!(d.has_timestamps());
    }

    #[test]
    fn mixed_rating_presence_is_rejected() {
        let err = build_dataset(vec![
            rec("u1", "i1", 5.0, 100),
            Interaction::new("u2", "i2").with_timestamp(200),
        ])
        .unwrap_err();
        assert!(matches!(err, Error::MixedSchema { record: 2, .. }), "{err}");
    }

    #[test]
    fn blank_ids_are_rejected() {
        let err = build_dataset(vec![Interaction::new("  ", "i1")]).unwrap_err();
        assert!(matches!(
            err,
            Error::EmptyField {
                field: "user",
                record: 1
            }
        ));
        let err = build_dataset(vec![Interaction::new("u", "\t")]).unwrap_err();
        assert!(matches!(err, Error::EmptyField { field: "item", .. }));
    }

    #[test]
    fn non_finite_rating_is_rejected() {
        let err = build_dataset(vec![Interaction::new("u", "i").with_rating(f64::NAN)]).unwrap_err();
        assert!(matches!(err, Error::InvalidRecord { .. }));
    }

    #[test]
    fn append_history_grows_by_one_and_keeps_prefix() {
        let d = build_dataset(vec![rec("u1", "i1", 5.0, 100)]).unwrap();
        let d2 = d.append_history(ProvenanceStep::new(StepCategory::Process, "A", Params::new()));
        let d3 = d2.append_history(ProvenanceStep::new(StepCategory::Process, "B", Params::new()));
        assert_eq!(d.history().len(), 1);
        assert_eq!(d3.history().len(), 3);
        assert_eq!(&d3.history()[..2], d2.history());
        assert_eq!(d3.interactions(), d.interactions());
    }

    #[test]
    fn unknown_category_is_bad_step() {
        let err = ProvenanceStep::parse("train", "X", Params::new()).unwrap_err();
        assert!(matches!(err, Error::BadStep(s) if s == "train"));
        assert!(ProvenanceStep::parse("export", "Elliot", Params::new()).is_ok());
    }

    #[test]
    fn digest_text_round_trips_and_rejects_uppercase() {
        let d: Digest = "d41d8cd98f00b204e9800998ecf8427e".parse().unwrap();
        assert_eq!(d.to_string(), "d41d8cd98f00b204e9800998ecf8427e");
        assert!("D41D8CD98F00B204E9800998ECF8427E".parse::<Digest>().is_err());
        assert!("d41d8cd98f00b204".parse::<Digest>().is_err());
    }

    #[test]
    fn users_and_items_are_first_seen_order() {
        let d = build_dataset(vec![
            Interaction::new("b", "y"),
            Interaction::new("a", "x"),
            Interaction::new("b", "x"),
        ])
        .unwrap();
        let users: Vec<String> = d.users().iter().map(|s| s.to_string()).collect();
        let items: Vec<String> = d.items().iter().map(|s| s.to_string()).collect();
        assert_eq!(users, ["b", "a"]);
        assert_eq!(items, ["y", "x"]);
    }

    #[test]
    fn param_values_deserialize_by_shape() {
        let v: Params = serde_yaml::from_str("a: 4\nb: 0.2\nc: 1m\nd: true\n").unwrap();
        assert_eq!(v["a"], ParamValue::Int(4));
        assert_eq!(v["b"], ParamValue::Float(0.2));
        assert_eq!(v["c"], ParamValue::Str("1m".into()));
        assert_eq!(v["d"], ParamValue::Bool(true));
    }
}
