use std::collections::HashSet;
use std::str::FromStr;

use super::config::PipelineStep;
use crate::dataset::{ParamValue, Params, StepCategory};
use crate::error::{Error, Result};
use crate::io::{FormatKind, FormatSpec, Framework};
use crate::processing::{BinarizeMode, KCoreMode, RatingThreshold, TimeKeep};
use crate::registry::Catalog;
use crate::splitting::{Direction, Order, Stratify, TemporalMode};

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Op {
    LoadRegistry {
        name: String,
        version: String,
        md5: Option<String>,
    },
    LoadFile {
        path: String,
        spec: FormatSpec,
    },
    Binarize {
        threshold: f64,
        mode: BinarizeMode,
    },
    KCore {
        k: usize,
        mode: KCoreMode,
        max_rounds: Option<usize>,
    },
    ColdUsers {
        min: usize,
    },
    FilterByRating(RatingThreshold),
    FilterByTime {
        cutoff: i64,
        keep: TimeKeep,
    },
    Deduplicate,
    Split(SplitOp),
    ExportFramework {
        framework: Framework,
        output_path: String,
    },
    ExportFile {
        spec: FormatSpec,
        output_path: String,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum SplitOp {
    Random {
        test: f64,
        val: f64,
        seed: u64,
        stratify: Stratify,
    },
    Temporal(TemporalMode),
    LeaveN {
        n: usize,
        direction: Direction,
        order: Order,
    },
    KRepeated {
        k: usize,
        test: f64,
        seed: u64,
        stratify: Stratify,
    },
    CrossValidation {
        k: usize,
        seed: u64,
        stratify: Stratify,
    },
    Precomputed {
        train: String,
        test: String,
        val: Option<String>,
        spec: Box<FormatSpec>,
    },
}

/// Typed access to a step's parameters that tracks which ones were used.
struct Args<'a> {
    step: usize,
    params: &'a Params,
    used: HashSet<&'a str>,
}

impl<'a> Args<'a> {
    fn new(step: usize, params: &'a Params) -> Self {
        Args {
            step,
            params,
            used: HashSet::new(),
        }
    }

    fn bad(&self, param: &str, message: impl Into<String>) -> Error {
        Error::BadParams {
            step: self.step,
            param: param.to_string(),
            message: message.into(),
        }
    }

    fn get(&mut self, name: &'a str) -> Option<&'a ParamValue> {
        let v = self.params.get(name);
        if v.is_some() {
            self.used.insert(name);
        }
        v
    }

    fn required(&mut self, name: &'a str) -> Result<&'a ParamValue> {
        self.get(name).ok_or_else(|| self.bad(name, "missing"))
    }

    fn f64(&mut self, name: &'a str) -> Result<f64> {
        let v = self.required(name)?;
        v.as_f64()
            .filter(|x| x.is_finite())
            .ok_or_else(|| self.bad(name, format!("expected a number, got {v}")))
    }

    fn opt_f64(&mut self, name: &'a str) -> Result<Option<f64>> {
        match self.get(name) {
            None => Ok(None),
            Some(v) => v
                .as_f64()
                .filter(|x| x.is_finite())
                .map(Some)
                .ok_or_else(|| self.bad(name, format!("expected a number, got {v}"))),
        }
    }

    fn opt_i64(&mut self, name: &'a str) -> Result<Option<i64>> {
        match self.get(name) {
            None => Ok(None),
            Some(v) => v
                .as_i64()
                .map(Some)
                .ok_or_else(|| self.bad(name, format!("expected an integer, got {v}"))),
        }
    }

    fn i64(&mut self, name: &'a str) -> Result<i64> {
        self.opt_i64(name)?.ok_or_else(|| self.bad(name, "missing"))
    }

    fn opt_positive(&mut self, name: &'a str) -> Result<Option<usize>> {
        match self.opt_i64(name)? {
            None => Ok(None),
            Some(n) if n >= 1 => Ok(Some(n as usize)),
            Some(n) => Err(self.bad(name, format!("must be at least 1, got {n}"))),
        }
    }

    fn positive(&mut self, name: &'a str) -> Result<usize> {
        self.opt_positive(name)?.ok_or_else(|| self.bad(name, "missing"))
    }

    /// Seeds are 64-bit; negative integers wrap.
    fn seed(&mut self) -> Result<u64> {
        Ok(self.opt_i64("seed")?.unwrap_or(0) as u64)
    }

    fn opt_text(&mut self, name: &'a str) -> Result<Option<&'a str>> {
        match self.get(name) {
            None => Ok(None),
            Some(ParamValue::Str(s)) => Ok(Some(s)),
            Some(v) => Err(self.bad(name, format!("expected text, got {v}"))),
        }
    }

    fn text(&mut self, name: &'a str) -> Result<&'a str> {
        self.opt_text(name)?.ok_or_else(|| self.bad(name, "missing"))
    }

    fn stratify(&mut self) -> Result<Stratify> {
        match self.opt_text("stratify")? {
            None => Ok(Stratify::System),
            Some(s) => Stratify::parse(s).ok_or_else(|| self.bad("stratify", format!("expected system or user, got {s:?}"))),
        }
    }

    fn fraction(&mut self, name: &'a str) -> Result<f64> {
        let v = self.f64(name)?;
        if !(v > 0.0 && v < 1.0) {
            return Err(self.bad(name, format!("must be in (0, 1), got {v}")));
        }
        Ok(v)
    }

    /// Format parameters; `extra` lists the keys the operation reads itself.
    fn format(&mut self, kind: FormatKind, extra: &[&str]) -> Result<FormatSpec> {
        let mut format_params = Params::new();
        for (k, v) in self.params {
            if !extra.contains(&k.as_str()) {
                format_params.insert(k.clone(), v.clone());
                self.used.insert(k.as_str());
            }
        }
        FormatSpec::from_params(kind, &format_params, &[]).map_err(|(p, m)| self.bad(&p, m))
    }

    fn finish(&self) -> Result<()> {
        match self.params.keys().find(|k| !self.used.contains(k.as_str())) {
            Some(k) => Err(self.bad(k, "unknown parameter")),
            None => Ok(()),
        }
    }
}

fn file_kind(operation: &str) -> Option<FormatKind> {
    [FormatKind::Tabular, FormatKind::Inline, FormatKind::Json]
        .into_iter()
        .find(|k| k.operation().eq_ignore_ascii_case(operation))
}

impl Op {
    pub(crate) fn parse(n: usize, step: &PipelineStep, catalog: &Catalog) -> Result<Op> {
        let unknown = || Error::UnknownOperation {
            step: n,
            category: step.name.as_str().to_string(),
            operation: step.operation.clone(),
        };
        let mut a = Args::new(n, &step.params);
        let op = step.operation.as_str();
        let parsed = match step.name {
            StepCategory::Load => {
                if let Some(kind) = file_kind(op) {
                    let path = a.text("path")?.to_string();
                    Op::LoadFile {
                        path,
                        spec: a.format(kind, &["path"])?,
                    }
                } else {
                    let version = match a.required("version")? {
                        ParamValue::Str(s) => s.clone(),
                        ParamValue::Int(i) => i.to_string(),
                        other => return Err(a.bad("version", format!("expected text, got {other}"))),
                    };
                    let name = match catalog.resolve(op, &version) {
                        Err(Error::UnknownDataset(_)) => return Err(unknown()),
                        Err(e) => return Err(a.bad("version", e.to_string())),
                        Ok(d) => d.name.clone(),
                    };
                    let md5 = a.opt_text("md5")?.map(str::to_string);
                    if let Some(m) = &md5 {
                        crate::dataset::Digest::from_str(m).map_err(|e| a.bad("md5", e.to_string()))?;
                    }
                    Op::LoadRegistry { name, version, md5 }
                }
            }
            StepCategory::Process => match op {
                "Binarize" => {
                    let threshold = a.f64("threshold")?;
                    let mode = match a.opt_text("mode")? {
                        None | Some("drop_below") => BinarizeMode::DropBelow,
                        Some("zero_one") => BinarizeMode::ZeroOne,
                        Some(other) => return Err(a.bad("mode", format!("expected drop_below or zero_one, got {other:?}"))),
                    };
                    Op::Binarize { threshold, mode }
                }
                "UserKCore" | "ItemKCore" | "UserItemIterativeKCore" => {
                    let mode = match op {
                        "UserKCore" => KCoreMode::User,
                        "ItemKCore" => KCoreMode::Item,
                        _ => KCoreMode::Iterative,
                    };
                    let k = match (a.opt_positive("cores")?, a.opt_positive("k")?) {
                        (Some(c), Some(k)) if c != k => return Err(a.bad("k", "conflicts with cores")),
                        (Some(c), _) | (None, Some(c)) => c,
                        (None, None) => return Err(a.bad("cores", "missing")),
                    };
                    let max_rounds = if mode == KCoreMode::Iterative {
                        a.opt_positive("max_rounds")?
                    } else {
                        None
                    };
                    Op::KCore { k, mode, max_rounds }
                }
                "ColdUsers" => Op::ColdUsers {
                    min: a.positive("min_interactions")?,
                },
                "FilterByRating" => {
                    let v = a.required("threshold")?;
                    let t = RatingThreshold::from_param(v)
                        .ok_or_else(|| a.bad("threshold", format!("expected a number, global_mean or user_mean, got {v}")))?;
                    Op::FilterByRating(t)
                }
                "FilterByTime" => {
                    let cutoff = a.i64("cutoff")?;
                    let keep = match a.opt_text("keep")? {
                        Some("before") => TimeKeep::Before,
                        None | Some("after") => TimeKeep::After,
                        Some(other) => return Err(a.bad("keep", format!("expected before or after, got {other:?}"))),
                    };
                    Op::FilterByTime { cutoff, keep }
                }
                "Deduplicate" => Op::Deduplicate,
                _ => return Err(unknown()),
            },
            StepCategory::Split => Op::Split(match op {
                "RandomHoldOut" => {
                    let test = a.fraction("test_ratio")?;
                    let val = a.opt_f64("val_ratio")?.unwrap_or(0.0);
                    if val < 0.0 {
                        return Err(a.bad("val_ratio", format!("must be >= 0, got {val}")));
                    }
                    if test + val >= 1.0 {
                        return Err(a.bad(
                            "val_ratio",
                            format!("test_ratio + val_ratio must be below 1, got {}", test + val),
                        ));
                    }
                    SplitOp::Random {
                        test,
                        val,
                        seed: a.seed()?,
                        stratify: a.stratify()?,
                    }
                }
                "TemporalHoldOut" => SplitOp::Temporal(TemporalMode::ByRatio(a.fraction("test_ratio")?, a.stratify()?)),
                "TemporalFixedTimestamp" => SplitOp::Temporal(TemporalMode::FixedTimestamp(a.i64("cutoff")?)),
                "TemporalBestRatio" => SplitOp::Temporal(TemporalMode::BestRatioCutoff(a.fraction("test_ratio")?)),
                "LeaveNOut" | "LeaveNIn" => {
                    let n_items = a.opt_positive("n")?.unwrap_or(1);
                    let order = match a.opt_text("order")? {
                        None | Some("temporal") => Order::Temporal,
                        Some("random") => Order::Random(a.seed()?),
                        Some(other) => return Err(a.bad("order", format!("expected temporal or random, got {other:?}"))),
                    };
                    SplitOp::LeaveN {
                        n: n_items,
                        direction: if op == "LeaveNOut" { Direction::Out } else { Direction::In },
                        order,
                    }
                }
                "KRepeatedHoldOut" => SplitOp::KRepeated {
                    k: a.positive("k")?,
                    test: a.fraction("test_ratio")?,
                    seed: a.seed()?,
                    stratify: a.stratify()?,
                },
                "CrossValidation" => {
                    let k = a.positive("k")?;
                    if k < 2 {
                        return Err(a.bad("k", "must be at least 2"));
                    }
                    SplitOp::CrossValidation {
                        k,
                        seed: a.seed()?,
                        stratify: a.stratify()?,
                    }
                }
                "PrecomputedSplit" => {
                    let train = a.text("train_path")?.to_string();
                    let test = a.text("test_path")?.to_string();
                    let val = a.opt_text("val_path")?.map(str::to_string);
                    let kind = match a.opt_text("format")? {
                        None => FormatKind::Tabular,
                        Some(f) => {
                            file_kind(f).ok_or_else(|| a.bad("format", format!("expected Tabular, Inline or Json, got {f:?}")))?
                        }
                    };
                    let spec = Box::new(a.format(kind, &["train_path", "test_path", "val_path", "format"])?);
                    SplitOp::Precomputed { train, test, val, spec }
                }
                _ => return Err(unknown()),
            }),
            StepCategory::Export => {
                if let Some(kind) = file_kind(op) {
                    let output_path = a.text("output_path")?.to_string();
                    Op::ExportFile {
                        spec: a.format(kind, &["output_path"])?,
                        output_path,
                    }
                } else {
                    let framework = Framework::from_str(op).map_err(|_| unknown())?;
                    Op::ExportFramework {
                        framework,
                        output_path: a.text("output_path")?.to_string(),
                    }
                }
            }
        };
        a.finish()?;
        Ok(parsed)
    }
}
