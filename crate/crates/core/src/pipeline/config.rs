use std::str::FromStr;

use serde_yaml::{Mapping, Value};

use super::ops::Op;
use crate::dataset::{Digest, ParamValue, Params, ProvenanceStep, SplitDigests, StepCategory, StepChecksum};
use crate::error::{Error, Result};
use crate::registry::Catalog;

/// One step of a pipeline document.
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineStep {
    pub name: StepCategory,
    pub operation: String,
    pub params: Params,
    /// Expected digest(s); absent when the document was not recorded.
    pub checksum: Option<StepChecksum>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub steps: Vec<PipelineStep>,
}

/// Parses a document against the built-in catalog.
pub fn parse_config(document: &str) -> Result<PipelineConfig> {
    parse_config_with(document, &Catalog::builtin())
}

/// Parses a document, resolving load operations against `catalog`.
///
/// Step numbers in errors are 1-based; 0 refers to the document itself.
pub fn parse_config_with(document: &str, catalog: &Catalog) -> Result<PipelineConfig> {
    let config = parse_structure(document)?;
    config.validate(catalog)?;
    Ok(config)
}

fn schema(step: usize, field: &str, message: impl Into<String>) -> Error {
    Error::Schema {
        step,
        field: field.to_string(),
        message: message.into(),
    }
}

fn parse_structure(document: &str) -> Result<PipelineConfig> {
    let root: Value = serde_yaml::from_str(document).map_err(|e| schema(0, "document", e.to_string()))?;
    let Value::Mapping(root) = root else {
        return Err(schema(0, "document", "expected a mapping with a `pipeline` key"));
    };
    let mut steps_value = None;
    for (k, v) in root {
        match k.as_str() {
            Some("pipeline") => steps_value = Some(v),
            Some(other) => return Err(schema(0, other, "unknown top-level key")),
            None => return Err(schema(0, "document", format!("non-text key {k:?}"))),
        }
    }
    let Some(Value::Sequence(items)) = steps_value else {
        return Err(schema(0, "pipeline", "expected a list of steps"));
    };
    if items.is_empty() {
        return Err(schema(0, "pipeline", "no steps"));
    }
    let steps = items
        .into_iter()
        .enumerate()
        .map(|(i, v)| parse_step(i + 1, v))
        .collect::<Result<Vec<_>>>()?;
    Ok(PipelineConfig { steps })
}

fn parse_step(n: usize, v: Value) -> Result<PipelineStep> {
    let Value::Mapping(m) = v else {
        return Err(schema(n, "step", "expected a mapping"));
    };
    let (mut name, mut operation, mut params, mut checksum) = (None, None, Params::new(), None);
    for (k, v) in m {
        let key = k
            .as_str()
            .ok_or_else(|| schema(n, "step", format!("non-text key {k:?}")))?
            .to_string();
        match key.as_str() {
            "name" => {
                let s = v.as_str().ok_or_else(|| schema(n, "name", "expected text"))?;
                name = Some(StepCategory::from_str(s).map_err(|e| schema(n, "name", e.to_string()))?);
            }
            "operation" => {
                let s = v.as_str().ok_or_else(|| schema(n, "operation", "expected text"))?;
                operation = Some(s.to_string());
            }
            "params" => params = parse_params(n, v)?,
            "checksum" => checksum = parse_checksum(n, v)?,
            _ => return Err(schema(n, &key, "unknown key")),
        }
    }
    Ok(PipelineStep {
        name: name.ok_or_else(|| schema(n, "name", "missing"))?,
        operation: operation.ok_or_else(|| schema(n, "operation", "missing"))?,
        params,
        checksum,
    })
}

fn parse_params(n: usize, v: Value) -> Result<Params> {
    let m = match v {
        Value::Null => return Ok(Params::new()),
        Value::Mapping(m) => m,
        _ => return Err(schema(n, "params", "expected a mapping")),
    };
    let mut out = Params::new();
    for (k, v) in m {
        let key = match &k {
            Value::String(s) => s.clone(),
            Value::Number(x) => x.to_string(),
            Value::Bool(b) => b.to_string(),
            _ => return Err(schema(n, "params", format!("non-scalar key {k:?}"))),
        };
        let value = match v {
            Value::Bool(b) => ParamValue::Bool(b),
            Value::Number(x) => match x.as_i64() {
                Some(i) => ParamValue::Int(i),
                None => ParamValue::Float(x.as_f64().unwrap_or(f64::NAN)),
            },
            Value::String(s) => ParamValue::Str(s),
            _ => return Err(schema(n, &format!("params.{key}"), "expected a scalar")),
        };
        if out.insert(key.clone(), value).is_some() {
            return Err(schema(n, &format!("params.{key}"), "duplicate parameter"));
        }
    }
    Ok(out)
}

fn parse_digest(n: usize, field: &str, v: &Value) -> Result<Digest> {
    let s = v.as_str().ok_or_else(|| schema(n, field, "expected hex digest text"))?;
    Digest::from_str(s).map_err(|e| schema(n, field, e.to_string()))
}

fn parse_split_digests(n: usize, field: &str, m: &Mapping) -> Result<SplitDigests> {
    let (mut test, mut val, mut train) = (None, None, None);
    for (k, v) in m {
        let key = k.as_str().unwrap_or_default();
        let f = format!("{field}.{key}");
        match key {
            "test" => test = Some(parse_digest(n, &f, v)?),
            "val" => val = Some(parse_digest(n, &f, v)?),
            "train" => train = Some(parse_digest(n, &f, v)?),
            _ => return Err(schema(n, &f, "expected test, val or train")),
        }
    }
    Ok(SplitDigests {
        test: test.ok_or_else(|| schema(n, &format!("{field}.test"), "missing"))?,
        val,
        train: train.ok_or_else(|| schema(n, &format!("{field}.train"), "missing"))?,
    })
}

fn parse_checksum(n: usize, v: Value) -> Result<Option<StepChecksum>> {
    match &v {
        Value::Null => Ok(None),
        Value::String(_) => Ok(Some(StepChecksum::Single(parse_digest(n, "checksum", &v)?))),
        Value::Mapping(m) => Ok(Some(StepChecksum::Split(parse_split_digests(n, "checksum", m)?))),
        Value::Sequence(folds) => {
            let folds = folds
                .iter()
                .enumerate()
                .map(|(i, f)| match f {
                    Value::Mapping(m) => parse_split_digests(n, &format!("checksum[{i}]"), m),
                    _ => Err(schema(n, &format!("checksum[{i}]"), "expected a mapping")),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Some(StepChecksum::Folds(folds)))
        }
        _ => Err(schema(
            n,
            "checksum",
            "expected a digest, a split map or a list of split maps",
        )),
    }
}

impl PipelineConfig {
    /// Checks step ordering and resolves every operation and its parameters.
    pub fn validate(&self, catalog: &Catalog) -> Result<()> {
        self.check_order()?;
        let mut split_seen = false;
        for (i, step) in self.steps.iter().enumerate() {
            let op = Op::parse(i + 1, step, catalog)?;
            split_seen |= step.name == StepCategory::Split;
            if matches!(op, Op::ExportFramework { .. }) && !split_seen {
                return Err(schema(
                    i + 1,
                    "operation",
                    format!("{} export needs a split step before it", step.operation),
                ));
            }
        }
        Ok(())
    }

    fn check_order(&self) -> Result<()> {
        let mut split_at = None;
        for (i, step) in self.steps.iter().enumerate() {
            let n = i + 1;
            match step.name {
                StepCategory::Load if n != 1 => return Err(schema(n, "name", "only the first step may be a load")),
                StepCategory::Load => {}
                _ if n == 1 => return Err(schema(1, "name", "the first step must be a load")),
                StepCategory::Split => {
                    if let Some(prev) = split_at {
                        return Err(schema(
                            n,
                            "name",
                            format!("at most one split step (step {prev} already splits)"),
                        ));
                    }
                    split_at = Some(n);
                }
                StepCategory::Process if split_at.is_some() => {
                    return Err(schema(n, "name", "process steps must come before the split"))
                }
                StepCategory::Process => {}
                StepCategory::Export => {}
            }
        }
        if let Some(s) = split_at {
            if let Some(i) = self.steps[..s - 1].iter().position(|st| st.name == StepCategory::Export) {
                return Err(schema(i + 1, "name", "export steps must come after the split"));
            }
        }
        Ok(())
    }

    /// The document describing a dataset's history.
    pub fn from_history(history: &[ProvenanceStep]) -> PipelineConfig {
        PipelineConfig {
            steps: history
                .iter()
                .map(|s| PipelineStep {
                    name: s.name,
                    operation: s.operation.clone(),
                    params: s.params.clone(),
                    checksum: if s.name == StepCategory::Export {
                        None
                    } else {
                        s.checksum.clone()
                    },
                })
                .collect(),
        }
    }

    /// Renders the document: a `pipeline` list whose steps carry `name`,
    /// `operation`, `params` and, when known, `checksum`, in that order.
    pub fn to_yaml(&self) -> String {
        let steps: Vec<Value> = self.steps.iter().map(step_value).collect();
        let mut root = Mapping::new();
        root.insert("pipeline".into(), Value::Sequence(steps));
        serde_yaml::to_string(&Value::Mapping(root)).expect("pipeline documents serialize")
    }
}

fn step_value(step: &PipelineStep) -> Value {
    let mut m = Mapping::new();
    m.insert("name".into(), step.name.as_str().into());
    m.insert("operation".into(), step.operation.clone().into());
    let mut p = Mapping::new();
    for (k, v) in &step.params {
        let v = match v {
            ParamValue::Bool(b) => Value::Bool(*b),
            ParamValue::Int(i) => Value::Number((*i).into()),
            ParamValue::Float(f) => Value::Number((*f).into()),
            ParamValue::Str(s) => Value::String(s.clone()),
        };
        p.insert(k.clone().into(), v);
    }
    m.insert("params".into(), Value::Mapping(p));
    if let Some(c) = &step.checksum {
        m.insert("checksum".into(), checksum_value(c));
    }
    Value::Mapping(m)
}

fn split_value(s: &SplitDigests) -> Value {
    let mut m = Mapping::new();
    m.insert("test".into(), s.test.to_string().into());
    if let Some(v) = s.val {
        m.insert("val".into(), v.to_string().into());
    }
    m.insert("train".into(), s.train.to_string().into());
    Value::Mapping(m)
}

fn checksum_value(c: &StepChecksum) -> Value {
    match c {
        StepChecksum::Single(d) => d.to_string().into(),
        StepChecksum::Split(s) => split_value(s),
        StepChecksum::Folds(f) => Value::Sequence(f.iter().map(split_value).collect()),
    }
}
