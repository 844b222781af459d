//! Reading and writing interaction files.
//!
//! Three layouts are supported:
//!
//! * **Tabular** – `user<sep>item[<sep>rating][<sep>timestamp]`, one record
//!   per line, optional single header line. Columns either follow that
//!   positional layout (width fixed by the first data row) or an explicit
//!   [`ColumnMap`].
//! * **Inline** – `user<sep>item1<sep>item2...`, one user history per line,
//!   implicit feedback only.
//! * **JSON** – JSON-Lines by default; a top-level array is accepted on read.
//!
//! Gzip-compressed input is detected by its magic bytes and decompressed
//! transparently. Writes go to a temporary file that is renamed into place,
//! so a failed write never leaves a truncated output behind.

mod export;
mod inline;
mod json;
mod tabular;

use std::collections::HashSet;
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dataset::{params, Dataset, ParamValue, Params, ProvenanceStep, StepCategory, StepChecksum};
use crate::error::{Error, Result};

pub use export::{
    export_split, ExportColumn, ExportOutcome, ExportProfile, Field, Framework, Manifest, ManifestEntry, Presence, SplitFileNames,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatKind {
    Tabular,
    Inline,
    Json,
}

impl FormatKind {
    /// Operation name used for load and export steps.
    pub fn operation(self) -> &'static str {
        match self {
            FormatKind::Tabular => "Tabular",
            FormatKind::Inline => "Inline",
            FormatKind::Json => "Json",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JsonLayout {
    #[default]
    Lines,
    Array,
}

/// Explicit column positions for tabular files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnMap {
    pub user: usize,
    pub item: usize,
    #[serde(default)]
    pub rating: Option<usize>,
    #[serde(default)]
    pub timestamp: Option<usize>,
}

impl ColumnMap {
    pub fn new(user: usize, item: usize) -> Self {
        ColumnMap {
            user,
            item,
            rating: None,
            timestamp: None,
        }
    }

    pub fn with_rating(mut self, col: usize) -> Self {
        self.rating = Some(col);
        self
    }

    pub fn with_timestamp(mut self, col: usize) -> Self {
        self.timestamp = Some(col);
        self
    }

    pub(crate) fn width(&self) -> usize {
        [Some(self.user), Some(self.item), self.rating, self.timestamp]
            .into_iter()
            .flatten()
            .max()
            .unwrap()
            + 1
    }
}

/// Key names for JSON records.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JsonKeys {
    pub user: String,
    pub item: String,
    pub rating: String,
    pub timestamp: String,
}

impl Default for JsonKeys {
    fn default() -> Self {
        JsonKeys {
            user: "user".into(),
            item: "item".into(),
            rating: "rating".into(),
            timestamp: "timestamp".into(),
        }
    }
}

fn default_separator() -> String {
    "\t".to_string()
}

/// Description of an on-disk layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormatSpec {
    pub kind: FormatKind,
    #[serde(rename = "sep", default = "default_separator")]
    pub separator: String,
    /// `None` selects the positional layout.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub columns: Option<ColumnMap>,
    #[serde(rename = "header", default)]
    pub has_header: bool,
    #[serde(rename = "layout", default)]
    pub json_layout: JsonLayout,
    #[serde(rename = "keys", default)]
    pub json_keys: JsonKeys,
    /// Lines starting with this prefix are skipped (tabular and inline).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
}

impl FormatSpec {
    pub fn tabular(separator: &str) -> Self {
        FormatSpec {
            kind: FormatKind::Tabular,
            separator: separator.to_string(),
            columns: None,
            has_header: false,
            json_layout: JsonLayout::Lines,
            json_keys: JsonKeys::default(),
            comment: None,
        }
    }

    pub fn inline(separator: &str) -> Self {
        FormatSpec {
            kind: FormatKind::Inline,
            ..Self::tabular(separator)
        }
    }

    pub fn json() -> Self {
        FormatSpec {
            kind: FormatKind::Json,
            ..Self::tabular("\t")
        }
    }

    pub fn json_array() -> Self {
        FormatSpec {
            json_layout: JsonLayout::Array,
            ..Self::json()
        }
    }

    pub fn with_columns(mut self, columns: ColumnMap) -> Self {
        self.columns = Some(columns);
        self
    }

    pub fn with_header(mut self, has_header: bool) -> Self {
        self.has_header = has_header;
        self
    }

    pub fn with_comment(mut self, prefix: &str) -> Self {
        self.comment = Some(prefix.to_string());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if matches!(self.kind, FormatKind::Tabular | FormatKind::Inline) {
            if self.separator.is_empty() {
                return Err(Error::InvalidFormat("separator is empty".into()));
            }
            if self.separator.contains('\n') {
                return Err(Error::InvalidFormat("separator contains a line feed".into()));
            }
        }
        if let Some(c) = &self.columns {
            let cols = [Some(c.user), Some(c.item), c.rating, c.timestamp];
            let used: Vec<usize> = cols.iter().flatten().copied().collect();
            let distinct: HashSet<usize> = used.iter().copied().collect();
            if distinct.len() != used.len() {
                return Err(Error::InvalidFormat(format!("column positions overlap: {c:?}")));
            }
        }
        if let Some(prefix) = &self.comment {
            if prefix.is_empty() {
                return Err(Error::InvalidFormat("comment prefix is empty".into()));
            }
        }
        Ok(())
    }

    /// Parameters describing this format, in the form load and export steps
    /// record them.
    pub fn to_params(&self) -> Params {
        let mut p = Params::new();
        match self.kind {
            FormatKind::Tabular => {
                p.insert("sep".into(), self.separator.clone().into());
                if let Some(c) = &self.columns {
                    p.insert("user_col".into(), c.user.into());
                    p.insert("item_col".into(), c.item.into());
                    if let Some(r) = c.rating {
                        p.insert("rating_col".into(), r.into());
                    }
                    if let Some(t) = c.timestamp {
                        p.insert("timestamp_col".into(), t.into());
                    }
                }
                if self.has_header {
                    p.insert("header".into(), true.into());
                }
            }
            FormatKind::Inline => {
                p.insert("sep".into(), self.separator.clone().into());
            }
            FormatKind::Json => {
                if self.json_layout == JsonLayout::Array {
                    p.insert("layout".into(), "array".into());
                }
                let defaults = JsonKeys::default();
                let keys = [
                    ("user_key", &self.json_keys.user, &defaults.user),
                    ("item_key", &self.json_keys.item, &defaults.item),
                    ("rating_key", &self.json_keys.rating, &defaults.rating),
                    ("timestamp_key", &self.json_keys.timestamp, &defaults.timestamp),
                ];
                for (name, value, default) in keys {
                    if value != default {
                        p.insert(name.into(), value.clone().into());
                    }
                }
            }
        }
        if let (Some(prefix), FormatKind::Tabular | FormatKind::Inline) = (&self.comment, self.kind) {
            p.insert("comment".into(), prefix.clone().into());
        }
        p
    }

    /// Inverse of [`FormatSpec::to_params`]; unknown keys other than those in
    /// `extra` are rejected. Errors name the offending parameter.
    pub fn from_params(kind: FormatKind, p: &Params, extra: &[&str]) -> std::result::Result<Self, (String, String)> {
        let allowed: &[&str] = match kind {
            FormatKind::Tabular => &[
                "sep",
                "user_col",
                "item_col",
                "rating_col",
                "timestamp_col",
                "header",
                "comment",
            ],
            FormatKind::Inline => &["sep", "comment"],
            FormatKind::Json => &["layout", "user_key", "item_key", "rating_key", "timestamp_key"],
        };
        for key in p.keys() {
            if !allowed.contains(&key.as_str()) && !extra.contains(&key.as_str()) {
                return Err((key.clone(), "unknown parameter".into()));
            }
        }
        let text = |key: &str| -> std::result::Result<Option<String>, (String, String)> {
            match p.get(key) {
                None => Ok(None),
                Some(ParamValue::Str(s)) => Ok(Some(s.clone())),
                Some(other) => Err((key.into(), format!("expected text, got {other}"))),
            }
        };
        let col = |key: &str| -> std::result::Result<Option<usize>, (String, String)> {
            match p.get(key) {
                None => Ok(None),
                Some(v) => match v.as_i64() {
                    Some(n) if n >= 0 => Ok(Some(n as usize)),
                    _ => Err((key.into(), format!("expected a non-negative column index, got {v}"))),
                },
            }
        };
        let mut spec = match kind {
            FormatKind::Tabular => FormatSpec::tabular(&text("sep")?.map(unescape_separator).unwrap_or_else(default_separator)),
            FormatKind::Inline => FormatSpec::inline(&text("sep")?.map(unescape_separator).unwrap_or_else(default_separator)),
            FormatKind::Json => FormatSpec::json(),
        };
        if kind == FormatKind::Tabular {
            let (u, i, r, t) = (col("user_col")?, col("item_col")?, col("rating_col")?, col("timestamp_col")?);
            if u.is_some() || i.is_some() || r.is_some() || t.is_some() {
                spec.columns = Some(ColumnMap {
                    user: u.unwrap_or(0),
                    item: i.unwrap_or(1),
                    rating: r,
                    timestamp: t,
                });
            }
            if let Some(v) = p.get("header") {
                spec.has_header = v
                    .as_bool()
                    .ok_or_else(|| ("header".to_string(), format!("expected true or false, got {v}")))?;
            }
        }
        if kind != FormatKind::Json {
            spec.comment = text("comment")?;
        }
        if kind == FormatKind::Json {
            match text("layout")?.as_deref() {
                None | Some("lines") => {}
                Some("array") => spec.json_layout = JsonLayout::Array,
                Some(other) => return Err(("layout".into(), format!("expected lines or array, got {other}"))),
            }
            if let Some(k) = text("user_key")? {
                spec.json_keys.user = k;
            }
            if let Some(k) = text("item_key")? {
                spec.json_keys.item = k;
            }
            if let Some(k) = text("rating_key")? {
                spec.json_keys.rating = k;
            }
            if let Some(k) = text("timestamp_key")? {
                spec.json_keys.timestamp = k;
            }
        }
        spec.validate().map_err(|e| ("sep".to_string(), e.to_string()))?;
        Ok(spec)
    }
}

/// Maps separator spellings typed on command lines (`\t`, `tab`, `space`)
/// to the text they denote; anything else is returned unchanged.
pub fn unescape_separator(s: String) -> String {
    match s.as_str() {
        "\\t" | "tab" | "TAB" => "\t".to_string(),
        "\\s" | "space" => " ".to_string(),
        _ => s,
    }
}

/// Reads a file. Gzip input is decompressed transparently.
pub fn read(path: impl AsRef<Path>, spec: &FormatSpec) -> Result<Dataset> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut step_params = params([("path", path.display().to_string().into())]);
    step_params.extend(spec.to_params());
    read_bytes_with(&bytes, spec, step_params)
}

/// Reads from any byte stream.
pub fn read_reader<R: Read>(mut reader: R, spec: &FormatSpec) -> Result<Dataset> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes).map_err(|e| Error::io("<stream>", e))?;
    read_bytes(&bytes, spec)
}

pub fn read_bytes(bytes: &[u8], spec: &FormatSpec) -> Result<Dataset> {
    read_bytes_with(bytes, spec, spec.to_params())
}

fn read_bytes_with(bytes: &[u8], spec: &FormatSpec, step_params: Params) -> Result<Dataset> {
    spec.validate()?;
    let decompressed;
    let bytes = if bytes.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        flate2::read::MultiGzDecoder::new(bytes)
            .read_to_end(&mut out)
            .map_err(|e| Error::parse(0, format!("gzip stream: {e}")))?;
        decompressed = out;
        &decompressed[..]
    } else {
        bytes
    };
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let line = bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
        Error::parse(line, "invalid UTF-8")
    })?;
    let (records, lines) = match spec.kind {
        FormatKind::Tabular => tabular::parse(text, spec)?,
        FormatKind::Inline => inline::parse(text, spec)?,
        FormatKind::Json => json::parse(text, spec)?,
    };
    Dataset::build(records, Some(&lines), |d| {
        ProvenanceStep::new(StepCategory::Load, spec.kind.operation(), step_params)
            .with_checksum(StepChecksum::Single(d.checksum()))
    })
}

/// Outcome of writing a dataset to a stream.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WriteSummary {
    pub rows: usize,
    /// Fields present in the dataset that the format could not carry.
    pub dropped: Vec<&'static str>,
}

/// Writes `d` to `path` and returns `d` with an export step appended. When
/// the format drops fields the step carries a `warning` outcome.
pub fn write(d: &Dataset, path: impl AsRef<Path>, spec: &FormatSpec) -> Result<Dataset> {
    let path = path.as_ref();
    let mut summary = None;
    write_atomically(path, |w| {
        summary = Some(write_to(d, &mut &mut *w, spec)?);
        Ok(())
    })?;
    let summary = summary.unwrap();
    let mut step_params = params([("output_path", path.display().to_string().into())]);
    step_params.extend(spec.to_params());
    let mut step = ProvenanceStep::new(StepCategory::Export, spec.kind.operation(), step_params);
    if !summary.dropped.is_empty() {
        step = step.with_outcome("warning", format!("lossy_write: dropped {}", summary.dropped.join(", ")));
    }
    Ok(d.append_history(step))
}

pub fn write_to<W: Write>(d: &Dataset, w: &mut W, spec: &FormatSpec) -> Result<WriteSummary> {
    spec.validate()?;
    let io_err = |e| Error::io("<sink>", e);
    match spec.kind {
        FormatKind::Tabular => tabular::write(d, w, spec)?,
        FormatKind::Inline => inline::write(d, w, spec)?,
        FormatKind::Json => json::write(d, w, spec).map_err(io_err)?,
    }
    let mut dropped = Vec::new();
    if spec.kind == FormatKind::Inline {
        if d.has_ratings() {
            dropped.push("rating");
        }
        if d.has_timestamps() {
            dropped.push("timestamp");
        }
    }
    if let (FormatKind::Tabular, Some(c)) = (spec.kind, &spec.columns) {
        if d.has_ratings() && c.rating.is_none() {
            dropped.push("rating");
        }
        if d.has_timestamps() && c.timestamp.is_none() {
            dropped.push("timestamp");
        }
    }
    Ok(WriteSummary { rows: d.len(), dropped })
}

/// Runs `body` against a buffered temporary file next to `path`, then renames
/// it into place. Nothing is left at `path` if `body` fails.
pub(crate) fn write_atomically(path: &Path, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    {
        let mut w = BufWriter::with_capacity(1 << 16, tmp.as_file());
        body(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

#[derive(Default)]
pub(crate) struct Interner(HashSet<Arc<str>>);

impl Interner {
    pub(crate) fn get(&mut self, s: &str) -> Arc<str> {
        if let Some(a) = self.0.get(s) {
            return Arc::clone(a);
        }
        let a: Arc<str> = Arc::from(s);
        self.0.insert(Arc::clone(&a));
        a
    }
}

pub(crate) fn parse_rating(field: &str, line: usize) -> Result<f64> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::parse(line, format!("invalid rating {field:?}"))),
    }
}

pub(crate) fn parse_timestamp(field: &str, line: usize) -> Result<i64> {
    if let Ok(v) = field.parse::<i64>() {
        return Ok(v);
    }
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() && v.fract() == 0.0 && v.abs() < 9.2e18 => Ok(v as i64),
        _ => Err(Error::parse(line, format!("invalid timestamp {field:?}"))),
    }
}

/// Rejects ids that would corrupt a separator-delimited line, including ids
/// whose ends merge with a multi-character separator (`a:` before `::`).
pub(crate) fn check_id(id: &str, sep: &str) -> Result<()> {
    let merges = if sep.chars().count() > 1 {
        format!("{id}{sep}").find(sep) != Some(id.len()) || format!("{sep}{id}").rfind(sep) != Some(0)
    } else {
        !sep.is_empty() && id.contains(sep)
    };
    if merges || id.contains('\n') || id.contains('\r') {
        return Err(Error::SchemaMismatch(format!(
            "id {id:?} contains the separator or a line break"
        )));
    }
    Ok(())
}

pub(crate) fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.split('\n')
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
}
