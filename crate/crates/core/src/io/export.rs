//! Exporting train/validation/test splits for recommendation frameworks.
//!
//! Profiles are plain data: file names, separator, header and the columns
//! to emit. The built-in profiles are best-effort defaults for each
//! framework's usual input layout; frameworks change their loaders between
//! releases, so every profile can be overridden or loaded from YAML.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{check_id, write_atomically};
use crate::checksum::{digest_reader, render_rating};
use crate::dataset::{params, Dataset, Digest, ProvenanceStep, StepCategory};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Framework {
    ClayRS,
    Cornac,
    DaisyRec,
    Elliot,
    LensKit,
    RecBole,
    ReChorus,
    Recommenders,
    RecPack,
}

impl Framework {
    pub const ALL: [Framework; 9] = [
        Framework::ClayRS,
        Framework::Cornac,
        Framework::DaisyRec,
        Framework::Elliot,
        Framework::LensKit,
        Framework::RecBole,
        Framework::ReChorus,
        Framework::Recommenders,
        Framework::RecPack,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Framework::ClayRS => "ClayRS",
            Framework::Cornac => "Cornac",
            Framework::DaisyRec => "DaisyRec",
            Framework::Elliot => "Elliot",
            Framework::LensKit => "LensKit",
            Framework::RecBole => "RecBole",
            Framework::ReChorus => "ReChorus",
            Framework::Recommenders => "Recommenders",
            Framework::RecPack => "RecPack",
        }
    }
}

impl fmt::Display for Framework {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Framework {
    type Err = Error;

    /// Case-insensitive.
    fn from_str(s: &str) -> Result<Self> {
        Framework::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::BadArgument(format!("unknown framework {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    User,
    Item,
    Rating,
    Timestamp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Presence {
    /// Export fails with a schema mismatch when the data lacks the field.
    Required,
    /// Emitted only when every exported split carries the field.
    IfPresent,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportColumn {
    pub field: Field,
    pub header: String,
    pub presence: Presence,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitFileNames {
    pub train: String,
    pub test: String,
    pub val: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportProfile {
    pub framework: String,
    pub separator: String,
    pub header: bool,
    pub columns: Vec<ExportColumn>,
    pub files: SplitFileNames,
}

fn col(field: Field, header: &str, presence: Presence) -> ExportColumn {
    ExportColumn {
        field,
        header: header.to_string(),
        presence,
    }
}

fn names(ext: &str, val: &str) -> SplitFileNames {
    SplitFileNames {
        train: format!("train.{ext}"),
        test: format!("test.{ext}"),
        val: format!("{val}.{ext}"),
    }
}

impl ExportProfile {
    pub fn builtin(framework: Framework) -> ExportProfile {
        use Field::*;
        use Presence::*;
        let (sep, header, columns, files) = match framework {
            Framework::ClayRS => (
                ",",
                false,
                vec![
                    col(User, "user_id", Required),
                    col(Item, "item_id", Required),
                    col(Rating, "score", Required),
                    col(Timestamp, "timestamp", IfPresent),
                ],
                names("csv", "val"),
            ),
            Framework::Cornac => (
                ",",
                true,
                vec![
                    col(User, "user", Required),
                    col(Item, "item", Required),
                    col(Rating, "rating", IfPresent),
                ],
                names("csv", "val"),
            ),
            Framework::DaisyRec => (
                "\t",
                false,
                vec![
                    col(User, "user", Required),
                    col(Item, "item", Required),
                    col(Rating, "rating", Required),
                    col(Timestamp, "timestamp", IfPresent),
                ],
                names("tsv", "val"),
            ),
            Framework::Elliot => (
                "\t",
                false,
                vec![
                    col(User, "user", Required),
                    col(Item, "item", Required),
                    col(Rating, "rating", Required),
                ],
                names("tsv", "val"),
            ),
            Framework::LensKit => (
                ",",
                true,
                vec![
                    col(User, "user", Required),
                    col(Item, "item", Required),
                    col(Rating, "rating", IfPresent),
                    col(Timestamp, "timestamp", IfPresent),
                ],
                names("csv", "val"),
            ),
            Framework::RecBole => (
                "\t",
                true,
                vec![
                    col(User, "user_id:token", Required),
                    col(Item, "item_id:token", Required),
                    col(Rating, "rating:float", IfPresent),
                    col(Timestamp, "timestamp:float", IfPresent),
                ],
                names("inter", "val"),
            ),
            Framework::ReChorus => (
                "\t",
                true,
                vec![
                    col(User, "user_id", Required),
                    col(Item, "item_id", Required),
                    col(Timestamp, "time", Required),
                ],
                names("csv", "dev"),
            ),
            Framework::Recommenders => (
                ",",
                true,
                vec![
                    col(User, "userID", Required),
                    col(Item, "itemID", Required),
                    col(Rating, "rating", Required),
                    col(Timestamp, "timestamp", IfPresent),
                ],
                names("csv", "val"),
            ),
            Framework::RecPack => (
                ",",
                true,
                vec![
                    col(User, "user_id", Required),
                    col(Item, "item_id", Required),
                    col(Timestamp, "timestamp", IfPresent),
                ],
                names("csv", "val"),
            ),
        };
        ExportProfile {
            framework: framework.name().to_string(),
            separator: sep.to_string(),
            header,
            columns,
            files,
        }
    }

    pub fn from_yaml(text: &str) -> Result<ExportProfile> {
        serde_yaml::from_str(text).map_err(|e| Error::InvalidFormat(format!("export profile: {e}")))
    }

    /// Columns to emit for datasets with the given schema.
    fn active_columns(&self, has_ratings: bool, has_timestamps: bool) -> Result<Vec<&ExportColumn>> {
        let mut out = Vec::new();
        for c in &self.columns {
            let present = match c.field {
                Field::User | Field::Item => true,
                Field::Rating => has_ratings,
                Field::Timestamp => has_timestamps,
            };
            match (present, c.presence) {
                (true, _) => out.push(c),
                (false, Presence::IfPresent) => {}
                (false, Presence::Required) => {
                    return Err(Error::SchemaMismatch(format!(
                        "{} export requires {:?} values, which the data lacks",
                        self.framework, c.field
                    )))
                }
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub split: String,
    pub path: PathBuf,
    pub md5: Digest,
    pub rows: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub framework: String,
    pub files: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn paths(&self) -> impl Iterator<Item = &Path> {
        self.files.iter().map(|f| f.path.as_path())
    }
}

#[derive(Clone, Debug)]
pub struct ExportOutcome {
    pub manifest: Manifest,
    pub train: Dataset,
    pub test: Dataset,
    pub val: Option<Dataset>,
}

/// Writes the split into `out_dir` following `profile`, plus a
/// `manifest.yml` listing each file with its MD5.
///
/// Returned datasets carry an extra export step.
pub fn export_split(
    train: &Dataset,
    test: &Dataset,
    val: Option<&Dataset>,
    profile: &ExportProfile,
    out_dir: impl AsRef<Path>,
) -> Result<ExportOutcome> {
    let out_dir = out_dir.as_ref();
    let has_ratings = train.has_ratings() && test.has_ratings() && val.is_none_or(|v| v.has_ratings());
    let has_timestamps = train.has_timestamps() && test.has_timestamps() && val.is_none_or(|v| v.has_timestamps());
    let columns = profile.active_columns(has_ratings, has_timestamps)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let mut parts = vec![("train", train, &profile.files.train), ("test", test, &profile.files.test)];
    if let Some(v) = val {
        parts.push(("val", v, &profile.files.val));
    }
    let mut files = Vec::new();
    for (split, d, file_name) in parts {
        let path = out_dir.join(file_name);
        write_atomically(&path, |w| write_rows(d, w, profile, &columns))?;
        let md5 = digest_reader(fs::File::open(&path).map_err(|e| Error::io(&path, e))?).map_err(|e| Error::io(&path, e))?;
        files.push(ManifestEntry {
            split: split.to_string(),
            path,
            md5,
            rows: d.len(),
        });
    }
    let manifest = Manifest {
        framework: profile.framework.clone(),
        files,
    };
    let listing = Manifest {
        framework: manifest.framework.clone(),
        files: manifest
            .files
            .iter()
            .map(|f| ManifestEntry {
                path: PathBuf::from(f.path.file_name().unwrap()),
                ..f.clone()
            })
            .collect(),
    };
    let manifest_path = out_dir.join("manifest.yml");
    let text = serde_yaml::to_string(&listing).expect("manifest serializes");
    write_atomically(&manifest_path, |w| {
        w.write_all(text.as_bytes()).map_err(|e| Error::io(&manifest_path, e))
    })?;

    let step = ProvenanceStep::new(
        StepCategory::Export,
        profile.framework.clone(),
        params([("output_path", out_dir.display().to_string().into())]),
    );
    Ok(ExportOutcome {
        manifest,
        train: train.append_history(step.clone()),
        test: test.append_history(step.clone()),
        val: val.map(|v| v.append_history(step)),
    })
}

fn write_rows(d: &Dataset, w: &mut dyn std::io::Write, profile: &ExportProfile, columns: &[&ExportColumn]) -> Result<()> {
    let sep = profile.separator.as_str();
    let io_err = |e| Error::io("<export>", e);
    if profile.header {
        let header: Vec<&str> = columns.iter().map(|c| c.header.as_str()).collect();
        writeln!(w, "{}", header.join(sep)).map_err(io_err)?;
    }
    let mut line = String::with_capacity(64);
    for x in d.interactions() {
        check_id(&x.user, sep)?;
        check_id(&x.item, sep)?;
        line.clear();
        for (i, c) in columns.iter().enumerate() {
            if i > 0 {
                line.push_str(sep);
            }
            match c.field {
                Field::User => line.push_str(&x.user),
                Field::Item => line.push_str(&x.item),
                Field::Rating => line.push_str(&render_rating(x.rating.unwrap())),
                Field::Timestamp => line.push_str(&x.timestamp.unwrap().to_string()),
            }
        }
        line.push('\n');
        w.write_all(line.as_bytes()).map_err(io_err)?;
    }
    Ok(())
}
