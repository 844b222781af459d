//! Catalog of well-known datasets, download cache and verified loading.
//!
//! The built-in catalog ships as YAML inside the library and can be replaced
//! by a user-supplied file with the same layout. Archives are cached under
//! `<cache>/<name>/<version>/<archive>` and their MD5 is checked before any
//! byte is parsed.

mod fetch;

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::Digest;
use crate::error::{Error, Result};
use crate::io::FormatSpec;

pub use fetch::{default_cache_dir, fetch, fetch_and_load, Fetched, CACHE_DIR_ENV};

const BUILTIN: &str = include_str!("../../catalog/datasets.yml");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetDescriptor {
    pub name: String,
    /// Display name, also used as the load operation in pipelines.
    #[serde(default)]
    pub label: String,
    pub version: String,
    pub url: String,
    /// Digest of the downloaded file.
    #[serde(default)]
    pub md5: Option<Digest>,
    /// Member to read when the archive is a zip file.
    #[serde(default)]
    pub extract_path: Option<String>,
    /// Cache file name; defaults to the last segment of the URL.
    #[serde(default)]
    pub archive: Option<String>,
    pub format: FormatSpec,
    #[serde(default)]
    pub citation: String,
    /// The source cannot be downloaded without user action.
    #[serde(default)]
    pub manual: bool,
    #[serde(default)]
    pub notes: Option<String>,
}

impl DatasetDescriptor {
    pub fn archive_name(&self) -> String {
        if let Some(a) = &self.archive {
            return a.clone();
        }
        let path = self.url.split(['?', '#']).next().unwrap_or_default();
        match path.trim_end_matches('/').rsplit('/').next() {
            Some(last) if !last.is_empty() && !last.contains(':') => last.to_string(),
            _ => "archive".to_string(),
        }
    }

    /// `<cache>/<name>/<version>`
    pub fn cache_dir(&self, cache_root: &Path) -> PathBuf {
        cache_root.join(&self.name).join(&self.version)
    }

    pub fn archive_path(&self, cache_root: &Path) -> PathBuf {
        self.cache_dir(cache_root).join(self.archive_name())
    }

    fn validate(&self) -> Result<()> {
        let bad = |what: &str| Error::Catalog(format!("{} {}: {what}", self.name, self.version));
        for (field, v) in [("name", &self.name), ("version", &self.version)] {
            if v.is_empty() || v == "." || v == ".." || v.contains(['/', '\\']) {
                return Err(bad(&format!("{field} must be a plain path segment")));
            }
        }
        if self.url.is_empty() {
            return Err(bad("url is empty"));
        }
        let archive = self.archive_name();
        if archive == "." || archive == ".." || archive.contains(['/', '\\']) || archive == "verified" {
            return Err(bad("archive must be a plain file name"));
        }
        self.format.validate().map_err(|e| bad(&e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Catalog {
    #[serde(default = "one")]
    pub version: u32,
    pub datasets: Vec<DatasetDescriptor>,
}

fn one() -> u32 {
    1
}

impl Catalog {
    pub fn builtin() -> Catalog {
        Catalog::from_yaml(BUILTIN).expect("built-in catalog is valid")
    }

    pub fn from_yaml(text: &str) -> Result<Catalog> {
        let mut c: Catalog = serde_yaml::from_str(text).map_err(|e| Error::Catalog(e.to_string()))?;
        let mut seen = HashSet::new();
        for d in &mut c.datasets {
            if d.label.is_empty() {
                d.label = d.name.clone();
            }
            d.validate()?;
            if !seen.insert((d.name.clone(), d.version.clone())) {
                return Err(Error::Catalog(format!("duplicate entry {} {}", d.name, d.version)));
            }
        }
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Catalog> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Catalog::from_yaml(&text)
    }

    /// Finds an entry by name or label, ignoring case and punctuation.
    pub fn resolve(&self, name: &str, version: &str) -> Result<&DatasetDescriptor> {
        let wanted = normalize(name);
        let matching: Vec<&DatasetDescriptor> = self
            .datasets
            .iter()
            .filter(|d| normalize(&d.name) == wanted || normalize(&d.label) == wanted)
            .collect();
        if matching.is_empty() {
            return Err(Error::UnknownDataset(name.to_string()));
        }
        matching
            .iter()
            .find(|d| d.version.eq_ignore_ascii_case(version))
            .copied()
            .ok_or_else(|| Error::UnknownVersion {
                name: matching[0].name.clone(),
                version: version.to_string(),
                available: matching.iter().map(|d| d.version.clone()).collect(),
            })
    }
}

fn normalize(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

pub fn list_datasets() -> Vec<DatasetDescriptor> {
    Catalog::builtin().datasets
}

pub fn resolve(name: &str, version: &str) -> Result<DatasetDescriptor> {
    Catalog::builtin().resolve(name, version).cloned()
}
