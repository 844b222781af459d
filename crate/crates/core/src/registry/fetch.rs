use std::fs::{self, File, OpenOptions};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use md5::{Digest as _, Md5};

use super::DatasetDescriptor;
use crate::checksum::digest_reader;
use crate::dataset::{params, Dataset, Digest, ProvenanceStep, StepCategory, StepChecksum};
use crate::error::{Error, Result};
use crate::io::read_bytes;

pub const CACHE_DIR_ENV: &str = "RECDATA_CACHE_DIR";

const MARKER: &str = "verified";

/// `$RECDATA_CACHE_DIR`, else `$XDG_CACHE_HOME/recdata`, else
/// `~/.cache/recdata`.
pub fn default_cache_dir() -> PathBuf {
    if let Some(dir) = std::env::var_os(CACHE_DIR_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(dir);
    }
    if let Some(dir) = std::env::var_os("XDG_CACHE_HOME").filter(|v| !v.is_empty()) {
        return PathBuf::from(dir).join("recdata");
    }
    let home = std::env::var_os("HOME").map(PathBuf::from).unwrap_or_else(std::env::temp_dir);
    home.join(".cache").join("recdata")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fetched {
    pub path: PathBuf,
    pub md5: Digest,
    /// False when a verified cached copy was used.
    pub downloaded: bool,
}

/// Makes a verified copy of the archive available in the cache.
///
/// Concurrent callers for the same entry serialize on a lock file in the
/// entry's cache directory, so only the first one downloads.
pub fn fetch(desc: &DatasetDescriptor, cache_dir: &Path, offline: bool) -> Result<Fetched> {
    let expected = desc.md5.ok_or_else(|| Error::Unpinned {
        name: desc.name.clone(),
        version: desc.version.clone(),
    })?;
    let dir = desc.cache_dir(cache_dir);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let lock_path = dir.join(".lock");
    let lock = OpenOptions::new()
        .create(true)
        .truncate(false)
        .write(true)
        .open(&lock_path)
        .map_err(|e| Error::io(&lock_path, e))?;
    lock.lock().map_err(|e| Error::io(&lock_path, e))?;

    let archive = desc.archive_path(cache_dir);
    let marker = dir.join(MARKER);
    let what = archive.display().to_string();

    if archive.exists() {
        let actual = file_digest(&archive)?;
        if actual == expected {
            if !marker.exists() {
                fs::write(&marker, format!("{expected}\n")).map_err(|e| Error::io(&marker, e))?;
            }
            return Ok(Fetched {
                path: archive,
                md5: actual,
                downloaded: false,
            });
        }
        let _ = fs::remove_file(&marker);
        if offline || desc.manual {
            return Err(Error::ChecksumMismatch { what, expected, actual });
        }
    } else if desc.manual {
        return Err(Error::ManualDownload {
            name: desc.name.clone(),
            version: desc.version.clone(),
            url: desc.url.clone(),
            target: archive,
        });
    } else if offline {
        return Err(Error::OfflineMiss {
            name: desc.name.clone(),
            version: desc.version.clone(),
        });
    }

    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| Error::io(&dir, e))?;
    let actual = download(&desc.url, tmp.as_file_mut())?;
    if actual != expected {
        return Err(Error::ChecksumMismatch {
            what: desc.url.clone(),
            expected,
            actual,
        });
    }
    tmp.persist(&archive).map_err(|e| Error::io(&archive, e.error))?;
    fs::write(&marker, format!("{expected}\n")).map_err(|e| Error::io(&marker, e))?;
    Ok(Fetched {
        path: archive,
        md5: actual,
        downloaded: true,
    })
}

/// Fetches (or reuses) the verified archive and parses it with the entry's
/// format. The dataset's history starts with a load step named after the
/// entry's label.
pub fn fetch_and_load(desc: &DatasetDescriptor, cache_dir: &Path, offline: bool) -> Result<Dataset> {
    let fetched = fetch(desc, cache_dir, offline)?;
    let bytes = read_member(&fetched.path, desc.extract_path.as_deref())?;
    // The file may have been swapped after the check; verify what was read.
    if desc.extract_path.is_none() {
        let actual = Digest::of(&bytes);
        if actual != fetched.md5 {
            return Err(Error::ChecksumMismatch {
                what: fetched.path.display().to_string(),
                expected: fetched.md5,
                actual,
            });
        }
    }
    let d = read_bytes(&bytes, &desc.format)?;
    let step = ProvenanceStep::new(
        StepCategory::Load,
        desc.label.clone(),
        params([("version", desc.version.as_str().into())]),
    )
    .with_checksum(StepChecksum::Single(d.checksum()))
    .with_outcome("archive_md5", fetched.md5.to_string());
    Ok(d.rebased(step))
}

fn file_digest(path: &Path) -> Result<Digest> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    digest_reader(io::BufReader::new(f)).map_err(|e| Error::io(path, e))
}

fn read_member(path: &Path, member: Option<&str>) -> Result<Vec<u8>> {
    let Some(member) = member else {
        return fs::read(path).map_err(|e| Error::io(path, e));
    };
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut zip = zip::ZipArchive::new(f).map_err(|e| Error::Catalog(format!("{}: {e}", path.display())))?;
    let mut entry = zip
        .by_name(member)
        .map_err(|e| Error::Catalog(format!("{}: member {member}: {e}", path.display())))?;
    let mut out = Vec::with_capacity(entry.size() as usize);
    entry.read_to_end(&mut out).map_err(|e| Error::io(path, e))?;
    Ok(out)
}

/// Streams `url` into `out`, returning the MD5 of the bytes written.
/// `file://` URLs and bare paths are copied from disk.
fn download(url: &str, out: &mut File) -> Result<Digest> {
    let failure = |message: String| Error::DownloadFailure {
        url: url.to_string(),
        message,
    };
    let mut reader: Box<dyn Read> = if url.starts_with("http://") || url.starts_with("https://") {
        let response = ureq::get(url).call().map_err(|e| failure(e.to_string()))?;
        Box::new(response.into_body().into_reader())
    } else {
        let path = url.strip_prefix("file://").unwrap_or(url);
        Box::new(File::open(path).map_err(|e| failure(e.to_string()))?)
    };
    let mut hasher = Md5::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = match reader.read(&mut buf) {
            Ok(0) => break,
            Ok(n) => n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(failure(e.to_string())),
        };
        hasher.update(&buf[..n]);
        out.write_all(&buf[..n]).map_err(|e| failure(e.to_string()))?;
    }
    out.flush().map_err(|e| failure(e.to_string()))?;
    Ok(Digest(hasher.finalize().into()))
}
