mod common;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Barrier};

use recdata::io::FormatSpec;
use recdata::registry::{self, fetch, fetch_and_load, Catalog, DatasetDescriptor};
use recdata::{Digest, Error, StepCategory};

const RATINGS: &str = "1::10::5::978300760\n1::11::3::978302109\n2::10::4::978301968\n3::12::2::978300275\n";

struct Fixture {
    _dir: tempfile::TempDir,
    source: PathBuf,
    cache: PathBuf,
}

fn fixture(body: &[u8], name: &str) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let source = dir.path().join(name);
    std::fs::write(&source, body).unwrap();
    let cache = dir.path().join("cache");
    Fixture {
        _dir: dir,
        source,
        cache,
    }
}

fn descriptor(source: &Path, md5: Option<Digest>) -> DatasetDescriptor {
    DatasetDescriptor {
        name: "fixture".into(),
        label: "Fixture".into(),
        version: "v1".into(),
        url: format!("file://{}", source.display()),
        md5,
        extract_path: None,
        archive: None,
        format: FormatSpec::tabular("::"),
        citation: String::new(),
        manual: false,
        notes: None,
    }
}

#[test]
fn correct_digest_loads_and_records_the_step() {
    let f = fixture(RATINGS.as_bytes(), "ratings.dat");
    let desc = descriptor(&f.source, Some(Digest::of(RATINGS.as_bytes())));
    let d = fetch_and_load(&desc, &f.cache, false).unwrap();
    assert_eq!(d.len(), 4);
    let step = &d.history()[0];
    assert_eq!(d.history().len(), 1);
    assert_eq!((step.name, step.operation.as_str()), (StepCategory::Load, "Fixture"));
    assert!(f.cache.join("fixture/v1/ratings.dat").exists());
    assert_eq!(
        std::fs::read_to_string(f.cache.join("fixture/v1/verified")).unwrap().trim(),
        Digest::of(RATINGS.as_bytes()).to_string()
    );
}

#[test]
fn wrong_digest_is_refused_before_parsing() {
    let f = fixture(RATINGS.as_bytes(), "ratings.dat");
    let desc = descriptor(&f.source, Some(Digest::of(b"something else")));
    match fetch_and_load(&desc, &f.cache, false) {
        Err(Error::ChecksumMismatch { expected, actual, .. }) => {
            assert_eq!(expected, Digest::of(b"something else"));
            assert_eq!(actual, Digest::of(RATINGS.as_bytes()));
        }
        other => panic!("{other:?}"),
    }
    let entry = f.cache.join("fixture/v1");
    assert!(!entry.join("ratings.dat").exists());
    assert!(!entry.join("verified").exists());
}

#[test]
fn tampered_byte_is_caught() {
    let f = fixture(RATINGS.as_bytes(), "ratings.dat");
    let desc = descriptor(&f.source, Some(Digest::of(RATINGS.as_bytes())));
    fetch(&desc, &f.cache, false).unwrap();
    let cached = desc.archive_path(&f.cache);
    let mut bytes = std::fs::read(&cached).unwrap();
    bytes[3] ^= 1;
    std::fs::write(&cached, &bytes).unwrap();
    assert!(matches!(
        fetch_and_load(&desc, &f.cache, true),
        Err(Error::ChecksumMismatch { .. })
    ));
    assert!(!f.cache.join("fixture/v1/verified").exists());
    // Online, the bad copy is replaced from the source.
    let again = fetch(&desc, &f.cache, false).unwrap();
    assert!(again.downloaded);
    assert_eq!(std::fs::read(&cached).unwrap(), RATINGS.as_bytes());
}

#[test]
fn cache_is_idempotent_and_serves_offline() {
    let f = fixture(RATINGS.as_bytes(), "ratings.dat");
    let desc = descriptor(&f.source, Some(Digest::of(RATINGS.as_bytes())));
    assert!(matches!(fetch(&desc, &f.cache, true), Err(Error::OfflineMiss { .. })));
    assert!(fetch(&desc, &f.cache, false).unwrap().downloaded);
    assert!(!fetch(&desc, &f.cache, false).unwrap().downloaded);
    std::fs::remove_file(&f.source).unwrap();
    let a = fetch_and_load(&desc, &f.cache, true).unwrap();
    let b = fetch_and_load(&desc, &f.cache, false).unwrap();
    assert_eq!(a.checksum(), b.checksum());
}

#[test]
fn concurrent_fetches_download_once() {
    let f = fixture(RATINGS.as_bytes(), "ratings.dat");
    let desc = Arc::new(descriptor(&f.source, Some(Digest::of(RATINGS.as_bytes()))));
    let barrier = Arc::new(Barrier::new(8));
    let handles: Vec<_> = (0..8)
        .map(|_| {
            let (desc, barrier, cache) = (Arc::clone(&desc), Arc::clone(&barrier), f.cache.clone());
            std::thread::spawn(move || {
                barrier.wait();
                fetch(&desc, &cache, false).unwrap().downloaded
            })
        })
        .collect();
    let downloads = handles.into_iter().map(|h| h.join().unwrap()).filter(|&d| d).count();
    assert_eq!(downloads, 1);
}

#[test]
fn unpinned_and_manual_entries() {
    let f = fixture(RATINGS.as_bytes(), "ratings.dat");
    assert!(matches!(
        fetch(&descriptor(&f.source, None), &f.cache, false),
        Err(Error::Unpinned { .. })
    ));
    let mut manual = descriptor(&f.source, Some(Digest::of(RATINGS.as_bytes())));
    manual.manual = true;
    match fetch(&manual, &f.cache, false) {
        Err(Error::ManualDownload { target, .. }) => assert_eq!(target, manual.archive_path(&f.cache)),
        other => panic!("{other:?}"),
    }
    std::fs::copy(&f.source, manual.archive_path(&f.cache)).unwrap();
    assert_eq!(fetch_and_load(&manual, &f.cache, false).unwrap().len(), 4);
}

#[test]
fn zip_member_is_extracted() {
    let mut buf = std::io::Cursor::new(Vec::new());
    {
        let mut z = zip::ZipWriter::new(&mut buf);
        let opts = zip::write::SimpleFileOptions::default().compression_method(zip::CompressionMethod::Deflated);
        z.start_file("readme.txt", opts).unwrap();
        z.write_all(b"not ratings").unwrap();
        z.start_file("ml/ratings.dat", opts).unwrap();
        z.write_all(RATINGS.as_bytes()).unwrap();
        z.finish().unwrap();
    }
    let bytes = buf.into_inner();
    let f = fixture(&bytes, "ml.zip");
    let mut desc = descriptor(&f.source, Some(Digest::of(&bytes)));
    desc.extract_path = Some("ml/ratings.dat".into());
    let d = fetch_and_load(&desc, &f.cache, false).unwrap();
    assert_eq!(d.len(), 4);
    assert_eq!(
        d.history()[0].outcome["archive_md5"].to_text(),
        Digest::of(&bytes).to_string()
    );
}

#[test]
fn catalog_file_overrides_the_builtin() {
    let f = fixture(RATINGS.as_bytes(), "ratings.dat");
    let text = format!(
        "version: 1\ndatasets:\n- name: fixture\n  version: v1\n  url: file://{}\n  md5: {}\n  format:\n    kind: tabular\n    sep: '::'\n",
        f.source.display(),
        Digest::of(RATINGS.as_bytes())
    );
    let catalog = Catalog::from_yaml(&text).unwrap();
    let desc = catalog.resolve("Fixture", "V1").unwrap();
    assert_eq!(fetch_and_load(desc, &f.cache, false).unwrap().len(), 4);
}

/// Downloads MovieLens 1M; runs only with RECDATA_NETWORK_TESTS=1.
#[test]
fn network_movielens_1m() {
    if std::env::var("RECDATA_NETWORK_TESTS").as_deref() != Ok("1") {
        eprintln!("skipped: set RECDATA_NETWORK_TESTS=1 to run");
        return;
    }
    let desc = registry::resolve("movielens", "1m").unwrap();
    let cache = tempfile::tempdir().unwrap();
    let d = fetch_and_load(&desc, cache.path(), false).unwrap();
    assert_eq!(d.len(), 1_000_209);
}
