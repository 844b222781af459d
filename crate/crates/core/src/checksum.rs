//! Canonical serialization and content digests.
//!
//! The canonical form sorts interactions by `(user, item, timestamp text,
//! rating text)` and emits each one as `user\titem\trating\ttimestamp\n` in
//! UTF-8. Absent fields are empty; ratings use the shortest decimal that
//! round-trips (`5.0` becomes `5`). Backslash, TAB, CR and LF inside ids are
//! escaped as `\\`, `\t`, `\r`, `\n` so that the encoding stays injective.
//! The checksum is the MD5 of that byte stream.

use std::io::Write;

use md5::{Digest as _, Md5};

use crate::dataset::{Dataset, Digest, Interaction};

pub fn canonical_serialize(d: &Dataset) -> Vec<u8> {
    let mut out = Vec::new();
    write_canonical(d.interactions(), &mut out).expect("writing to a Vec cannot fail");
    out
}

pub fn checksum(d: &Dataset) -> Digest {
    checksum_of(d.interactions())
}

pub(crate) fn checksum_of(interactions: &[Interaction]) -> Digest {
    let mut sink = HashSink(Md5::new());
    let mut buffered = std::io::BufWriter::with_capacity(1 << 16, &mut sink);
    write_canonical(interactions, &mut buffered).expect("hashing cannot fail");
    drop(buffered);
    Digest(sink.0.finalize().into())
}

/// MD5 of an arbitrary byte stream.
pub fn digest_reader<R: std::io::Read>(mut reader: R) -> std::io::Result<Digest> {
    let mut sink = HashSink(Md5::new());
    std::io::copy(&mut reader, &mut sink)?;
    Ok(Digest(sink.0.finalize().into()))
}

struct HashSink(Md5);

impl Write for HashSink {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0.update(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

pub fn write_canonical<W: Write>(interactions: &[Interaction], w: &mut W) -> std::io::Result<()> {
    let rows = CanonicalRows::new(interactions);
    let mut line = Vec::with_capacity(64);
    for &i in &rows.order {
        let x = &interactions[i];
        line.clear();
        push_escaped(&mut line, &x.user);
        line.push(b'\t');
        push_escaped(&mut line, &x.item);
        line.push(b'\t');
        line.extend_from_slice(rows.rating[i].as_bytes());
        line.push(b'\t');
        line.extend_from_slice(rows.timestamp[i].as_bytes());
        line.push(b'\n');
        w.write_all(&line)?;
    }
    Ok(())
}

/// Canonical text of a rating: shortest round-trip decimal, no exponent.
pub fn render_rating(r: f64) -> String {
    format!("{r}")
}

fn push_escaped(out: &mut Vec<u8>, s: &str) {
    if !s.bytes().any(|b| matches!(b, b'\\' | b'\t' | b'\n' | b'\r')) {
        out.extend_from_slice(s.as_bytes());
        return;
    }
    for b in s.bytes() {
        match b {
            b'\\' => out.extend_from_slice(b"\\\\"),
            b'\t' => out.extend_from_slice(b"\\t"),
            b'\n' => out.extend_from_slice(b"\\n"),
            b'\r' => out.extend_from_slice(b"\\r"),
            _ => out.push(b),
        }
    }
}

struct CanonicalRows {
    order: Vec<usize>,
    rating: Vec<String>,
    timestamp: Vec<String>,
}

impl CanonicalRows {
    fn new(interactions: &[Interaction]) -> Self {
        let rating: Vec<String> = interactions
            .iter()
            .map(|x| x.rating.map(render_rating).unwrap_or_default())
            .collect();
        let timestamp: Vec<String> = interactions
            .iter()
            .map(|x| x.timestamp.map(|t| t.to_string()).unwrap_or_default())
            .collect();
        let mut order: Vec<usize> = (0..interactions.len()).collect();
        order.sort_unstable_by(|&a, &b| {
            let (x, y) = (&interactions[a], &interactions[b]);
            x.user
                .cmp(&y.user)
                .then_with(|| x.item.cmp(&y.item))
                .then_with(|| timestamp[a].cmp(&timestamp[b]))
                .then_with(|| rating[a].cmp(&rating[b]))
                // Equal keys serialize identically; position keeps the order total.
                .then_with(|| a.cmp(&b))
        });
        CanonicalRows {
            order,
            rating,
            timestamp,
        }
    }
}

/// Indices of `interactions` in canonical order.
pub(crate) fn canonical_order(interactions: &[Interaction]) -> Vec<usize> {
    CanonicalRows::new(interactions).order
}
