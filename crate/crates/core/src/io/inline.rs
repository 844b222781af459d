use std::io::Write;
use std::sync::Arc;

use indexmap::IndexMap;

use super::{check_id, lines, FormatSpec, Interner};
use crate::dataset::{Dataset, Interaction};
use crate::error::{Error, Result};

pub(super) fn parse(text: &str, spec: &FormatSpec) -> Result<(Vec<Interaction>, Vec<usize>)> {
    let sep = spec.separator.as_str();
    let mut interner = Interner::default();
    let mut records = Vec::new();
    let mut line_numbers = Vec::new();
    for (line_no, line) in lines(text) {
        if line.trim().is_empty() {
            continue;
        }
        if let Some(prefix) = &spec.comment {
            if line.starts_with(prefix.as_str()) {
                continue;
            }
        }
        let mut fields = line.split(sep).map(str::trim);
        let user = fields.next().unwrap_or_default();
        if user.is_empty() {
            return Err(Error::parse(line_no, "empty user id"));
        }
        let user = interner.get(user);
        let before = records.len();
        let mut trailing_empty = false;
        for item in fields {
            if trailing_empty {
                return Err(Error::parse(line_no, "empty item id"));
            }
            if item.is_empty() {
                // A single trailing separator is tolerated.
                trailing_empty = true;
                continue;
            }
            records.push(Interaction {
                user: Arc::clone(&user),
                item: interner.get(item),
                rating: None,
                timestamp: None,
            });
            line_numbers.push(line_no);
        }
        if records.len() == before {
            return Err(Error::parse(line_no, "user history has no items"));
        }
    }
    Ok((records, line_numbers))
}

/// One line per user in first-seen order; items keep their original order.
pub(super) fn write(d: &Dataset, w: &mut dyn Write, spec: &FormatSpec) -> Result<()> {
    let sep = spec.separator.as_str();
    let mut groups: IndexMap<&str, Vec<&str>> = IndexMap::new();
    for x in d.interactions() {
        check_id(&x.user, sep)?;
        check_id(&x.item, sep)?;
        groups.entry(&x.user).or_default().push(&x.item);
    }
    let io_err = |e| Error::io("<sink>", e);
    for (user, items) in groups {
        w.write_all(user.as_bytes()).map_err(io_err)?;
        for item in items {
            w.write_all(sep.as_bytes()).map_err(io_err)?;
            w.write_all(item.as_bytes()).map_err(io_err)?;
        }
        w.write_all(b"\n").map_err(io_err)?;
    }
    Ok(())
}
