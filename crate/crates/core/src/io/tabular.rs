use std::io::Write;

use super::{check_id, lines, parse_rating, parse_timestamp, ColumnMap, FormatSpec, Interner};
use crate::checksum::render_rating;
use crate::dataset::{Dataset, Interaction};
use crate::error::{Error, Result};

pub(super) fn parse(text: &str, spec: &FormatSpec) -> Result<(Vec<Interaction>, Vec<usize>)> {
    let sep = spec.separator.as_str();
    let mut interner = Interner::default();
    let mut records = Vec::new();
    let mut line_numbers = Vec::new();
    let mut header_pending = spec.has_header;
    // Positional layouts fix their width on the first data row.
    let mut columns: Option<ColumnMap> = spec.columns;
    let mut positional_width = 0usize;
    let mut fields: Vec<&str> = Vec::with_capacity(8);

    for (line_no, line) in lines(text) {
        if line.trim().is_empty() {
            continue;
        }
        if let Some(prefix) = &spec.comment {
            if line.starts_with(prefix.as_str()) {
                continue;
            }
        }
        if header_pending {
            header_pending = false;
            continue;
        }
        fields.clear();
        fields.extend(line.split(sep).map(str::trim));

        let map = match columns {
            Some(map) => map,
            None => {
                if fields.len() < 2 {
                    return Err(Error::parse(
                        line_no,
                        format!("expected at least 2 fields, found {}", fields.len()),
                    ));
                }
                positional_width = fields.len().min(4);
                let mut map = ColumnMap::new(0, 1);
                if positional_width >= 3 {
                    map.rating = Some(2);
                }
                if positional_width >= 4 {
                    map.timestamp = Some(3);
                }
                columns = Some(map);
                map
            }
        };
        if spec.columns.is_none() && fields.len().min(4) != positional_width {
            return Err(Error::parse(
                line_no,
                format!(
                    "expected {positional_width} fields like the first row, found {}",
                    fields.len()
                ),
            ));
        }
        if fields.len() < map.width() {
            return Err(Error::parse(
                line_no,
                format!("expected at least {} fields, found {}", map.width(), fields.len()),
            ));
        }
        let user = fields[map.user];
        let item = fields[map.item];
        if user.is_empty() {
            return Err(Error::parse(line_no, "empty user id"));
        }
        if item.is_empty() {
            return Err(Error::parse(line_no, "empty item id"));
        }
        let rating = map.rating.map(|c| parse_rating(fields[c], line_no)).transpose()?;
        let timestamp = map.timestamp.map(|c| parse_timestamp(fields[c], line_no)).transpose()?;
        records.push(Interaction {
            user: interner.get(user),
            item: interner.get(item),
            rating,
            timestamp,
        });
        line_numbers.push(line_no);
    }
    Ok((records, line_numbers))
}

#[derive(Clone, Copy)]
enum Cell {
    User,
    Item,
    Rating,
    Timestamp,
    Gap,
}

pub(super) fn write(d: &Dataset, w: &mut dyn Write, spec: &FormatSpec) -> Result<()> {
    let layout = layout(d, spec)?;
    let sep = spec.separator.as_str();
    let io_err = |e| Error::io("<sink>", e);
    if spec.has_header {
        let names: Vec<&str> = layout
            .iter()
            .map(|c| match c {
                Cell::User => "user",
                Cell::Item => "item",
                Cell::Rating => "rating",
                Cell::Timestamp => "timestamp",
                Cell::Gap => "",
            })
            .collect();
        writeln!(w, "{}", names.join(sep)).map_err(io_err)?;
    }
    let mut line = String::with_capacity(64);
    for x in d.interactions() {
        check_id(&x.user, sep)?;
        check_id(&x.item, sep)?;
        line.clear();
        for (i, cell) in layout.iter().enumerate() {
            if i > 0 {
                line.push_str(sep);
            }
            match cell {
                Cell::User => line.push_str(&x.user),
                Cell::Item => line.push_str(&x.item),
                Cell::Rating => line.push_str(&render_rating(x.rating.unwrap())),
                Cell::Timestamp => line.push_str(&x.timestamp.unwrap().to_string()),
                Cell::Gap => {}
            }
        }
        line.push('\n');
        w.write_all(line.as_bytes()).map_err(io_err)?;
    }
    Ok(())
}

fn layout(d: &Dataset, spec: &FormatSpec) -> Result<Vec<Cell>> {
    let Some(map) = spec.columns else {
        let mut cells = vec![Cell::User, Cell::Item];
        if d.has_ratings() {
            cells.push(Cell::Rating);
        }
        if d.has_timestamps() {
            if !d.has_ratings() {
                return Err(Error::SchemaMismatch(
                    "positional layout cannot carry timestamps without ratings; use an explicit column map".into(),
                ));
            }
            cells.push(Cell::Timestamp);
        }
        return Ok(cells);
    };
    if map.rating.is_some() && !d.has_ratings() {
        return Err(Error::SchemaMismatch(
            "column map has a rating column but the dataset has no ratings".into(),
        ));
    }
    if map.timestamp.is_some() && !d.has_timestamps() {
        return Err(Error::SchemaMismatch(
            "column map has a timestamp column but the dataset has no timestamps".into(),
        ));
    }
    let mut cells = vec![Cell::Gap; map.width()];
    cells[map.user] = Cell::User;
    cells[map.item] = Cell::Item;
    if let Some(c) = map.rating {
        cells[c] = Cell::Rating;
    }
    if let Some(c) = map.timestamp {
        cells[c] = Cell::Timestamp;
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::super::{read_bytes, write_to};
    use super::*;

    fn full(sep: &str) -> FormatSpec {
        FormatSpec::tabular(sep).with_columns(ColumnMap::new(0, 1).with_rating(2).with_timestamp(3))
    }

    #[test]
    fn double_colon_separator() {
        let d = read_bytes(b"u1::i1::5::100\n", &full("::")).unwrap();
        assert_eq!(d.len(), 1);
        let x = &d.interactions()[0];
        assert_eq!(
            (&*x.user, &*x.item, x.rating, x.timestamp),
            ("u1", "i1", Some(5.0), Some(100))
        );
    }

    #[test]
    fn positional_width_follows_first_row() {
        let d = read_bytes(b"u1,i1\nu2,i2\n", &FormatSpec::tabular(",")).unwrap();
        assert!(!d.has_ratings() && !d.has_timestamps());
        let d = read_bytes(b"u1,i1,3.5\n", &FormatSpec::tabular(",")).unwrap();
        assert!(d.has_ratings() && !d.has_timestamps());
        let err = read_bytes(b"u1,i1,3\nu2,i2\n", &FormatSpec::tabular(",")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn header_comments_blank_lines_and_crlf() {
        let text = b"# generated\r\nuser,item,rating\r\n\r\nu1,i1,4\r\nu2 , i2 ,3\r\n";
        let spec = FormatSpec::tabular(",").with_header(true).with_comment("#");
        let d = read_bytes(text, &spec).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(&*d.interactions()[1].item, "i2");
    }

    #[test]
    fn explicit_columns_may_skip_and_reorder() {
        let spec = FormatSpec::tabular("\t").with_columns(ColumnMap::new(2, 0).with_timestamp(4));
        let d = read_bytes(b"i1\tjunk\tu1\tjunk\t77\textra\n", &spec).unwrap();
        let x = &d.interactions()[0];
        assert_eq!((&*x.user, &*x.item, x.timestamp), ("u1", "i1", Some(77)));
    }

    #[test]
    fn malformed_rows_cite_their_line() {
        let spec = full("\t");
        for (text, line) in [
            (&b"u1\ti1\t5\t100\nu2\ti2\tbad\t100\n"[..], 2),
            (b"u1\ti1\t5\t100\n\n\nu2\ti2\t5\n", 4),
            (b"u1\ti1\t5\t1.5\n", 1),
            (b"\tx\t5\t1\n", 1),
        ] {
            let err = read_bytes(text, &spec).unwrap_err();
            assert!(matches!(err, Error::Parse { line: l, .. } if l == line), "{err}");
        }
    }

    #[test]
    fn integral_float_timestamps_are_accepted() {
        let d = read_bytes(b"u\ti\t1\t978300760.0\n", &full("\t")).unwrap();
        assert_eq!(d.interactions()[0].timestamp, Some(978300760));
    }

    #[test]
    fn empty_input_is_an_empty_dataset() {
        let d = read_bytes(b"", &full("\t")).unwrap();
        assert!(d.is_empty());
    }

    #[test]
    fn write_layouts() {
        let d = read_bytes(b"u1\ti1\t5\t100\n", &full("\t")).unwrap();
        let mut out = Vec::new();
        write_to(&d, &mut out, &FormatSpec::tabular("\t")).unwrap();
        assert_eq!(out, b"u1\ti1\t5\t100\n");

        let mut out = Vec::new();
        let spec = FormatSpec::tabular(",")
            .with_columns(ColumnMap::new(1, 0).with_timestamp(3))
            .with_header(true);
        let summary = write_to(&d, &mut out, &spec).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "item,user,,timestamp\ni1,u1,,100\n");
        assert_eq!(summary.dropped, ["rating"]);
    }

    #[test]
    fn write_refuses_absent_columns_and_separator_in_ids() {
        let d = read_bytes(b"u1,i1\n", &FormatSpec::tabular(",")).unwrap();
        let err = write_to(&d, &mut Vec::new(), &full(",")).unwrap_err();
        assert!(matches!(err, Error::SchemaMismatch(_)));
        let d = read_bytes(b"{\"user\":\"a,b\",\"item\":\"c\"}\n", &FormatSpec::json()).unwrap();
        let err = write_to(&d, &mut Vec::new(), &FormatSpec::tabular(",")).unwrap_err();
        assert!(matches!(err, Error::SchemaMismatch(_)));
    }
}
