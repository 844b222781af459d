use std::io::Write;

use serde_json::value::RawValue;
use serde_json::{Map, Value};

use super::{lines, parse_timestamp, FormatSpec, Interner, JsonKeys, JsonLayout};
use crate::checksum::render_rating;
use crate::dataset::{Dataset, Interaction};
use crate::error::{Error, Result};

pub(super) fn parse(text: &str, spec: &FormatSpec) -> Result<(Vec<Interaction>, Vec<usize>)> {
    let keys = &spec.json_keys;
    let mut interner = Interner::default();
    let mut records = Vec::new();
    let mut line_numbers = Vec::new();

    // Arrays are accepted whatever the declared layout.
    if text.trim_start().starts_with('[') {
        let elements: Vec<&RawValue> = serde_json::from_str(text).map_err(|e| Error::parse(e.line(), e.to_string()))?;
        let base = text.as_ptr() as usize;
        for raw in elements {
            let offset = raw.get().as_ptr() as usize - base;
            let line_no = text[..offset].bytes().filter(|&b| b == b'\n').count() + 1;
            let obj: Map<String, Value> =
                serde_json::from_str(raw.get()).map_err(|e| Error::parse(line_no, format!("expected an object: {e}")))?;
            records.push(record(&obj, keys, line_no, &mut interner)?);
            line_numbers.push(line_no);
        }
        return Ok((records, line_numbers));
    }

    for (line_no, line) in lines(text) {
        if line.trim().is_empty() {
            continue;
        }
        let obj: Map<String, Value> = serde_json::from_str(line).map_err(|e| Error::parse(line_no, e.to_string()))?;
        records.push(record(&obj, keys, line_no, &mut interner)?);
        line_numbers.push(line_no);
    }
    Ok((records, line_numbers))
}

fn record(obj: &Map<String, Value>, keys: &JsonKeys, line: usize, interner: &mut Interner) -> Result<Interaction> {
    let id = |key: &str, interner: &mut Interner| -> Result<std::sync::Arc<str>> {
        match obj.get(key) {
            Some(Value::String(s)) if !s.trim().is_empty() => Ok(interner.get(s)),
            Some(Value::Number(n)) => Ok(interner.get(&n.to_string())),
            Some(Value::String(_)) => Err(Error::parse(line, format!("empty {key}"))),
            Some(other) => Err(Error::parse(line, format!("{key} must be a string or number, got {other}"))),
            None => Err(Error::parse(line, format!("missing key {key:?}"))),
        }
    };
    let user = id(&keys.user, interner)?;
    let item = id(&keys.item, interner)?;
    let rating = match obj.get(&keys.rating) {
        None | Some(Value::Null) => None,
        Some(Value::Number(n)) => match n.as_f64() {
            Some(v) if v.is_finite() => Some(v),
            _ => return Err(Error::parse(line, format!("invalid rating {n}"))),
        },
        Some(other) => return Err(Error::parse(line, format!("rating must be a number, got {other}"))),
    };
    let timestamp = match obj.get(&keys.timestamp) {
        None | Some(Value::Null) => None,
        Some(Value::Number(n)) => Some(parse_timestamp(&n.to_string(), line)?),
        Some(Value::String(s)) => Some(parse_timestamp(s.trim(), line)?),
        Some(other) => return Err(Error::parse(line, format!("timestamp must be a number, got {other}"))),
    };
    Ok(Interaction {
        user,
        item,
        rating,
        timestamp,
    })
}

pub(super) fn write(d: &Dataset, w: &mut dyn Write, spec: &FormatSpec) -> std::io::Result<()> {
    let keys = &spec.json_keys;
    let array = spec.json_layout == JsonLayout::Array;
    if array {
        w.write_all(b"[")?;
    }
    let mut line = Vec::with_capacity(96);
    for (n, x) in d.interactions().iter().enumerate() {
        line.clear();
        if array {
            line.extend_from_slice(if n == 0 { b"\n" } else { b",\n" });
        }
        line.push(b'{');
        serde_json::to_writer(&mut line, &keys.user)?;
        line.push(b':');
        serde_json::to_writer(&mut line, &*x.user)?;
        line.push(b',');
        serde_json::to_writer(&mut line, &keys.item)?;
        line.push(b':');
        serde_json::to_writer(&mut line, &*x.item)?;
        if let Some(r) = x.rating {
            line.push(b',');
            serde_json::to_writer(&mut line, &keys.rating)?;
            line.push(b':');
            line.extend_from_slice(render_rating(r).as_bytes());
        }
        if let Some(t) = x.timestamp {
            line.push(b',');
            serde_json::to_writer(&mut line, &keys.timestamp)?;
            line.push(b':');
            line.extend_from_slice(t.to_string().as_bytes());
        }
        line.push(b'}');
        if !array {
            line.push(b'\n');
        }
        w.write_all(&line)?;
    }
    if array {
        w.write_all(if d.is_empty() { b"]\n" } else { b"\n]\n" })?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::{read_bytes, write_to};
    use super::*;

    #[test]
    fn lines_with_extra_keys_and_numeric_ids() {
        let text = br#"{"user":"u1","item":"i1","rating":5,"timestamp":100,"text":"great"}
{"user":2,"item":"i2","rating":3.5,"timestamp":200}

{"user":"u3","item":"i3","rating":1,"timestamp":300}
"#;
        let d = read_bytes(text, &FormatSpec::json()).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(&*d.interactions()[1].user, "2");
        assert_eq!(d.interactions()[1].rating, Some(3.5));
    }

    #[test]
    fn array_layout_is_accepted_and_errors_cite_lines() {
        let text = b"[\n {\"user\":\"a\",\"item\":\"x\"},\n {\"user\":\"b\"}\n]";
        let err = read_bytes(text, &FormatSpec::json()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let ok = b"[{\"user\":\"a\",\"item\":\"x\"},{\"user\":\"b\",\"item\":\"y\"}]";
        assert_eq!(read_bytes(ok, &FormatSpec::json()).unwrap().len(), 2);
    }

    #[test]
    fn mixed_presence_cites_line() {
        let text = b"{\"user\":\"a\",\"item\":\"x\",\"rating\":1}\n\n{\"user\":\"b\",\"item\":\"y\"}\n";
        let err = read_bytes(text, &FormatSpec::json()).unwrap_err();
        assert!(matches!(err, Error::MixedSchema { record: 3, .. }), "{err}");
    }

    #[test]
    fn custom_keys() {
        let mut spec = FormatSpec::json();
        spec.json_keys.user = "user_id".into();
        spec.json_keys.item = "parent_asin".into();
        let d = read_bytes(
            b"{\"user_id\":\"A1\",\"parent_asin\":\"B0\",\"rating\":4.0,\"timestamp\":\"1588\"}\n",
            &spec,
        )
        .unwrap();
        assert_eq!(&*d.interactions()[0].item, "B0");
        assert_eq!(d.interactions()[0].timestamp, Some(1588));
        let mut out = Vec::new();
        write_to(&d, &mut out, &spec).unwrap();
        assert_eq!(
            out,
            b"{\"user_id\":\"A1\",\"parent_asin\":\"B0\",\"rating\":4,\"timestamp\":1588}\n"
        );
    }

    #[test]
    fn array_write_reads_back() {
        let d = read_bytes(b"u1\ti\"1\t2.5\t7\nu2\ti2\t1\t8\n", &FormatSpec::tabular("\t")).unwrap();
        let mut out = Vec::new();
        write_to(&d, &mut out, &FormatSpec::json_array()).unwrap();
        let back = read_bytes(&out, &FormatSpec::json()).unwrap();
        assert!(back.same_interactions(&d));
        let empty = read_bytes(b"", &FormatSpec::json()).unwrap();
        let mut out = Vec::new();
        write_to(&empty, &mut out, &FormatSpec::json_array()).unwrap();
        assert_eq!(out, b"[]\n");
        assert!(read_bytes(&out, &FormatSpec::json()).unwrap().is_empty());
    }
}
