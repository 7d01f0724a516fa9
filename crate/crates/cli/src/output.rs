//! File emission: atomic writes, key-sorted JSON, RFC 4180 CSV, SVG 1.1.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::CliError;

/// Write `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

/// Recursively rebuild objects with keys in sorted order, independent of
/// how `serde_json::Map` is backed.
pub fn sort_keys(v: Value) -> Value {
    match v {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            let mut out = Map::new();
            for (k, v) in entries {
                out.insert(k, sort_keys(v));
            }
            Value::Object(out)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sort_keys).collect()),
        other => other,
    }
}

pub fn to_sorted_value<T: Serialize>(value: &T) -> Result<Value, CliError> {
    serde_json::to_value(value)
        .map(sort_keys)
        .map_err(|e| CliError::config(None, format!("serialization failed: {e}")))
}

pub fn json_string(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(&sort_keys(value.clone())).expect("values always serialize");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_atomic(path, json_string(&to_sorted_value(value)?).as_bytes())
}

/// CSV from a header and rows of already formatted fields.
pub fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| CliError::config(None, format!("csv: {e}"));
    w.write_record(header).map_err(fail)?;
    for row in rows {
        w.write_record(&row).map_err(fail)?;
    }
    w.into_inner().map_err(|e| CliError::config(None, format!("csv: {e}")))
}

/// Scatter plot of points in the square `[-extent, extent]²`, with
/// reference circles and axis lines.
pub fn scatter_svg(points: &[(f64, f64)], circles: &[f64], extent: f64) -> String {
    let size = 480.0;
    let scale = size / (2.0 * extent);
    let px = |x: f64| (x + extent) * scale;
    let py = |y: f64| (extent - y) * scale;
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    let (c, end) = (px(0.0), size);
    let _ = writeln!(s, r##"<line x1="0" y1="{c:.3}" x2="{end}" y2="{c:.3}" stroke="#999999" stroke-width="0.5"/>"##);
    let _ = writeln!(s, r##"<line x1="{c:.3}" y1="0" x2="{c:.3}" y2="{end}" stroke="#999999" stroke-width="0.5"/>"##);
    for r in circles {
        let _ = writeln!(
            s,
            r##"<circle cx="{c:.3}" cy="{c:.3}" r="{:.3}" fill="none" stroke="#555555" stroke-width="0.8"/>"##,
            r * scale
        );
    }
    for &(x, y) in points {
        let _ = writeln!(s, r##"<circle cx="{:.3}" cy="{:.3}" r="2.5" fill="#1f4e9c"/>"##, px(x), py(y));
    }
    s.push_str("</svg>\n");
    s
}

/// Shortest round-trip decimal form, as used in every CSV cell.
pub fn num(x: f64) -> String {
    x.to_string()
}
