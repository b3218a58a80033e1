//! Artifact writers and run-configuration plumbing shared by the CLI.
//!
//! Tables go to CSV with a versioned schema comment (`# schema:
//! wigner-push/<name> v1`) so downstream plotting can detect layout
//! changes; structured results go to JSON and re-load losslessly. Run
//! parameters come from an optional JSON config file plus `--set a.b.c=v`
//! dotted-path overrides, with overrides winning; values parse as JSON
//! scalars first and fall back to strings.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

/// Leading comment of every CSV artifact, before the schema name.
pub const CSV_SCHEMA_PREFIX: &str = "# schema: wigner-push/";
/// Current CSV layout version.
pub const CSV_SCHEMA_VERSION: &str = "v1";

/// Write a numeric table as CSV: schema comment, column-name header, then
/// one row per entry. Floats are formatted shortest-round-trip, so reading
/// the file back reproduces them bit for bit.
pub fn write_csv(
    path: &Path,
    schema_name: &str,
    columns: &[&str],
    rows: &[Vec<f64>],
) -> Result<()> {
    for row in rows {
        if row.len() != columns.len() {
            return Err(Error::Config(format!(
                "csv {schema_name}: row of {} values under {} columns",
                row.len(),
                columns.len()
            )));
        }
    }
    let mut text = format!("{CSV_SCHEMA_PREFIX}{schema_name} {CSV_SCHEMA_VERSION}\n");
    text.push_str(&columns.join(","));
    text.push('\n');
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                text.push(',');
            }
            first = false;
            // Debug formatting of f64 is the shortest exact representation.
            let _ = write!(text, "{v:?}");
        }
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

/// Read back a CSV written by [`write_csv`]: returns the schema name and the
/// numeric rows.
pub fn read_csv(path: &Path) -> Result<(String, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let schema = lines
        .next()
        .and_then(|l| l.strip_prefix(CSV_SCHEMA_PREFIX))
        .and_then(|l| l.strip_suffix(&format!(" {CSV_SCHEMA_VERSION}")))
        .ok_or_else(|| {
            Error::Config(format!(
                "{}: missing `{CSV_SCHEMA_PREFIX}<name> {CSV_SCHEMA_VERSION}` header",
                path.display()
            ))
        })?
        .to_string();
    let _header = lines.next();
    let mut rows = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            line.split(',').map(str::parse::<f64>).collect();
        rows.push(row.map_err(|e| {
            Error::Config(format!("{}: bad numeric row `{line}`: {e}", path.display()))
        })?);
    }
    Ok((schema, rows))
}

/// Write a JSON artifact (pretty-printed, trailing newline).
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut file = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut file, value)?;
    file.write_all(b"\n")?;
    Ok(())
}

/// Load a JSON artifact.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Load the run configuration: the JSON object from `path` (an empty object
/// if no file is given) with each `--set key.path=value` override applied on
/// top.
pub fn merged_config(path: Option<&Path>, overrides: &[String]) -> Result<Value> {
    let mut value = match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display())))?;
            let v: Value = serde_json::from_str(&text)?;
            if !v.is_object() {
                return Err(Error::Config(format!(
                    "config {} must hold a JSON object",
                    p.display()
                )));
            }
            v
        }
        None => Value::Object(Default::default()),
    };
    for spec in overrides {
        apply_override(&mut value, spec)?;
    }
    Ok(value)
}

/// Apply one `a.b.c=value` override; intermediate objects are created as
/// needed, but a path through an existing non-object is refused. The value
/// is parsed as JSON when possible (numbers, booleans, null, quoted
/// strings, arrays) and kept as a plain string otherwise.
pub fn apply_override(config: &mut Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{spec}` must look like key.path=value")))?;
    if path.is_empty() || path.split('.').any(str::is_empty) {
        return Err(Error::Config(format!("override `{spec}` has an empty key")));
    }
    let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.into()));
    let mut node = config;
    let mut segments = path.split('.').peekable();
    while let Some(seg) = segments.next() {
        let map = node.as_object_mut().ok_or_else(|| {
            Error::Config(format!(
                "override `{spec}`: `{seg}` is reached through a non-object value"
            ))
        })?;
        if segments.peek().is_none() {
            map.insert(seg.to_string(), value);
            return Ok(());
        }
        node = map
            .entry(seg.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("split('.') yields at least one segment");
}
