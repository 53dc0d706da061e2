use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

pub const SCHEMA_VERSION: &str = "1";

/// Every JSON report is wrapped with the schema version and command name.
#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: &'static str,
    command: &'a str,
    #[serde(flatten)]
    report: T,
}

/// Pretty JSON with a trailing newline to `out`, or to stdout.
pub fn write_json<T: Serialize>(command: &str, report: T, out: Option<&Path>) -> Result<()> {
    let env = Envelope {
        schema_version: SCHEMA_VERSION,
        command,
        report,
    };
    let mut text = serde_json::to_string_pretty(&env)?;
    text.push('\n');
    emit(text.as_bytes(), out)
}

pub fn emit(bytes: &[u8], out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
            w.write_all(bytes)?;
            w.flush()?;
        }
        None => io::stdout().lock().write_all(bytes)?,
    }
    Ok(())
}

/// CSV with a header row, written in the given order.
pub fn write_csv<T: Serialize>(rows: &[T], header: &[&str], out: Option<&Path>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("flushing csv: {e}"))?;
    emit(&bytes, out)
}

/// Shortest decimal for display: 12 fractional digits, trailing zeros
/// trimmed.
pub fn fmt_num(x: f64) -> String {
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x.is_nan() {
        return "nan".into();
    }
    let s = format!("{x:.12}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

/// JSON number, or the string `"inf"` for infinite values.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        Value::from(x)
    } else {
        Value::from(fmt_num(x))
    }
}

pub fn bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}
