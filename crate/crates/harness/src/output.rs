//! CSV and JSON emission.
//!
//! Every CSV file starts with a `# cem-harness <schema> v<version>` line. The
//! JSON form holds the same rows under the same column names.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::config::Format;
use crate::error::{HarnessError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
struct JsonTable<'a, R> {
    schema: &'a str,
    version: u32,
    rows: &'a [R],
}

/// Renders `rows` as a complete file body.
pub fn render<R: Serialize>(schema: &str, rows: &[R], format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Csv => {
            let mut out = format!("# cem-harness {schema} v{SCHEMA_VERSION}\n").into_bytes();
            let mut writer = csv::Writer::from_writer(&mut out);
            for row in rows {
                writer
                    .serialize(row)
                    .map_err(|e| HarnessError::Encode(e.to_string()))?;
            }
            writer
                .flush()
                .map_err(|e| HarnessError::Encode(e.to_string()))?;
            drop(writer);
            Ok(out)
        }
        Format::Json => {
            let table = JsonTable {
                schema,
                version: SCHEMA_VERSION,
                rows,
            };
            let mut out = serde_json::to_vec_pretty(&table)
                .map_err(|e| HarnessError::Encode(e.to_string()))?;
            out.push(b'\n');
            Ok(out)
        }
    }
}

/// Writes `body` to `path`, or to standard output when `path` is `None`.
pub fn emit(body: &[u8], path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, body).map_err(|source| HarnessError::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(body)
                .and_then(|_| stdout.flush())
                .map_err(|source| HarnessError::Io {
                    path: "<stdout>".into(),
                    source,
                })
        }
    }
}
