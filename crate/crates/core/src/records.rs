//! Record files: a CSV with header `index,z_coincide,x_coincide` (0/1
//! values) plus a JSON side file holding the run metadata.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::TripletRecord;
use crate::error::{Error, Result};

pub const RECORD_SCHEMA_VERSION: u32 = 1;
pub const RECORD_HEADER: &str = "index,z_coincide,x_coincide";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub n: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub master_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<[f64; 4]>,
    pub schema_version: u32,
}

/// `runs/a.csv` → `runs/a.meta.json`.
pub fn meta_path_for(records: &Path) -> PathBuf {
    records.with_extension("meta.json")
}

pub fn export_records(path: &Path, records: &[TripletRecord], meta: &RecordMeta) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{RECORD_HEADER}")?;
    for (i, r) in records.iter().enumerate() {
        writeln!(w, "{},{},{}", i, r.z_coincide as u8, r.x_coincide as u8)?;
    }
    w.flush()?;
    let meta = RecordMeta {
        n: records.len() as u64,
        ..meta.clone()
    };
    fs::write(meta_path_for(path), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}

fn parse_err(path: &Path, message: String) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message,
    }
}

fn parse_flag(path: &Path, line: usize, field: &str) -> Result<bool> {
    match field.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(parse_err(
            path,
            format!("line {line}: expected 0 or 1, found {other:?}"),
        )),
    }
}

pub fn parse_records(path: &Path, text: &str) -> Result<Vec<TripletRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == RECORD_HEADER => {}
        Some((_, h)) => {
            return Err(parse_err(path, format!("unexpected header {h:?}")));
        }
        None => return Err(parse_err(path, "empty file".into())),
    }
    let mut records = Vec::new();
    for (lineno, line) in lines {
        let line_no = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(parse_err(
                path,
                format!("line {line_no}: expected 3 fields, found {}", fields.len()),
            ));
        }
        let index: u64 = fields[0]
            .trim()
            .parse()
            .map_err(|e| parse_err(path, format!("line {line_no}: bad index: {e}")))?;
        if index != records.len() as u64 {
            return Err(parse_err(
                path,
                format!("line {line_no}: index {index} out of sequence"),
            ));
        }
        records.push(TripletRecord {
            z_coincide: parse_flag(path, line_no, fields[1])?,
            x_coincide: parse_flag(path, line_no, fields[2])?,
        });
    }
    if records.is_empty() {
        return Err(parse_err(path, "no records".into()));
    }
    Ok(records)
}

pub fn read_meta(path: &Path) -> Result<RecordMeta> {
    let text = fs::read_to_string(path)?;
    let meta: RecordMeta =
        serde_json::from_str(&text).map_err(|e| parse_err(path, e.to_string()))?;
    if meta.schema_version != RECORD_SCHEMA_VERSION {
        return Err(Error::VersionMismatch {
            found: meta.schema_version,
            expected: RECORD_SCHEMA_VERSION,
        });
    }
    Ok(meta)
}

/// Reads a record file and its side file, if present. A missing side file is
/// allowed for externally produced logs.
pub fn import_records(path: &Path) -> Result<(Vec<TripletRecord>, Option<RecordMeta>)> {
    let text = fs::read_to_string(path)?;
    let records = parse_records(path, &text)?;
    let meta_path = meta_path_for(path);
    let meta = if meta_path.exists() {
        let meta = read_meta(&meta_path)?;
        if meta.n != records.len() as u64 {
            return Err(parse_err(
                path,
                format!(
                    "metadata declares n = {} but file holds {} records",
                    meta.n,
                    records.len()
                ),
            ));
        }
        Some(meta)
    } else {
        None
    };
    Ok((records, meta))
}
