//! CSV files. Each starts with a schema-version comment line, then a header.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use treevault::actors::EventRecord;

use crate::effectiveness::EffectivenessReport;
use crate::error::{invalid, Result, SimError};

pub const SCHEMA_VERSION: u32 = 1;

fn schema_line() -> String {
    format!("# schema-version: {SCHEMA_VERSION}")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SimError + '_ {
    move |source| SimError::Io { path: path.display().to_string(), source }
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut f = File::create(path).map_err(io_err(path))?;
    writeln!(f, "{}", schema_line()).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(f);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut reader = BufReader::new(File::open(path).map_err(io_err(path))?);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(io_err(path))?;
    if first.trim_end() != schema_line() {
        return Err(invalid(format!("{}: expected '{}' on the first line", path.display(), schema_line())));
    }
    csv::Reader::from_reader(reader).deserialize().collect::<std::result::Result<Vec<T>, _>>().map_err(SimError::from)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRow {
    pub seq: u64,
    pub kind: String,
    pub sender: String,
    pub receiver: String,
    pub outcome: String,
    pub bytes: usize,
}

impl From<&EventRecord> for EventRow {
    fn from(r: &EventRecord) -> Self {
        EventRow {
            seq: r.seq,
            kind: r.kind.to_string(),
            sender: r.sender.to_string(),
            receiver: r.receiver.to_string(),
            outcome: r.outcome.to_string(),
            bytes: r.bytes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub structure: String,
    pub event: u64,
    pub size1: usize,
    pub size2: usize,
    pub ratio: f64,
}

pub fn ratio_rows(r: &EffectivenessReport) -> Vec<RatioRow> {
    r.samples
        .iter()
        .map(|s| RatioRow {
            structure: s.structure.clone(),
            event: s.event,
            size1: s.size1,
            size2: s.size2,
            ratio: s.ratio(),
        })
        .collect()
}
