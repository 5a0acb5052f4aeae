//! The `# vsm-trace v1` CSV format.
//!
//! Line 1 is the literal comment `# vsm-trace v1`, line 2 the column header
//! `run_id,algorithm,dim,seed,query_index,diameter,centroid_error,wall_ns`,
//! then one row per learning-curve point. `diameter` is empty for the
//! baselines; `wall_ns` is empty unless timing was requested.

use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use super::HarnessError;

pub const SCHEMA_LINE: &str = "# vsm-trace v1";

pub const COLUMNS: [&str; 8] = [
    "run_id",
    "algorithm",
    "dim",
    "seed",
    "query_index",
    "diameter",
    "centroid_error",
    "wall_ns",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub run_id: u64,
    pub algorithm: String,
    pub dim: usize,
    pub seed: u64,
    pub query_index: u64,
    pub diameter: Option<f64>,
    pub centroid_error: f64,
    pub wall_ns: Option<u64>,
}

pub fn write_trace<W: Write>(mut out: W, rows: &[TraceRow]) -> Result<(), HarnessError> {
    writeln!(out, "{SCHEMA_LINE}")?;
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    writer.write_record(COLUMNS)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_trace<R: Read>(input: R) -> Result<Vec<TraceRow>, HarnessError> {
    let mut input = std::io::BufReader::new(input);
    let mut first = String::new();
    input.read_line(&mut first)?;
    if first.trim_end() != SCHEMA_LINE {
        return Err(HarnessError::Format(format!(
            "line 1: expected `{SCHEMA_LINE}`, found `{}`",
            first.trim_end()
        )));
    }
    let mut reader = csv::Reader::from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if header != COLUMNS {
        return Err(HarnessError::Format(format!(
            "line 2: unexpected columns {header:?}"
        )));
    }
    let mut rows = Vec::new();
    for row in reader.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}
