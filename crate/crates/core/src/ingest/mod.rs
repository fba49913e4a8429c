//! Parsers from external representations into [`WorkbookSnapshot`].

mod csv;
mod json;
mod ooxml;

use std::path::Path;

use serde::Serialize;

pub use self::csv::{ingest_csv, type_field};
pub use self::json::{ingest_json, parse_sheet_object};
pub use self::ooxml::ingest_ooxml;

use crate::error::{Error, Result};
use crate::model::WorkbookSnapshot;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceFormat {
    Json,
    Csv,
    Ooxml,
}

#[derive(Clone, Debug)]
pub struct IngestReport {
    pub snapshot: WorkbookSnapshot,
    pub source_format: SourceFormat,
    pub cell_count: usize,
    pub warnings: Vec<String>,
}

impl IngestReport {
    pub fn new(
        snapshot: WorkbookSnapshot,
        source_format: SourceFormat,
        warnings: Vec<String>,
    ) -> Self {
        let cell_count = snapshot.cell_count();
        Self {
            snapshot,
            source_format,
            cell_count,
            warnings,
        }
    }
}

/// Detects the format from the leading bytes: ZIP is OOXML, anything else JSON.
pub fn ingest_bytes(bytes: &[u8]) -> Result<IngestReport> {
    if bytes.starts_with(ooxml::ZIP_MAGIC) || bytes.starts_with(ooxml::OLE_MAGIC) {
        ingest_ooxml(bytes)
    } else {
        ingest_json(bytes)
    }
}

/// Ingests a CSV document as a one-sheet workbook.
pub fn ingest_csv_workbook(sheet_name: &str, bytes: &[u8]) -> Result<IngestReport> {
    let sheet = ingest_csv(sheet_name, bytes)?;
    let mut snapshot = WorkbookSnapshot::new();
    snapshot.add_sheet(sheet_name, sheet)?;
    Ok(IngestReport::new(snapshot, SourceFormat::Csv, Vec::new()))
}

/// Ingests a file by extension. CSV files become a sheet named after the file stem.
pub fn ingest_path(path: &Path) -> Result<IngestReport> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    if ext == "xls" {
        return Err(Error::UnsupportedFeature(format!(
            "{}: legacy binary .xls workbooks are not supported",
            path.display()
        )));
    }
    let bytes = std::fs::read(path)?;
    match ext.as_str() {
        "csv" => {
            let stem = path
                .file_stem()
                .and_then(|s| s.to_str())
                .filter(|s| !s.is_empty())
                .unwrap_or("Sheet1");
            ingest_csv_workbook(stem, &bytes)
        }
        "xlsx" | "xlsm" => ingest_ooxml(&bytes),
        "json" => ingest_json(&bytes),
        _ => ingest_bytes(&bytes),
    }
}
