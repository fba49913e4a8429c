use serde::Deserialize;

use crate::error::{Error, Result};
use crate::ingest::{IngestReport, SourceFormat};
use crate::model::{Cell, CellValue, ErrorCode, Number, Sheet, WorkbookSnapshot};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WorkbookDoc {
    sheets: Vec<SheetDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SheetDoc {
    name: String,
    cells: Vec<CellDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CellDoc {
    r: u32,
    c: u32,
    v: ValueDoc,
    #[serde(default)]
    f: Option<String>,
}

#[derive(Deserialize)]
#[serde(tag = "t", deny_unknown_fields)]
enum ValueDoc {
    #[serde(rename = "z")]
    Empty {},
    #[serde(rename = "n")]
    Number { b: String },
    #[serde(rename = "s")]
    Text { v: String },
    #[serde(rename = "b")]
    Boolean { v: bool },
    #[serde(rename = "e")]
    Error { v: String },
}

fn format_err(e: serde_json::Error) -> Error {
    Error::Format(e.to_string())
}

fn decode_value(doc: ValueDoc) -> Result<CellValue> {
    Ok(match doc {
        ValueDoc::Empty {} => CellValue::Empty,
        ValueDoc::Number { b } => {
            if b.len() != 16 || !b.bytes().all(|c| c.is_ascii_hexdigit()) {
                return Err(Error::Format(format!(
                    "number bits must be 16 hex digits: {b:?}"
                )));
            }
            let bits = u64::from_str_radix(&b, 16).expect("validated hex");
            CellValue::Number(Number::from_bits(bits)?)
        }
        ValueDoc::Text { v } => CellValue::Text(v),
        ValueDoc::Boolean { v } => CellValue::Boolean(v),
        ValueDoc::Error { v } => CellValue::Error(
            v.parse::<ErrorCode>()
                .map_err(|_| Error::Format(format!("unknown error literal {v:?}")))?,
        ),
    })
}

fn build_sheet(doc: SheetDoc) -> Result<(String, Sheet)> {
    if doc.name.is_empty() {
        return Err(Error::Constraint("empty sheet name".into()));
    }
    let mut sheet = Sheet::new();
    for cell in doc.cells {
        if cell.r == 0 || cell.c == 0 {
            return Err(Error::Constraint(format!(
                "sheet {:?}: coordinates are 1-based (r={}, c={})",
                doc.name, cell.r, cell.c
            )));
        }
        let value = decode_value(cell.v)?;
        sheet
            .insert(cell.r, cell.c, Cell::new(value, cell.f.as_deref()))
            .map_err(|e| Error::Constraint(format!("sheet {:?}: {e}", doc.name)))?;
    }
    Ok((doc.name, sheet))
}

/// Parses one canonical sheet object, as stored in per-sheet blobs.
pub fn parse_sheet_object(bytes: &[u8]) -> Result<(String, Sheet)> {
    let doc: SheetDoc = serde_json::from_slice(bytes).map_err(format_err)?;
    build_sheet(doc)
}

pub fn ingest_json(bytes: &[u8]) -> Result<IngestReport> {
    let doc: WorkbookDoc = serde_json::from_slice(bytes).map_err(format_err)?;
    let mut snapshot = WorkbookSnapshot::new();
    for sheet_doc in doc.sheets {
        let (name, sheet) = build_sheet(sheet_doc)?;
        snapshot.add_sheet(name, sheet)?;
    }
    Ok(IngestReport::new(snapshot, SourceFormat::Json, Vec::new()))
}
