use std::path::Path;

use cellvault_core::ingest::{ingest_bytes, ingest_json, ingest_path, SourceFormat};
use cellvault_core::model::{snapshot_hash, CellAddress, CellValue, ErrorCode};
use cellvault_core::Error;

fn fixture() -> &'static Path {
    Path::new(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/tests/fixtures/mixed.xlsx"
    ))
}

// The same content written by hand in canonical JSON. Numbers as IEEE bits:
// 42 = 4045000000000000, 84 = 4055000000000000, -0.5 = bfe0000000000000.
const EQUIVALENT_JSON: &[u8] = br##"{"sheets":[
  {"name":"Data","cells":[
    {"r":1,"c":1,"v":{"t":"s","v":"abc"}},
    {"r":1,"c":2,"v":{"t":"n","b":"4045000000000000"}},
    {"r":1,"c":3,"v":{"t":"n","b":"4055000000000000"},"f":"=B1*2"},
    {"r":2,"c":1,"v":{"t":"b","v":true}},
    {"r":2,"c":2,"v":{"t":"e","v":"#DIV/0!"},"f":"=1/0"},
    {"r":2,"c":3,"v":{"t":"n","b":"bfe0000000000000"}},
    {"r":3,"c":1,"v":{"t":"s","v":"abc"}}]},
  {"name":"Notes","cells":[{"r":2,"c":2,"v":{"t":"s","v":"line\nbreak"}}]}]}"##;

#[test]
fn xlsx_matches_equivalent_json() {
    let report = ingest_path(fixture()).unwrap();
    assert_eq!(report.source_format, SourceFormat::Ooxml);
    assert_eq!(report.cell_count, 8);
    assert!(report.warnings.is_empty(), "{:?}", report.warnings);
    let json = ingest_json(EQUIVALENT_JSON).unwrap().snapshot;
    assert_eq!(report.snapshot, json);
    assert_eq!(snapshot_hash(&report.snapshot), snapshot_hash(&json));
}

#[test]
fn xlsx_cells_decode() {
    let wb = ingest_bytes(&std::fs::read(fixture()).unwrap())
        .unwrap()
        .snapshot;
    let at = |a: &str| {
        wb.cell(&CellAddress::from_a1("Data", a).unwrap())
            .unwrap()
            .clone()
    };
    assert_eq!(at("A1").value, CellValue::text("abc"));
    assert_eq!(at("C1").formula.as_deref(), Some("=B1*2"));
    assert_eq!(at("C1").value, CellValue::number(84.0).unwrap());
    assert_eq!(at("B2").value, CellValue::Error(ErrorCode::Div0));
}

#[test]
fn truncated_xlsx_is_a_format_error() {
    let bytes = std::fs::read(fixture()).unwrap();
    let err = ingest_bytes(&bytes[..bytes.len() / 2]).unwrap_err();
    assert!(matches!(err, Error::Format(_)), "{err:?}");
}

#[test]
fn legacy_xls_is_unsupported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("old.xls");
    let mut ole = vec![0xD0, 0xCF, 0x11, 0xE0, 0xA1, 0xB1, 0x1A, 0xE1];
    ole.resize(512, 0);
    std::fs::write(&path, &ole).unwrap();
    assert!(matches!(
        ingest_path(&path),
        Err(Error::UnsupportedFeature(_))
    ));
    assert!(matches!(
        ingest_bytes(&ole),
        Err(Error::UnsupportedFeature(_))
    ));
}
