//! Canonical byte form of a snapshot and its SHA-256 content hash.
//!
//! Grammar (no whitespace outside strings):
//!
//! ```text
//! {"sheets":[{"name":N,"cells":[{"r":R,"c":C,"v":V[,"f":F]},...]},...]}
//! V = {"t":"z"} | {"t":"n","b":"<16 hex>"} | {"t":"s","v":S} | {"t":"b","v":B} | {"t":"e","v":E}
//! ```
//!
//! Sheets are ordered by name code points, cells by `(row, col)`, and numbers are
//! written as their big-endian IEEE-754 bit pattern.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::snapshot::{Sheet, WorkbookSnapshot};
use crate::model::value::{Cell, CellValue};

pub const SHEETS_PREFIX: &[u8] = b"{\"sheets\":[";
pub const SHEETS_SUFFIX: &[u8] = b"]}";

fn push_json_str(out: &mut Vec<u8>, s: &str) {
    serde_json::to_writer(&mut *out, s).expect("string serialization is infallible");
}

fn push_value(out: &mut Vec<u8>, value: &CellValue) {
    match value {
        CellValue::Empty => out.extend_from_slice(br#"{"t":"z"}"#),
        CellValue::Number(n) => {
            out.extend_from_slice(br#"{"t":"n","b":""#);
            out.extend_from_slice(format!("{:016x}", n.to_bits()).as_bytes());
            out.extend_from_slice(br#""}"#);
        }
        CellValue::Text(s) => {
            out.extend_from_slice(br#"{"t":"s","v":"#);
            push_json_str(out, s);
            out.push(b'}');
        }
        CellValue::Boolean(b) => {
            out.extend_from_slice(if *b {
                br#"{"t":"b","v":true}"#
            } else {
                br#"{"t":"b","v":false}"#
            });
        }
        CellValue::Error(e) => {
            out.extend_from_slice(br#"{"t":"e","v":""#);
            out.extend_from_slice(e.as_str().as_bytes());
            out.extend_from_slice(br#""}"#);
        }
    }
}

fn push_cell(out: &mut Vec<u8>, row: u32, col: u32, cell: &Cell) {
    out.extend_from_slice(format!("{{\"r\":{row},\"c\":{col},\"v\":").as_bytes());
    push_value(out, &cell.value);
    if let Some(f) = &cell.formula {
        out.extend_from_slice(br#","f":"#);
        push_json_str(out, f);
    }
    out.push(b'}');
}

/// Canonical bytes of one sheet object, `{"name":...,"cells":[...]}`.
pub fn canonical_sheet(name: &str, sheet: &Sheet) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + sheet.len() * 48);
    out.extend_from_slice(br#"{"name":"#);
    push_json_str(&mut out, name);
    out.extend_from_slice(br#","cells":["#);
    for (i, ((row, col), cell)) in sheet.iter().enumerate() {
        if i > 0 {
            out.push(b',');
        }
        push_cell(&mut out, row, col, cell);
    }
    out.extend_from_slice(b"]}");
    out
}

/// Joins canonical sheet objects (already in name order) into snapshot bytes.
pub fn join_sheets<'a>(sheets: impl IntoIterator<Item = &'a [u8]>) -> Vec<u8> {
    let mut out = SHEETS_PREFIX.to_vec();
    for (i, s) in sheets.into_iter().enumerate() {
        if i > 0 {
            out.push(b',');
        }
        out.extend_from_slice(s);
    }
    out.extend_from_slice(SHEETS_SUFFIX);
    out
}

pub fn canonicalize(snapshot: &WorkbookSnapshot) -> Vec<u8> {
    let parts: Vec<Vec<u8>> = snapshot
        .sheets()
        .map(|(name, sheet)| canonical_sheet(name, sheet))
        .collect();
    join_sheets(parts.iter().map(Vec::as_slice))
}

pub fn snapshot_hash(snapshot: &WorkbookSnapshot) -> SnapshotHash {
    SnapshotHash::of_bytes(&canonicalize(snapshot))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// 64 lowercase hex characters of a SHA-256 digest.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SnapshotHash(String);

impl SnapshotHash {
    pub fn of_bytes(bytes: &[u8]) -> Self {
        SnapshotHash(sha256_hex(bytes))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

pub(crate) fn is_sha256_hex(s: &str) -> bool {
    s.len() == 64 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}

impl FromStr for SnapshotHash {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if is_sha256_hex(s) {
            Ok(SnapshotHash(s.to_string()))
        } else {
            Err(Error::InvalidArgument(format!(
                "not a sha-256 hex digest: {s:?}"
            )))
        }
    }
}

impl fmt::Display for SnapshotHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for SnapshotHash {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for SnapshotHash {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}
