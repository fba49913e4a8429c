//! Read-only inventory of spreadsheet files under a directory tree.

use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::Serialize;
use walkdir::WalkDir;

const MIB: u64 = 1024 * 1024;
const ZIP_MAGIC: &[u8; 4] = b"PK\x03\x04";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatGuess {
    Xlsx,
    Xls,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct InventoryEntry {
    pub path: String,
    pub bytes: u64,
    /// Last modification time, UTC; absent when the platform can't say.
    pub modified: Option<String>,
    pub format: FormatGuess,
}

/// File counts by size band, in binary megabytes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SizeHistogram {
    #[serde(rename = "<1MB")]
    pub under_1: u64,
    #[serde(rename = "1-10MB")]
    pub from_1_to_10: u64,
    #[serde(rename = "10-150MB")]
    pub from_10_to_150: u64,
    #[serde(rename = ">150MB")]
    pub over_150: u64,
}

impl SizeHistogram {
    pub fn add(&mut self, bytes: u64) {
        match bytes {
            b if b < MIB => self.under_1 += 1,
            b if b < 10 * MIB => self.from_1_to_10 += 1,
            b if b < 150 * MIB => self.from_10_to_150 += 1,
            _ => self.over_150 += 1,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct InventoryReport {
    pub root: String,
    /// Regular files examined, matching or not.
    pub scanned_paths: u64,
    pub spreadsheet_files: Vec<InventoryEntry>,
    pub total_bytes: u64,
    pub histogram: SizeHistogram,
    /// Entries that could not be read; the walk continues past them.
    pub warnings: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum DiscoverError {
    #[error("path not found: {0}")]
    PathNotFound(PathBuf),
}

fn guess(path: &Path) -> Option<FormatGuess> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    match ext.as_str() {
        "xlsx" => Some(FormatGuess::Xlsx),
        "xls" => Some(FormatGuess::Xls),
        "csv" => Some(FormatGuess::Csv),
        _ => None,
    }
}

fn has_zip_signature(path: &Path) -> std::io::Result<bool> {
    let mut head = [0u8; 4];
    let mut file = File::open(path)?;
    let mut filled = 0;
    while filled < head.len() {
        match file.read(&mut head[filled..])? {
            0 => return Ok(false),
            n => filled += n,
        }
    }
    Ok(&head == ZIP_MAGIC)
}

/// Walks `root` and lists `.xlsx` (ZIP-signed), `.xls` and `.csv` files,
/// sorted by path. Nothing under `root` is written.
pub fn discover(root: &Path) -> Result<InventoryReport, DiscoverError> {
    if !root.exists() {
        return Err(DiscoverError::PathNotFound(root.to_path_buf()));
    }
    let mut report = InventoryReport {
        root: root.display().to_string(),
        ..InventoryReport::default()
    };
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = match entry {
            Ok(e) => e,
            Err(e) => {
                report.warnings.push(e.to_string());
                continue;
            }
        };
        if !entry.file_type().is_file() {
            continue;
        }
        report.scanned_paths += 1;
        let path = entry.path();
        let Some(format) = guess(path) else { continue };
        if format == FormatGuess::Xlsx {
            match has_zip_signature(path) {
                Ok(true) => {}
                Ok(false) => {
                    report.warnings.push(format!(
                        "{}: .xlsx without a ZIP signature, skipped",
                        path.display()
                    ));
                    continue;
                }
                Err(e) => {
                    report.warnings.push(format!("{}: {e}", path.display()));
                    continue;
                }
            }
        }
        let meta = match entry.metadata() {
            Ok(m) => m,
            Err(e) => {
                report.warnings.push(format!("{}: {e}", path.display()));
                continue;
            }
        };
        let modified = meta
            .modified()
            .ok()
            .map(|t| DateTime::<Utc>::from(t).to_rfc3339_opts(SecondsFormat::Millis, true));
        report.total_bytes += meta.len();
        report.histogram.add(meta.len());
        report.spreadsheet_files.push(InventoryEntry {
            path: path.display().to_string(),
            bytes: meta.len(),
            modified,
            format,
        });
    }
    Ok(report)
}
