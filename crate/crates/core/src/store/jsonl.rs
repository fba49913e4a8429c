//! Append-only JSON-lines files.
//!
//! A line only counts once its terminating newline is on disk, so a torn
//! final write is invisible to readers and is cut off by the next append.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Complete lines of `path`; a missing file has none.
pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = match fs::read(path) {
        Ok(bytes) => bytes,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let complete = match text.iter().rposition(|&b| b == b'\n') {
        Some(i) => &text[..=i],
        None => return Ok(Vec::new()),
    };
    let complete = std::str::from_utf8(complete)
        .map_err(|e| Error::StoreCorrupt(format!("{}: {e}", path.display())))?;
    Ok(complete.lines().map(str::to_string).collect())
}

pub fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read_lines(path)?
        .iter()
        .enumerate()
        .map(|(i, line)| {
            serde_json::from_str(line)
                .map_err(|e| Error::StoreCorrupt(format!("{} line {}: {e}", path.display(), i + 1)))
        })
        .collect()
}

/// Appends one line. Callers hold the workbook writer lock.
pub fn append_line(path: &Path, line: &str) -> Result<()> {
    debug_assert!(!line.contains('\n'));
    let mut file = OpenOptions::new()
        .read(true)
        .write(true)
        .create(true)
        .truncate(false)
        .open(path)?;
    drop_torn_tail(&mut file)?;
    file.seek(SeekFrom::End(0))?;
    let mut buf = Vec::with_capacity(line.len() + 1);
    buf.extend_from_slice(line.as_bytes());
    buf.push(b'\n');
    file.write_all(&buf)?;
    file.sync_data()?;
    Ok(())
}

pub fn append_record<T: Serialize>(path: &Path, record: &T) -> Result<String> {
    let line = serde_json::to_string(record).expect("records serialize");
    append_line(path, &line)?;
    Ok(line)
}

fn drop_torn_tail(file: &mut File) -> Result<()> {
    let len = file.metadata()?.len();
    if len == 0 {
        return Ok(());
    }
    let mut last = [0u8; 1];
    file.seek(SeekFrom::Start(len - 1))?;
    file.read_exact(&mut last)?;
    if last[0] == b'\n' {
        return Ok(());
    }
    // Scan back for the last newline; everything after it is a torn write.
    let mut end = len;
    let mut chunk = vec![0u8; 8192];
    while end > 0 {
        let start = end.saturating_sub(chunk.len() as u64);
        let n = (end - start) as usize;
        file.seek(SeekFrom::Start(start))?;
        file.read_exact(&mut chunk[..n])?;
        if let Some(i) = chunk[..n].iter().rposition(|&b| b == b'\n') {
            file.set_len(start + i as u64 + 1)?;
            return Ok(());
        }
        end = start;
    }
    file.set_len(0)?;
    Ok(())
}
