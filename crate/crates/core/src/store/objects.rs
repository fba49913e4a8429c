//! Immutable content-addressed objects under `<root>/objects/xx/yyyy…`.
//!
//! A snapshot is a set of sheet blobs, each keyed by the SHA-256 of its
//! canonical sheet bytes, plus a small manifest listing them. The manifest is
//! filed under the snapshot hash, so reading a snapshot means joining its
//! blobs back into canonical bytes and checking they hash to the key.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::parse_sheet_object;
use crate::model::canonical::{canonical_sheet, join_sheets, sha256_hex};
use crate::model::{Sheet, SnapshotHash, WorkbookSnapshot};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub blob: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotManifest {
    pub sheets: Vec<ManifestEntry>,
}

/// Object count and total on-disk bytes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectStats {
    pub objects: u64,
    pub bytes: u64,
}

#[derive(Clone, Debug)]
pub struct ObjectStore {
    dir: PathBuf,
}

impl ObjectStore {
    pub fn new(dir: PathBuf) -> Self {
        Self { dir }
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(&key[..2]).join(&key[2..])
    }

    /// Writes `bytes` under `key` unless present; an existing object must
    /// hold exactly these bytes. Returns whether a new file was created.
    pub fn put(&self, key: &str, bytes: &[u8]) -> Result<bool> {
        let path = self.path(key);
        if path.exists() {
            self.expect_same(key, &path, bytes)?;
            return Ok(false);
        }
        let parent = path.parent().expect("object paths have a parent");
        fs::create_dir_all(parent)?;
        let mut tmp = tempfile::NamedTempFile::new_in(parent)?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_data()?;
        match tmp.persist_noclobber(&path) {
            Ok(_) => Ok(true),
            Err(e) if e.error.kind() == io::ErrorKind::AlreadyExists => {
                self.expect_same(key, &path, bytes)?;
                Ok(false)
            }
            Err(e) => Err(e.error.into()),
        }
    }

    fn expect_same(&self, key: &str, path: &Path, bytes: &[u8]) -> Result<()> {
        if fs::read(path)? != bytes {
            return Err(Error::StoreCorrupt(format!(
                "object {key} differs from its content address"
            )));
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Result<Vec<u8>> {
        match fs::read(self.path(key)) {
            Ok(bytes) => Ok(bytes),
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                Err(Error::NotFound(format!("object {key}")))
            }
            Err(e) => Err(e.into()),
        }
    }

    /// Stores a snapshot; returns its hash and the number of new object files.
    pub fn put_snapshot(&self, snapshot: &WorkbookSnapshot) -> Result<(SnapshotHash, usize)> {
        let blobs: Vec<(&str, Vec<u8>)> = snapshot
            .sheets()
            .map(|(name, sheet)| (name, canonical_sheet(name, sheet)))
            .collect();
        let hash = SnapshotHash::of_bytes(&join_sheets(blobs.iter().map(|(_, b)| b.as_slice())));
        let mut created = 0;
        let mut entries = Vec::with_capacity(blobs.len());
        for (name, bytes) in &blobs {
            let key = sha256_hex(bytes);
            created += usize::from(self.put(&key, bytes)?);
            entries.push(ManifestEntry {
                name: name.to_string(),
                blob: key,
            });
        }
        let manifest =
            serde_json::to_vec(&SnapshotManifest { sheets: entries }).expect("manifest serializes");
        created += usize::from(self.put(hash.as_str(), &manifest)?);
        Ok((hash, created))
    }

    pub fn manifest(&self, hash: &SnapshotHash) -> Result<SnapshotManifest> {
        let bytes = self.get(hash.as_str())?;
        serde_json::from_slice(&bytes)
            .map_err(|e| Error::StoreCorrupt(format!("snapshot manifest {hash}: {e}")))
    }

    /// A sheet blob, checked against its key.
    pub fn blob(&self, key: &str) -> Result<Vec<u8>> {
        let bytes = self.get(key).map_err(|e| match e {
            Error::NotFound(what) => Error::StoreCorrupt(format!("missing {what}")),
            other => other,
        })?;
        if sha256_hex(&bytes) != key {
            return Err(Error::StoreCorrupt(format!(
                "sheet blob {key} fails its hash check"
            )));
        }
        Ok(bytes)
    }

    pub fn sheet(&self, key: &str) -> Result<(String, Sheet)> {
        parse_sheet_object(&self.blob(key)?)
            .map_err(|e| Error::StoreCorrupt(format!("sheet blob {key}: {e}")))
    }

    /// Canonical snapshot bytes, verified against `hash`.
    pub fn snapshot_bytes(&self, hash: &SnapshotHash) -> Result<Vec<u8>> {
        let manifest = self.manifest(hash)?;
        let blobs = manifest
            .sheets
            .iter()
            .map(|e| self.blob(&e.blob))
            .collect::<Result<Vec<_>>>()?;
        let bytes = join_sheets(blobs.iter().map(Vec::as_slice));
        if SnapshotHash::of_bytes(&bytes) != *hash {
            return Err(Error::StoreCorrupt(format!(
                "snapshot {hash} fails its hash check"
            )));
        }
        Ok(bytes)
    }

    pub fn snapshot(&self, hash: &SnapshotHash) -> Result<WorkbookSnapshot> {
        let manifest = self.manifest(hash)?;
        let mut snapshot = WorkbookSnapshot::new();
        let mut blobs = Vec::with_capacity(manifest.sheets.len());
        for entry in &manifest.sheets {
            let bytes = self.blob(&entry.blob)?;
            let (name, sheet) = parse_sheet_object(&bytes)
                .map_err(|e| Error::StoreCorrupt(format!("sheet blob {}: {e}", entry.blob)))?;
            if name != entry.name {
                return Err(Error::StoreCorrupt(format!(
                    "sheet blob {} is not sheet {:?}",
                    entry.blob, entry.name
                )));
            }
            snapshot
                .add_sheet(name, sheet)
                .map_err(|e| Error::StoreCorrupt(format!("snapshot {hash}: {e}")))?;
            blobs.push(bytes);
        }
        if SnapshotHash::of_bytes(&join_sheets(blobs.iter().map(Vec::as_slice))) != *hash {
            return Err(Error::StoreCorrupt(format!(
                "snapshot {hash} fails its hash check"
            )));
        }
        Ok(snapshot)
    }

    pub fn stats(&self) -> Result<ObjectStats> {
        let mut stats = ObjectStats::default();
        if !self.dir.exists() {
            return Ok(stats);
        }
        for fan in fs::read_dir(&self.dir)? {
            let fan = fan?;
            if !fan.file_type()?.is_dir() {
                continue;
            }
            for entry in fs::read_dir(fan.path())? {
                let entry = entry?;
                let name = entry.file_name();
                // Skip in-flight temporary files.
                if name.to_string_lossy().starts_with(".tmp") {
                    continue;
                }
                stats.objects += 1;
                stats.bytes += entry.metadata()?.len();
            }
        }
        Ok(stats)
    }
}
