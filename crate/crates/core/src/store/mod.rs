//! On-disk version store.
//!
//! ```text
//! <root>/store.json
//! <root>/objects/ab/cdef…            sheet blobs and snapshot manifests
//! <root>/workbooks/<id>/commits.jsonl
//!                       rules.jsonl alerts.jsonl manifests.jsonl
//!                       watch.jsonl audit.jsonl lock
//! ```
//!
//! Objects are immutable and every log is append-only. Mutations of one
//! workbook serialize on its `lock` file; reads take no lock.

mod jsonl;
mod lock;
mod objects;

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::rc::Rc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::alert::{evaluate, AlertFiring, AlertRule, HistoryAccess};
use crate::analytics::{self, is_volatile_transition, RetirementReport};
use crate::audit::{
    check_utc_timestamp, now_utc, parse_chain, verify_manifest, AuditEntry, AuditEvent,
    AuditFilter, ChangeManifest, ComplianceReport,
};
use crate::diff::{classify, diff, summarize, ChangeRecord, ChangeSet, DiffSummary, WatchConfig};
use crate::error::{Error, Result};
use crate::model::canonical::sha256_hex;
use crate::model::{Cell, CellAddress, CellValue, Region, Sheet, SnapshotHash, WorkbookSnapshot};

pub use lock::DEFAULT_LOCK_TIMEOUT;
pub use objects::{ManifestEntry, ObjectStats, SnapshotManifest};

use jsonl::{append_line, append_record, read_lines, read_records};
use lock::WriterLock;
use objects::ObjectStore;

const MARKER: &str = "store.json";
const MAX_EXPORT_CELLS: u64 = 4_000_000;

/// Workbook ids double as directory names.
pub fn validate_workbook_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id != "."
        && id != ".."
        && id.len() <= 128
        && id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'.' | b'_' | b'-'));
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "workbook id {id:?} must be 1-128 characters from [A-Za-z0-9._-]"
        )))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitRecord {
    pub commit_id: String,
    pub workbook_id: String,
    pub parent: Option<String>,
    pub snapshot: SnapshotHash,
    pub author: String,
    pub timestamp: String,
    pub message: String,
    pub source: String,
}

#[derive(Serialize)]
struct CommitBody<'a> {
    workbook_id: &'a str,
    parent: &'a Option<String>,
    snapshot: &'a SnapshotHash,
    author: &'a str,
    timestamp: &'a str,
    message: &'a str,
    source: &'a str,
}

impl CommitRecord {
    fn body(&self) -> CommitBody<'_> {
        CommitBody {
            workbook_id: &self.workbook_id,
            parent: &self.parent,
            snapshot: &self.snapshot,
            author: &self.author,
            timestamp: &self.timestamp,
            message: &self.message,
            source: &self.source,
        }
    }

    /// SHA-256 of the record's JSON line without the `commit_id` field.
    pub fn compute_id(&self) -> String {
        sha256_hex(&serde_json::to_vec(&self.body()).expect("commit body serializes"))
    }
}

/// Who, when and why for a commit. A missing timestamp means now.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitMeta {
    pub author: String,
    #[serde(default)]
    pub message: String,
    #[serde(default)]
    pub source: String,
    #[serde(default)]
    pub timestamp: Option<String>,
}

impl CommitMeta {
    pub fn new(author: impl Into<String>) -> Self {
        Self {
            author: author.into(),
            ..Self::default()
        }
    }

    pub fn message(mut self, message: impl Into<String>) -> Self {
        self.message = message.into();
        self
    }

    pub fn source(mut self, source: impl Into<String>) -> Self {
        self.source = source.into();
        self
    }

    pub fn at(mut self, timestamp: impl Into<String>) -> Self {
        self.timestamp = Some(timestamp.into());
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommitOutcome {
    pub commit: CommitRecord,
    pub diff_summary: DiffSummary,
    pub firings: Vec<AlertFiring>,
    /// Object files created by this commit; zero when fully deduplicated.
    pub new_objects: usize,
}

/// What a client sees after committing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommitReceipt {
    pub commit_id: String,
    pub snapshot_hash: SnapshotHash,
    pub diff_summary: DiffSummary,
    pub firings: Vec<AlertFiring>,
}

impl From<&CommitOutcome> for CommitReceipt {
    fn from(o: &CommitOutcome) -> Self {
        Self {
            commit_id: o.commit.commit_id.clone(),
            snapshot_hash: o.commit.snapshot.clone(),
            diff_summary: o.diff_summary.clone(),
            firings: o.firings.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryPoint {
    pub commit_id: String,
    pub timestamp: String,
    pub value: CellValue,
    pub formula: Option<String>,
    pub changed: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistorySeries {
    pub address: CellAddress,
    pub points: Vec<HistoryPoint>,
}

impl HistorySeries {
    pub fn values(&self) -> Vec<CellValue> {
        self.points.iter().map(|p| p.value.clone()).collect()
    }
}

/// A dense block of values, row-major, absent cells as `Empty`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportTable {
    pub commit_id: String,
    pub region: Region,
    pub rows: Vec<Vec<CellValue>>,
}

impl ExportTable {
    /// RFC-4180 text with CRLF line endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            let fields: Vec<String> = row.iter().map(csv_field).collect();
            out.push_str(&fields.join(","));
            out.push_str("\r\n");
        }
        out
    }
}

fn csv_field(value: &CellValue) -> String {
    match value {
        CellValue::Empty => String::new(),
        CellValue::Text(s) if s.contains([',', '"', '\n', '\r']) => {
            format!("\"{}\"", s.replace('"', "\"\""))
        }
        other => other.to_string(),
    }
}

/// Per-call cache of manifests and parsed sheets, keyed by content hash.
struct SnapshotReader<'a> {
    objects: &'a ObjectStore,
    manifests: RefCell<HashMap<SnapshotHash, Rc<SnapshotManifest>>>,
    sheets: RefCell<HashMap<String, Rc<Sheet>>>,
}

impl<'a> SnapshotReader<'a> {
    fn new(objects: &'a ObjectStore) -> Self {
        Self {
            objects,
            manifests: RefCell::default(),
            sheets: RefCell::default(),
        }
    }

    fn manifest(&self, hash: &SnapshotHash) -> Result<Rc<SnapshotManifest>> {
        if let Some(m) = self.manifests.borrow().get(hash) {
            return Ok(m.clone());
        }
        let m = Rc::new(self.objects.manifest(hash)?);
        self.manifests.borrow_mut().insert(hash.clone(), m.clone());
        Ok(m)
    }

    fn sheet(&self, hash: &SnapshotHash, name: &str) -> Result<Option<Rc<Sheet>>> {
        let manifest = self.manifest(hash)?;
        let Some(entry) = manifest.sheets.iter().find(|e| e.name == name) else {
            return Ok(None);
        };
        if let Some(s) = self.sheets.borrow().get(&entry.blob) {
            return Ok(Some(s.clone()));
        }
        let (_, sheet) = self.objects.sheet(&entry.blob)?;
        let sheet = Rc::new(sheet);
        self.sheets
            .borrow_mut()
            .insert(entry.blob.clone(), sheet.clone());
        Ok(Some(sheet))
    }

    fn cell(&self, hash: &SnapshotHash, address: &CellAddress) -> Result<Option<Cell>> {
        Ok(self
            .sheet(hash, address.sheet())?
            .and_then(|s| s.get(address.row(), address.col()).cloned()))
    }
}

/// Committed values preceding the commit being evaluated.
struct Lineage<'a> {
    records: &'a [CommitRecord],
    reader: SnapshotReader<'a>,
}

impl HistoryAccess for Lineage<'_> {
    fn recent_values(&self, address: &CellAddress, count: usize) -> Result<Vec<CellValue>> {
        let start = self.records.len().saturating_sub(count);
        self.records[start..]
            .iter()
            .map(|r| {
                Ok(self
                    .reader
                    .cell(&r.snapshot, address)?
                    .map(|c| c.value)
                    .unwrap_or_default())
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct Store {
    root: PathBuf,
    objects: ObjectStore,
    lock_timeout: Duration,
}

impl Store {
    /// Creates the store layout under `root` (idempotent).
    pub fn init(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref();
        fs::create_dir_all(root.join("objects"))?;
        fs::create_dir_all(root.join("workbooks"))?;
        let marker = root.join(MARKER);
        if !marker.exists() {
            fs::write(&marker, b"{\"format\":1}\n")?;
        }
        Self::open(root)
    }

    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        if !root.join(MARKER).is_file() {
            return Err(Error::NotFound(format!("no store at {}", root.display())));
        }
        Ok(Self {
            objects: ObjectStore::new(root.join("objects")),
            root,
            lock_timeout: DEFAULT_LOCK_TIMEOUT,
        })
    }

    pub fn with_lock_timeout(mut self, timeout: Duration) -> Self {
        self.lock_timeout = timeout;
        self
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn workbook_dir(&self, wid: &str) -> Result<PathBuf> {
        validate_workbook_id(wid)?;
        Ok(self.root.join("workbooks").join(wid))
    }

    fn known_workbook(&self, wid: &str) -> Result<PathBuf> {
        let dir = self.workbook_dir(wid)?;
        if !dir.is_dir() {
            return Err(Error::NotFound(format!("workbook {wid}")));
        }
        Ok(dir)
    }

    fn ensure_workbook(&self, wid: &str) -> Result<PathBuf> {
        let dir = self.workbook_dir(wid)?;
        fs::create_dir_all(&dir)?;
        Ok(dir)
    }

    fn lock(&self, dir: &Path, wid: &str) -> Result<WriterLock> {
        WriterLock::acquire(&dir.join("lock"), wid, self.lock_timeout)
    }

    pub fn workbooks(&self) -> Result<Vec<String>> {
        let mut ids: Vec<String> = fs::read_dir(self.root.join("workbooks"))?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_dir())
            .filter_map(|e| e.file_name().into_string().ok())
            .collect();
        ids.sort();
        Ok(ids)
    }

    // ---- objects ----

    pub fn get_snapshot(&self, hash: &SnapshotHash) -> Result<WorkbookSnapshot> {
        self.objects.snapshot(hash)
    }

    pub fn snapshot_bytes(&self, hash: &SnapshotHash) -> Result<Vec<u8>> {
        self.objects.snapshot_bytes(hash)
    }

    pub fn object_stats(&self) -> Result<ObjectStats> {
        self.objects.stats()
    }

    // ---- commits ----

    /// Stores `snapshot` as the next commit of `wid`, then evaluates the
    /// workbook's alert rules and records an audit entry, all under the
    /// workbook's writer lock.
    pub fn commit(
        &self,
        wid: &str,
        snapshot: &WorkbookSnapshot,
        meta: CommitMeta,
    ) -> Result<CommitOutcome> {
        if meta.author.trim().is_empty() {
            return Err(Error::InvalidArgument("commit author is empty".into()));
        }
        let timestamp = match meta.timestamp {
            Some(ts) => {
                check_utc_timestamp(&ts)?;
                ts
            }
            None => now_utc(),
        };
        let dir = self.ensure_workbook(wid)?;
        let _lock = self.lock(&dir, wid)?;

        let log = self.read_log(&dir, wid)?;
        let parent = log.last();
        let (hash, new_objects) = self.objects.put_snapshot(snapshot)?;
        let mut record = CommitRecord {
            commit_id: String::new(),
            workbook_id: wid.to_string(),
            parent: parent.map(|p| p.commit_id.clone()),
            snapshot: hash,
            author: meta.author,
            timestamp,
            message: meta.message,
            source: meta.source,
        };
        record.commit_id = record.compute_id();
        append_record(&dir.join("commits.jsonl"), &record)?;

        let parent_snapshot = match parent {
            Some(p) => Some(self.objects.snapshot(&p.snapshot)?),
            None => None,
        };
        let empty = WorkbookSnapshot::new();
        let watch = self.read_watch(&dir)?;
        let changes = classify(
            diff(parent_snapshot.as_ref().unwrap_or(&empty), snapshot),
            &watch,
        );
        let diff_summary = summarize(&changes);

        let rules: Vec<AlertRule> = read_records(&dir.join("rules.jsonl"))?;
        let history = Lineage {
            records: &log,
            reader: SnapshotReader::new(&self.objects),
        };
        let firings = evaluate(
            &rules,
            parent_snapshot.as_ref(),
            snapshot,
            &record.commit_id,
            &history,
        )?;
        for firing in &firings {
            append_record(&dir.join("alerts.jsonl"), firing)?;
        }
        self.append_audit(
            &dir,
            AuditEvent::new(&record.author, "commit", &record.commit_id),
        )?;

        Ok(CommitOutcome {
            commit: record,
            diff_summary,
            firings,
            new_objects,
        })
    }

    fn read_log(&self, dir: &Path, wid: &str) -> Result<Vec<CommitRecord>> {
        let records: Vec<CommitRecord> = read_records(&dir.join("commits.jsonl"))?;
        let mut prev: Option<&str> = None;
        for (i, r) in records.iter().enumerate() {
            if r.commit_id != r.compute_id() || r.parent.as_deref() != prev || r.workbook_id != wid
            {
                return Err(Error::StoreCorrupt(format!(
                    "workbook {wid}: commit log broken at line {}",
                    i + 1
                )));
            }
            prev = Some(&r.commit_id);
        }
        Ok(records)
    }

    /// Commits of `wid`, oldest first.
    pub fn log(&self, wid: &str) -> Result<Vec<CommitRecord>> {
        let dir = self.known_workbook(wid)?;
        self.read_log(&dir, wid)
    }

    fn position(log: &[CommitRecord], wid: &str, rev: &str) -> Result<usize> {
        if rev == "latest" {
            return log
                .len()
                .checked_sub(1)
                .ok_or_else(|| Error::NotFound(format!("workbook {wid} has no commits")));
        }
        if let Some(i) = log.iter().position(|r| r.commit_id == rev) {
            return Ok(i);
        }
        if rev.len() >= 6 && rev.len() < 64 {
            let hits: Vec<usize> = (0..log.len())
                .filter(|&i| log[i].commit_id.starts_with(rev))
                .collect();
            match hits.as_slice() {
                [i] => return Ok(*i),
                [] => {}
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "commit prefix {rev} is ambiguous"
                    )))
                }
            }
        }
        Err(Error::NotFound(format!("commit {rev} in workbook {wid}")))
    }

    /// Resolves `"latest"`, a full commit id, or a unique prefix of 6+ hex digits.
    pub fn resolve(&self, wid: &str, rev: &str) -> Result<CommitRecord> {
        let log = self.log(wid)?;
        let i = Self::position(&log, wid, rev)?;
        Ok(log[i].clone())
    }

    /// Classified changes between two commits of `wid`.
    pub fn diff_commits(&self, wid: &str, from: &str, to: &str) -> Result<ChangeSet> {
        let dir = self.known_workbook(wid)?;
        let log = self.read_log(&dir, wid)?;
        let a = &log[Self::position(&log, wid, from)?];
        let b = &log[Self::position(&log, wid, to)?];
        let old = self.objects.snapshot(&a.snapshot)?;
        let new = self.objects.snapshot(&b.snapshot)?;
        Ok(classify(diff(&old, &new), &self.read_watch(&dir)?))
    }

    /// Carry-forward series of one cell over the last `window` commits.
    pub fn cell_history(
        &self,
        wid: &str,
        address: &CellAddress,
        window: usize,
    ) -> Result<HistorySeries> {
        if window == 0 {
            return Err(Error::InvalidArgument(
                "history window must be at least 1".into(),
            ));
        }
        let log = self.log(wid)?;
        let reader = SnapshotReader::new(&self.objects);
        let mut points = Vec::new();
        let mut prev: Option<Option<Cell>> = None;
        for record in &log[log.len().saturating_sub(window)..] {
            let cell = reader.cell(&record.snapshot, address)?;
            let changed = match &prev {
                None => cell.is_some(),
                Some(p) => *p != cell,
            };
            points.push(HistoryPoint {
                commit_id: record.commit_id.clone(),
                timestamp: record.timestamp.clone(),
                value: cell.as_ref().map(|c| c.value.clone()).unwrap_or_default(),
                formula: cell.as_ref().and_then(|c| c.formula.clone()),
                changed,
            });
            prev = Some(cell);
        }
        Ok(HistorySeries {
            address: address.clone(),
            points,
        })
    }

    /// Canonical bytes of the snapshot at `commit_id`; never mutates anything.
    pub fn restore_bytes(&self, wid: &str, commit_id: &str) -> Result<Vec<u8>> {
        let record = self.resolve(wid, commit_id)?;
        self.objects.snapshot_bytes(&record.snapshot)
    }

    /// [`Store::restore_bytes`] plus a `restore` audit entry.
    pub fn restore(&self, wid: &str, commit_id: &str, actor: &str) -> Result<Vec<u8>> {
        let record = self.resolve(wid, commit_id)?;
        let bytes = self.objects.snapshot_bytes(&record.snapshot)?;
        self.audit_append(wid, AuditEvent::new(actor, "restore", &record.commit_id))?;
        Ok(bytes)
    }

    /// Values of a rectangle at a commit (or `"latest"`), formulas dropped.
    pub fn export_region(&self, wid: &str, at: &str, region: &Region) -> Result<ExportTable> {
        let Some(sheet_name) = region.exact_sheet() else {
            return Err(Error::MalformedRegion(format!(
                "export needs a named sheet: {region}"
            )));
        };
        let rect = region.rect;
        if u64::from(rect.rows()) * u64::from(rect.cols()) > MAX_EXPORT_CELLS {
            return Err(Error::InvalidArgument(format!(
                "region {region} exceeds {MAX_EXPORT_CELLS} cells"
            )));
        }
        let record = self.resolve(wid, at)?;
        let reader = SnapshotReader::new(&self.objects);
        let sheet = reader.sheet(&record.snapshot, sheet_name)?;
        let rows = (rect.top..=rect.bottom)
            .map(|r| {
                (rect.left..=rect.right)
                    .map(|c| {
                        sheet
                            .as_ref()
                            .and_then(|s| s.get(r, c))
                            .map(|cell| cell.value.clone())
                            .unwrap_or_default()
                    })
                    .collect()
            })
            .collect();
        Ok(ExportTable {
            commit_id: record.commit_id,
            region: region.clone(),
            rows,
        })
    }

    // ---- rules and alerts ----

    /// Persists a rule; an empty id is replaced by the next free `rule-N`.
    pub fn add_rule(&self, wid: &str, mut rule: AlertRule, actor: &str) -> Result<String> {
        let dir = self.ensure_workbook(wid)?;
        let _lock = self.lock(&dir, wid)?;
        let path = dir.join("rules.jsonl");
        let existing: Vec<AlertRule> = read_records(&path)?;
        if rule.rule_id.trim().is_empty() {
            let mut n = existing.len() + 1;
            while existing.iter().any(|r| r.rule_id == format!("rule-{n}")) {
                n += 1;
            }
            rule.rule_id = format!("rule-{n}");
        }
        rule.validate()?;
        if existing.iter().any(|r| r.rule_id == rule.rule_id) {
            return Err(Error::DuplicateRuleId(rule.rule_id));
        }
        append_record(&path, &rule)?;
        self.append_audit(&dir, AuditEvent::new(actor, "rule_add", &rule.rule_id))?;
        Ok(rule.rule_id)
    }

    pub fn rules(&self, wid: &str) -> Result<Vec<AlertRule>> {
        read_records(&self.known_workbook(wid)?.join("rules.jsonl"))
    }

    pub fn alerts(&self, wid: &str) -> Result<Vec<AlertFiring>> {
        read_records(&self.known_workbook(wid)?.join("alerts.jsonl"))
    }

    // ---- watch configuration ----

    fn read_watch(&self, dir: &Path) -> Result<WatchConfig> {
        Ok(read_records::<WatchConfig>(&dir.join("watch.jsonl"))?
            .pop()
            .unwrap_or_default())
    }

    /// Input regions used to label changes Normal; none by default.
    pub fn watch_config(&self, wid: &str) -> Result<WatchConfig> {
        self.read_watch(&self.known_workbook(wid)?)
    }

    pub fn set_watch_config(&self, wid: &str, config: &WatchConfig, actor: &str) -> Result<()> {
        let dir = self.ensure_workbook(wid)?;
        let _lock = self.lock(&dir, wid)?;
        append_record(&dir.join("watch.jsonl"), config)?;
        self.append_audit(&dir, AuditEvent::new(actor, "watch_set", wid))?;
        Ok(())
    }

    // ---- analytics ----

    /// Volatility flags of the last `window` transitions, oldest first.
    fn volatile_tail(&self, wid: &str, window: usize) -> Result<Vec<bool>> {
        let log = self.log(wid)?;
        let transitions = log.len().saturating_sub(1);
        let mut flags = Vec::new();
        let mut cache: Option<(SnapshotHash, WorkbookSnapshot)> = None;
        for t in transitions.saturating_sub(window)..transitions {
            let (a, b) = (&log[t].snapshot, &log[t + 1].snapshot);
            if a == b {
                flags.push(false);
                continue;
            }
            let old = match cache.take() {
                Some((h, s)) if h == *a => s,
                _ => self.objects.snapshot(a)?,
            };
            let new = self.objects.snapshot(b)?;
            flags.push(is_volatile_transition(&diff(&old, &new)));
            cache = Some((b.clone(), new));
        }
        Ok(flags)
    }

    pub fn formula_volatility(&self, wid: &str, window: usize) -> Result<f64> {
        analytics::formula_volatility(&self.volatile_tail(wid, window)?, window)
    }

    pub fn retirement_report(&self, wid: &str, window: usize) -> Result<RetirementReport> {
        if window == 0 {
            return Err(Error::InvalidArgument("window must be at least 1".into()));
        }
        analytics::retirement_report(wid, window, &self.volatile_tail(wid, window)?)
    }

    // ---- manifests and compliance ----

    pub fn register_manifest(
        &self,
        wid: &str,
        manifest: &ChangeManifest,
        actor: &str,
    ) -> Result<()> {
        manifest.validate()?;
        if manifest.applies_to != wid {
            return Err(Error::ManifestInvalid(format!(
                "manifest {} applies to {}, not {wid}",
                manifest.manifest_id, manifest.applies_to
            )));
        }
        let dir = self.ensure_workbook(wid)?;
        let _lock = self.lock(&dir, wid)?;
        let path = dir.join("manifests.jsonl");
        let existing: Vec<ChangeManifest> = read_records(&path)?;
        if existing
            .iter()
            .any(|m| m.manifest_id == manifest.manifest_id)
        {
            return Err(Error::ManifestInvalid(format!(
                "manifest {} already registered",
                manifest.manifest_id
            )));
        }
        append_record(&path, manifest)?;
        self.append_audit(
            &dir,
            AuditEvent::new(actor, "manifest_register", &manifest.manifest_id),
        )?;
        Ok(())
    }

    pub fn manifests(&self, wid: &str) -> Result<Vec<ChangeManifest>> {
        read_records(&self.known_workbook(wid)?.join("manifests.jsonl"))
    }

    pub fn manifest(&self, wid: &str, manifest_id: &str) -> Result<ChangeManifest> {
        self.manifests(wid)?
            .into_iter()
            .find(|m| m.manifest_id == manifest_id)
            .ok_or_else(|| Error::NotFound(format!("manifest {manifest_id} in workbook {wid}")))
    }

    /// Changes of every transition after `from` up to and including `to`,
    /// one record per address (the latest wins). `from = None` means the
    /// parent of `to`.
    pub fn changes_in_range(
        &self,
        wid: &str,
        from: Option<&str>,
        to: &str,
    ) -> Result<(Option<String>, String, ChangeSet)> {
        let dir = self.known_workbook(wid)?;
        let log = self.read_log(&dir, wid)?;
        let end = Self::position(&log, wid, to)?;
        let start = match from {
            None => end.checked_sub(1),
            Some(rev) => {
                let i = Self::position(&log, wid, rev)?;
                if i >= end {
                    return Err(Error::InvalidArgument(format!(
                        "{rev} does not precede {to}"
                    )));
                }
                Some(i)
            }
        };
        let first_new = start.map_or(0, |i| i + 1);
        let mut prev = match start {
            Some(i) => self.objects.snapshot(&log[i].snapshot)?,
            None => WorkbookSnapshot::new(),
        };
        let mut merged: BTreeMap<CellAddress, ChangeRecord> = BTreeMap::new();
        for record in &log[first_new..=end] {
            let next = self.objects.snapshot(&record.snapshot)?;
            for change in diff(&prev, &next) {
                merged.insert(change.address.clone(), change);
            }
            prev = next;
        }
        let changes = classify(merged.into_values().collect(), &self.read_watch(&dir)?);
        Ok((
            start.map(|i| log[i].commit_id.clone()),
            log[end].commit_id.clone(),
            changes,
        ))
    }

    /// Verifies a registered manifest over a commit range and audits the check.
    pub fn check_compliance(
        &self,
        wid: &str,
        manifest_id: &str,
        from: Option<&str>,
        to: &str,
        actor: &str,
    ) -> Result<ComplianceReport> {
        let manifest = self.manifest(wid, manifest_id)?;
        let (from_id, to_id, changes) = self.changes_in_range(wid, from, to)?;
        let mut report = verify_manifest(&changes, &manifest)?;
        report.from = from_id;
        report.to = Some(to_id);
        self.audit_append(wid, AuditEvent::new(actor, "manifest_verify", manifest_id))?;
        Ok(report)
    }

    // ---- audit ----

    fn append_audit(&self, dir: &Path, event: AuditEvent) -> Result<u64> {
        event.validate()?;
        let path = dir.join("audit.jsonl");
        let lines = read_lines(&path)?;
        let seq = lines.len() as u64 + 1;
        let entry = AuditEntry::chained(event, seq, lines.last().map(String::as_str));
        append_line(&path, &entry.to_line())?;
        Ok(seq)
    }

    /// Appends an event under the writer lock; returns its sequence number.
    pub fn audit_append(&self, wid: &str, event: AuditEvent) -> Result<u64> {
        let dir = self.known_workbook(wid)?;
        let _lock = self.lock(&dir, wid)?;
        self.append_audit(&dir, event)
    }

    /// Matching entries in insertion order, after checking the hash chain.
    pub fn audit_query(&self, wid: &str, filter: &AuditFilter) -> Result<Vec<AuditEntry>> {
        let lines = read_lines(&self.known_workbook(wid)?.join("audit.jsonl"))?;
        Ok(parse_chain(lines.iter().map(String::as_str))?
            .into_iter()
            .filter(|e| filter.matches(e))
            .collect())
    }

    /// Number of entries when the chain is intact.
    pub fn verify_audit_chain(&self, wid: &str) -> Result<usize> {
        let lines = read_lines(&self.known_workbook(wid)?.join("audit.jsonl"))?;
        Ok(parse_chain(lines.iter().map(String::as_str))?.len())
    }
}
