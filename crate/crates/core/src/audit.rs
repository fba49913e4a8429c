//! Change manifests, compliance verification and the hash-chained audit trail.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::diff::ChangeRecord;
use crate::error::{Error, Result};
use crate::model::canonical::sha256_hex;
use crate::model::{CellAddress, Region};

/// `prev` of the first audit entry.
pub const GENESIS: &str = "0000000000000000000000000000000000000000000000000000000000000000";

/// Accepts RFC-3339 timestamps in UTC only.
pub fn check_utc_timestamp(ts: &str) -> Result<()> {
    let parsed = chrono::DateTime::parse_from_rfc3339(ts)
        .map_err(|e| Error::InvalidArgument(format!("timestamp {ts:?}: {e}")))?;
    if parsed.offset().local_minus_utc() != 0 {
        return Err(Error::InvalidArgument(format!(
            "timestamp {ts:?} is not UTC"
        )));
    }
    Ok(())
}

/// Current time, RFC-3339 UTC with millisecond precision.
pub fn now_utc() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChangeManifest {
    pub manifest_id: String,
    pub approver: String,
    pub created: String,
    #[serde(default)]
    pub required: Vec<CellAddress>,
    #[serde(default)]
    pub allowed: Vec<Region>,
    pub applies_to: String,
}

impl ChangeManifest {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::ManifestInvalid(msg));
        if self.manifest_id.trim().is_empty() {
            return bad("manifest_id is empty".into());
        }
        if self.approver.trim().is_empty() {
            return bad("approver is empty".into());
        }
        if self.applies_to.trim().is_empty() {
            return bad("applies_to is empty".into());
        }
        if let Err(e) = check_utc_timestamp(&self.created) {
            return bad(e.to_string());
        }
        for address in &self.required {
            if !self.allows(address) {
                return bad(format!(
                    "required cell {address} lies outside every allowed region"
                ));
            }
        }
        Ok(())
    }

    pub fn allows(&self, address: &CellAddress) -> bool {
        self.allowed.iter().any(|r| r.contains(address))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplianceCounts {
    pub changes: usize,
    pub allowed: usize,
    pub violations: usize,
    pub unfulfilled: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplianceReport {
    pub manifest_id: String,
    /// Exclusive start of the verified range; `None` means the parent of `to`.
    pub from: Option<String>,
    pub to: Option<String>,
    pub compliant: bool,
    pub violations: Vec<ChangeRecord>,
    pub unfulfilled: Vec<CellAddress>,
    pub counts: ComplianceCounts,
}

/// Checks a change set against a manifest. Every record is either allowed or
/// a violation; required cells with no record are unfulfilled.
pub fn verify_manifest(
    changes: &[ChangeRecord],
    manifest: &ChangeManifest,
) -> Result<ComplianceReport> {
    manifest.validate()?;
    let (allowed, violations): (Vec<&ChangeRecord>, Vec<&ChangeRecord>) =
        changes.iter().partition(|r| manifest.allows(&r.address));
    let touched: BTreeSet<&CellAddress> = changes.iter().map(|r| &r.address).collect();
    let unfulfilled: Vec<CellAddress> = manifest
        .required
        .iter()
        .filter(|a| !touched.contains(a))
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let counts = ComplianceCounts {
        changes: changes.len(),
        allowed: allowed.len(),
        violations: violations.len(),
        unfulfilled: unfulfilled.len(),
    };
    Ok(ComplianceReport {
        manifest_id: manifest.manifest_id.clone(),
        from: None,
        to: None,
        compliant: violations.is_empty() && unfulfilled.is_empty(),
        violations: violations.into_iter().cloned().collect(),
        unfulfilled,
        counts,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEvent {
    pub actor: String,
    pub action: String,
    pub target: String,
    pub timestamp: String,
}

impl AuditEvent {
    pub fn new(
        actor: impl Into<String>,
        action: impl Into<String>,
        target: impl Into<String>,
    ) -> Self {
        Self {
            actor: actor.into(),
            action: action.into(),
            target: target.into(),
            timestamp: now_utc(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("actor", &self.actor),
            ("action", &self.action),
            ("target", &self.target),
        ] {
            if v.trim().is_empty() {
                return Err(Error::InvalidArgument(format!("audit {name} is empty")));
            }
        }
        check_utc_timestamp(&self.timestamp)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub seq: u64,
    pub actor: String,
    pub action: String,
    pub target: String,
    pub timestamp: String,
    /// SHA-256 of the previous line, or [`GENESIS`].
    pub prev: String,
}

impl AuditEntry {
    pub fn chained(event: AuditEvent, seq: u64, prev_line: Option<&str>) -> Self {
        Self {
            seq,
            actor: event.actor,
            action: event.action,
            target: event.target,
            timestamp: event.timestamp,
            prev: prev_line.map_or_else(|| GENESIS.to_string(), |l| sha256_hex(l.as_bytes())),
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("entry serializes")
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditFilter {
    pub actor: Option<String>,
    pub action: Option<String>,
    pub target: Option<String>,
}

impl AuditFilter {
    pub fn matches(&self, e: &AuditEntry) -> bool {
        let ok = |want: &Option<String>, got: &str| want.as_deref().is_none_or(|w| w == got);
        ok(&self.actor, &e.actor) && ok(&self.action, &e.action) && ok(&self.target, &e.target)
    }
}

/// Parses audit log lines and checks sequence numbers and hash links.
pub fn parse_chain<'a>(lines: impl IntoIterator<Item = &'a str>) -> Result<Vec<AuditEntry>> {
    let mut entries = Vec::new();
    let mut prev: Option<&str> = None;
    for (i, line) in lines.into_iter().enumerate() {
        let entry: AuditEntry = serde_json::from_str(line)
            .map_err(|e| Error::StoreCorrupt(format!("audit line {}: {e}", i + 1)))?;
        let expected = prev.map_or_else(|| GENESIS.to_string(), |l| sha256_hex(l.as_bytes()));
        if entry.prev != expected || entry.seq != i as u64 + 1 {
            return Err(Error::StoreCorrupt(format!(
                "audit chain broken at line {}",
                i + 1
            )));
        }
        entries.push(entry);
        prev = Some(line);
    }
    Ok(entries)
}
