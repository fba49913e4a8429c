//! Text renderings and the JSON/JSONL emitter.
//!
//! JSON mode writes exactly the bytes the HTTP API returns for the same
//! result, followed by one newline.

use std::io::{self, Write};

use cellvault_core::alert::{AlertFiring, AlertRule};
use cellvault_core::audit::ComplianceReport;
use cellvault_core::diff::{ChangeRecord, WatchConfig};
use cellvault_core::model::Cell;
use cellvault_core::store::{CommitReceipt, CommitRecord};
use clap::ValueEnum;
use serde::Serialize;

use crate::discover::InventoryReport;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Text,
    Json,
    /// One JSON document per line; lists are split per element.
    Jsonl,
}

pub struct Emitter<'a> {
    mode: Mode,
    out: &'a mut dyn Write,
}

impl<'a> Emitter<'a> {
    pub fn new(mode: Mode, out: &'a mut dyn Write) -> Self {
        Self { mode, out }
    }

    fn line<T: Serialize + ?Sized>(&mut self, value: &T) -> io::Result<()> {
        serde_json::to_writer(&mut *self.out, value)?;
        self.out.write_all(b"\n")
    }

    pub fn one<T: Serialize>(
        &mut self,
        value: &T,
        text: impl FnOnce(&mut dyn Write) -> io::Result<()>,
    ) -> io::Result<()> {
        match self.mode {
            Mode::Text => text(self.out),
            Mode::Json | Mode::Jsonl => self.line(value),
        }
    }

    pub fn list<T: Serialize>(
        &mut self,
        items: &[T],
        mut text: impl FnMut(&mut dyn Write, &T) -> io::Result<()>,
    ) -> io::Result<()> {
        match self.mode {
            Mode::Text => items.iter().try_for_each(|item| text(self.out, item)),
            Mode::Json => self.line(items),
            Mode::Jsonl => items.iter().try_for_each(|item| self.line(item)),
        }
    }

    /// Bytes that are already a finished document (CSV, canonical workbook).
    pub fn raw(&mut self, bytes: &[u8]) -> io::Result<()> {
        self.out.write_all(bytes)
    }
}

fn show(cell: &Option<Cell>) -> String {
    match cell {
        None => "(none)".into(),
        Some(c) => match &c.formula {
            Some(f) => format!("{} [{f}]", c.value),
            None => c.value.to_string(),
        },
    }
}

pub fn commit_line(w: &mut dyn Write, c: &CommitRecord) -> io::Result<()> {
    writeln!(
        w,
        "{} {} {} {}",
        &c.commit_id[..12],
        c.timestamp,
        c.author,
        c.message
    )
}

pub fn change_line(w: &mut dyn Write, r: &ChangeRecord) -> io::Result<()> {
    let policy = r.policy.map(|p| format!(" ({p:?})")).unwrap_or_default();
    writeln!(
        w,
        "{:?} {}: {} -> {}{policy}",
        r.kind,
        r.address,
        show(&r.old),
        show(&r.new)
    )
}

pub fn firing_line(w: &mut dyn Write, f: &AlertFiring) -> io::Result<()> {
    writeln!(
        w,
        "alert {} at {}: {} -> {} ({:?}) in {}",
        f.rule_id,
        f.address,
        f.old_value,
        f.new_value,
        f.pattern,
        &f.commit_id[..12]
    )
}

pub fn rule_line(w: &mut dyn Write, r: &AlertRule) -> io::Result<()> {
    let kind = serde_json::to_string(&r.kind).map_err(io::Error::other)?;
    writeln!(w, "{} {} {kind} window={}", r.rule_id, r.target, r.window)
}

pub fn receipt_text(w: &mut dyn Write, r: &CommitReceipt, warnings: &[String]) -> io::Result<()> {
    writeln!(w, "{}", r.commit_id)?;
    writeln!(w, "snapshot {}", r.snapshot_hash)?;
    writeln!(
        w,
        "{} changes, {} exceptional",
        r.diff_summary.total, r.diff_summary.exceptional_count
    )?;
    for warning in warnings {
        writeln!(w, "warning: {warning}")?;
    }
    r.firings.iter().try_for_each(|f| firing_line(w, f))
}

pub fn compliance_text(w: &mut dyn Write, r: &ComplianceReport) -> io::Result<()> {
    writeln!(
        w,
        "manifest {}: {}",
        r.manifest_id,
        if r.compliant {
            "compliant"
        } else {
            "NOT compliant"
        }
    )?;
    writeln!(
        w,
        "{} changes, {} allowed, {} violations, {} unfulfilled",
        r.counts.changes, r.counts.allowed, r.counts.violations, r.counts.unfulfilled
    )?;
    for v in &r.violations {
        writeln!(w, "violation {:?} {}", v.kind, v.address)?;
    }
    for a in &r.unfulfilled {
        writeln!(w, "unfulfilled {a}")?;
    }
    Ok(())
}

pub fn watch_text(w: &mut dyn Write, c: &WatchConfig) -> io::Result<()> {
    if c.input_regions.is_empty() {
        return writeln!(w, "no input regions declared");
    }
    c.input_regions
        .iter()
        .try_for_each(|r| writeln!(w, "input {r}"))
}

pub fn inventory_text(w: &mut dyn Write, r: &InventoryReport) -> io::Result<()> {
    for e in &r.spreadsheet_files {
        writeln!(w, "{:>12} {:?} {}", e.bytes, e.format, e.path)?;
    }
    writeln!(
        w,
        "{} spreadsheet files of {} scanned, {} bytes",
        r.spreadsheet_files.len(),
        r.scanned_paths,
        r.total_bytes
    )?;
    let h = &r.histogram;
    writeln!(
        w,
        "<1MB: {}  1-10MB: {}  10-150MB: {}  >150MB: {}",
        h.under_1, h.from_1_to_10, h.from_10_to_150, h.over_150
    )?;
    r.warnings
        .iter()
        .try_for_each(|m| writeln!(w, "warning: {m}"))
}
