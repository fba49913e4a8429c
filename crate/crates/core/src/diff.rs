//! Cell-level differences between two snapshots, and their triage into
//! routine input changes versus exceptional ones.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::iter::Peekable;

use serde::{Deserialize, Serialize};

use crate::model::{Cell, CellAddress, Region, Sheet, WorkbookSnapshot};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ChangeKind {
    CellAdded,
    CellRemoved,
    ValueChanged,
    FormulaChanged,
    ValueAndFormulaChanged,
    SheetAdded,
    SheetRemoved,
}

impl ChangeKind {
    pub const ALL: [ChangeKind; 7] = [
        ChangeKind::CellAdded,
        ChangeKind::CellRemoved,
        ChangeKind::ValueChanged,
        ChangeKind::FormulaChanged,
        ChangeKind::ValueAndFormulaChanged,
        ChangeKind::SheetAdded,
        ChangeKind::SheetRemoved,
    ];

    pub fn is_structural(self) -> bool {
        matches!(self, ChangeKind::SheetAdded | ChangeKind::SheetRemoved)
    }

    /// The kind seen when old and new are swapped.
    pub fn inverse(self) -> ChangeKind {
        match self {
            ChangeKind::CellAdded => ChangeKind::CellRemoved,
            ChangeKind::CellRemoved => ChangeKind::CellAdded,
            ChangeKind::SheetAdded => ChangeKind::SheetRemoved,
            ChangeKind::SheetRemoved => ChangeKind::SheetAdded,
            other => other,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Policy {
    Normal,
    Exceptional,
}

/// One differing address.
///
/// Cells of a sheet that exists on only one side are reported with the sheet
/// kinds (`SheetAdded`/`SheetRemoved`). A sheet with no cells at all is
/// reported by a single marker record at its `A1` with neither `old` nor `new`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeRecord {
    pub address: CellAddress,
    pub kind: ChangeKind,
    pub old: Option<Cell>,
    pub new: Option<Cell>,
    pub policy: Option<Policy>,
}

impl ChangeRecord {
    /// False only for the empty-sheet marker records.
    pub fn is_cell_level(&self) -> bool {
        self.old.is_some() || self.new.is_some()
    }

    /// True when the formula text differs between the two sides.
    pub fn touches_formula(&self) -> bool {
        let old = self.old.as_ref().and_then(|c| c.formula.as_deref());
        let new = self.new.as_ref().and_then(|c| c.formula.as_deref());
        old != new
    }
}

pub type ChangeSet = Vec<ChangeRecord>;

fn address(sheet: &str, row: u32, col: u32) -> CellAddress {
    CellAddress::new(sheet, row, col).expect("snapshot coordinates are valid")
}

fn compare_cells(old: &Cell, new: &Cell) -> Option<ChangeKind> {
    let value_differs = old.value != new.value;
    let formula_differs = old.formula != new.formula;
    match (value_differs, formula_differs) {
        (false, false) => None,
        (true, false) => Some(ChangeKind::ValueChanged),
        (false, true) => Some(ChangeKind::FormulaChanged),
        (true, true) => Some(ChangeKind::ValueAndFormulaChanged),
    }
}

fn one_sided_sheet(out: &mut ChangeSet, name: &str, sheet: &Sheet, added: bool) {
    let kind = if added {
        ChangeKind::SheetAdded
    } else {
        ChangeKind::SheetRemoved
    };
    if sheet.is_empty() {
        out.push(ChangeRecord {
            address: address(name, 1, 1),
            kind,
            old: None,
            new: None,
            policy: None,
        });
        return;
    }
    for ((row, col), cell) in sheet.iter() {
        let (old, new) = if added {
            (None, Some(cell.clone()))
        } else {
            (Some(cell.clone()), None)
        };
        out.push(ChangeRecord {
            address: address(name, row, col),
            kind,
            old,
            new,
            policy: None,
        });
    }
}

fn diff_sheet(out: &mut ChangeSet, name: &str, old: &Sheet, new: &Sheet) {
    let mut a = old.iter().peekable();
    let mut b = new.iter().peekable();
    loop {
        let ord = match (a.peek(), b.peek()) {
            (None, None) => break,
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (Some((ka, _)), Some((kb, _))) => ka.cmp(kb),
        };
        let record = match ord {
            Ordering::Less => {
                let ((row, col), cell) = a.next().expect("peeked");
                Some(ChangeRecord {
                    address: address(name, row, col),
                    kind: ChangeKind::CellRemoved,
                    old: Some(cell.clone()),
                    new: None,
                    policy: None,
                })
            }
            Ordering::Greater => {
                let ((row, col), cell) = b.next().expect("peeked");
                Some(ChangeRecord {
                    address: address(name, row, col),
                    kind: ChangeKind::CellAdded,
                    old: None,
                    new: Some(cell.clone()),
                    policy: None,
                })
            }
            Ordering::Equal => {
                let ((row, col), old_cell) = a.next().expect("peeked");
                let (_, new_cell) = b.next().expect("peeked");
                compare_cells(old_cell, new_cell).map(|kind| ChangeRecord {
                    address: address(name, row, col),
                    kind,
                    old: Some(old_cell.clone()),
                    new: Some(new_cell.clone()),
                    policy: None,
                })
            }
        };
        out.extend(record);
    }
}

fn merge_sheets<'a, A, B>(mut a: Peekable<A>, mut b: Peekable<B>, out: &mut ChangeSet)
where
    A: Iterator<Item = (&'a str, &'a Sheet)>,
    B: Iterator<Item = (&'a str, &'a Sheet)>,
{
    loop {
        let ord = match (a.peek(), b.peek()) {
            (None, None) => break,
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (Some((na, _)), Some((nb, _))) => na.cmp(nb),
        };
        match ord {
            Ordering::Less => {
                let (name, sheet) = a.next().expect("peeked");
                one_sided_sheet(out, name, sheet, false);
            }
            Ordering::Greater => {
                let (name, sheet) = b.next().expect("peeked");
                one_sided_sheet(out, name, sheet, true);
            }
            Ordering::Equal => {
                let (name, old) = a.next().expect("peeked");
                let (_, new) = b.next().expect("peeked");
                if old != new {
                    diff_sheet(out, name, old, new);
                }
            }
        }
    }
}

/// Cell-level differences, sorted by (sheet, row, col). Policies are unset.
pub fn diff(old: &WorkbookSnapshot, new: &WorkbookSnapshot) -> ChangeSet {
    let mut out = Vec::new();
    merge_sheets(old.sheets().peekable(), new.sheets().peekable(), &mut out);
    out
}

/// Declared input areas whose value-only edits are routine.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WatchConfig {
    #[serde(default)]
    pub input_regions: Vec<Region>,
}

impl WatchConfig {
    pub fn new(input_regions: Vec<Region>) -> Self {
        Self { input_regions }
    }

    fn is_input(&self, address: &CellAddress) -> bool {
        self.input_regions.iter().any(|r| r.contains(address))
    }

    pub fn policy_for(&self, record: &ChangeRecord) -> Policy {
        let formula_free = |c: &Option<Cell>| c.as_ref().is_some_and(|c| c.formula.is_none());
        if record.kind == ChangeKind::ValueChanged
            && formula_free(&record.old)
            && formula_free(&record.new)
            && self.is_input(&record.address)
        {
            Policy::Normal
        } else {
            Policy::Exceptional
        }
    }
}

/// Assigns a policy to every record.
pub fn classify(mut changes: ChangeSet, config: &WatchConfig) -> ChangeSet {
    for record in &mut changes {
        record.policy = Some(config.policy_for(record));
    }
    changes
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffSummary {
    pub total: usize,
    pub by_kind: BTreeMap<ChangeKind, usize>,
    pub by_sheet: BTreeMap<String, usize>,
    pub exceptional_count: usize,
}

pub fn summarize(changes: &[ChangeRecord]) -> DiffSummary {
    let mut by_kind: BTreeMap<ChangeKind, usize> =
        ChangeKind::ALL.iter().map(|k| (*k, 0)).collect();
    let mut by_sheet: BTreeMap<String, usize> = BTreeMap::new();
    let mut exceptional_count = 0;
    for record in changes {
        *by_kind.entry(record.kind).or_default() += 1;
        *by_sheet
            .entry(record.address.sheet().to_string())
            .or_default() += 1;
        if record.policy == Some(Policy::Exceptional) {
            exceptional_count += 1;
        }
    }
    DiffSummary {
        total: changes.len(),
        by_kind,
        by_sheet,
        exceptional_count,
    }
}
