//! Declarative alert rules evaluated at commit time, with a pattern label for
//! the recent history of every firing cell.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::diff::{diff, ChangeRecord};
use crate::error::{Error, Result};
use crate::model::{CellAddress, CellValue, Region, SheetPattern, WorkbookSnapshot};

pub const DEFAULT_WINDOW: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PatternLabel {
    Stable,
    Step,
    Trend,
    Oscillation,
    Reversal,
    Irregular,
    NonNumeric,
}

/// Labels a window of values; the first matching rule wins.
///
/// 1. any non-number: `NonNumeric`
/// 2. all equal: `Stable`
/// 3. all but the last equal: `Step`
/// 4. every step moves, same direction: `Trend`
/// 5. every step moves, alternating direction: `Oscillation`
/// 6. last move opposes the previous move: `Reversal`
/// 7. otherwise `Irregular`
///
/// Only equality and the sign of each step matter, so the label is invariant
/// under positive scaling and shifting.
pub fn classify_pattern(values: &[CellValue]) -> Result<PatternLabel> {
    if values.len() < 2 {
        return Err(Error::WindowTooShort(values.len()));
    }
    let Some(nums) = values
        .iter()
        .map(CellValue::as_f64)
        .collect::<Option<Vec<f64>>>()
    else {
        return Ok(PatternLabel::NonNumeric);
    };
    let first = nums[0];
    let last = nums[nums.len() - 1];
    let head = &nums[..nums.len() - 1];
    if head.iter().all(|&v| v == first) {
        return Ok(if last == first {
            PatternLabel::Stable
        } else {
            PatternLabel::Step
        });
    }

    let moves: Vec<Ordering> = nums
        .windows(2)
        .map(|w| w[1].partial_cmp(&w[0]).expect("numbers are finite"))
        .collect();
    if moves.iter().all(|m| m.is_ne()) {
        if moves.windows(2).all(|w| w[0] == w[1]) {
            return Ok(PatternLabel::Trend);
        }
        if moves.windows(2).all(|w| w[0] != w[1]) {
            return Ok(PatternLabel::Oscillation);
        }
    }
    let mut nonzero = moves.iter().rev().filter(|m| m.is_ne());
    if let (Some(last_move), Some(prev_move)) = (nonzero.next(), nonzero.next()) {
        if last_move != prev_move {
            return Ok(PatternLabel::Reversal);
        }
    }
    Ok(PatternLabel::Irregular)
}

/// A single cell, or every populated cell inside a region.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RuleTarget {
    Cell(CellAddress),
    Region(Region),
}

impl fmt::Display for RuleTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleTarget::Cell(a) => a.fmt(f),
            RuleTarget::Region(r) => r.fmt(f),
        }
    }
}

impl FromStr for RuleTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let region: Region = s.parse()?;
        let r = region.rect;
        match &region.sheet {
            SheetPattern::Exact(sheet) if r.top == r.bottom && r.left == r.right => Ok(
                RuleTarget::Cell(CellAddress::new(sheet.clone(), r.top, r.left)?),
            ),
            _ => Ok(RuleTarget::Region(region)),
        }
    }
}

impl Serialize for RuleTarget {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RuleTarget {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RuleKind {
    /// Fires when the value crosses upward: `old < threshold <= new`.
    ThresholdUp {
        threshold: f64,
    },
    /// Fires when the value crosses downward: `old > threshold >= new`.
    ThresholdDown {
        threshold: f64,
    },
    /// Fires when `|new - old| > delta`.
    DeltaAbs {
        delta: f64,
    },
    /// Fires on entry into breach: old inside `[lo, hi]`, new outside.
    RangeBreach {
        lo: f64,
        hi: f64,
    },
    FormulaChanged,
}

fn default_window() -> usize {
    DEFAULT_WINDOW
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlertRule {
    #[serde(default)]
    pub rule_id: String,
    pub target: RuleTarget,
    pub kind: RuleKind,
    #[serde(default = "default_window")]
    pub window: usize,
}

impl AlertRule {
    pub fn new(rule_id: impl Into<String>, target: RuleTarget, kind: RuleKind) -> Self {
        Self {
            rule_id: rule_id.into(),
            target,
            kind,
            window: DEFAULT_WINDOW,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::RuleInvalid(format!("{}: {msg}", self.rule_id)));
        if self.window < 2 {
            return invalid(format!("window must be at least 2, got {}", self.window));
        }
        let finite = |x: f64| x.is_finite();
        match self.kind {
            RuleKind::ThresholdUp { threshold } | RuleKind::ThresholdDown { threshold }
                if !finite(threshold) =>
            {
                invalid("threshold must be finite".into())
            }
            RuleKind::DeltaAbs { delta } if !(finite(delta) && delta > 0.0) => {
                invalid(format!("delta must be a positive number, got {delta}"))
            }
            RuleKind::RangeBreach { lo, hi } if !(finite(lo) && finite(hi) && lo <= hi) => {
                invalid(format!("range requires lo <= hi, got [{lo}, {hi}]"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlertFiring {
    pub rule_id: String,
    pub address: CellAddress,
    pub commit_id: String,
    pub old_value: CellValue,
    pub new_value: CellValue,
    pub window_values: Vec<CellValue>,
    pub pattern: PatternLabel,
}

/// Read access to committed history, used to build firing windows.
pub trait HistoryAccess {
    /// The cell's values at the last `count` committed versions, oldest first,
    /// with absent cells reported as `Empty`. Fewer when the lineage is shorter.
    fn recent_values(&self, address: &CellAddress, count: usize) -> Result<Vec<CellValue>>;
}

/// In-memory lineage, oldest snapshot first.
impl HistoryAccess for [WorkbookSnapshot] {
    fn recent_values(&self, address: &CellAddress, count: usize) -> Result<Vec<CellValue>> {
        let start = self.len().saturating_sub(count);
        Ok(self[start..]
            .iter()
            .map(|s| s.cell(address).map(|c| c.value.clone()).unwrap_or_default())
            .collect())
    }
}

fn fires(kind: &RuleKind, old: &CellValue, new: &CellValue, change: Option<&ChangeRecord>) -> bool {
    if let RuleKind::FormulaChanged = kind {
        return change.is_some_and(ChangeRecord::touches_formula);
    }
    let (Some(old), Some(new)) = (old.as_f64(), new.as_f64()) else {
        return false;
    };
    match *kind {
        RuleKind::ThresholdUp { threshold } => old < threshold && threshold <= new,
        RuleKind::ThresholdDown { threshold } => old > threshold && threshold >= new,
        RuleKind::DeltaAbs { delta } => (new - old).abs() > delta,
        RuleKind::RangeBreach { lo, hi } => {
            let inside = |x: f64| lo <= x && x <= hi;
            inside(old) && !inside(new)
        }
        RuleKind::FormulaChanged => unreachable!(),
    }
}

fn target_addresses(
    target: &RuleTarget,
    parent: &WorkbookSnapshot,
    new: &WorkbookSnapshot,
) -> BTreeSet<CellAddress> {
    match target {
        RuleTarget::Cell(a) => BTreeSet::from([a.clone()]),
        RuleTarget::Region(region) => {
            let mut out = BTreeSet::new();
            for snapshot in [parent, new] {
                for (name, sheet) in snapshot.sheets() {
                    if !region.sheet.matches(name) {
                        continue;
                    }
                    for ((row, col), _) in sheet.iter() {
                        if region.rect.contains(row, col) {
                            out.insert(CellAddress::new(name, row, col).expect("valid"));
                        }
                    }
                }
            }
            out
        }
    }
}

/// Evaluates `rules` for the transition `parent -> new`, committed as `commit_id`.
///
/// Firings are ordered by rule id, then address. Nothing fires without a parent.
pub fn evaluate<H: HistoryAccess + ?Sized>(
    rules: &[AlertRule],
    parent: Option<&WorkbookSnapshot>,
    new: &WorkbookSnapshot,
    commit_id: &str,
    history: &H,
) -> Result<Vec<AlertFiring>> {
    for rule in rules {
        rule.validate()?;
    }
    let Some(parent) = parent else {
        return Ok(Vec::new());
    };
    let changes: BTreeMap<CellAddress, ChangeRecord> =
        if rules.iter().any(|r| r.kind == RuleKind::FormulaChanged) {
            diff(parent, new)
                .into_iter()
                .map(|r| (r.address.clone(), r))
                .collect()
        } else {
            BTreeMap::new()
        };

    let mut ordered: Vec<&AlertRule> = rules.iter().collect();
    ordered.sort_by(|a, b| a.rule_id.cmp(&b.rule_id));

    let mut firings = Vec::new();
    for rule in ordered {
        for address in target_addresses(&rule.target, parent, new) {
            let old = parent
                .cell(&address)
                .map(|c| c.value.clone())
                .unwrap_or_default();
            let new_value = new
                .cell(&address)
                .map(|c| c.value.clone())
                .unwrap_or_default();
            if !fires(&rule.kind, &old, &new_value, changes.get(&address)) {
                continue;
            }
            let mut window_values = history.recent_values(&address, rule.window - 1)?;
            window_values.push(new_value.clone());
            let pattern = classify_pattern(&window_values)?;
            firings.push(AlertFiring {
                rule_id: rule.rule_id.clone(),
                address,
                commit_id: commit_id.to_string(),
                old_value: old,
                new_value,
                window_values,
                pattern,
            });
        }
    }
    Ok(firings)
}
