//! Reference implementations written for obviousness, not speed.

use std::collections::BTreeSet;

use cellvault_core::alert::PatternLabel;
use cellvault_core::diff::{ChangeKind, ChangeRecord};
use cellvault_core::model::{Cell, CellAddress, CellValue, Sheet, WorkbookSnapshot};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

// ---- diff ----

fn extent(sheet: Option<&Sheet>) -> (u32, u32) {
    sheet.map_or((0, 0), |s| {
        s.iter()
            .fold((0, 0), |(mr, mc), ((r, c), _)| (mr.max(r), mc.max(c)))
    })
}

/// Scans the full bounding grid of every sheet on either side and compares
/// position by position.
pub fn diff(old: &WorkbookSnapshot, new: &WorkbookSnapshot) -> Vec<ChangeRecord> {
    let names: BTreeSet<&str> = old.sheets().chain(new.sheets()).map(|(n, _)| n).collect();
    let mut out = Vec::new();
    for name in names {
        let a = old.sheet(name);
        let b = new.sheet(name);
        let sheet_kind = match (a.is_some(), b.is_some()) {
            (true, false) => Some(ChangeKind::SheetRemoved),
            (false, true) => Some(ChangeKind::SheetAdded),
            _ => None,
        };
        let (ra, ca) = extent(a);
        let (rb, cb) = extent(b);
        let (rows, cols) = (ra.max(rb), ca.max(cb));
        if let Some(kind) = sheet_kind {
            if rows == 0 {
                out.push(record(name, 1, 1, kind, None, None));
                continue;
            }
        }
        for r in 1..=rows {
            for c in 1..=cols {
                let x = a.and_then(|s| s.get(r, c));
                let y = b.and_then(|s| s.get(r, c));
                let kind = match (x, y) {
                    (None, None) => continue,
                    _ if sheet_kind.is_some() => sheet_kind.unwrap(),
                    (Some(_), None) => ChangeKind::CellRemoved,
                    (None, Some(_)) => ChangeKind::CellAdded,
                    (Some(p), Some(q)) => match (p.value == q.value, p.formula == q.formula) {
                        (true, true) => continue,
                        (false, true) => ChangeKind::ValueChanged,
                        (true, false) => ChangeKind::FormulaChanged,
                        (false, false) => ChangeKind::ValueAndFormulaChanged,
                    },
                };
                out.push(record(name, r, c, kind, x.cloned(), y.cloned()));
            }
        }
    }
    out
}

fn record(
    sheet: &str,
    r: u32,
    c: u32,
    kind: ChangeKind,
    old: Option<Cell>,
    new: Option<Cell>,
) -> ChangeRecord {
    ChangeRecord {
        address: CellAddress::new(sheet, r, c).unwrap(),
        kind,
        old,
        new,
        policy: None,
    }
}

// ---- statistics ----

fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

fn exact_value(x: f64) -> BigRational {
    if x == 0.0 {
        BigRational::zero()
    } else {
        exact(x)
    }
}

/// The `f64` nearest to `r`, ties to the even significand.
pub fn nearest_f64(r: &BigRational) -> f64 {
    let guess = r.to_f64().expect("in range");
    assert!(guess.is_finite());
    let mut best = guess;
    for cand in [guess.next_down(), guess.next_up()] {
        if !cand.is_finite() {
            continue;
        }
        let d_best = (exact_value(best) - r).abs();
        let d_cand = (exact_value(cand) - r).abs();
        if d_cand < d_best || (d_cand == d_best && cand.to_bits() & 1 == 0) {
            best = cand;
        }
    }
    if best == 0.0 {
        0.0
    } else {
        best
    }
}

fn mean_exact(xs: &[BigRational]) -> BigRational {
    let n = BigRational::from_integer(BigInt::from(xs.len()));
    xs.iter().cloned().fold(BigRational::zero(), |a, b| a + b) / n
}

/// Two-pass sample covariance over exact rationals.
fn cov_exact(xs: &[BigRational], ys: &[BigRational]) -> BigRational {
    let (mx, my) = (mean_exact(xs), mean_exact(ys));
    let sum = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - &mx) * (y - &my))
        .fold(BigRational::zero(), |a, b| a + b);
    sum / BigRational::from_integer(BigInt::from(xs.len() - 1))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stats {
    pub mean: f64,
    pub variance: f64,
    pub slope: f64,
}

pub fn stats(values: &[f64]) -> Stats {
    let xs: Vec<BigRational> = values.iter().map(|&v| exact_value(v)).collect();
    let ts: Vec<BigRational> = (0..values.len())
        .map(|t| BigRational::from_integer(BigInt::from(t)))
        .collect();
    Stats {
        mean: nearest_f64(&mean_exact(&xs)),
        variance: nearest_f64(&cov_exact(&xs, &xs)),
        slope: nearest_f64(&(cov_exact(&ts, &xs) / cov_exact(&ts, &ts))),
    }
}

pub fn covariance(a: &[f64], b: &[f64]) -> f64 {
    let xs: Vec<BigRational> = a.iter().map(|&v| exact_value(v)).collect();
    let ys: Vec<BigRational> = b.iter().map(|&v| exact_value(v)).collect();
    nearest_f64(&cov_exact(&xs, &ys))
}

// ---- pattern labels ----

/// Every label whose defining condition holds, in precedence order.
pub fn matching_labels(values: &[CellValue]) -> Vec<PatternLabel> {
    let nums: Option<Vec<f64>> = values.iter().map(CellValue::as_f64).collect();
    let Some(v) = nums else {
        return vec![PatternLabel::NonNumeric];
    };
    let k = v.len();
    let signs: Vec<i8> = (0..k - 1).map(|i| sign_of_step(v[i], v[i + 1])).collect();
    let nonzero: Vec<i8> = signs.iter().copied().filter(|&s| s != 0).collect();

    let mut labels = Vec::new();
    if v.iter().all(|&x| x == v[0]) {
        labels.push(PatternLabel::Stable);
    }
    if v[..k - 1].iter().all(|&x| x == v[0]) && v[k - 1] != v[0] {
        labels.push(PatternLabel::Step);
    }
    if signs.iter().all(|&s| s != 0) && signs.iter().all(|&s| s == signs[0]) {
        labels.push(PatternLabel::Trend);
    }
    if signs.iter().all(|&s| s != 0) && signs.windows(2).all(|w| w[0] == -w[1]) {
        labels.push(PatternLabel::Oscillation);
    }
    if nonzero.len() >= 2 && nonzero[nonzero.len() - 1] == -nonzero[nonzero.len() - 2] {
        labels.push(PatternLabel::Reversal);
    }
    labels.push(PatternLabel::Irregular);
    labels
}

/// Sign of `b - a`, read from a comparison so huge values cannot overflow.
fn sign_of_step(a: f64, b: f64) -> i8 {
    (b > a) as i8 - (b < a) as i8
}

pub fn pattern(values: &[CellValue]) -> PatternLabel {
    matching_labels(values)[0]
}
