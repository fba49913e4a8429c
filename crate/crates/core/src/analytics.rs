//! Series statistics and formula-volatility scoring.
//!
//! Sums are accumulated exactly over big integers (every finite `f64` is an
//! integer multiple of a power of two) and each result is rounded to `f64`
//! once, to nearest with ties to even.

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::diff::{ChangeKind, ChangeRecord};
use crate::error::{Error, Result};
use crate::model::CellValue;

pub const DEFAULT_RETIREMENT_WINDOW: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesStats {
    pub n: usize,
    pub mean: f64,
    /// Sample variance, `n - 1` denominator.
    pub variance: f64,
    /// Least-squares slope against the indices `0..n`.
    pub slope: f64,
}

/// Extracts the numbers of a history window, failing on anything else.
pub fn numeric_series(values: &[CellValue]) -> Result<Vec<f64>> {
    values
        .iter()
        .map(|v| v.as_f64().ok_or(Error::NonNumericSeries))
        .collect()
}

/// `(mantissa, exponent)` with `x = mantissa * 2^exponent`.
fn decompose(x: f64) -> (i64, i64) {
    let bits = x.to_bits();
    let sign = if bits >> 63 == 1 { -1 } else { 1 };
    let biased = ((bits >> 52) & 0x7ff) as i64;
    let fraction = (bits & ((1u64 << 52) - 1)) as i64;
    if biased == 0 {
        (sign * fraction, -1074)
    } else {
        (sign * (fraction | (1 << 52)), biased - 1075)
    }
}

/// The series as integers on a shared scale: `values[i] = ints[i] * 2^exp`.
fn to_fixed(values: &[f64]) -> Result<(Vec<BigInt>, i64)> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonNumericSeries);
    }
    let parts: Vec<(i64, i64)> = values.iter().map(|&v| decompose(v)).collect();
    let exp = parts.iter().map(|&(_, e)| e).min().unwrap_or(0);
    let ints = parts
        .into_iter()
        .map(|(m, e)| BigInt::from(m) << ((e - exp) as usize))
        .collect();
    Ok((ints, exp))
}

fn scale_by_pow2(mut x: f64, mut e: i64) -> f64 {
    while e > 0 {
        let step = e.min(1000);
        x *= f64::powi(2.0, step as i32);
        e -= step;
    }
    while e < 0 {
        let step = (-e).min(1000);
        x *= f64::powi(2.0, -(step as i32));
        e += step;
    }
    x
}

/// Rounds `p / q * 2^exp2` to the nearest `f64`, ties to even.
pub(crate) fn round_ratio(p: &BigInt, q: &BigInt, exp2: i64) -> f64 {
    assert!(q.is_positive(), "denominator must be positive");
    if p.is_zero() {
        return 0.0;
    }
    let negative = p.sign() == Sign::Minus;
    let p = p.abs();

    // Scale so the integer quotient carries at least 55 significant bits.
    let shift = 55 - (p.bits() as i64 - q.bits() as i64);
    let (quotient, remainder) = if shift >= 0 {
        (p << shift as usize).div_rem(q)
    } else {
        p.div_rem(&(q << (-shift) as usize))
    };
    let sticky = !remainder.is_zero();
    let lsb_exp = exp2 - shift;

    let excess = quotient.bits() as i64 - 53;
    let drop = excess.max(-1074 - lsb_exp).max(0);
    let mut kept = &quotient >> drop as usize;
    if drop > 0 {
        let dropped = &quotient - (&kept << drop as usize);
        let half = BigInt::one() << (drop - 1) as usize;
        let round_up = match dropped.cmp(&half) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Equal => sticky || kept.is_odd(),
            std::cmp::Ordering::Less => false,
        };
        if round_up {
            kept += 1;
        }
    }
    let magnitude = scale_by_pow2(
        kept.to_u64().expect("at most 54 bits") as f64,
        lsb_exp + drop,
    );
    if negative {
        -magnitude
    } else {
        magnitude
    }
}

fn check_len(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::SeriesTooShort(n));
    }
    Ok(())
}

pub fn series_stats(values: &[f64]) -> Result<SeriesStats> {
    let n = values.len();
    check_len(n)?;
    let (xs, exp) = to_fixed(values)?;
    let nb = BigInt::from(n);

    let sum: BigInt = xs.iter().sum();
    let sum_sq: BigInt = xs.iter().map(|x| x * x).sum();
    let sum_tx: BigInt = xs
        .iter()
        .enumerate()
        .map(|(t, x)| x * BigInt::from(t))
        .sum();
    // Σt = n(n-1)/2, Σt² = (n-1)n(2n-1)/6
    let sum_t = BigInt::from(n * (n - 1) / 2);
    let sum_tt = BigInt::from(n) * BigInt::from(n - 1) * BigInt::from(2 * n - 1) / 6;

    let mean = round_ratio(&sum, &nb, exp);
    let variance = round_ratio(
        &(&nb * &sum_sq - &sum * &sum),
        &(&nb * BigInt::from(n - 1)),
        2 * exp,
    );
    let slope = round_ratio(
        &(&nb * &sum_tx - &sum_t * &sum),
        &(&nb * &sum_tt - &sum_t * &sum_t),
        exp,
    );
    Ok(SeriesStats {
        n,
        mean,
        variance,
        slope,
    })
}

/// Sample covariance of two series aligned by index.
pub fn covariance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    check_len(n)?;
    let (xs, ex) = to_fixed(a)?;
    let (ys, ey) = to_fixed(b)?;
    let nb = BigInt::from(n);
    let sx: BigInt = xs.iter().sum();
    let sy: BigInt = ys.iter().sum();
    let sxy: BigInt = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    Ok(round_ratio(
        &(&nb * sxy - sx * sy),
        &(&nb * BigInt::from(n - 1)),
        ex + ey,
    ))
}

/// Whether a transition counts against retirement: any formula edit, any
/// structural change, or a formula cell appearing or disappearing.
pub fn is_volatile_transition(changes: &[ChangeRecord]) -> bool {
    changes.iter().any(|r| match r.kind {
        ChangeKind::FormulaChanged | ChangeKind::ValueAndFormulaChanged => true,
        kind if kind.is_structural() => true,
        ChangeKind::CellAdded | ChangeKind::CellRemoved => r.touches_formula(),
        _ => false,
    })
}

/// Fraction of the last `min(window, len)` transitions flagged volatile; 0 with none.
pub fn formula_volatility(volatile: &[bool], window: usize) -> Result<f64> {
    if window == 0 {
        return Err(Error::InvalidArgument("window must be at least 1".into()));
    }
    let tail = &volatile[volatile.len().saturating_sub(window)..];
    if tail.is_empty() {
        return Ok(0.0);
    }
    Ok(tail.iter().filter(|&&v| v).count() as f64 / tail.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Ready,
    NotReady,
    InsufficientHistory,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetirementReport {
    pub workbook_id: String,
    pub window: usize,
    pub commits_considered: usize,
    pub formula_change_commits: usize,
    pub volatility: f64,
    pub verdict: Verdict,
}

/// Scores a lineage from its per-transition volatility flags, oldest first.
pub fn retirement_report(
    workbook_id: &str,
    window: usize,
    volatile: &[bool],
) -> Result<RetirementReport> {
    let volatility = formula_volatility(volatile, window)?;
    let considered = window.min(volatile.len());
    let formula_change_commits = volatile[volatile.len() - considered..]
        .iter()
        .filter(|&&v| v)
        .count();
    let verdict = if volatile.len() < window {
        Verdict::InsufficientHistory
    } else if formula_change_commits == 0 {
        Verdict::Ready
    } else {
        Verdict::NotReady
    };
    Ok(RetirementReport {
        workbook_id: workbook_id.to_string(),
        window,
        commits_considered: considered,
        formula_change_commits,
        volatility,
        verdict,
    })
}
