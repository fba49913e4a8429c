use cellvault_core::model::{Cell, CellValue, ErrorCode, Sheet, WorkbookSnapshot};
use rand::seq::IndexedRandom;
use rand::Rng;

pub const SHEET_NAMES: [&str; 6] = ["S", "Data", "Sheet 2", "Ünïcode", "it's", "Z"];

#[derive(Clone, Copy, Debug)]
pub struct Shape {
    pub max_sheets: usize,
    pub max_rows: u32,
    pub max_cols: u32,
    /// Probability that a grid position is populated.
    pub density: f64,
}

impl Default for Shape {
    fn default() -> Self {
        Self {
            max_sheets: 3,
            max_rows: 20,
            max_cols: 20,
            density: 0.3,
        }
    }
}

pub fn value<R: Rng>(rng: &mut R) -> CellValue {
    match rng.random_range(0..10) {
        0..=3 => CellValue::number(rng.random_range(-50i32..50) as f64).unwrap(),
        4 => CellValue::number(rng.random_range(-1e6..1e6)).unwrap(),
        5 => CellValue::number(f64::from_bits(rng.random::<u64>() >> 2)).unwrap(),
        6 => {
            let pool = [
                "x",
                "hello",
                "a,b",
                "say \"hi\"",
                "line\nbreak",
                "Ω≈ç",
                "007",
                " pad ",
            ];
            CellValue::text(*pool.choose(rng).unwrap())
        }
        7 => CellValue::Text(format!("t{}", rng.random_range(0..1000))),
        8 => CellValue::Boolean(rng.random()),
        _ => CellValue::Error(*ErrorCode::ALL.choose(rng).unwrap()),
    }
}

pub fn formula<R: Rng>(rng: &mut R) -> Option<String> {
    match rng.random_range(0..6) {
        0 => Some(format!("=A{}*2", rng.random_range(1..20))),
        1 => Some("=SUM(A1:A9)".to_string()),
        _ => None,
    }
}

pub fn cell<R: Rng>(rng: &mut R) -> Cell {
    let f = formula(rng);
    Cell::new(value(rng), f.as_deref())
}

pub fn sheet<R: Rng>(rng: &mut R, shape: &Shape) -> Sheet {
    let mut sheet = Sheet::new();
    let rows = rng.random_range(0..=shape.max_rows);
    let cols = rng.random_range(0..=shape.max_cols);
    for r in 1..=rows {
        for c in 1..=cols {
            if rng.random_bool(shape.density) {
                sheet.set(r, c, cell(rng));
            }
        }
    }
    sheet
}

pub fn snapshot<R: Rng>(rng: &mut R, shape: &Shape) -> WorkbookSnapshot {
    let mut wb = WorkbookSnapshot::new();
    let count = rng.random_range(0..=shape.max_sheets.min(SHEET_NAMES.len()));
    for name in SHEET_NAMES.choose_multiple(rng, count) {
        wb.add_sheet(*name, sheet(rng, shape)).unwrap();
    }
    wb
}

/// A related snapshot: some cells edited, added or removed, sheets occasionally
/// added or dropped.
pub fn mutate<R: Rng>(rng: &mut R, base: &WorkbookSnapshot, shape: &Shape) -> WorkbookSnapshot {
    let mut wb = base.clone();
    let names: Vec<String> = wb.sheets().map(|(n, _)| n.to_string()).collect();
    for name in &names {
        match rng.random_range(0..12) {
            0 => {
                wb.remove_sheet(name);
                continue;
            }
            1 => continue,
            _ => {}
        }
        let sheet = wb.sheet_mut(name);
        let edits = rng.random_range(0..8);
        for _ in 0..edits {
            let r = rng.random_range(1..=shape.max_rows.max(1));
            let c = rng.random_range(1..=shape.max_cols.max(1));
            match (sheet.get(r, c).cloned(), rng.random_range(0..4)) {
                (Some(_), 0) => {
                    sheet.remove(r, c);
                }
                (Some(old), 1) => {
                    let f = formula(rng);
                    sheet.set(r, c, Cell::new(old.value, f.as_deref()));
                }
                (Some(old), 2) => sheet.set(r, c, Cell::new(value(rng), old.formula.as_deref())),
                _ => sheet.set(r, c, cell(rng)),
            }
        }
    }
    if rng.random_range(0..6) == 0 {
        if let Some(name) = SHEET_NAMES.iter().find(|n| wb.sheet(n).is_none()) {
            wb.add_sheet(*name, sheet(rng, shape)).unwrap();
        }
    }
    wb
}

/// `len` values, mostly in `[-1e6, 1e6]` with a share of small integers.
pub fn series<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    let integers = rng.random_bool(0.3);
    (0..len)
        .map(|_| {
            if integers {
                rng.random_range(-1_000_000i64..=1_000_000) as f64
            } else {
                rng.random_range(-1e6..=1e6)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_generation_is_repeatable() {
        let shape = Shape::default();
        let a = snapshot(&mut crate::rng(7), &shape);
        let b = snapshot(&mut crate::rng(7), &shape);
        assert_eq!(a, b);
        let m = mutate(&mut crate::rng(8), &a, &shape);
        assert_eq!(m, mutate(&mut crate::rng(8), &a, &shape));
    }

    #[test]
    fn generated_cells_are_never_blank() {
        let shape = Shape::default();
        for seed in 0..50 {
            let wb = snapshot(&mut crate::rng(seed), &shape);
            for (_, sheet) in wb.sheets() {
                assert!(sheet.iter().all(|(_, c)| !c.is_blank()));
            }
        }
    }
}
