use std::collections::btree_map::{self, BTreeMap};

use crate::error::{Error, Result};
use crate::model::address::CellAddress;
use crate::model::value::Cell;

/// Sparse grid keyed by `(row, col)`. Blank cells are never stored.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Sheet {
    cells: BTreeMap<(u32, u32), Cell>,
}

impl Sheet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a new cell, rejecting blanks, zero coordinates and duplicates.
    pub fn insert(&mut self, row: u32, col: u32, cell: Cell) -> Result<()> {
        if row == 0 || col == 0 {
            return Err(Error::Constraint(format!("zero coordinate r{row}c{col}")));
        }
        if cell.is_blank() {
            return Err(Error::Constraint(format!(
                "blank cell at r{row}c{col} (empty value without formula)"
            )));
        }
        match self.cells.entry((row, col)) {
            btree_map::Entry::Occupied(_) => {
                Err(Error::Constraint(format!("duplicate address r{row}c{col}")))
            }
            btree_map::Entry::Vacant(slot) => {
                slot.insert(cell);
                Ok(())
            }
        }
    }

    /// Overwrites a cell; a blank cell removes the entry.
    pub fn set(&mut self, row: u32, col: u32, cell: Cell) {
        assert!(row >= 1 && col >= 1, "coordinates are 1-based");
        if cell.is_blank() {
            self.cells.remove(&(row, col));
        } else {
            self.cells.insert((row, col), cell);
        }
    }

    pub fn remove(&mut self, row: u32, col: u32) -> Option<Cell> {
        self.cells.remove(&(row, col))
    }

    pub fn get(&self, row: u32, col: u32) -> Option<&Cell> {
        self.cells.get(&(row, col))
    }

    /// Cells in `(row, col)` order.
    pub fn iter(&self) -> impl Iterator<Item = ((u32, u32), &Cell)> {
        self.cells.iter().map(|(k, v)| (*k, v))
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// Immutable-by-convention content of one spreadsheet version.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct WorkbookSnapshot {
    sheets: BTreeMap<String, Sheet>,
}

impl WorkbookSnapshot {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_sheet(&mut self, name: impl Into<String>, sheet: Sheet) -> Result<()> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::Constraint("empty sheet name".into()));
        }
        match self.sheets.entry(name) {
            btree_map::Entry::Occupied(e) => {
                Err(Error::Constraint(format!("duplicate sheet {:?}", e.key())))
            }
            btree_map::Entry::Vacant(slot) => {
                slot.insert(sheet);
                Ok(())
            }
        }
    }

    /// Returns the named sheet, creating it if absent.
    pub fn sheet_mut(&mut self, name: &str) -> &mut Sheet {
        assert!(!name.is_empty(), "sheet names are non-empty");
        self.sheets.entry(name.to_string()).or_default()
    }

    pub fn sheet(&self, name: &str) -> Option<&Sheet> {
        self.sheets.get(name)
    }

    pub fn remove_sheet(&mut self, name: &str) -> Option<Sheet> {
        self.sheets.remove(name)
    }

    /// Sheets in code-point order of their names.
    pub fn sheets(&self) -> impl Iterator<Item = (&str, &Sheet)> {
        self.sheets.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn sheet_count(&self) -> usize {
        self.sheets.len()
    }

    pub fn cell(&self, address: &CellAddress) -> Option<&Cell> {
        self.sheets
            .get(address.sheet())
            .and_then(|s| s.get(address.row(), address.col()))
    }

    /// Sets a cell by address, creating the sheet if needed.
    pub fn set(&mut self, address: &CellAddress, cell: Cell) {
        self.sheet_mut(address.sheet())
            .set(address.row(), address.col(), cell);
    }

    pub fn cell_count(&self) -> usize {
        self.sheets.values().map(Sheet::len).sum()
    }
}
