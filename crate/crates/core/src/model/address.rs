//! Cell addresses, A1 notation and rectangular regions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Parses A1 notation into 1-based `(col, row)`.
///
/// Column letters are bijective base-26 and case-insensitive.
pub fn parse_a1(text: &str) -> Result<(u32, u32)> {
    let bad = || Error::MalformedAddress(text.to_string());
    let split = text
        .find(|c: char| !c.is_ascii_alphabetic())
        .ok_or_else(bad)?;
    let (letters, digits) = text.split_at(split);
    if letters.is_empty() || digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let mut col: u32 = 0;
    for b in letters.bytes() {
        let v = u32::from(b.to_ascii_uppercase() - b'A') + 1;
        col = col
            .checked_mul(26)
            .and_then(|c| c.checked_add(v))
            .ok_or_else(bad)?;
    }
    let row: u32 = digits.parse().map_err(|_| bad())?;
    if row == 0 {
        return Err(bad());
    }
    Ok((col, row))
}

/// Column letters for a 1-based column index.
pub fn column_name(mut col: u32) -> String {
    let mut out = Vec::new();
    while col > 0 {
        let rem = (col - 1) % 26;
        out.push(b'A' + rem as u8);
        col = (col - 1) / 26;
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

pub fn format_a1(col: u32, row: u32) -> String {
    format!("{}{}", column_name(col), row)
}

fn needs_quotes(sheet: &str) -> bool {
    let mut chars = sheet.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return true,
    }
    !chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

fn write_sheet(f: &mut fmt::Formatter<'_>, sheet: &str) -> fmt::Result {
    if needs_quotes(sheet) {
        write!(f, "'{}'", sheet.replace('\'', "''"))
    } else {
        f.write_str(sheet)
    }
}

/// Splits `Sheet!REST` / `'Quoted ''name'''!REST` into sheet and remainder.
fn split_sheet(text: &str) -> Option<(String, &str)> {
    if let Some(quoted) = text.strip_prefix('\'') {
        let mut name = String::new();
        let mut chars = quoted.char_indices();
        while let Some((i, c)) = chars.next() {
            if c == '\'' {
                if quoted[i + 1..].starts_with('\'') {
                    name.push('\'');
                    chars.next();
                } else {
                    let rest = quoted[i + 1..].strip_prefix('!')?;
                    return Some((name, rest));
                }
            } else {
                name.push(c);
            }
        }
        None
    } else {
        let (sheet, rest) = text.rsplit_once('!')?;
        Some((sheet.to_string(), rest))
    }
}

/// A fully-qualified cell position. Ordering is (sheet, row, col).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellAddress {
    sheet: String,
    row: u32,
    col: u32,
}

impl CellAddress {
    pub fn new(sheet: impl Into<String>, row: u32, col: u32) -> Result<Self> {
        let sheet = sheet.into();
        if sheet.is_empty() || row == 0 || col == 0 {
            return Err(Error::MalformedAddress(format!("{sheet}:r{row}c{col}")));
        }
        Ok(Self { sheet, row, col })
    }

    /// Builds an address from a sheet name and A1 text.
    pub fn from_a1(sheet: impl Into<String>, a1: &str) -> Result<Self> {
        let (col, row) = parse_a1(a1)?;
        Self::new(sheet, row, col)
    }

    pub fn sheet(&self) -> &str {
        &self.sheet
    }

    pub fn row(&self) -> u32 {
        self.row
    }

    pub fn col(&self) -> u32 {
        self.col
    }

    pub fn a1(&self) -> String {
        format_a1(self.col, self.row)
    }
}

impl fmt::Display for CellAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_sheet(f, &self.sheet)?;
        write!(f, "!{}", self.a1())
    }
}

impl FromStr for CellAddress {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (sheet, a1) = split_sheet(s).ok_or_else(|| Error::MalformedAddress(s.to_string()))?;
        Self::from_a1(sheet, a1)
    }
}

impl Serialize for CellAddress {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CellAddress {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Inclusive rectangle of 1-based coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Rect {
    pub top: u32,
    pub left: u32,
    pub bottom: u32,
    pub right: u32,
}

impl Rect {
    pub fn new(top: u32, left: u32, bottom: u32, right: u32) -> Result<Self> {
        if top == 0 || left == 0 || top > bottom || left > right {
            return Err(Error::MalformedRegion(format!(
                "R{top}C{left}:R{bottom}C{right}"
            )));
        }
        Ok(Self {
            top,
            left,
            bottom,
            right,
        })
    }

    pub fn contains(&self, row: u32, col: u32) -> bool {
        (self.top..=self.bottom).contains(&row) && (self.left..=self.right).contains(&col)
    }

    pub fn rows(&self) -> u32 {
        self.bottom - self.top + 1
    }

    pub fn cols(&self) -> u32 {
        self.right - self.left + 1
    }
}

impl fmt::Display for Rect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.top == self.bottom && self.left == self.right {
            f.write_str(&format_a1(self.left, self.top))
        } else {
            write!(
                f,
                "{}:{}",
                format_a1(self.left, self.top),
                format_a1(self.right, self.bottom)
            )
        }
    }
}

impl FromStr for Rect {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let malformed = |_| Error::MalformedRegion(s.to_string());
        let (a, b) = s.split_once(':').unwrap_or((s, s));
        let (left, top) = parse_a1(a).map_err(malformed)?;
        let (right, bottom) = parse_a1(b).map_err(malformed)?;
        Rect::new(top, left, bottom, right).map_err(|_| Error::MalformedRegion(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum SheetPattern {
    Any,
    Exact(String),
}

impl SheetPattern {
    pub fn matches(&self, sheet: &str) -> bool {
        match self {
            SheetPattern::Any => true,
            SheetPattern::Exact(name) => name == sheet,
        }
    }
}

/// A rectangle on one sheet, or on every sheet when the pattern is `*`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Region {
    pub sheet: SheetPattern,
    pub rect: Rect,
}

impl Region {
    pub fn new(sheet: SheetPattern, rect: Rect) -> Self {
        Self { sheet, rect }
    }

    pub fn contains(&self, address: &CellAddress) -> bool {
        self.sheet.matches(address.sheet()) && self.rect.contains(address.row(), address.col())
    }

    /// The sheet name, when the region names exactly one sheet.
    pub fn exact_sheet(&self) -> Option<&str> {
        match &self.sheet {
            SheetPattern::Exact(name) => Some(name),
            SheetPattern::Any => None,
        }
    }

    /// Every address in the rectangle, row-major. Requires an exact sheet.
    pub fn addresses(&self) -> Option<impl Iterator<Item = CellAddress> + '_> {
        let sheet = self.exact_sheet()?;
        let rect = self.rect;
        Some((rect.top..=rect.bottom).flat_map(move |row| {
            (rect.left..=rect.right).map(move |col| CellAddress {
                sheet: sheet.to_string(),
                row,
                col,
            })
        }))
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.sheet {
            SheetPattern::Any => f.write_str("*")?,
            SheetPattern::Exact(name) => write_sheet(f, name)?,
        }
        write!(f, "!{}", self.rect)
    }
}

impl FromStr for Region {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (sheet, rest) = split_sheet(s).ok_or_else(|| Error::MalformedRegion(s.to_string()))?;
        let pattern = if sheet == "*" && !s.starts_with('\'') {
            SheetPattern::Any
        } else if sheet.is_empty() {
            return Err(Error::MalformedRegion(s.to_string()));
        } else {
            SheetPattern::Exact(sheet)
        };
        Ok(Region::new(pattern, rest.parse()?))
    }
}

impl Serialize for Region {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Region {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
