use std::fmt;
use std::str::FromStr;

use serde::de::{self, Deserializer};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The seven spreadsheet error literals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ErrorCode {
    Div0,
    NotAvailable,
    Name,
    Null,
    Num,
    Ref,
    Value,
}

impl ErrorCode {
    pub const ALL: [ErrorCode; 7] = [
        ErrorCode::Div0,
        ErrorCode::NotAvailable,
        ErrorCode::Name,
        ErrorCode::Null,
        ErrorCode::Num,
        ErrorCode::Ref,
        ErrorCode::Value,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::Div0 => "#DIV/0!",
            ErrorCode::NotAvailable => "#N/A",
            ErrorCode::Name => "#NAME?",
            ErrorCode::Null => "#NULL!",
            ErrorCode::Num => "#NUM!",
            ErrorCode::Ref => "#REF!",
            ErrorCode::Value => "#VALUE!",
        }
    }
}

impl FromStr for ErrorCode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ErrorCode::ALL
            .into_iter()
            .find(|code| code.as_str() == s)
            .ok_or_else(|| Error::Constraint(format!("unknown error literal {s:?}")))
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A finite IEEE-754 double with negative zero folded into positive zero.
///
/// Equality and hashing go through the bit pattern.
#[derive(Clone, Copy, Debug)]
pub struct Number(f64);

impl Number {
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::Constraint(format!("non-finite number {value}")));
        }
        Ok(Number(if value == 0.0 { 0.0 } else { value }))
    }

    pub fn from_bits(bits: u64) -> Result<Self> {
        Number::new(f64::from_bits(bits))
    }

    pub fn get(self) -> f64 {
        self.0
    }

    pub fn to_bits(self) -> u64 {
        self.0.to_bits()
    }
}

impl PartialEq for Number {
    fn eq(&self, other: &Self) -> bool {
        self.to_bits() == other.to_bits()
    }
}

impl Eq for Number {}

impl std::hash::Hash for Number {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.to_bits().hash(state);
    }
}

impl PartialOrd for Number {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Number {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub enum CellValue {
    #[default]
    Empty,
    Number(Number),
    Text(String),
    Boolean(bool),
    Error(ErrorCode),
}

impl CellValue {
    pub fn number(value: f64) -> Result<Self> {
        Number::new(value).map(CellValue::Number)
    }

    pub fn text(value: impl Into<String>) -> Self {
        CellValue::Text(value.into())
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, CellValue::Empty)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            CellValue::Number(n) => Some(n.get()),
            _ => None,
        }
    }
}

impl From<Number> for CellValue {
    fn from(n: Number) -> Self {
        CellValue::Number(n)
    }
}

impl From<bool> for CellValue {
    fn from(b: bool) -> Self {
        CellValue::Boolean(b)
    }
}

impl From<ErrorCode> for CellValue {
    fn from(e: ErrorCode) -> Self {
        CellValue::Error(e)
    }
}

impl fmt::Display for CellValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellValue::Empty => Ok(()),
            CellValue::Number(n) => n.fmt(f),
            CellValue::Text(s) => f.write_str(s),
            CellValue::Boolean(true) => f.write_str("TRUE"),
            CellValue::Boolean(false) => f.write_str("FALSE"),
            CellValue::Error(e) => e.fmt(f),
        }
    }
}

// Payload form: null, number, string, bool, or {"error": "#N/A"}.
impl Serialize for CellValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            CellValue::Empty => s.serialize_unit(),
            CellValue::Number(n) => s.serialize_f64(n.get()),
            CellValue::Text(t) => s.serialize_str(t),
            CellValue::Boolean(b) => s.serialize_bool(*b),
            CellValue::Error(e) => {
                let mut map = s.serialize_map(Some(1))?;
                map.serialize_entry("error", e.as_str())?;
                map.end()
            }
        }
    }
}

impl<'de> Deserialize<'de> for CellValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Null(()),
            Num(f64),
            Text(String),
            Bool(bool),
            Err { error: String },
        }
        Ok(match Repr::deserialize(d)? {
            Repr::Null(()) => CellValue::Empty,
            Repr::Num(x) => CellValue::number(x).map_err(de::Error::custom)?,
            Repr::Text(t) => CellValue::Text(t),
            Repr::Bool(b) => CellValue::Boolean(b),
            Repr::Err { error } => CellValue::Error(error.parse().map_err(de::Error::custom)?),
        })
    }
}

/// A cell's cached value plus optional formula text.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Cell {
    pub value: CellValue,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub formula: Option<String>,
}

impl Cell {
    /// Formula text is trimmed; an all-whitespace formula counts as none.
    pub fn new(value: CellValue, formula: Option<&str>) -> Self {
        let formula = formula
            .map(str::trim)
            .filter(|f| !f.is_empty())
            .map(str::to_string);
        Cell { value, formula }
    }

    pub fn value(value: CellValue) -> Self {
        Cell {
            value,
            formula: None,
        }
    }

    /// Empty value and no formula; never stored in a sheet.
    pub fn is_blank(&self) -> bool {
        self.value.is_empty() && self.formula.is_none()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_invariants() {
        assert!(Number::new(f64::NAN).is_err());
        assert!(Number::new(f64::INFINITY).is_err());
        assert_eq!(Number::new(-0.0).unwrap().to_bits(), 0);
        assert!(Number::from_bits(0x7ff8_0000_0000_0000).is_err());
        assert_eq!(
            Number::from_bits(0x8000_0000_0000_0000).unwrap().to_bits(),
            0
        );
    }

    #[test]
    fn error_literals() {
        for code in ErrorCode::ALL {
            assert_eq!(code.as_str().parse::<ErrorCode>().unwrap(), code);
        }
        assert!("#SPILL!".parse::<ErrorCode>().is_err());
    }

    #[test]
    fn payload_json() {
        let values = vec![
            CellValue::Empty,
            CellValue::number(40.0).unwrap(),
            CellValue::text("x"),
            CellValue::Boolean(true),
            CellValue::Error(ErrorCode::NotAvailable),
        ];
        let json = serde_json::to_string(&values).unwrap();
        assert_eq!(json, r##"[null,40.0,"x",true,{"error":"#N/A"}]"##);
        let back: Vec<CellValue> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, values);
    }

    #[test]
    fn formula_trimmed() {
        let c = Cell::new(CellValue::Empty, Some("  =A1+1 \n"));
        assert_eq!(c.formula.as_deref(), Some("=A1+1"));
        assert!(Cell::new(CellValue::Empty, Some("   ")).is_blank());
    }
}
