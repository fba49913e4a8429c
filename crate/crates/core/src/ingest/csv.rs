//! RFC-4180 CSV to a single sheet.
//!
//! The lexer is strict about quoting: an unterminated quoted field, or a
//! closing quote followed by anything other than a separator, is an error.

use crate::error::{Error, Result};
use crate::model::{Cell, CellValue, ErrorCode, Sheet};

/// `-?(0|[1-9][0-9]*)(\.[0-9]+)?([eE][+-]?[0-9]+)?`
fn is_canonical_number(s: &str) -> bool {
    let b = s.as_bytes();
    let mut i = 0;
    let digits = |i: &mut usize| {
        let start = *i;
        while *i < b.len() && b[*i].is_ascii_digit() {
            *i += 1;
        }
        *i - start
    };
    if b.first() == Some(&b'-') {
        i += 1;
    }
    match b.get(i) {
        Some(b'0') => i += 1,
        Some(b'1'..=b'9') => {
            digits(&mut i);
        }
        _ => return false,
    }
    if b.get(i) == Some(&b'.') {
        i += 1;
        if digits(&mut i) == 0 {
            return false;
        }
    }
    if matches!(b.get(i), Some(b'e' | b'E')) {
        i += 1;
        if matches!(b.get(i), Some(b'+' | b'-')) {
            i += 1;
        }
        if digits(&mut i) == 0 {
            return false;
        }
    }
    i == b.len()
}

/// Types a non-empty field: number, boolean, error literal, else text.
pub fn type_field(field: &str) -> CellValue {
    if is_canonical_number(field) {
        if let Ok(v) = field.parse::<f64>() {
            if let Ok(value) = CellValue::number(v) {
                return value;
            }
        }
    }
    match field {
        "TRUE" => return CellValue::Boolean(true),
        "FALSE" => return CellValue::Boolean(false),
        _ => {}
    }
    if let Ok(code) = field.parse::<ErrorCode>() {
        return CellValue::Error(code);
    }
    CellValue::Text(field.to_string())
}

/// Splits CSV text into records of fields.
fn records(text: &str) -> Result<Vec<Vec<String>>> {
    let mut out = Vec::new();
    let mut record = Vec::new();
    let mut field = String::new();
    let mut chars = text.chars().peekable();
    let mut line = 1usize;
    let mut at_field_start = true;
    let mut pending = false;

    while let Some(c) = chars.next() {
        pending = true;
        match c {
            '"' if at_field_start => {
                at_field_start = false;
                let start_line = line;
                loop {
                    match chars.next() {
                        None => {
                            return Err(Error::Format(format!(
                                "unterminated quoted field starting on line {start_line}"
                            )))
                        }
                        Some('"') if chars.peek() == Some(&'"') => {
                            chars.next();
                            field.push('"');
                        }
                        Some('"') => break,
                        Some(ch) => {
                            if ch == '\n' {
                                line += 1;
                            }
                            field.push(ch);
                        }
                    }
                }
                match chars.peek() {
                    None | Some(',' | '\n' | '\r') => {}
                    Some(other) => {
                        return Err(Error::Format(format!(
                            "unexpected {other:?} after closing quote on line {line}"
                        )))
                    }
                }
            }
            ',' => {
                record.push(std::mem::take(&mut field));
                at_field_start = true;
            }
            '\r' | '\n' => {
                if c == '\r' && chars.peek() == Some(&'\n') {
                    chars.next();
                }
                record.push(std::mem::take(&mut field));
                out.push(std::mem::take(&mut record));
                at_field_start = true;
                pending = false;
                line += 1;
            }
            _ => {
                at_field_start = false;
                field.push(c);
            }
        }
    }
    if pending {
        record.push(field);
        out.push(record);
    }
    Ok(out)
}

/// Parses CSV bytes into a sheet: record `i`, field `j` lands at row `i`, col `j`.
pub fn ingest_csv(sheet_name: &str, bytes: &[u8]) -> Result<Sheet> {
    if sheet_name.is_empty() {
        return Err(Error::Constraint("empty sheet name".into()));
    }
    let text =
        std::str::from_utf8(bytes).map_err(|e| Error::Format(format!("csv is not UTF-8: {e}")))?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut sheet = Sheet::new();
    for (i, record) in records(text)?.into_iter().enumerate() {
        let row = u32::try_from(i + 1).map_err(|_| Error::Constraint("too many rows".into()))?;
        for (j, field) in record.into_iter().enumerate() {
            if field.is_empty() {
                continue;
            }
            let col =
                u32::try_from(j + 1).map_err(|_| Error::Constraint("too many columns".into()))?;
            sheet.insert(row, col, Cell::value(type_field(&field)))?;
        }
    }
    Ok(sheet)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(x: f64) -> CellValue {
        CellValue::number(x).unwrap()
    }

    #[test]
    fn four_numbers() {
        let sheet = ingest_csv("S", b"1,2\n3,4").unwrap();
        let cells: Vec<_> = sheet.iter().map(|(k, c)| (k, c.value.clone())).collect();
        assert_eq!(
            cells,
            vec![
                ((1, 1), n(1.0)),
                ((1, 2), n(2.0)),
                ((2, 1), n(3.0)),
                ((2, 2), n(4.0))
            ]
        );
    }

    #[test]
    fn leading_zero_is_text() {
        let sheet = ingest_csv("S", b"007").unwrap();
        assert_eq!(sheet.get(1, 1).unwrap().value, CellValue::text("007"));
    }

    #[test]
    fn empty_fields_are_sparse() {
        let sheet = ingest_csv("S", b"a,,b").unwrap();
        assert_eq!(sheet.len(), 2);
        assert_eq!(sheet.get(1, 1).unwrap().value, CellValue::text("a"));
        assert!(sheet.get(1, 2).is_none());
        assert_eq!(sheet.get(1, 3).unwrap().value, CellValue::text("b"));
    }

    #[test]
    fn number_grammar() {
        for ok in ["0", "-0", "12", "-3.25", "1e5", "1.5E-3", "0.0", "6.02e+23"] {
            assert!(is_canonical_number(ok), "{ok}");
        }
        for bad in [
            "007", "00", "+1", ".5", "1.", "1e", "1e+", "--1", "1,0", " 1", "0x10", "inf", "NaN",
            "",
        ] {
            assert!(!is_canonical_number(bad), "{bad}");
        }
        assert_eq!(type_field("1e999"), CellValue::text("1e999"));
        assert_eq!(type_field("-0"), n(0.0));
    }

    #[test]
    fn literals() {
        let sheet = ingest_csv("S", b"TRUE,FALSE,true,#N/A,#DIV/0!,#SPILL!").unwrap();
        let values: Vec<_> = sheet.iter().map(|(_, c)| c.value.clone()).collect();
        assert_eq!(
            values,
            vec![
                CellValue::Boolean(true),
                CellValue::Boolean(false),
                CellValue::text("true"),
                CellValue::Error(ErrorCode::NotAvailable),
                CellValue::Error(ErrorCode::Div0),
                CellValue::text("#SPILL!"),
            ]
        );
    }

    #[test]
    fn quoting() {
        let sheet = ingest_csv(
            "S",
            b"\"a,b\",\"say \"\"hi\"\"\"\r\n\"line\nbreak\",\"\"\n\n5\n",
        )
        .unwrap();
        assert_eq!(sheet.get(1, 1).unwrap().value, CellValue::text("a,b"));
        assert_eq!(
            sheet.get(1, 2).unwrap().value,
            CellValue::text("say \"hi\"")
        );
        assert_eq!(
            sheet.get(2, 1).unwrap().value,
            CellValue::text("line\nbreak")
        );
        assert!(sheet.get(2, 2).is_none());
        assert_eq!(sheet.get(4, 1).unwrap().value, n(5.0));
        assert_eq!(sheet.len(), 4);
    }

    #[test]
    fn unbalanced_quotes() {
        assert!(matches!(
            ingest_csv("S", b"\"abc,1\n2"),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            ingest_csv("S", b"\"ab\"c,1"),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn empty_sheet_name() {
        assert!(matches!(ingest_csv("", b"1"), Err(Error::Constraint(_))));
    }

    #[test]
    fn never_produces_empty_values() {
        let sheet = ingest_csv("S", b",,\n,\"\",x\n").unwrap();
        assert!(sheet.iter().all(|(_, c)| !c.value.is_empty()));
        assert_eq!(sheet.len(), 1);
    }
}
