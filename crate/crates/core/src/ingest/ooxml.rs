//! Minimal SpreadsheetML reader: cached cell values and formula text only.
//!
//! Styles, merged ranges, rich-text formatting, defined names and the 1904
//! date system are not modelled; their presence is reported as warnings.

use std::collections::{BTreeSet, HashMap};
use std::io::{Cursor, Read};

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use zip::result::ZipError;
use zip::ZipArchive;

use crate::error::{Error, Result};
use crate::ingest::{IngestReport, SourceFormat};
use crate::model::{parse_a1, Cell, CellValue, ErrorCode, Number, Sheet, WorkbookSnapshot};

pub(crate) const ZIP_MAGIC: &[u8] = b"PK\x03\x04";
pub(crate) const OLE_MAGIC: &[u8] = &[0xD0, 0xCF, 0x11, 0xE0, 0xA1, 0xB1, 0x1A, 0xE1];

const REL_OFFICE_DOCUMENT: &str = "/officeDocument";
const REL_SHARED_STRINGS: &str = "/sharedStrings";

type Archive<'a> = ZipArchive<Cursor<&'a [u8]>>;

fn xml_err(part: &str, e: impl std::fmt::Display) -> Error {
    Error::Format(format!("{part}: {e}"))
}

fn read_part(archive: &mut Archive<'_>, name: &str) -> Result<Option<String>> {
    let mut file = match archive.by_name(name) {
        Ok(f) => f,
        Err(ZipError::FileNotFound) => return Ok(None),
        Err(ZipError::UnsupportedArchive(msg)) => {
            return Err(Error::UnsupportedFeature(format!("{name}: {msg}")))
        }
        Err(e) => return Err(Error::Format(format!("{name}: {e}"))),
    };
    if file.encrypted() {
        return Err(Error::UnsupportedFeature(format!("{name} is encrypted")));
    }
    let mut text = String::new();
    file.read_to_string(&mut text)
        .map_err(|e| Error::Format(format!("{name}: {e}")))?;
    Ok(Some(text))
}

fn attr(e: &BytesStart<'_>, local: &[u8]) -> Result<Option<String>> {
    for a in e.attributes() {
        let a = a.map_err(|err| Error::Format(err.to_string()))?;
        if a.key.local_name().as_ref() == local {
            let v = a
                .unescape_value()
                .map_err(|err| Error::Format(err.to_string()))?;
            return Ok(Some(v.into_owned()));
        }
    }
    Ok(None)
}

/// Resolves a relationship target against the directory of the source part.
fn resolve_target(base_dir: &str, target: &str) -> String {
    let joined = match target.strip_prefix('/') {
        Some(abs) => abs.to_string(),
        None if base_dir.is_empty() => target.to_string(),
        None => format!("{base_dir}/{target}"),
    };
    let mut parts: Vec<&str> = Vec::new();
    for seg in joined.split('/') {
        match seg {
            "" | "." => {}
            ".." => {
                parts.pop();
            }
            s => parts.push(s),
        }
    }
    parts.join("/")
}

fn dir_of(part: &str) -> &str {
    part.rsplit_once('/').map_or("", |(d, _)| d)
}

fn rels_path(part: &str) -> String {
    match part.rsplit_once('/') {
        Some((dir, file)) => format!("{dir}/_rels/{file}.rels"),
        None => format!("_rels/{part}.rels"),
    }
}

struct Relationship {
    id: String,
    kind: String,
    target: String,
}

fn parse_rels(xml: &str, part: &str) -> Result<Vec<Relationship>> {
    let mut reader = Reader::from_str(xml);
    let mut out = Vec::new();
    loop {
        match reader.read_event().map_err(|e| xml_err(part, e))? {
            Event::Start(e) | Event::Empty(e) if e.local_name().as_ref() == b"Relationship" => {
                if let (Some(id), Some(target)) = (attr(&e, b"Id")?, attr(&e, b"Target")?) {
                    let kind = attr(&e, b"Type")?.unwrap_or_default();
                    out.push(Relationship { id, kind, target });
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    Ok(out)
}

struct Warnings(BTreeSet<String>);

impl Warnings {
    fn add(&mut self, msg: impl Into<String>) {
        self.0.insert(msg.into());
    }
}

struct SheetEntry {
    name: String,
    rel_id: String,
}

fn parse_workbook(xml: &str, part: &str, warnings: &mut Warnings) -> Result<Vec<SheetEntry>> {
    let mut reader = Reader::from_str(xml);
    let mut sheets = Vec::new();
    loop {
        match reader.read_event().map_err(|e| xml_err(part, e))? {
            Event::Start(e) | Event::Empty(e) => match e.local_name().as_ref() {
                b"sheet" => {
                    let name = attr(&e, b"name")?
                        .ok_or_else(|| Error::Format(format!("{part}: sheet without name")))?;
                    let rel_id = attr(&e, b"id")?.ok_or_else(|| {
                        Error::Format(format!("{part}: sheet {name:?} without r:id"))
                    })?;
                    sheets.push(SheetEntry { name, rel_id });
                }
                b"workbookPr" => {
                    if let Some(v) = attr(&e, b"date1904")? {
                        if v == "1" || v == "true" {
                            warnings.add("1904 date system ignored; date serials kept as stored");
                        }
                    }
                }
                b"definedNames" => warnings.add("defined names ignored"),
                _ => {}
            },
            Event::Eof => break,
            _ => {}
        }
    }
    Ok(sheets)
}

fn parse_shared_strings(xml: &str, part: &str, warnings: &mut Warnings) -> Result<Vec<String>> {
    let mut reader = Reader::from_str(xml);
    let mut out = Vec::new();
    let mut current: Option<String> = None;
    let mut in_text = false;
    let mut phonetic_depth = 0usize;
    loop {
        match reader.read_event().map_err(|e| xml_err(part, e))? {
            Event::Start(e) => match e.local_name().as_ref() {
                b"si" => current = Some(String::new()),
                b"t" if phonetic_depth == 0 => in_text = true,
                b"r" => warnings.add("rich text runs flattened to plain text"),
                b"rPh" => phonetic_depth += 1,
                _ => {}
            },
            Event::Empty(e) if e.local_name().as_ref() == b"si" => out.push(String::new()),
            Event::End(e) => match e.local_name().as_ref() {
                b"si" => out.push(current.take().unwrap_or_default()),
                b"t" => in_text = false,
                b"rPh" => phonetic_depth = phonetic_depth.saturating_sub(1),
                _ => {}
            },
            Event::Text(t) if in_text => {
                if let Some(s) = current.as_mut() {
                    s.push_str(&t.unescape().map_err(|e| xml_err(part, e))?);
                }
            }
            Event::CData(t) if in_text => {
                if let Some(s) = current.as_mut() {
                    s.push_str(&String::from_utf8_lossy(&t));
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    Ok(out)
}

#[derive(Default)]
struct PendingCell {
    reference: Option<String>,
    kind: Option<String>,
    formula: Option<String>,
    shared_follower: bool,
    value: Option<String>,
    inline: Option<String>,
}

fn start_cell(e: &BytesStart<'_>) -> Result<PendingCell> {
    Ok(PendingCell {
        reference: attr(e, b"r")?,
        kind: attr(e, b"t")?,
        ..PendingCell::default()
    })
}

/// Moves the cursor to the cell's own reference, or one column right.
fn place(pending: &PendingCell, part: &str, row: &mut u32, col: &mut u32) -> Result<()> {
    match pending.reference.as_deref() {
        Some(r) => {
            let (c, rr) = parse_a1(r).map_err(|e| Error::Format(format!("{part}: {e}")))?;
            *row = rr;
            *col = c;
        }
        None => {
            *row = (*row).max(1);
            *col += 1;
        }
    }
    Ok(())
}

#[derive(Clone, Copy, PartialEq)]
enum Capture {
    None,
    Formula,
    Value,
    InlineText,
}

fn number(text: &str, part: &str) -> Result<CellValue> {
    let x: f64 = text
        .trim()
        .parse()
        .map_err(|_| Error::Format(format!("{part}: bad numeric value {text:?}")))?;
    Ok(CellValue::Number(
        Number::new(x).map_err(|e| Error::Format(format!("{part}: {e}")))?,
    ))
}

fn finish_cell(
    cell: PendingCell,
    row: u32,
    col: u32,
    shared: &[String],
    sheet: &mut Sheet,
    part: &str,
    warnings: &mut Warnings,
) -> Result<()> {
    let kind = cell.kind.as_deref().unwrap_or("n");
    let value = match (kind, cell.value.as_deref()) {
        ("inlineStr", _) => match cell.inline {
            Some(t) => CellValue::Text(t),
            None => CellValue::Empty,
        },
        (_, None) => CellValue::Empty,
        ("n", Some(v)) if v.trim().is_empty() => CellValue::Empty,
        ("n", Some(v)) => number(v, part)?,
        ("s", Some(v)) => {
            let idx: usize = v
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("{part}: bad shared string index {v:?}")))?;
            let s = shared.get(idx).ok_or_else(|| {
                Error::Format(format!("{part}: shared string index {idx} out of range"))
            })?;
            CellValue::Text(s.clone())
        }
        ("str", Some(v)) => CellValue::Text(v.to_string()),
        ("b", Some(v)) => match v.trim() {
            "1" | "true" => CellValue::Boolean(true),
            "0" | "false" => CellValue::Boolean(false),
            other => return Err(Error::Format(format!("{part}: bad boolean {other:?}"))),
        },
        ("e", Some(v)) => match v.parse::<ErrorCode>() {
            Ok(code) => CellValue::Error(code),
            Err(_) => {
                warnings.add(format!("unrecognised error literal {v:?} kept as text"));
                CellValue::Text(v.to_string())
            }
        },
        ("d", Some(v)) => {
            warnings.add("ISO-8601 date cells kept as text");
            CellValue::Text(v.to_string())
        }
        (other, Some(_)) => {
            return Err(Error::Format(format!(
                "{part}: unknown cell type {other:?}"
            )))
        }
    };
    let formula = cell
        .formula
        .as_deref()
        .map(str::trim)
        .filter(|f| !f.is_empty())
        .map(|f| {
            if f.starts_with('=') {
                f.to_string()
            } else {
                format!("={f}")
            }
        });
    if cell.shared_follower && formula.is_none() {
        warnings.add("shared formula followers stored with values only");
    }
    let cell = Cell::new(value, formula.as_deref());
    if cell.is_blank() {
        return Ok(());
    }
    sheet
        .insert(row, col, cell)
        .map_err(|e| Error::Format(format!("{part}: {e}")))
}

fn parse_sheet(xml: &str, part: &str, shared: &[String], warnings: &mut Warnings) -> Result<Sheet> {
    let mut reader = Reader::from_str(xml);
    let mut sheet = Sheet::new();
    let mut row: u32 = 0;
    let mut col: u32 = 0;
    let mut cell: Option<PendingCell> = None;
    let mut capture = Capture::None;
    let mut in_inline_phonetic = false;

    let mut styled = false;

    loop {
        match reader.read_event().map_err(|e| xml_err(part, e))? {
            Event::Start(e) => match e.local_name().as_ref() {
                b"row" => {
                    row = match attr(&e, b"r")? {
                        Some(r) => r
                            .parse()
                            .map_err(|_| Error::Format(format!("{part}: bad row number {r:?}")))?,
                        None => row + 1,
                    };
                    col = 0;
                }
                b"c" => {
                    styled |= attr(&e, b"s")?.is_some_and(|s| s != "0");
                    cell = Some(start_cell(&e)?);
                }
                b"f" => {
                    if let Some(c) = cell.as_mut() {
                        if attr(&e, b"t")?.as_deref() == Some("shared") {
                            c.shared_follower = true;
                        }
                        capture = Capture::Formula;
                        c.formula = Some(String::new());
                    }
                }
                b"v" if cell.is_some() => capture = Capture::Value,
                b"rPh" => in_inline_phonetic = true,
                b"t" if cell.is_some() && !in_inline_phonetic => {
                    capture = Capture::InlineText;
                    if let Some(c) = cell.as_mut() {
                        c.inline.get_or_insert_with(String::new);
                    }
                }
                b"r" if cell.is_some() => warnings.add("rich text runs flattened to plain text"),
                b"mergeCells" => warnings.add("merged ranges ignored"),
                _ => {}
            },
            Event::Empty(e) => match e.local_name().as_ref() {
                b"row" => {
                    row = match attr(&e, b"r")? {
                        Some(r) => r
                            .parse()
                            .map_err(|_| Error::Format(format!("{part}: bad row number {r:?}")))?,
                        None => row + 1,
                    };
                    col = 0;
                }
                b"c" => {
                    styled |= attr(&e, b"s")?.is_some_and(|s| s != "0");
                    let pending = start_cell(&e)?;
                    place(&pending, part, &mut row, &mut col)?;
                }
                b"f" => {
                    if let Some(c) = cell.as_mut() {
                        if attr(&e, b"t")?.as_deref() == Some("shared") {
                            c.shared_follower = true;
                        }
                    }
                }
                b"mergeCell" => warnings.add("merged ranges ignored"),
                _ => {}
            },
            Event::Text(t) => {
                if capture != Capture::None {
                    let text = t.unescape().map_err(|e| xml_err(part, e))?;
                    if let Some(c) = cell.as_mut() {
                        let slot = match capture {
                            Capture::Formula => c.formula.get_or_insert_with(String::new),
                            Capture::Value => c.value.get_or_insert_with(String::new),
                            Capture::InlineText => c.inline.get_or_insert_with(String::new),
                            Capture::None => unreachable!(),
                        };
                        slot.push_str(&text);
                    }
                }
            }
            Event::End(e) => match e.local_name().as_ref() {
                b"c" => {
                    if let Some(pending) = cell.take() {
                        place(&pending, part, &mut row, &mut col)?;
                        finish_cell(pending, row, col, shared, &mut sheet, part, warnings)?;
                    }
                    capture = Capture::None;
                }
                b"f" | b"v" | b"t" => capture = Capture::None,
                b"rPh" => in_inline_phonetic = false,
                _ => {}
            },
            Event::Eof => break,
            _ => {}
        }
    }
    if styled {
        warnings.add("cell styles ignored; date-formatted cells kept as serial numbers");
    }
    Ok(sheet)
}

fn office_document_part(archive: &mut Archive<'_>) -> Result<String> {
    if let Some(xml) = read_part(archive, "_rels/.rels")? {
        for rel in parse_rels(&xml, "_rels/.rels")? {
            if rel.kind.ends_with(REL_OFFICE_DOCUMENT) {
                return Ok(resolve_target("", &rel.target));
            }
        }
    }
    Ok("xl/workbook.xml".to_string())
}

pub fn ingest_ooxml(bytes: &[u8]) -> Result<IngestReport> {
    if bytes.starts_with(OLE_MAGIC) {
        return Err(Error::UnsupportedFeature(
            "OLE compound document (legacy .xls or encrypted package)".into(),
        ));
    }
    let mut archive = ZipArchive::new(Cursor::new(bytes))
        .map_err(|e| Error::Format(format!("not a ZIP package: {e}")))?;
    let mut warnings = Warnings(BTreeSet::new());

    let workbook_part = office_document_part(&mut archive)?;
    let workbook_xml = read_part(&mut archive, &workbook_part)?
        .ok_or_else(|| Error::Format(format!("missing workbook part {workbook_part}")))?;
    let entries = parse_workbook(&workbook_xml, &workbook_part, &mut warnings)?;

    let base = dir_of(&workbook_part).to_string();
    let rels_part = rels_path(&workbook_part);
    let rels = match read_part(&mut archive, &rels_part)? {
        Some(xml) => parse_rels(&xml, &rels_part)?,
        None => Vec::new(),
    };
    let targets: HashMap<&str, String> = rels
        .iter()
        .map(|r| (r.id.as_str(), resolve_target(&base, &r.target)))
        .collect();

    let shared_part = rels
        .iter()
        .find(|r| r.kind.ends_with(REL_SHARED_STRINGS))
        .map(|r| resolve_target(&base, &r.target))
        .unwrap_or_else(|| resolve_target(&base, "sharedStrings.xml"));
    let shared = match read_part(&mut archive, &shared_part)? {
        Some(xml) => parse_shared_strings(&xml, &shared_part, &mut warnings)?,
        None => Vec::new(),
    };

    let mut snapshot = WorkbookSnapshot::new();
    for entry in entries {
        let part = targets.get(entry.rel_id.as_str()).cloned().ok_or_else(|| {
            Error::Format(format!(
                "sheet {:?}: relationship {} not found",
                entry.name, entry.rel_id
            ))
        })?;
        let xml = read_part(&mut archive, &part)?
            .ok_or_else(|| Error::Format(format!("missing sheet part {part}")))?;
        let sheet = parse_sheet(&xml, &part, &shared, &mut warnings)?;
        snapshot.add_sheet(entry.name, sheet)?;
    }
    Ok(IngestReport::new(
        snapshot,
        SourceFormat::Ooxml,
        warnings.0.into_iter().collect(),
    ))
}
