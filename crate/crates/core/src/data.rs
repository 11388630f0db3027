//! Loading, validation, and export of the fault table.
//!
//! Two on-disk layouts are supported. The raw layout is the 34-column
//! headerless file as published: 25 numeric measurements with two binary
//! steel-type indicator columns interleaved at the TypeOfSteel position,
//! followed by 7 one-hot fault columns. Ingestion collapses the two steel
//! indicators into the single TypeOfSteel feature and the 7 fault columns
//! into one label. The cleaned layout is the ingested form written back
//! out: a header row with the schema names plus "Fault", one column per
//! feature, TypeOfSteel as A300/A400, and the label by name.

use crate::error::{Error, Result};
use crate::schema::{
    feature_index, ClassCounts, FaultLabel, Row, Steel, FEATURE_NAMES, N_CLASSES, N_FEATURES,
    STEEL_FEATURE,
};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// On-disk layout tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Raw,
    Cleaned,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Format::Raw),
            "cleaned" => Ok(Format::Cleaned),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

/// The validated dataset: one `Row` and one label per plate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultTable {
    pub rows: Vec<Row>,
    pub labels: Vec<FaultLabel>,
}

/// Raw-layout fault columns, in file order.
const RAW_FAULT_ORDER: [FaultLabel; N_CLASSES] = [
    FaultLabel::Pastry,
    FaultLabel::ZScratch,
    FaultLabel::KScratch,
    FaultLabel::Stains,
    FaultLabel::Dirtiness,
    FaultLabel::Bumps,
    FaultLabel::CommonOther,
];

const RAW_COLS: usize = 34;

impl FaultTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Per-class row counts. Errors on an empty table.
    pub fn class_counts(&self) -> Result<ClassCounts> {
        if self.is_empty() {
            return Err(Error::EmptyTable);
        }
        let mut counts = [0u32; N_CLASSES];
        for &l in &self.labels {
            counts[l.index()] += 1;
        }
        Ok(counts)
    }

    /// 7x2 count matrix of fault class vs steel grade, classes in report
    /// order, columns [A300, A400].
    pub fn crosstab_steel_fault(&self) -> Result<[[u32; 2]; N_CLASSES]> {
        if self.is_empty() {
            return Err(Error::EmptyTable);
        }
        let mut m = [[0u32; 2]; N_CLASSES];
        for (row, &label) in self.rows.iter().zip(&self.labels) {
            let steel = Steel::from_encoded(row[STEEL_FEATURE]);
            m[label.index()][if steel == Steel::A300 { 0 } else { 1 }] += 1;
        }
        Ok(m)
    }

    /// Rows of one class, by reference.
    pub fn class_rows(&self, label: FaultLabel) -> Vec<&Row> {
        self.rows
            .iter()
            .zip(&self.labels)
            .filter(|(_, &l)| l == label)
            .map(|(r, _)| r)
            .collect()
    }

    /// The sub-table addressed by `indices`.
    pub fn subset(&self, indices: &[usize]) -> FaultTable {
        FaultTable {
            rows: indices.iter().map(|&i| self.rows[i]).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

fn detect_delimiter(first_line: &str) -> u8 {
    if first_line.contains('\t') {
        b'\t'
    } else {
        b','
    }
}

fn parse_field(raw: &str, row: usize, col: usize) -> Result<f64> {
    let v: f64 = raw.trim().parse().map_err(|_| Error::MalformedRow {
        row,
        col,
        reason: format!("{raw:?} is not numeric"),
    })?;
    if !v.is_finite() {
        return Err(Error::MalformedRow { row, col, reason: format!("non-finite value {raw:?}") });
    }
    Ok(v)
}

fn parse_binary(raw: &str, row: usize, col: usize) -> Result<bool> {
    match parse_field(raw, row, col)? {
        v if v == 0.0 => Ok(false),
        v if v == 1.0 => Ok(true),
        _ => Err(Error::MalformedRow { row, col, reason: format!("{raw:?} is not 0 or 1") }),
    }
}

/// Loads a fault table from `path` in the given layout. The field separator
/// (tab or comma) is detected from the first line.
pub fn ingest(path: impl AsRef<Path>, format: Format) -> Result<FaultTable> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    ingest_str(&text, format)
}

/// `ingest` over in-memory text; used by tests and round-trip checks.
pub fn ingest_str(text: &str, format: Format) -> Result<FaultTable> {
    let first = text.lines().next().ok_or(Error::EmptyTable)?;
    let delim = detect_delimiter(first);
    match format {
        Format::Raw => ingest_raw(text, delim),
        Format::Cleaned => ingest_cleaned(text, delim),
    }
}

fn ingest_raw(text: &str, delim: u8) -> Result<FaultTable> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (row_idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(delim as char).collect();
        if fields.len() != RAW_COLS {
            return Err(Error::MalformedRow {
                row: row_idx,
                col: fields.len(),
                reason: format!("expected {RAW_COLS} columns, found {}", fields.len()),
            });
        }
        let mut row = [0.0; N_FEATURES];
        // Columns 0..11 map to schema 0..11; 11/12 are the steel indicators;
        // 13..27 map to schema 12..26; 27..34 are the fault one-hots.
        for c in 0..11 {
            row[c] = parse_field(fields[c], row_idx, c)?;
        }
        let a300 = parse_binary(fields[11], row_idx, 11)?;
        let a400 = parse_binary(fields[12], row_idx, 12)?;
        if a300 == a400 {
            return Err(Error::AmbiguousSteel {
                row: row_idx,
                n_set: a300 as usize + a400 as usize,
            });
        }
        row[STEEL_FEATURE] = if a400 { Steel::A400 } else { Steel::A300 }.encoded();
        for c in 13..27 {
            row[c - 1] = parse_field(fields[c], row_idx, c)?;
        }
        let mut label = None;
        let mut n_set = 0;
        for (k, &fault) in RAW_FAULT_ORDER.iter().enumerate() {
            if parse_binary(fields[27 + k], row_idx, 27 + k)? {
                n_set += 1;
                label = Some(fault);
            }
        }
        if n_set != 1 {
            return Err(Error::AmbiguousOneHot { row: row_idx, n_set });
        }
        rows.push(row);
        labels.push(label.unwrap());
    }
    if rows.is_empty() {
        return Err(Error::EmptyTable);
    }
    Ok(FaultTable { rows, labels })
}

fn ingest_cleaned(text: &str, delim: u8) -> Result<FaultTable> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::EmptyTable)?;
    let names: Vec<&str> = header.split(delim as char).map(str::trim).collect();
    let fault_col = names
        .iter()
        .position(|&n| n == "Fault")
        .ok_or_else(|| Error::MalformedRow {
            row: 0,
            col: 0,
            reason: "header has no Fault column".into(),
        })?;
    let mut col_of = [usize::MAX; N_FEATURES];
    for (c, name) in names.iter().enumerate() {
        if let Some(f) = feature_index(name) {
            col_of[f] = c;
        }
    }
    if let Some(missing) = col_of.iter().position(|&c| c == usize::MAX) {
        return Err(Error::MalformedRow {
            row: 0,
            col: 0,
            reason: format!("header missing feature {}", FEATURE_NAMES[missing]),
        });
    }
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (row_idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(delim as char).collect();
        if fields.len() != names.len() {
            return Err(Error::MalformedRow {
                row: row_idx,
                col: fields.len(),
                reason: format!("expected {} columns, found {}", names.len(), fields.len()),
            });
        }
        let mut row = [0.0; N_FEATURES];
        for f in 0..N_FEATURES {
            let raw = fields[col_of[f]].trim();
            row[f] = if f == STEEL_FEATURE {
                match raw {
                    "A300" => Steel::A300.encoded(),
                    "A400" => Steel::A400.encoded(),
                    other => parse_binary(other, row_idx, col_of[f])? as u8 as f64,
                }
            } else {
                parse_field(raw, row_idx, col_of[f])?
            };
        }
        let raw_label = fields[fault_col].trim();
        let label = FaultLabel::from_name(raw_label)
            .ok_or_else(|| Error::UnknownLabel(raw_label.to_string()))?;
        rows.push(row);
        labels.push(label);
    }
    if rows.is_empty() {
        return Err(Error::EmptyTable);
    }
    Ok(FaultTable { rows, labels })
}

/// Formats a feature value with full round-trip precision.
fn fmt_value(v: f64) -> String {
    let mut s = format!("{v}");
    if !s.contains('.') && !s.contains('e') && !s.contains("inf") && !s.contains("NaN") {
        s.push_str(".0");
    }
    s
}

/// Writes the cleaned layout. `extra` appends one additional named column
/// (used for balancing provenance); values are emitted per row.
pub fn export_cleaned(
    table: &FaultTable,
    path: impl AsRef<Path>,
    delim: u8,
    extra: Option<(&str, &[String])>,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    let d = delim as char;
    let mut header: Vec<String> = FEATURE_NAMES.iter().map(|s| s.to_string()).collect();
    header.push("Fault".into());
    if let Some((name, _)) = extra {
        header.push(name.into());
    }
    writeln!(out, "{}", header.join(&d.to_string())).unwrap();
    for (i, (row, label)) in table.rows.iter().zip(&table.labels).enumerate() {
        let mut fields: Vec<String> = Vec::with_capacity(N_FEATURES + 2);
        for (f, &v) in row.iter().enumerate() {
            if f == STEEL_FEATURE {
                fields.push(Steel::from_encoded(v).name().into());
            } else {
                fields.push(fmt_value(v));
            }
        }
        fields.push(label.name().into());
        if let Some((_, values)) = extra {
            fields.push(values[i].clone());
        }
        writeln!(out, "{}", fields.join(&d.to_string())).unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}
