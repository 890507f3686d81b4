// SPDX-License-Identifier: Apache-2.0

//! Typed tables, CSV ingestion and the structural probes shared by the
//! discovery, lineage and diffing stages.

mod csv;
mod infer;

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use self::csv::{parse_records, write_records};
pub use self::infer::{
    detect_temporal_columns, infer_entity_key, infer_types, parse_timestamp, TEMPORAL_TEXT_THRESHOLD,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TableError {
    #[error("ingestion error at row {row}: {message}")]
    Ingest { row: usize, message: String },
    #[error("schema error: {0}")]
    Schema(String),
}

/// The declared type of a column. Null cells are allowed in every column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ColType {
    Integer,
    Real,
    Text,
    Timestamp,
}

impl ColType {
    pub fn is_numeric(self) -> bool {
        matches!(self, ColType::Integer | ColType::Real)
    }

    pub fn admits(self, value: &CellValue) -> bool {
        matches!(
            (self, value),
            (_, CellValue::Null)
                | (ColType::Integer, CellValue::Integer(_))
                | (ColType::Real, CellValue::Real(_))
                | (ColType::Text, CellValue::Text(_))
                | (ColType::Timestamp, CellValue::Timestamp(_))
        )
    }
}

impl std::str::FromStr for ColType {
    type Err = TableError;

    fn from_str(s: &str) -> Result<ColType, TableError> {
        match s {
            "integer" => Ok(ColType::Integer),
            "real" => Ok(ColType::Real),
            "text" => Ok(ColType::Text),
            "timestamp" => Ok(ColType::Timestamp),
            _ => Err(TableError::Schema(format!("unknown column type `{s}`"))),
        }
    }
}

impl fmt::Display for ColType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ColType::Integer => "integer",
            ColType::Real => "real",
            ColType::Text => "text",
            ColType::Timestamp => "timestamp",
        };
        f.write_str(s)
    }
}

/// A single cell. `Real` is always finite; equality is exact and never
/// coerces across variants.
///
/// Serialized compactly: `null`, a bare integer, a float that always carries
/// a decimal point or exponent, a bare string, or `{"ts": secs}`.
#[derive(Debug, Clone)]
pub enum CellValue {
    Null,
    Integer(i64),
    Real(f64),
    Text(String),
    /// UTC seconds since the Unix epoch.
    Timestamp(i64),
}

impl CellValue {
    pub fn is_null(&self) -> bool {
        matches!(self, CellValue::Null)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            CellValue::Integer(v) => Some(*v as f64),
            CellValue::Real(v) => Some(*v),
            _ => None,
        }
    }

    /// Builds a `Real`, rejecting NaN and infinities.
    pub fn real(v: f64) -> Option<CellValue> {
        v.is_finite().then_some(CellValue::Real(v))
    }

    fn rank(&self) -> u8 {
        match self {
            CellValue::Null => 0,
            CellValue::Integer(_) => 1,
            CellValue::Real(_) => 2,
            CellValue::Text(_) => 3,
            CellValue::Timestamp(_) => 4,
        }
    }

    /// The CSV rendering of the cell. Null renders as the empty string.
    pub fn render(&self) -> String {
        match self {
            CellValue::Null => String::new(),
            CellValue::Integer(v) => v.to_string(),
            CellValue::Real(v) => format!("{v:?}"),
            CellValue::Text(s) => s.clone(),
            CellValue::Timestamp(secs) => render_timestamp(*secs),
        }
    }
}

impl Serialize for CellValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        match self {
            CellValue::Null => s.serialize_unit(),
            CellValue::Integer(v) => s.serialize_i64(*v),
            CellValue::Real(v) => s.serialize_f64(*v),
            CellValue::Text(t) => s.serialize_str(t),
            CellValue::Timestamp(secs) => {
                let mut m = s.serialize_map(Some(1))?;
                m.serialize_entry("ts", secs)?;
                m.end()
            }
        }
    }
}

struct CellVisitor;

impl<'de> serde::de::Visitor<'de> for CellVisitor {
    type Value = CellValue;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("null, a number, a string or {\"ts\": seconds}")
    }

    fn visit_unit<E: serde::de::Error>(self) -> Result<CellValue, E> {
        Ok(CellValue::Null)
    }

    fn visit_none<E: serde::de::Error>(self) -> Result<CellValue, E> {
        Ok(CellValue::Null)
    }

    fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<CellValue, E> {
        Ok(CellValue::Integer(v))
    }

    fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<CellValue, E> {
        i64::try_from(v)
            .map(CellValue::Integer)
            .map_err(|_| E::custom("integer out of range"))
    }

    fn visit_f64<E: serde::de::Error>(self, v: f64) -> Result<CellValue, E> {
        CellValue::real(v).ok_or_else(|| E::custom("non-finite real"))
    }

    fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<CellValue, E> {
        Ok(CellValue::Text(v.to_string()))
    }

    fn visit_string<E: serde::de::Error>(self, v: String) -> Result<CellValue, E> {
        Ok(CellValue::Text(v))
    }

    fn visit_map<A: serde::de::MapAccess<'de>>(self, mut map: A) -> Result<CellValue, A::Error> {
        use serde::de::Error;
        let key: String = map.next_key()?.ok_or_else(|| A::Error::custom("empty cell object"))?;
        if key != "ts" {
            return Err(A::Error::custom(format!("unknown cell tag `{key}`")));
        }
        let secs: i64 = map.next_value()?;
        if map.next_key::<String>()?.is_some() {
            return Err(A::Error::custom("cell object has extra fields"));
        }
        Ok(CellValue::Timestamp(secs))
    }
}

impl<'de> Deserialize<'de> for CellValue {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<CellValue, D::Error> {
        d.deserialize_any(CellVisitor)
    }
}

impl PartialEq for CellValue {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for CellValue {}

impl PartialOrd for CellValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for CellValue {
    fn cmp(&self, other: &Self) -> Ordering {
        use CellValue::*;
        match (self, other) {
            (Integer(a), Integer(b)) => a.cmp(b),
            (Real(a), Real(b)) => a.total_cmp(b),
            (Text(a), Text(b)) => a.cmp(b),
            (Timestamp(a), Timestamp(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl Hash for CellValue {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.rank().hash(state);
        match self {
            CellValue::Null => {}
            CellValue::Integer(v) | CellValue::Timestamp(v) => v.hash(state),
            CellValue::Real(v) => v.to_bits().hash(state),
            CellValue::Text(s) => s.hash(state),
        }
    }
}

impl fmt::Display for CellValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

fn render_timestamp(secs: i64) -> String {
    match chrono::DateTime::from_timestamp(secs, 0) {
        Some(dt) if secs.rem_euclid(86_400) == 0 => dt.format("%Y-%m-%d").to_string(),
        Some(dt) => dt.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
        None => secs.to_string(),
    }
}

/// Lowercase, trim, and collapse inner whitespace runs to one underscore.
pub fn normalize_header(raw: &str) -> String {
    raw.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join("_")
}

/// Word tokens of a normalized header (`avg_points` → `avg`, `points`).
pub fn header_tokens(header: &str) -> impl Iterator<Item = &str> {
    header.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty())
}

/// A rectangular, typed table. Construct through [`Table::new`] or
/// [`Table::from_csv`] so the invariants hold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub table_id: String,
    pub name: String,
    headers: Vec<String>,
    col_types: Vec<ColType>,
    rows: Vec<Vec<CellValue>>,
}

/// Reference to one column of a table.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ColumnRef {
    pub table_id: String,
    pub column_index: usize,
    pub column_name: String,
}

impl Table {
    /// Validates and builds a table. Headers are normalized here.
    pub fn new(
        table_id: impl Into<String>,
        headers: Vec<String>,
        col_types: Vec<ColType>,
        rows: Vec<Vec<CellValue>>,
    ) -> Result<Table, TableError> {
        let headers: Vec<String> = headers.iter().map(|h| normalize_header(h)).collect();
        if col_types.len() != headers.len() {
            return Err(TableError::Schema(format!(
                "{} headers but {} column types",
                headers.len(),
                col_types.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for h in &headers {
            if !seen.insert(h.as_str()) {
                return Err(TableError::Schema(format!("duplicate header {h:?}")));
            }
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != headers.len() {
                return Err(TableError::Schema(format!(
                    "row {i} has {} cells, expected {}",
                    row.len(),
                    headers.len()
                )));
            }
            for (j, cell) in row.iter().enumerate() {
                if !col_types[j].admits(cell) {
                    return Err(TableError::Schema(format!(
                        "row {i} column {:?}: {cell:?} is not {}",
                        headers[j], col_types[j]
                    )));
                }
                if let CellValue::Real(v) = cell {
                    if !v.is_finite() {
                        return Err(TableError::Schema(format!("row {i}: non-finite real")));
                    }
                }
            }
        }
        let table_id = table_id.into();
        Ok(Table {
            name: table_id.clone(),
            table_id,
            headers,
            col_types,
            rows,
        })
    }

    /// Parses strict RFC 4180 CSV (header row first) and infers column types.
    pub fn from_csv(table_id: impl Into<String>, source: &[u8]) -> Result<Table, TableError> {
        Table::parse_csv(table_id.into(), source, None)
    }

    /// Parses CSV against declared column types. A field that does not
    /// parse as its column's type is an error.
    pub fn from_csv_typed(
        table_id: impl Into<String>,
        source: &[u8],
        col_types: &[ColType],
    ) -> Result<Table, TableError> {
        Table::parse_csv(table_id.into(), source, Some(col_types))
    }

    fn parse_csv(table_id: String, source: &[u8], declared: Option<&[ColType]>) -> Result<Table, TableError> {
        let mut records = parse_records(source)?;
        if records.is_empty() {
            return Err(TableError::Ingest {
                row: 1,
                message: "missing header row".into(),
            });
        }
        let raw_headers = records.remove(0);
        let arity = raw_headers.len();
        let mut columns: Vec<Vec<String>> = vec![Vec::with_capacity(records.len()); arity];
        for record in records {
            for (j, field) in record.into_iter().enumerate() {
                columns[j].push(field);
            }
        }
        let col_types = match declared {
            Some(d) if d.len() != arity => {
                return Err(TableError::Schema(format!(
                    "{} declared types for {arity} columns",
                    d.len()
                )))
            }
            Some(d) => d.to_vec(),
            None => infer_types(&columns),
        };
        let n_rows = columns.first().map_or(0, Vec::len);
        let mut rows = vec![Vec::with_capacity(arity); n_rows];
        for (j, column) in columns.iter().enumerate() {
            for (i, raw) in column.iter().enumerate() {
                let cell = infer::parse_cell(raw, col_types[j]);
                if declared.is_some() && !col_types[j].admits(&cell) {
                    return Err(TableError::Ingest {
                        row: i + 2,
                        message: format!("`{raw}` is not a valid {} value", col_types[j]),
                    });
                }
                rows[i].push(cell);
            }
        }
        Table::new(table_id, raw_headers, col_types, rows)
    }

    pub fn to_csv(&self) -> String {
        let mut records = Vec::with_capacity(self.rows.len() + 1);
        records.push(self.headers.clone());
        for row in &self.rows {
            records.push(row.iter().map(CellValue::render).collect());
        }
        write_records(&records)
    }

    pub fn with_id(mut self, table_id: impl Into<String>) -> Table {
        self.table_id = table_id.into();
        self.name = self.table_id.clone();
        self
    }

    pub fn headers(&self) -> &[String] {
        &self.headers
    }

    pub fn col_types(&self) -> &[ColType] {
        &self.col_types
    }

    pub fn rows(&self) -> &[Vec<CellValue>] {
        &self.rows
    }

    pub fn arity(&self) -> usize {
        self.headers.len()
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn cell_count(&self) -> usize {
        self.rows.len() * self.headers.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    pub fn column(&self, index: usize) -> impl Iterator<Item = &CellValue> + '_ {
        self.rows.iter().map(move |r| &r[index])
    }

    pub fn column_ref(&self, index: usize) -> ColumnRef {
        ColumnRef {
            table_id: self.table_id.clone(),
            column_index: index,
            column_name: self.headers[index].clone(),
        }
    }

    /// Same headers, types and rows; ids and display names are ignored.
    pub fn content_eq(&self, other: &Table) -> bool {
        self.headers == other.headers && self.col_types == other.col_types && self.rows == other.rows
    }

    /// Rebuilds from parts that are already normalized and valid.
    pub(crate) fn from_parts_unchecked(
        table_id: String,
        headers: Vec<String>,
        col_types: Vec<ColType>,
        rows: Vec<Vec<CellValue>>,
    ) -> Table {
        debug_assert!(rows.iter().all(|r| r.len() == headers.len()));
        Table {
            name: table_id.clone(),
            table_id,
            headers,
            col_types,
            rows,
        }
    }
}
