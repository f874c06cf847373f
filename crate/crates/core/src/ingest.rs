//! Dataset manifests, dense feature matrices and calendar handling.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Number of day-of-year bins used throughout.
pub const DAYS_IN_YEAR: usize = 365;

/// Cumulative day count at the start of each month, non-leap year.
const MONTH_START: [u16; 12] = [0, 31, 59, 90, 120, 151, 181, 212, 243, 273, 304, 334];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        })
    }
}

/// Day of the year in `1..=365`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u16", into = "u16")]
pub struct DayIndex(u16);

impl DayIndex {
    pub const FIRST: DayIndex = DayIndex(1);
    pub const LAST: DayIndex = DayIndex(DAYS_IN_YEAR as u16);

    pub fn new(value: u16) -> Option<Self> {
        (1..=DAYS_IN_YEAR as u16)
            .contains(&value)
            .then_some(DayIndex(value))
    }

    pub fn get(self) -> u16 {
        self.0
    }

    /// Zero-based bin position.
    pub fn index(self) -> usize {
        usize::from(self.0) - 1
    }

    /// Day of the year for a calendar date using the non-leap table.
    ///
    /// Feb 29 maps to 60, the same bin as Mar 1, and the result is clamped
    /// to 365.
    pub fn from_date(date: NaiveDate) -> Self {
        let month = date.month0() as usize;
        let day = if month == 1 && date.day() == 29 {
            60
        } else {
            MONTH_START[month] + date.day() as u16
        };
        DayIndex(day.min(DAYS_IN_YEAR as u16))
    }

    /// Calendar date for this day in `year`, using the non-leap table.
    /// `year` must not be a leap year.
    pub fn to_date(self, year: i32) -> NaiveDate {
        let month = MONTH_START.partition_point(|&start| start < self.0) - 1;
        let day = self.0 - MONTH_START[month];
        NaiveDate::from_ymd_opt(year, month as u32 + 1, u32::from(day))
            .expect("non-leap table yields a valid date")
    }
}

impl TryFrom<u16> for DayIndex {
    type Error = String;

    fn try_from(value: u16) -> std::result::Result<Self, Self::Error> {
        DayIndex::new(value).ok_or_else(|| format!("day {value} outside 1..=365"))
    }
}

impl From<DayIndex> for u16 {
    fn from(day: DayIndex) -> u16 {
        day.0
    }
}

impl fmt::Display for DayIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

pub fn day_of_year(date: NaiveDate) -> DayIndex {
    DayIndex::from_date(date)
}

/// One line of a dataset manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemRecord {
    pub item_id: String,
    pub split: Split,
    pub label: Option<usize>,
    pub capture_date: Option<NaiveDate>,
}

impl ItemRecord {
    pub fn day(&self) -> Option<DayIndex> {
        self.capture_date.map(DayIndex::from_date)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    id: String,
    split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    date: Option<String>,
}

/// Parses a JSON-lines manifest. Blank lines are skipped.
///
/// When `n_classes` is given, labels are range-checked against it.
pub fn parse_manifest(text: &str, n_classes: Option<usize>) -> Result<Vec<ItemRecord>> {
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let line_no = lineno + 1;
        let parse_err = |message: String| Error::ParseError {
            line: line_no,
            message,
        };
        let raw: RawRecord = serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
        if raw.id.is_empty() {
            return Err(parse_err("empty item id".into()));
        }
        let capture_date = match raw.date.as_deref() {
            Some(text) => Some(
                NaiveDate::parse_from_str(text, "%Y-%m-%d")
                    .map_err(|e| parse_err(format!("bad date `{text}`: {e}")))?,
            ),
            None => None,
        };
        if raw.split != Split::Test && raw.label.is_none() {
            return Err(parse_err(format!("{} item `{}` has no label", raw.split, raw.id)));
        }
        if let (Some(label), Some(n)) = (raw.label, n_classes) {
            if label >= n {
                return Err(Error::LabelOutOfRange {
                    item: raw.id,
                    label,
                    n_classes: n,
                });
            }
        }
        if !seen.insert(raw.id.clone()) {
            return Err(Error::DuplicateItem(raw.id));
        }
        records.push(ItemRecord {
            item_id: raw.id,
            split: raw.split,
            label: raw.label,
            capture_date,
        });
    }
    Ok(records)
}

pub fn serialize_manifest(records: &[ItemRecord]) -> String {
    let mut out = String::new();
    for record in records {
        let raw = RawRecord {
            id: record.item_id.clone(),
            split: record.split,
            label: record.label,
            date: record
                .capture_date
                .map(|d| d.format("%Y-%m-%d").to_string()),
        };
        out.push_str(&serde_json::to_string(&raw).expect("manifest records serialize"));
        out.push('\n');
    }
    out
}

pub fn read_manifest(path: impl AsRef<Path>, n_classes: Option<usize>) -> Result<Vec<ItemRecord>> {
    parse_manifest(&fs::read_to_string(path)?, n_classes)
}

/// Index from item id to record position.
pub fn index_by_id(records: &[ItemRecord]) -> HashMap<&str, usize> {
    records
        .iter()
        .enumerate()
        .map(|(i, r)| (r.item_id.as_str(), i))
        .collect()
}

const MAGIC: &[u8; 4] = b"FMAT";

/// Dense row-major feature matrix for one feature source.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    source_name: String,
    rows: usize,
    cols: usize,
    values: Vec<f32>,
    row_ids: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(
        source_name: impl Into<String>,
        cols: usize,
        values: Vec<f32>,
        row_ids: Vec<String>,
    ) -> Result<Self> {
        if cols == 0 {
            return Err(Error::FormatError("feature matrix needs at least one column".into()));
        }
        let rows = row_ids.len();
        if values.len() != rows * cols {
            return Err(Error::FormatError(format!(
                "expected {rows}x{cols} = {} values, found {}",
                rows * cols,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteFeature {
                row: pos / cols,
                col: pos % cols,
            });
        }
        Ok(FeatureMatrix {
            source_name: source_name.into(),
            rows,
            cols,
            values,
            row_ids,
        })
    }

    pub fn source_name(&self) -> &str {
        &self.source_name
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    /// Rows for the given ids, in the given order.
    pub fn select(&self, ids: &[&str]) -> Result<FeatureMatrix> {
        let index: HashMap<&str, usize> = self
            .row_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let mut values = Vec::with_capacity(ids.len() * self.cols);
        for id in ids {
            let &row = index.get(id).ok_or_else(|| {
                Error::AlignmentError(format!("item `{id}` missing from source `{}`", self.source_name))
            })?;
            values.extend_from_slice(self.row(row));
        }
        Ok(FeatureMatrix {
            source_name: self.source_name.clone(),
            rows: ids.len(),
            cols: self.cols,
            values,
            row_ids: ids.iter().map(|s| s.to_string()).collect(),
        })
    }

    /// Converts to a dense array in the requested scalar type.
    pub fn to_array<T: Scalar>(&self) -> Array2<T> {
        Array2::from_shape_fn((self.rows, self.cols), |(r, c)| {
            T::from_f32(self.values[r * self.cols + c]).expect("finite f32 converts")
        })
    }

    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.values.len() * 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.rows as u32).to_le_bytes());
        out.extend_from_slice(&(self.cols as u32).to_le_bytes());
        out.extend_from_slice(&(self.source_name.len() as u32).to_le_bytes());
        out.extend_from_slice(self.source_name.as_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for id in &self.row_ids {
            out.extend_from_slice(&(id.len() as u32).to_le_bytes());
            out.extend_from_slice(id.as_bytes());
        }
        out
    }

    pub fn from_binary(bytes: &[u8]) -> Result<Self> {
        let mut reader = ByteReader { bytes, pos: 0 };
        if reader.take(4)? != MAGIC {
            return Err(Error::FormatError("missing FMAT magic".into()));
        }
        let rows = reader.u32()? as usize;
        let cols = reader.u32()? as usize;
        let name_len = reader.u32()? as usize;
        let name = reader.string(name_len)?;
        let payload = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::FormatError("matrix dimensions overflow".into()))?;
        let values: Vec<f32> = reader
            .take(payload)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let mut row_ids = Vec::with_capacity(rows);
        for _ in 0..rows {
            let len = reader.u32()? as usize;
            row_ids.push(reader.string(len)?);
        }
        if reader.pos != bytes.len() {
            return Err(Error::FormatError(format!(
                "{} trailing bytes after item ids",
                bytes.len() - reader.pos
            )));
        }
        FeatureMatrix::new(name, cols, values, row_ids)
    }

    /// Parses the CSV alternative: header row, first column `item_id`.
    pub fn from_csv(source_name: impl Into<String>, text: &str) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let headers = reader.headers()?.clone();
        if headers.get(0) != Some("item_id") {
            return Err(Error::FormatError("first CSV column must be `item_id`".into()));
        }
        let cols = headers.len() - 1;
        let mut values = Vec::new();
        let mut row_ids = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record?;
            if record.len() != headers.len() {
                return Err(Error::FormatError(format!(
                    "row {} has {} fields, header has {}",
                    row + 1,
                    record.len(),
                    headers.len()
                )));
            }
            row_ids.push(record[0].to_string());
            for field in record.iter().skip(1) {
                let v: f32 = field.trim().parse().map_err(|_| {
                    Error::FormatError(format!("row {}: `{field}` is not a number", row + 1))
                })?;
                values.push(v);
            }
        }
        FeatureMatrix::new(source_name, cols, values, row_ids)
    }

    /// Loads either format, detected by the magic bytes.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path)?;
        if bytes.starts_with(MAGIC) {
            Self::from_binary(&bytes)
        } else {
            let text = String::from_utf8(bytes)
                .map_err(|_| Error::FormatError("file is neither FMAT nor UTF-8 CSV".into()))?;
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            Self::from_csv(name, &text)
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut file = fs::File::create(path)?;
        file.write_all(&self.to_binary())?;
        Ok(())
    }
}

pub fn load_feature_matrix(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    FeatureMatrix::load(path)
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&end| end <= self.bytes.len())
            .ok_or_else(|| {
                Error::FormatError(format!(
                    "unexpected end of file: wanted {n} bytes at offset {}",
                    self.pos
                ))
            })?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn string(&mut self, len: usize) -> Result<String> {
        let b = self.take(len)?;
        String::from_utf8(b.to_vec()).map_err(|_| Error::FormatError("invalid UTF-8 string".into()))
    }
}
