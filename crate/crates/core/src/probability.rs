//! Probability tables keyed by item id and their CSV form.
//!
//! CSV layout: header `item_id,c0,...,c{C-1}`, one row per item.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Per-class probabilities or ranking scores for a list of items.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityTable {
    pub item_ids: Vec<String>,
    pub values: Array2<f64>,
}

impl ProbabilityTable {
    pub fn new(item_ids: Vec<String>, values: Array2<f64>) -> Result<Self> {
        if item_ids.len() != values.nrows() {
            return Err(Error::DimensionError(format!(
                "{} ids for {} probability rows",
                item_ids.len(),
                values.nrows()
            )));
        }
        Ok(ProbabilityTable { item_ids, values })
    }

    pub fn n_classes(&self) -> usize {
        self.values.ncols()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["item_id".to_string()];
        header.extend((0..self.n_classes()).map(|c| format!("c{c}")));
        writer.write_record(&header)?;
        for (id, row) in self.item_ids.iter().zip(self.values.rows()) {
            let mut record = vec![id.clone()];
            record.extend(row.iter().map(|v| v.to_string()));
            writer.write_record(&record)?;
        }
        let bytes = writer
            .into_inner()
            .map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let headers = reader.headers()?.clone();
        if headers.get(0) != Some("item_id") {
            return Err(Error::FormatError("first column must be `item_id`".into()));
        }
        for (c, name) in headers.iter().skip(1).enumerate() {
            if name != format!("c{c}") {
                return Err(Error::FormatError(format!("column {} should be `c{c}`, found `{name}`", c + 1)));
            }
        }
        let n_classes = headers.len() - 1;
        let mut ids = Vec::new();
        let mut values = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record?;
            ids.push(record[0].to_string());
            for field in record.iter().skip(1) {
                let v: f64 = field.parse().map_err(|_| {
                    Error::FormatError(format!("row {}: `{field}` is not a number", row + 1))
                })?;
                values.push(v);
            }
        }
        let values = Array2::from_shape_vec((ids.len(), n_classes), values)
            .map_err(|e| Error::FormatError(e.to_string()))?;
        ProbabilityTable::new(ids, values)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(&fs::read_to_string(path)?)
    }
}
