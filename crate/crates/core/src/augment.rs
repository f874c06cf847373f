//! Temporal filtering of externally collected items.
//!
//! An item is kept only when it has a capture date and its class model
//! scores that day at or above the threshold. Undated items are dropped.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::ingest::{DayIndex, ItemRecord};
use crate::temporal_model::TemporalModel;

/// An external item and the class it was collected for.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentItem {
    pub item_id: String,
    pub class_id: usize,
    pub day: Option<DayIndex>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterDecision {
    pub item_id: String,
    pub class_id: usize,
    pub day: Option<DayIndex>,
    pub score: Option<f64>,
    pub kept: bool,
}

pub fn filter_by_temporal(
    items: &[AugmentItem],
    models: &[TemporalModel],
    threshold: f64,
) -> Result<Vec<FilterDecision>> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::ConfigError(format!("threshold {threshold} outside [0, 1]")));
    }
    let by_class: HashMap<usize, &TemporalModel> = models.iter().map(|m| (m.class_id(), m)).collect();
    items
        .iter()
        .map(|item| {
            let model = by_class
                .get(&item.class_id)
                .ok_or(Error::MissingModel(item.class_id))?;
            let score = item.day.map(|day| model.score(day));
            Ok(FilterDecision {
                item_id: item.item_id.clone(),
                class_id: item.class_id,
                day: item.day,
                score,
                kept: score.is_some_and(|s| s >= threshold),
            })
        })
        .collect()
}

/// Joins a `item_id,class_id` CSV with manifest dates, in CSV order.
pub fn read_class_map(text: &str, manifest: &[ItemRecord]) -> Result<Vec<AugmentItem>> {
    let dates: HashMap<&str, Option<DayIndex>> = manifest
        .iter()
        .map(|r| (r.item_id.as_str(), r.day()))
        .collect();
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["item_id", "class_id"] {
        return Err(Error::FormatError("class map header must be `item_id,class_id`".into()));
    }
    reader
        .records()
        .enumerate()
        .map(|(row, record)| {
            let record = record?;
            let item_id = record[0].to_string();
            let class_id: usize = record[1].trim().parse().map_err(|_| Error::ParseError {
                line: row + 2,
                message: format!("class id `{}` is not an integer", &record[1]),
            })?;
            let day = *dates.get(item_id.as_str()).ok_or_else(|| {
                Error::AlignmentError(format!("item `{item_id}` is not in the manifest"))
            })?;
            Ok(AugmentItem { item_id, class_id, day })
        })
        .collect()
}

pub fn decisions_to_csv(decisions: &[FilterDecision]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["item_id", "class_id", "day", "score", "kept"])?;
    for d in decisions {
        writer.write_record([
            d.item_id.clone(),
            d.class_id.to_string(),
            d.day.map(|v| v.to_string()).unwrap_or_default(),
            d.score.map(|v| v.to_string()).unwrap_or_default(),
            d.kept.to_string(),
        ])?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_model() -> TemporalModel {
        // Score rises linearly to 1 at day 365.
        let scores = (1..=365).map(|d| f64::from(d) / 365.0).collect();
        TemporalModel::from_scores(0, 10, scores).unwrap()
    }

    fn item(id: &str, day: Option<u16>) -> AugmentItem {
        AugmentItem {
            item_id: id.into(),
            class_id: 0,
            day: day.map(|d| DayIndex::new(d).unwrap()),
        }
    }

    #[test]
    fn threshold_examples() {
        let model = ramp_model();
        // Day 347 scores 347/365 = 0.9507, day 183 about 0.5.
        let items = [item("hi", Some(347)), item("mid", Some(183)), item("none", None)];
        let decisions = filter_by_temporal(&items, std::slice::from_ref(&model), 0.9).unwrap();
        assert!(decisions[0].score.unwrap() >= 0.95 && decisions[0].kept);
        assert!(!decisions[1].kept);
        assert!(!decisions[2].kept && decisions[2].score.is_none());
        let all = filter_by_temporal(&items, &[model], 0.0).unwrap();
        assert_eq!(all.iter().map(|d| d.kept).collect::<Vec<_>>(), vec![true, true, false]);
    }

    #[test]
    fn missing_model_and_bad_threshold() {
        let mut it = item("x", Some(3));
        it.class_id = 4;
        assert!(matches!(filter_by_temporal(&[it], &[ramp_model()], 0.5), Err(Error::MissingModel(4))));
        assert!(filter_by_temporal(&[], &[], 1.5).is_err());
    }

    #[test]
    fn class_map_join_and_csv() {
        let manifest = crate::ingest::parse_manifest(
            "{\"id\":\"a\",\"split\":\"test\",\"date\":\"2015-12-13\"}\n{\"id\":\"b\",\"split\":\"test\"}\n",
            None,
        )
        .unwrap();
        let items = read_class_map("item_id,class_id\nb,0\na,0\n", &manifest).unwrap();
        assert_eq!(items[0].day, None);
        assert_eq!(items[1].day.unwrap().get(), 347);
        assert!(read_class_map("item_id,class_id\nz,0\n", &manifest).is_err());
        let decisions = filter_by_temporal(&items, &[ramp_model()], 0.9).unwrap();
        let csv = decisions_to_csv(&decisions).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "item_id,class_id,day,score,kept");
        assert_eq!(lines[1], "b,0,,,false");
        assert!(lines[2].starts_with("a,0,347,0.95") && lines[2].ends_with(",true"));
    }
}
