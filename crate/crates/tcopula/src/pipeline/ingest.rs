//! CSV ingestion of dated price panels.

use crate::error::{Error, Result};
use crate::pipeline::PriceSeries;
use chrono::NaiveDate;
use std::collections::HashSet;
use std::path::Path;

/// Column layout and per-asset options for a price panel.
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub date_column: String,
    pub asset_columns: Vec<String>,
    /// Assets quoted upside down; their prices are replaced by 1 / price.
    pub invert: HashSet<String>,
}

impl CsvSchema {
    pub fn new(date_column: impl Into<String>, asset_columns: &[&str]) -> Self {
        CsvSchema {
            date_column: date_column.into(),
            asset_columns: asset_columns.iter().map(|s| s.to_string()).collect(),
            invert: HashSet::new(),
        }
    }

    pub fn invert_assets(mut self, assets: &[&str]) -> Self {
        self.invert = assets.iter().map(|s| s.to_string()).collect();
        self
    }
}

/// Parsed panel plus how many rows were discarded.
#[derive(Debug, Clone)]
pub struct IngestReport {
    pub series: Vec<PriceSeries>,
    pub dropped_rows: usize,
}

fn parse_date(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .or_else(|_| NaiveDate::parse_from_str(s, "%m/%d/%Y"))
        .map_err(|_| Error::data(format!("unparseable date {s:?}")))
}

fn parse_price(s: &str) -> Result<Option<f64>> {
    let t = s.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("nd") {
        return Ok(None);
    }
    t.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::data(format!("unparseable price {t:?}")))
}

/// Read a dated price panel, keeping only rows where every requested asset
/// has a value. Missing values are blank cells or the marker "ND".
pub fn ingest_csv(path: &Path, schema: &CsvSchema) -> Result<IngestReport> {
    if schema.asset_columns.is_empty() {
        return Err(Error::shape("no asset columns requested".to_string()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .flexible(false)
        .trim(csv::Trim::All)
        .from_path(path)?;

    let headers = reader.headers()?.clone();
    let col_index = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::data(format!("column {name:?} not found in header")))
    };
    let date_idx = col_index(&schema.date_column)?;
    let asset_idx: Vec<usize> = schema
        .asset_columns
        .iter()
        .map(|c| col_index(c))
        .collect::<Result<_>>()?;

    let mut dates = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); asset_idx.len()];
    let mut dropped = 0usize;
    for record in reader.records() {
        let record = record?;
        let date = parse_date(&record[date_idx])?;
        let mut row = Vec::with_capacity(asset_idx.len());
        let mut complete = true;
        for &idx in &asset_idx {
            match parse_price(&record[idx])? {
                Some(p) => row.push(p),
                None => {
                    complete = false;
                    break;
                }
            }
        }
        if !complete {
            dropped += 1;
            continue;
        }
        dates.push(date);
        for (col, p) in columns.iter_mut().zip(row) {
            col.push(p);
        }
    }
    if dates.len() < 2 {
        return Err(Error::data(format!(
            "only {} complete rows in {}",
            dates.len(),
            path.display()
        )));
    }

    let mut series = Vec::with_capacity(columns.len());
    for (name, mut prices) in schema.asset_columns.iter().zip(columns) {
        if schema.invert.contains(name) {
            for p in &mut prices {
                *p = 1.0 / *p;
            }
        }
        series.push(PriceSeries::new(dates.clone(), prices, name.clone())?);
    }
    Ok(IngestReport {
        series,
        dropped_rows: dropped,
    })
}
