//! Layer-summary tables: one row per backbone with best layer, relative
//! depth, best and final Top-1, and their difference. Accuracies are in
//! percent; printed values use one decimal place.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{relative_depth, scaling_regression, RegressionBlock, SweepResult};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub backbone: String,
    /// As written in the input, e.g. `38M` or `5.54B`.
    pub params: Option<String>,
    pub num_layers: usize,
    pub best_layer: usize,
    pub acc_best: f64,
    pub acc_final: f64,
}

#[derive(Deserialize)]
struct InputRecord {
    backbone: String,
    #[serde(default)]
    params: Option<String>,
    layers: usize,
    best_layer: usize,
    acc_best: f64,
    acc_final: f64,
}

#[derive(Serialize)]
struct OutputRecord<'a> {
    backbone: &'a str,
    params: &'a str,
    layers: usize,
    best_layer: usize,
    relative_depth: String,
    acc_best: String,
    acc_final: String,
    delta: String,
}

/// Parses a parameter count such as `38M`, `1.14B` or `86000000`.
pub fn parse_param_count(text: &str) -> Result<f64> {
    let t = text.trim();
    let (num, mult) = match t.chars().last().map(|c| c.to_ascii_uppercase()) {
        Some('K') => (&t[..t.len() - 1], 1e3),
        Some('M') => (&t[..t.len() - 1], 1e6),
        Some('B') | Some('G') => (&t[..t.len() - 1], 1e9),
        Some('T') => (&t[..t.len() - 1], 1e12),
        _ => (t, 1.0),
    };
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("cannot parse parameter count {text:?}")))?;
    if !(value > 0.0) || !value.is_finite() {
        return Err(Error::InvalidArgument(format!("parameter count {text:?} must be positive")));
    }
    Ok(value * mult)
}

/// One-decimal percentage.
pub fn format_percent(x: f64) -> String {
    format!("{x:.1}")
}

/// Signed one-decimal percentage, e.g. `+27.4`.
pub fn format_delta(x: f64) -> String {
    format!("{x:+.1}")
}

impl TableRow {
    pub fn relative_depth(&self) -> Result<f64> {
        relative_depth(self.best_layer, self.num_layers)
    }

    pub fn delta(&self) -> f64 {
        self.acc_best - self.acc_final
    }

    pub fn param_count(&self) -> Result<Option<f64>> {
        self.params.as_deref().map(parse_param_count).transpose()
    }

    /// Summarizes a sweep; accuracies are converted to percent.
    pub fn from_sweep(sweep: &SweepResult, params: Option<String>) -> Result<Self> {
        let first = &sweep.reports[0];
        Ok(Self {
            backbone: first.backbone.clone(),
            params,
            num_layers: first.num_layers,
            best_layer: sweep.best_layer,
            acc_best: 100.0 * sweep.best_top1,
            acc_final: 100.0 * sweep.final_top1,
        })
    }
}

/// Reads rows from CSV with header
/// `backbone,params,layers,best_layer,acc_best,acc_final`.
pub fn read_table(reader: impl Read) -> Result<Vec<TableRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut rows = Vec::new();
    for rec in rdr.deserialize::<InputRecord>() {
        let rec = rec.map_err(|e| Error::InvalidArgument(format!("table row: {e}")))?;
        let row = TableRow {
            backbone: rec.backbone,
            params: rec.params.filter(|p| !p.is_empty()),
            num_layers: rec.layers,
            best_layer: rec.best_layer,
            acc_best: rec.acc_best,
            acc_final: rec.acc_final,
        };
        row.relative_depth()?;
        row.param_count()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Writes rows with derived relative depth and delta columns, all at one
/// decimal place.
pub fn write_table(rows: &[TableRow], writer: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for row in rows {
        wtr.serialize(OutputRecord {
            backbone: &row.backbone,
            params: row.params.as_deref().unwrap_or(""),
            layers: row.num_layers,
            best_layer: row.best_layer,
            relative_depth: format_percent(100.0 * row.relative_depth()?),
            acc_best: format_percent(row.acc_best),
            acc_final: format_percent(row.acc_final),
            delta: format_delta(row.delta()),
        })
        .map_err(|e| Error::InvalidArgument(format!("table output: {e}")))?;
    }
    wtr.flush()?;
    Ok(())
}

/// Regresses best and final accuracy on `ln(params)` across rows.
pub fn regress_table(rows: &[TableRow]) -> Result<RegressionBlock> {
    let mut best = Vec::with_capacity(rows.len());
    let mut last = Vec::with_capacity(rows.len());
    for row in rows {
        let p = row
            .param_count()?
            .ok_or_else(|| Error::InvalidArgument(format!("{}: no parameter count", row.backbone)))?;
        best.push((p, row.acc_best));
        last.push((p, row.acc_final));
    }
    Ok(RegressionBlock {
        best: scaling_regression(&best)?,
        final_output: scaling_regression(&last)?,
    })
}
