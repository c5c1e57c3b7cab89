//! CSV ingestion and the JSON tensor-series format.

use crate::config::DataColumns;
use crate::error::{AppError, Result};
use serde_json::{json, Value};
use std::path::Path;
use vsig_core::path::PiecewiseLinearPath;
use vsig_core::tensor::TruncatedTensorSeries;

/// Reads a path CSV: header row with a `t` column plus one column per
/// channel. Rejects NaN values and non-increasing times.
pub fn read_path_csv(path: &Path) -> Result<PiecewiseLinearPath> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| AppError::Data(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| AppError::Data(format!("{}: {e}", path.display())))?
        .clone();
    let t_col = headers
        .iter()
        .position(|h| h.trim() == "t")
        .ok_or_else(|| AppError::Data(format!("{}: missing column \"t\"", path.display())))?;
    let channel_cols: Vec<usize> = (0..headers.len()).filter(|&i| i != t_col).collect();
    if channel_cols.is_empty() {
        return Err(AppError::Data(format!(
            "{}: no channel columns",
            path.display()
        )));
    }
    let mut times = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let line = row_idx + 2; // header is line 1
        let record = record.map_err(|e| AppError::Data(format!("{}: {e}", path.display())))?;
        let parse = |col: usize| -> Result<f64> {
            let cell = record.get(col).unwrap_or("").trim();
            if cell.is_empty() {
                return Err(AppError::Data(format!(
                    "{} line {line}: empty cell in column {}",
                    path.display(),
                    headers.get(col).unwrap_or("")
                )));
            }
            let v: f64 = cell.parse().map_err(|_| {
                AppError::Data(format!(
                    "{} line {line}: cannot parse \"{cell}\"",
                    path.display()
                ))
            })?;
            if !v.is_finite() {
                return Err(AppError::Data(format!(
                    "{} line {line}: non-finite value",
                    path.display()
                )));
            }
            Ok(v)
        };
        let t = parse(t_col)?;
        if let Some(&last) = times.last() {
            if t <= last {
                return Err(AppError::Data(format!(
                    "{} line {line}: times not strictly increasing",
                    path.display()
                )));
            }
        }
        times.push(t);
        values.push(
            channel_cols
                .iter()
                .map(|&c| parse(c))
                .collect::<Result<Vec<f64>>>()?,
        );
    }
    PiecewiseLinearPath::from_samples(times, values).map_err(|e| AppError::Data(e.to_string()))
}

/// Daily log-prices and realized volatility, date-aligned.
#[derive(Debug, Clone)]
pub struct RvSeries {
    pub dates: Vec<String>,
    pub log_price: Vec<f64>,
    pub rv: Vec<f64>,
}

impl RvSeries {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }
}

/// Parses, validates and date-sorts a realized-volatility CSV.
///
/// Returns the series plus any warnings (currently only "rows were out of
/// order"). Unparseable or empty cells are hard errors naming the line.
pub fn ingest_rv_csv(path: &Path, cols: &DataColumns) -> Result<(RvSeries, Vec<String>)> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| AppError::Data(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| AppError::Data(format!("{}: {e}", path.display())))?
        .clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| AppError::Data(format!("{}: missing column \"{name}\"", path.display())))
    };
    let date_col = find(&cols.date_column)?;
    let price_col = find(&cols.price_column)?;
    let rv_col = find(&cols.rv_column)?;

    let mut rows: Vec<(String, f64, f64)> = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let line = row_idx + 2;
        let record = record.map_err(|e| AppError::Data(format!("{}: {e}", path.display())))?;
        let cell = |col: usize, name: &str| -> Result<String> {
            let v = record.get(col).unwrap_or("").trim().to_string();
            if v.is_empty() {
                return Err(AppError::Data(format!(
                    "{} line {line}: empty {name} cell",
                    path.display()
                )));
            }
            Ok(v)
        };
        let date = cell(date_col, "date")?;
        let price: f64 = cell(price_col, "price")?.parse().map_err(|_| {
            AppError::Data(format!(
                "{} line {line}: cannot parse price",
                path.display()
            ))
        })?;
        let rv: f64 = cell(rv_col, "volatility")?.parse().map_err(|_| {
            AppError::Data(format!(
                "{} line {line}: cannot parse volatility",
                path.display()
            ))
        })?;
        if !price.is_finite() || !rv.is_finite() {
            return Err(AppError::Data(format!(
                "{} line {line}: non-finite value",
                path.display()
            )));
        }
        let price = if cols.price_is_raw {
            if price <= 0.0 {
                return Err(AppError::Data(format!(
                    "{} line {line}: raw price must be positive",
                    path.display()
                )));
            }
            price.ln()
        } else {
            price
        };
        rows.push((date, price, rv));
    }
    if rows.is_empty() {
        return Err(AppError::Data(format!("{}: no data rows", path.display())));
    }
    let mut warnings = Vec::new();
    let sorted = rows.windows(2).all(|w| w[0].0 <= w[1].0);
    if !sorted {
        warnings.push(format!(
            "{}: rows were out of date order; sorted",
            path.display()
        ));
        rows.sort_by(|a, b| a.0.cmp(&b.0));
    }
    for w in rows.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(AppError::Data(format!(
                "{}: duplicate date {}",
                path.display(),
                w[0].0
            )));
        }
    }
    let series = RvSeries {
        dates: rows.iter().map(|r| r.0.clone()).collect(),
        log_price: rows.iter().map(|r| r.1).collect(),
        rv: rows.iter().map(|r| r.2).collect(),
    };
    Ok((series, warnings))
}

/// JSON form of a truncated tensor series: `{"m":...,"L":...,"levels":[[...],...]}`.
pub fn tensor_to_json(series: &TruncatedTensorSeries) -> Value {
    json!({
        "m": series.alphabet(),
        "L": series.level(),
        "levels": series.levels(),
    })
}

pub fn tensor_from_json(value: &Value) -> Result<TruncatedTensorSeries> {
    let m = value["m"]
        .as_u64()
        .ok_or_else(|| AppError::Data("tensor JSON: missing \"m\"".into()))? as usize;
    let levels: Vec<Vec<f64>> = serde_json::from_value(value["levels"].clone())
        .map_err(|e| AppError::Data(format!("tensor JSON levels: {e}")))?;
    TruncatedTensorSeries::from_levels(m, levels).map_err(|e| AppError::Data(e.to_string()))
}

/// Writes simulated `(B, Y)` samples either as one wide CSV with a sample
/// id column or as one `t,B,Y` CSV per sample under `dir/dataset/`.
pub fn write_vsde_dataset(
    dir: &Path,
    times: &[f64],
    samples: &[vsig_core::volterra::VsdeSample],
    mode: &str,
) -> Result<()> {
    match mode {
        "wide" => {
            let mut out = String::from("sample,t,B,Y\n");
            for (i, s) in samples.iter().enumerate() {
                for (j, &t) in times.iter().enumerate() {
                    out.push_str(&format!("{i},{t},{},{}\n", s.brownian[j], s.y[j]));
                }
            }
            std::fs::write(dir.join("dataset.csv"), out)?;
        }
        "per_sample" => {
            let sub = dir.join("dataset");
            std::fs::create_dir_all(&sub)?;
            for (i, s) in samples.iter().enumerate() {
                let mut out = String::from("t,B,Y\n");
                for (j, &t) in times.iter().enumerate() {
                    out.push_str(&format!("{t},{},{}\n", s.brownian[j], s.y[j]));
                }
                std::fs::write(sub.join(format!("sample_{i:05}.csv")), out)?;
            }
        }
        other => {
            return Err(AppError::Config(format!(
                "unknown dataset dump mode \"{other}\""
            )))
        }
    }
    Ok(())
}

/// Writes a square matrix as CSV with a bare numeric layout.
pub fn write_gram_csv(path: &Path, gram: &vsig_core::linalg::Mat) -> Result<()> {
    let mut out = String::new();
    for i in 0..gram.rows() {
        let row: Vec<String> = gram.row(i).iter().map(|v| format!("{v}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}
