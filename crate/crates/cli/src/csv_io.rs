//! CSV ingestion and the data-preparation steps between a raw file and
//! a fittable dataset: ordering, missing-value fill, and the optional
//! price-to-log-return transform.

use crate::config::{parse_date, RunConfig};
use crate::error::{CliError, CliResult};
use chrono::NaiveDate;
use ndarray::{Array1, Array2};
use qgl_core::forecast::{fill_missing, log_returns, FillPolicy};
use qgl_core::{Dataset64, TargetKind, TimeSeriesDataset};

/// Reads the configured CSV into a dataset, sorted by date. Cells that
/// are empty or spell a non-finite float ("NaN", "inf") come through as
/// NaN for the fill step; anything else non-numeric is an error naming
/// the row and column.
pub fn load_csv(cfg: &RunConfig) -> CliResult<Dataset64> {
    let path = &cfg.input.path;
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => {
            CliError::io(path.clone(), std::io::Error::other(e.to_string()))
        }
        _ => CliError::Data(format!("{}: {e}", path.display())),
    })?;

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let date_idx = find(&cfg.input.date_column).ok_or_else(|| {
        CliError::Data(format!(
            "{}: missing date column `{}`",
            path.display(),
            cfg.input.date_column
        ))
    })?;
    let target_idx = find(&cfg.input.target_column).ok_or_else(|| {
        CliError::Data(format!(
            "{}: missing target column `{}`",
            path.display(),
            cfg.input.target_column
        ))
    })?;
    let feature_idx: Vec<usize> = if cfg.input.feature_columns.is_empty() {
        (0..headers.len())
            .filter(|&i| i != date_idx && i != target_idx)
            .collect()
    } else {
        let mut missing = Vec::new();
        let idx: Vec<usize> = cfg
            .input
            .feature_columns
            .iter()
            .filter_map(|name| {
                let found = find(name);
                if found.is_none() {
                    missing.push(name.clone());
                }
                found
            })
            .collect();
        if !missing.is_empty() {
            return Err(CliError::Data(format!(
                "{}: missing feature columns: {}",
                path.display(),
                missing.join(", ")
            )));
        }
        idx
    };

    let mut rows: Vec<(NaiveDate, f64, Vec<f64>)> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let line = r + 2; // 1-based, after the header line
        let record = record.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let cell = |i: usize| record.get(i).unwrap_or("").trim();
        let date = parse_date(cell(date_idx)).ok_or_else(|| {
            CliError::Data(format!(
                "{}: line {line}, column `{}`: unparseable date `{}`",
                path.display(),
                headers[date_idx],
                cell(date_idx)
            ))
        })?;
        let number = |i: usize| -> CliResult<f64> {
            let s = cell(i);
            if s.is_empty() {
                return Ok(f64::NAN);
            }
            s.parse::<f64>().map_err(|_| {
                CliError::Data(format!(
                    "{}: line {line}, column `{}`: unparseable number `{s}`",
                    path.display(),
                    headers[i],
                ))
            })
        };
        let target = number(target_idx)?;
        let features = feature_idx
            .iter()
            .map(|&i| number(i))
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push((date, target, features));
    }
    if rows.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no data rows",
            path.display()
        )));
    }

    rows.sort_by_key(|(d, _, _)| *d);
    let n = rows.len();
    let p = feature_idx.len();
    let dates: Vec<NaiveDate> = rows.iter().map(|(d, _, _)| *d).collect();
    let target = Array1::from_iter(rows.iter().map(|(_, t, _)| *t));
    let mut features = Array2::zeros((n, p));
    for (i, (_, _, f)) in rows.iter().enumerate() {
        for (j, v) in f.iter().enumerate() {
            features[[i, j]] = *v;
        }
    }
    let names: Vec<String> = feature_idx.iter().map(|&i| headers[i].clone()).collect();

    // The duplicate-date check comes from the dataset constructor,
    // which sees the rows already sorted.
    TimeSeriesDataset::new(dates, target, features, names, TargetKind::Price)
        .map_err(CliError::from)
}

/// A loaded dataset with its train/test boundary resolved.
pub struct PreparedData {
    pub dataset: Dataset64,
    /// Index of the first test row.
    pub split: usize,
}

/// Index of the first row strictly after the split date.
pub fn split_index(dates: &[NaiveDate], split_date: NaiveDate) -> usize {
    dates.partition_point(|d| *d <= split_date)
}

/// Fills missing cells column by column, then converts price targets to
/// log returns (dropping the first row). The returned split index is
/// relative to the transformed rows.
pub fn prepare(cfg: &RunConfig) -> CliResult<PreparedData> {
    let raw = load_csv(cfg)?;
    let split_date = cfg.split_date()?;
    let first = raw.dates()[0];
    let last = raw.dates()[raw.n_samples() - 1];
    if split_date < first || split_date >= last {
        return Err(CliError::Config(format!(
            "split date {split_date} outside the data range {first}..{last}"
        )));
    }
    let split = split_index(raw.dates(), split_date);
    let policy = cfg.fill_policy()?;
    let filled = fill_dataset(&raw, policy, split)?;

    let (dataset, split) = match cfg.target_kind()? {
        TargetKind::LogReturn => (
            TimeSeriesDataset::new(
                filled.dates().to_vec(),
                filled.target().to_owned(),
                filled.features().to_owned(),
                filled.feature_names().to_vec(),
                TargetKind::LogReturn,
            )?,
            split,
        ),
        TargetKind::Price => {
            let returns = log_returns(filled.target().as_slice().expect("contiguous"))?;
            let n = filled.n_samples();
            let dataset = TimeSeriesDataset::new(
                filled.dates()[1..].to_vec(),
                Array1::from(returns),
                filled.features().slice(ndarray::s![1..n, ..]).to_owned(),
                filled.feature_names().to_vec(),
                TargetKind::LogReturn,
            )?;
            (dataset, split - 1)
        }
    };

    let n = dataset.n_samples();
    if split < 3 || split >= n {
        return Err(CliError::Config(format!(
            "split date {split_date} leaves {split} training rows and {} test rows; \
             need at least 3 and 1",
            n - split.min(n)
        )));
    }
    Ok(PreparedData { dataset, split })
}

/// Applies the fill policy to the target and every feature column,
/// using the first `train_len` rows as the training period.
pub fn fill_dataset(
    dataset: &Dataset64,
    policy: FillPolicy,
    train_len: usize,
) -> CliResult<Dataset64> {
    let target = fill_missing(
        dataset.target().as_slice().expect("contiguous"),
        policy,
        train_len,
    )
    .map_err(|e| CliError::Data(format!("target column: {e}")))?;
    let n = dataset.n_samples();
    let p = dataset.n_features();
    let mut features = Array2::zeros((n, p));
    for j in 0..p {
        let col: Vec<f64> = dataset.features().column(j).to_vec();
        let filled = fill_missing(&col, policy, train_len).map_err(|e| {
            CliError::Data(format!("column `{}`: {e}", dataset.feature_names()[j]))
        })?;
        for (i, v) in filled.into_iter().enumerate() {
            features[[i, j]] = v;
        }
    }
    TimeSeriesDataset::new(
        dataset.dates().to_vec(),
        Array1::from(target),
        features,
        dataset.feature_names().to_vec(),
        dataset.target_kind(),
    )
    .map_err(CliError::from)
}

/// Writes a report file, creating the output directory if needed.
pub fn write_report(dir: &std::path::Path, name: &str, content: &str) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir.to_path_buf(), e))?;
    let path = dir.join(name);
    std::fs::write(&path, content).map_err(|e| CliError::io(path, e))
}
