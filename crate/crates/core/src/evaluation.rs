//! Forecast accuracy metrics: MSE, MAE, RMSE, and MAPE.

use crate::error::{Error, Result};
use crate::Float;

/// Relative magnitudes below this are excluded from MAPE rather than
/// dividing by a near-zero actual.
pub const DEFAULT_MAPE_EPSILON: f64 = 1e-12;

/// The four summary metrics for one forecast series.
///
/// `mape` is in percent and absent when every actual value was below
/// the epsilon cutoff; `mape_skipped` counts the excluded indices.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport<F> {
    pub mse: F,
    pub mae: F,
    pub rmse: F,
    pub mape: Option<F>,
    pub mape_skipped: usize,
}

/// Computes all four metrics with the default MAPE cutoff.
pub fn evaluate<F: Float>(actual: &[F], predicted: &[F]) -> Result<MetricsReport<F>> {
    evaluate_with_epsilon(actual, predicted, F::cast(DEFAULT_MAPE_EPSILON))
}

/// Computes all four metrics, skipping MAPE terms where
/// `|actual| <= mape_epsilon`.
pub fn evaluate_with_epsilon<F: Float>(
    actual: &[F],
    predicted: &[F],
    mape_epsilon: F,
) -> Result<MetricsReport<F>> {
    if actual.len() != predicted.len() {
        return Err(Error::DimensionMismatch(format!(
            "actual has {} values but predicted has {}",
            actual.len(),
            predicted.len()
        )));
    }
    if actual.is_empty() {
        return Err(Error::InvalidData("cannot evaluate empty series".into()));
    }
    let n = F::cast(actual.len() as f64);
    let mut sq = F::zero();
    let mut abs = F::zero();
    let mut rel = F::zero();
    let mut used = 0usize;
    for (&y, &yhat) in actual.iter().zip(predicted.iter()) {
        let e = y - yhat;
        sq = sq + e * e;
        abs = abs + e.abs();
        if y.abs() > mape_epsilon {
            rel = rel + (e / y).abs();
            used += 1;
        }
    }
    let mse = sq / n;
    let mape = (used > 0)
        .then(|| F::cast(100.0) * rel / F::cast(used as f64));
    Ok(MetricsReport {
        mse,
        mae: abs / n,
        rmse: mse.sqrt(),
        mape,
        mape_skipped: actual.len() - used,
    })
}

/// One labeled row of a metrics table.
#[derive(Debug, Clone)]
pub struct LabeledMetrics<F> {
    pub label: String,
    pub report: MetricsReport<F>,
}

/// CSV with one row per method: `method,mse,mae,rmse,mape,mape_skipped`.
/// An undefined MAPE renders as `NA`.
pub fn metrics_csv<F: Float>(rows: &[LabeledMetrics<F>]) -> String {
    let mut out = String::from("method,mse,mae,rmse,mape,mape_skipped\n");
    for row in rows {
        let r = &row.report;
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.label,
            r.mse,
            r.mae,
            r.rmse,
            fmt_mape(&r.mape),
            r.mape_skipped
        ));
    }
    out
}

/// Wide CSV for multi-quantile comparisons: one row per (method,
/// metric), one value column per quantile level.
///
/// `rows` pairs each method label with its per-quantile reports, in the
/// same order as `taus`.
pub fn metrics_by_tau_csv<F: Float>(
    taus: &[F],
    rows: &[(String, Vec<MetricsReport<F>>)],
) -> Result<String> {
    let mut out = String::from("method,metric");
    for tau in taus {
        out.push_str(&format!(",tau={tau}"));
    }
    out.push('\n');
    for (label, reports) in rows {
        if reports.len() != taus.len() {
            return Err(Error::DimensionMismatch(format!(
                "method {label} has {} reports for {} quantile levels",
                reports.len(),
                taus.len()
            )));
        }
        for metric in ["mse", "mae", "rmse", "mape"] {
            out.push_str(&format!("{label},{metric}"));
            for r in reports {
                let cell = match metric {
                    "mse" => format!("{}", r.mse),
                    "mae" => format!("{}", r.mae),
                    "rmse" => format!("{}", r.rmse),
                    _ => fmt_mape(&r.mape),
                };
                out.push(',');
                out.push_str(&cell);
            }
            out.push('\n');
        }
    }
    Ok(out)
}

fn fmt_mape<F: Float>(mape: &Option<F>) -> String {
    match mape {
        Some(v) => format!("{v}"),
        None => "NA".into(),
    }
}
