//! Series diagnostics: augmented Dickey-Fuller stationarity test,
//! Jarque-Bera normality test, and (partial) autocorrelation functions.

use crate::error::{Error, Result};
use crate::linalg::least_squares;
use crate::Float;
use ndarray::{Array1, Array2};

/// 95th percentile of the chi-squared distribution with 2 degrees of
/// freedom, i.e. -2 ln(0.05).
pub const JB_CRITICAL_5PCT: f64 = 5.991464547107982;

/// Dickey-Fuller critical values for the constant-only regression,
/// tabulated at anchor sample sizes and linearly interpolated in 1/n.
/// Rows: (n, 1%, 5%, 10%); the first row is the asymptotic limit.
const ADF_TABLE: [(f64, f64, f64, f64); 7] = [
    (f64::INFINITY, -3.430350, -2.861540, -2.566770),
    (1000.0, -3.436906, -2.864435, -2.568311),
    (500.0, -3.443496, -2.867338, -2.569858),
    (250.0, -3.456781, -2.873172, -2.572969),
    (100.0, -3.497501, -2.890906, -2.582435),
    (50.0, -3.568486, -2.921360, -2.598662),
    (25.0, -3.723863, -2.986489, -2.632800),
];

/// Result of the augmented Dickey-Fuller test with constant.
#[derive(Debug, Clone, PartialEq)]
pub struct AdfReport<F> {
    /// t-ratio of the lagged level in the differenced regression.
    pub statistic: F,
    pub critical_1pct: F,
    pub critical_5pct: F,
    pub critical_10pct: F,
    /// True when the statistic is below the 5% critical value, i.e. the
    /// unit-root hypothesis is rejected and the series looks stationary.
    pub reject_unit_root: bool,
    pub lags_used: usize,
    /// Effective regression sample size.
    pub n_obs: usize,
}

/// Default lag order floor(12 * (n/100)^(1/4)).
pub fn schwert_max_lag(n: usize) -> usize {
    (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

/// Augmented Dickey-Fuller test with constant: regresses the first
/// difference on the lagged level and `max_lag` lagged differences.
/// `max_lag = None` applies the Schwert rule.
pub fn adf_test<F: Float>(series: &[F], max_lag: Option<usize>) -> Result<AdfReport<F>> {
    let n = series.len();
    let lag = max_lag.unwrap_or_else(|| schwert_max_lag(n));
    let n_params = lag + 2;
    // Rows t = lag+1 .. n-1; need strictly positive residual dof.
    if n < lag + 2 || n - lag - 1 <= n_params {
        return Err(Error::InvalidData(format!(
            "series of length {n} is too short for an ADF regression with {lag} lags"
        )));
    }
    let rows = n - lag - 1;
    let mut design = Array2::<F>::ones((rows, n_params));
    let mut response = Array1::<F>::zeros(rows);
    for (r, t) in (lag + 1..n).enumerate() {
        response[r] = series[t] - series[t - 1];
        design[[r, 1]] = series[t - 1];
        for k in 1..=lag {
            design[[r, 1 + k]] = series[t - k] - series[t - k - 1];
        }
    }
    let fit = least_squares(design.view(), response.view())?;
    let statistic = fit.coefficients[1] / fit.standard_errors[1];
    let (c1, c5, c10) = adf_critical_values(rows);
    Ok(AdfReport {
        statistic,
        critical_1pct: F::cast(c1),
        critical_5pct: F::cast(c5),
        critical_10pct: F::cast(c10),
        reject_unit_root: statistic < F::cast(c5),
        lags_used: lag,
        n_obs: rows,
    })
}

/// Interpolates the tabulated critical values linearly in 1/n.
fn adf_critical_values(n_obs: usize) -> (f64, f64, f64) {
    let x = 1.0 / (n_obs as f64);
    let xs: Vec<f64> = ADF_TABLE.iter().map(|r| 1.0 / r.0).collect();
    if x >= *xs.last().unwrap() {
        let r = ADF_TABLE.last().unwrap();
        return (r.1, r.2, r.3);
    }
    for w in 0..ADF_TABLE.len() - 1 {
        let (x0, x1) = (xs[w], xs[w + 1]);
        if x >= x0 && x <= x1 {
            let t = (x - x0) / (x1 - x0);
            let (a, b) = (&ADF_TABLE[w], &ADF_TABLE[w + 1]);
            return (
                a.1 + t * (b.1 - a.1),
                a.2 + t * (b.2 - a.2),
                a.3 + t * (b.3 - a.3),
            );
        }
    }
    unreachable!("1/n grid covers [0, 1/25]")
}

/// Result of the Jarque-Bera normality test.
#[derive(Debug, Clone, PartialEq)]
pub struct JarqueBeraReport<F> {
    pub statistic: F,
    pub skewness: F,
    /// Non-excess kurtosis; 3 under normality.
    pub kurtosis: F,
    /// True when the statistic exceeds the chi-squared(2) 5% threshold.
    pub reject_normality: bool,
}

/// Jarque-Bera test from 1/n central moments:
/// `JB = n/6 * (S^2 + (K - 3)^2 / 4)`.
pub fn jarque_bera<F: Float>(series: &[F]) -> Result<JarqueBeraReport<F>> {
    let n = series.len();
    if n < 8 {
        return Err(Error::InvalidData(format!(
            "Jarque-Bera needs at least 8 observations, got {n}"
        )));
    }
    let nf = F::cast(n as f64);
    let mean = series.iter().copied().sum::<F>() / nf;
    let (mut m2, mut m3, mut m4) = (F::zero(), F::zero(), F::zero());
    for &y in series {
        let d = y - mean;
        let d2 = d * d;
        m2 = m2 + d2;
        m3 = m3 + d2 * d;
        m4 = m4 + d2 * d2;
    }
    m2 = m2 / nf;
    m3 = m3 / nf;
    m4 = m4 / nf;
    if m2 <= F::zero() {
        return Err(Error::InvalidData(
            "Jarque-Bera is undefined for a constant series".into(),
        ));
    }
    let skewness = m3 / (m2 * m2.sqrt());
    let kurtosis = m4 / (m2 * m2);
    let three = F::cast(3.0);
    let four = F::cast(4.0);
    let statistic =
        nf / F::cast(6.0) * (skewness * skewness + (kurtosis - three) * (kurtosis - three) / four);
    Ok(JarqueBeraReport {
        statistic,
        skewness,
        kurtosis,
        reject_normality: statistic > F::cast(JB_CRITICAL_5PCT),
    })
}

/// Sample autocorrelation function with the biased (1/n) normalization;
/// returns `n_lags + 1` values starting with 1 at lag zero.
pub fn acf<F: Float>(series: &[F], n_lags: usize) -> Result<Vec<F>> {
    let n = series.len();
    if n_lags >= n {
        return Err(Error::InvalidData(format!(
            "cannot compute {n_lags} autocorrelation lags from {n} observations"
        )));
    }
    let nf = F::cast(n as f64);
    let mean = series.iter().copied().sum::<F>() / nf;
    let c0 = series.iter().map(|&y| (y - mean) * (y - mean)).sum::<F>() / nf;
    if c0 <= F::zero() {
        return Err(Error::InvalidData(
            "autocorrelation is undefined for a constant series".into(),
        ));
    }
    let mut out = Vec::with_capacity(n_lags + 1);
    out.push(F::one());
    for k in 1..=n_lags {
        let mut ck = F::zero();
        for t in 0..n - k {
            ck = ck + (series[t] - mean) * (series[t + k] - mean);
        }
        out.push(ck / nf / c0);
    }
    Ok(out)
}

/// Partial autocorrelation function via the Durbin-Levinson recursion
/// on the biased ACF; returns `n_lags + 1` values starting with 1.
pub fn pacf<F: Float>(series: &[F], n_lags: usize) -> Result<Vec<F>> {
    let r = acf(series, n_lags)?;
    let mut out = Vec::with_capacity(n_lags + 1);
    out.push(F::one());
    if n_lags == 0 {
        return Ok(out);
    }
    // phi holds the current-order AR coefficients phi_{k,1..k}.
    let mut phi = vec![F::zero(); n_lags + 1];
    phi[1] = r[1];
    out.push(r[1]);
    let mut prev = phi.clone();
    for k in 2..=n_lags {
        let mut num = r[k];
        let mut den = F::one();
        for j in 1..k {
            num = num - prev[j] * r[k - j];
            den = den - prev[j] * r[j];
        }
        if den == F::zero() {
            return Err(Error::InvalidData(format!(
                "Durbin-Levinson recursion became singular at lag {k}"
            )));
        }
        let kk = num / den;
        for j in 1..k {
            phi[j] = prev[j] - kk * prev[k - j];
        }
        phi[k] = kk;
        out.push(kk);
        prev[..=k].copy_from_slice(&phi[..=k]);
    }
    Ok(out)
}

/// Full diagnostic bundle for one series.
#[derive(Debug, Clone)]
pub struct SeriesDiagnostics<F> {
    pub adf: AdfReport<F>,
    pub jarque_bera: JarqueBeraReport<F>,
    pub acf: Vec<F>,
    pub pacf: Vec<F>,
    pub n_obs: usize,
}

/// Runs all tests. The ADF lag order follows the Schwert rule; ACF and
/// PACF are reported to `n_lags`.
pub fn diagnose<F: Float>(series: &[F], n_lags: usize) -> Result<SeriesDiagnostics<F>> {
    Ok(SeriesDiagnostics {
        adf: adf_test(series, None)?,
        jarque_bera: jarque_bera(series)?,
        acf: acf(series, n_lags)?,
        pacf: pacf(series, n_lags)?,
        n_obs: series.len(),
    })
}

/// Renders the diagnostics as an aligned text table: one row per test
/// with its statistic, threshold, decision, and reading.
pub fn render_report<F: Float>(diag: &SeriesDiagnostics<F>, series_name: &str) -> String {
    let band = 1.96 / (diag.n_obs as f64).sqrt();
    let outside = |vals: &[F]| {
        vals.iter()
            .skip(1)
            .filter(|v| v.abs() > F::cast(band))
            .count()
    };
    let acf_out = outside(&diag.acf);
    let pacf_out = outside(&diag.pacf);
    let n_lags = diag.acf.len() - 1;
    let adf = &diag.adf;
    let jb = &diag.jarque_bera;

    let rows: Vec<[String; 5]> = vec![
        [
            "ADF".into(),
            format!("{:.4}", adf.statistic.to_f64().unwrap_or(f64::NAN)),
            format!("{:.4} (5%)", adf.critical_5pct.to_f64().unwrap_or(f64::NAN)),
            if adf.reject_unit_root { "Reject" } else { "Fail to reject" }.into(),
            if adf.reject_unit_root { "Stationarity" } else { "Possible unit root" }.into(),
        ],
        [
            "Jarque-Bera".into(),
            format!("{:.4}", jb.statistic.to_f64().unwrap_or(f64::NAN)),
            format!("{JB_CRITICAL_5PCT:.4} (5%)"),
            if jb.reject_normality { "Reject" } else { "Fail to reject" }.into(),
            if jb.reject_normality { "Non-normality" } else { "Normality plausible" }.into(),
        ],
        [
            "ACF".into(),
            format!("{acf_out}/{n_lags} lags outside"),
            format!("±{band:.4}"),
            "N/A".into(),
            if acf_out > 0 { "Autocorrelation" } else { "No autocorrelation" }.into(),
        ],
        [
            "PACF".into(),
            format!("{pacf_out}/{n_lags} lags outside"),
            format!("±{band:.4}"),
            "N/A".into(),
            if pacf_out > 0 { "Autocorrelation" } else { "No autocorrelation" }.into(),
        ],
    ];

    let headers = ["Test", "Statistic", "Threshold", "Decision", "Implication"];
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row.iter()) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = format!(
        "Diagnostics for {series_name} (n = {}, ADF lags = {})\n\n",
        diag.n_obs, adf.lags_used
    );
    let fmt_row = |cells: &[String]| {
        let mut line = String::new();
        for (i, cell) in cells.iter().enumerate() {
            if i > 0 {
                line.push_str("  ");
            }
            line.push_str(cell);
            let pad = widths[i].saturating_sub(cell.chars().count());
            if i + 1 < cells.len() {
                line.push_str(&" ".repeat(pad));
            }
        }
        line.push('\n');
        line
    };
    let header_cells: Vec<String> = headers.iter().map(|s| s.to_string()).collect();
    out.push_str(&fmt_row(&header_cells));
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
    out.push('\n');
    for row in &rows {
        out.push_str(&fmt_row(row.as_slice()));
    }
    out
}
