//! Return preprocessing and expanding-window one-step-ahead
//! forecasting at one or more quantile levels.

use crate::dataset::{GroupStructure, TimeSeriesDataset};
use crate::error::{Error, Result};
use crate::model_selection::{cross_validate_with_folds, default_min_train, time_series_folds, SearchGrid};
use crate::penalty::Method;
use crate::solver::{fit_preset_with_warm, PresetFit, PresetHyperparams, SolverConfig};
use crate::Float;
use chrono::NaiveDate;

/// Log returns of a positive price series: `r_t = ln(P_t / P_{t-1})`.
pub fn log_returns<F: Float>(prices: &[F]) -> Result<Vec<F>> {
    if prices.len() < 2 {
        return Err(Error::InvalidData(format!(
            "need at least 2 prices for returns, got {}",
            prices.len()
        )));
    }
    if let Some((i, &p)) = prices
        .iter()
        .enumerate()
        .find(|(_, &p)| !(p > F::zero() && p.is_finite()))
    {
        return Err(Error::InvalidData(format!(
            "price at position {i} is {p}, but log returns need positive finite prices"
        )));
    }
    Ok(prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
}

/// How to replace non-finite values in a series split into a training
/// prefix and a test tail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FillPolicy {
    /// Mean of the finite training-period values (default).
    #[default]
    TrainMean,
    /// Mean of the finite test-period values.
    TestMean,
    /// Next finite value; the last finite value backstops a gap at the
    /// end.
    BackwardFill,
}

impl FillPolicy {
    pub fn as_str(&self) -> &'static str {
        match self {
            FillPolicy::TrainMean => "train_mean",
            FillPolicy::TestMean => "test_mean",
            FillPolicy::BackwardFill => "backward_fill",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "train_mean" => Ok(FillPolicy::TrainMean),
            "test_mean" | "paper_parity" => Ok(FillPolicy::TestMean),
            "backward_fill" => Ok(FillPolicy::BackwardFill),
            other => Err(Error::InvalidParameter(format!(
                "unknown fill policy `{other}` (expected `train_mean`, `test_mean` or `backward_fill`)"
            ))),
        }
    }
}

impl std::fmt::Display for FillPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Replaces non-finite entries per `policy`. `train_len` marks the end
/// of the training prefix for the mean-based policies.
pub fn fill_missing<F: Float>(series: &[F], policy: FillPolicy, train_len: usize) -> Result<Vec<F>> {
    if !series.iter().any(|v| v.is_finite()) {
        return Err(Error::InvalidData(
            "cannot fill a series with no finite values".into(),
        ));
    }
    let mut out = series.to_vec();
    match policy {
        FillPolicy::TrainMean | FillPolicy::TestMean => {
            let range = match policy {
                FillPolicy::TrainMean => &series[..train_len.min(series.len())],
                _ => &series[train_len.min(series.len())..],
            };
            let finite: Vec<F> = range.iter().copied().filter(|v| v.is_finite()).collect();
            if finite.is_empty() {
                return Err(Error::InvalidData(format!(
                    "no finite values in the {} period to average",
                    if policy == FillPolicy::TrainMean { "training" } else { "test" }
                )));
            }
            let mean = finite.iter().copied().sum::<F>() / F::cast(finite.len() as f64);
            for v in out.iter_mut() {
                if !v.is_finite() {
                    *v = mean;
                }
            }
        }
        FillPolicy::BackwardFill => {
            let mut next = None;
            for v in out.iter_mut().rev() {
                if v.is_finite() {
                    next = Some(*v);
                } else if let Some(n) = next {
                    *v = n;
                }
            }
            // A trailing gap has no later value; carry the last finite
            // one forward instead.
            let mut prev = None;
            for v in out.iter_mut() {
                if v.is_finite() {
                    prev = Some(*v);
                } else if let Some(p) = prev {
                    *v = p;
                }
            }
        }
    }
    Ok(out)
}

/// One forecast date: the realized value (absent only when predicting
/// past the end of the sample) and one prediction per quantile level.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRecord<F> {
    pub date: NaiveDate,
    pub actual: Option<F>,
    /// (tau, prediction) pairs in the requested tau order.
    pub predictions: Vec<(F, F)>,
    pub model: Method,
    /// False when any quantile's fit for this date stopped at the
    /// iteration cap instead of the optimality tolerance.
    pub converged: bool,
}

/// Controls for [`expanding_window_forecast`].
#[derive(Debug, Clone)]
pub struct ForecastSettings<F> {
    pub taus: Vec<F>,
    /// Hyperparameter grid searched on the initial training window.
    pub grid: SearchGrid<F>,
    pub k_folds: usize,
    /// Refit every `refit_stride` test steps (1 = every step).
    pub refit_stride: usize,
}

impl<F: Float> ForecastSettings<F> {
    pub fn new(taus: Vec<F>, grid: SearchGrid<F>, k_folds: usize) -> Self {
        Self { taus, grid, k_folds, refit_stride: 1 }
    }

    fn validate(&self) -> Result<()> {
        if self.taus.is_empty() {
            return Err(Error::InvalidParameter(
                "at least one quantile level is required".into(),
            ));
        }
        for &tau in &self.taus {
            crate::loss::check_tau(tau)?;
        }
        if self.refit_stride == 0 {
            return Err(Error::InvalidParameter("refit stride must be positive".into()));
        }
        Ok(())
    }
}

/// Selected hyperparameters per quantile level, exposed for reporting.
#[derive(Debug, Clone)]
pub struct ForecastOutput<F> {
    pub records: Vec<ForecastRecord<F>>,
    pub selected: Vec<(F, PresetHyperparams<F>)>,
}

/// Walks the test period one step at a time: for each test date the
/// model is fit on all earlier supervised pairs and predicts from the
/// features observed the step before. Hyperparameters are chosen once
/// per quantile by cross-validation on the initial training window;
/// each quantile's stream is fit independently, warm-starting from the
/// previous step.
///
/// `split` is the index of the first test row: predictions cover the
/// dates of rows `split..n`, each fit seeing data strictly before its
/// date.
pub fn expanding_window_forecast<F: Float>(
    dataset: &TimeSeriesDataset<F>,
    groups: &GroupStructure,
    method: Method,
    settings: &ForecastSettings<F>,
    split: usize,
    config: &SolverConfig<F>,
) -> Result<ForecastOutput<F>> {
    settings.validate()?;
    check_split(split, dataset.n_samples())?;
    let pairs = dataset.lagged_pairs()?;
    let initial_train = pairs.rows(0, split - 1)?;

    let mut selected = Vec::with_capacity(settings.taus.len());
    for &tau in &settings.taus {
        let grid = settings.grid.clone().with_tau(tau);
        let m = initial_train.n_samples();
        let folds = time_series_folds(
            m,
            settings.k_folds.min(m.saturating_sub(1)).max(1),
            default_min_train(m),
        )?;
        let choice =
            cross_validate_with_folds(&initial_train, groups, &grid, method, &folds, config)?;
        selected.push((tau, choice.best));
    }
    forecast_with_hyperparams(
        dataset,
        groups,
        method,
        &selected,
        settings.refit_stride,
        split,
        config,
    )
}

/// The forecasting pass of [`expanding_window_forecast`] with the
/// per-quantile hyperparameters already chosen, for callers that run
/// (and report on) cross-validation themselves.
pub fn forecast_with_hyperparams<F: Float>(
    dataset: &TimeSeriesDataset<F>,
    groups: &GroupStructure,
    method: Method,
    selected: &[(F, PresetHyperparams<F>)],
    refit_stride: usize,
    split: usize,
    config: &SolverConfig<F>,
) -> Result<ForecastOutput<F>> {
    if selected.is_empty() {
        return Err(Error::InvalidParameter(
            "no quantile levels to forecast".into(),
        ));
    }
    for (tau, _) in selected {
        if !(*tau > F::zero() && *tau < F::one()) {
            return Err(Error::InvalidParameter(format!(
                "quantile level {tau} outside (0, 1)"
            )));
        }
    }
    if refit_stride == 0 {
        return Err(Error::InvalidParameter("refit stride must be >= 1".into()));
    }
    let n = dataset.n_samples();
    check_split(split, n)?;
    // Pair row j holds the features of row j and the target of row j+1;
    // predicting the target at row t uses pair row t-1 and trains on
    // pair rows 0..t-1.
    let pairs = dataset.lagged_pairs()?;

    let mut streams: Vec<Vec<(F, F, bool)>> = Vec::with_capacity(selected.len());
    for (tau, hp) in selected {
        // One forward pass over the test dates for this quantile.
        let mut stream = Vec::with_capacity(n - split);
        let mut warm: Option<PresetFit<F>> = None;
        let mut last_refit_step: Option<usize> = None;
        for (step, t) in (split..n).enumerate() {
            let needs_refit = match last_refit_step {
                None => true,
                Some(_) => step % refit_stride == 0,
            };
            if needs_refit {
                let train = pairs.rows(0, t - 1)?;
                warm = Some(fit_preset_with_warm(
                    method,
                    &train,
                    groups,
                    *tau,
                    hp,
                    config,
                    warm.as_ref(),
                )?);
                last_refit_step = Some(step);
            }
            let fit = &warm.as_ref().expect("refit on first step").result;
            let features_row = pairs.features().row(t - 1).to_owned();
            let pred = fit.predict_row(features_row.view());
            stream.push((pred, pairs.target()[t - 1], fit.converged));
        }
        streams.push(stream);
    }

    let mut records = Vec::with_capacity(n - split);
    for (step, t) in (split..n).enumerate() {
        let mut predictions = Vec::with_capacity(selected.len());
        let mut converged = true;
        let mut actual = None;
        for (si, (tau, _)) in selected.iter().enumerate() {
            let (pred, act, conv) = streams[si][step];
            predictions.push((*tau, pred));
            converged &= conv;
            actual = Some(act);
        }
        records.push(ForecastRecord {
            date: dataset.dates()[t],
            actual,
            predictions,
            model: method,
            converged,
        });
    }
    Ok(ForecastOutput {
        records,
        selected: selected.to_vec(),
    })
}

fn check_split(split: usize, n: usize) -> Result<()> {
    if split >= n {
        return Err(Error::InvalidData(format!(
            "test period is empty: split {split} with {n} rows"
        )));
    }
    if split < 3 {
        return Err(Error::InvalidData(format!(
            "initial training window of {split} rows is too small"
        )));
    }
    Ok(())
}

/// Per-quantile view of a forecast run plus a quantile-crossing check.
#[derive(Debug, Clone)]
pub struct QuantileProfile<F> {
    /// Quantile levels in ascending order.
    pub taus: Vec<F>,
    pub dates: Vec<NaiveDate>,
    /// `series[i]` aligns with `taus[i]` across all dates.
    pub series: Vec<Vec<F>>,
    /// Dates whose predictions are not nondecreasing in tau.
    pub crossing_dates: Vec<NaiveDate>,
}

impl<F> QuantileProfile<F> {
    pub fn n_crossings(&self) -> usize {
        self.crossing_dates.len()
    }
}

/// Aligns records into per-quantile series and flags every date whose
/// predictions cross (are not monotone in tau). Requires all records to
/// share one quantile set.
pub fn quantile_profile<F: Float>(records: &[ForecastRecord<F>]) -> Result<QuantileProfile<F>> {
    let first = records.first().ok_or_else(|| {
        Error::InvalidData("cannot profile an empty forecast".into())
    })?;
    let mut order: Vec<usize> = (0..first.predictions.len()).collect();
    order.sort_by(|&a, &b| {
        first.predictions[a]
            .0
            .partial_cmp(&first.predictions[b].0)
            .expect("finite quantile levels")
    });
    let taus: Vec<F> = order.iter().map(|&i| first.predictions[i].0).collect();

    let mut series = vec![Vec::with_capacity(records.len()); taus.len()];
    let mut dates = Vec::with_capacity(records.len());
    let mut crossing_dates = Vec::new();
    for rec in records {
        if rec.predictions.len() != taus.len()
            || order
                .iter()
                .zip(taus.iter())
                .any(|(&i, &tau)| rec.predictions[i].0 != tau)
        {
            return Err(Error::InvalidData(format!(
                "record at {} has a different quantile set",
                rec.date
            )));
        }
        dates.push(rec.date);
        let mut prev: Option<F> = None;
        let mut crossed = false;
        for (k, &i) in order.iter().enumerate() {
            let pred = rec.predictions[i].1;
            if let Some(p) = prev {
                if pred < p {
                    crossed = true;
                }
            }
            prev = Some(pred);
            series[k].push(pred);
        }
        if crossed {
            crossing_dates.push(rec.date);
        }
    }
    Ok(QuantileProfile { taus, dates, series, crossing_dates })
}

/// Plot-data CSV: `date,actual,pred_q<level>...,model,converged` with
/// one prediction column per quantile in ascending order.
pub fn forecast_csv<F: Float>(records: &[ForecastRecord<F>]) -> Result<String> {
    let profile = quantile_profile(records)?;
    let mut out = String::from("date,actual");
    for tau in &profile.taus {
        let pct = tau.to_f64().unwrap_or(f64::NAN) * 100.0;
        if (pct - pct.round()).abs() < 1e-9 {
            out.push_str(&format!(",pred_q{}", pct.round() as i64));
        } else {
            out.push_str(&format!(",pred_q{pct}"));
        }
    }
    out.push_str(",model,converged\n");
    for (r, rec) in records.iter().enumerate() {
        out.push_str(&format!("{}", rec.date));
        match rec.actual {
            Some(a) => out.push_str(&format!(",{a}")),
            None => out.push(','),
        }
        for series in &profile.series {
            out.push_str(&format!(",{}", series[r]));
        }
        out.push_str(&format!(",{},{}\n", rec.model, rec.converged));
    }
    Ok(out)
}
