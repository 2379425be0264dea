//! Hyperparameter grids and forward-chaining time-series cross-validation.

use crate::dataset::{GroupStructure, TimeSeriesDataset};
use crate::error::{Error, Result};
use crate::loss::pinball;
use crate::penalty::Method;
use crate::solver::{final_spec, fit_with_init, pilot_spec, FitResult, PresetHyperparams, SolverConfig};
use crate::Float;
use rayon::prelude::*;
use std::ops::Range;

/// Candidate values for the three tuned hyperparameters, evaluated at a
/// single quantile level.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchGrid<F> {
    pub lambda_values: Vec<F>,
    pub alpha_values: Vec<F>,
    pub power_weights: Vec<F>,
    pub tau: F,
}

impl<F: Float> SearchGrid<F> {
    /// The published experimental grid: lambda = 10^t for t from -5 to
    /// 1.01 in steps of 0.2 (31 values), alpha fixed at 1e-4, and five
    /// power-weight exponents.
    pub fn defaults(tau: F) -> Self {
        Self {
            lambda_values: lambda_grid(F::cast(-5.0), F::cast(1.01), F::cast(0.2))
                .expect("valid default grid"),
            alpha_values: vec![F::cast(1e-4)],
            power_weights: vec![
                F::cast(-0.4),
                F::cast(-0.2),
                F::zero(),
                F::cast(0.2),
                F::cast(0.4),
            ],
            tau,
        }
    }

    /// Grid with a single cell, for quick fits and tests.
    pub fn single(lambda: F, alpha: F, power_weight: F, tau: F) -> Self {
        Self {
            lambda_values: vec![lambda],
            alpha_values: vec![alpha],
            power_weights: vec![power_weight],
            tau,
        }
    }

    pub fn with_tau(mut self, tau: F) -> Self {
        self.tau = tau;
        self
    }

    pub fn validate(&self) -> Result<()> {
        crate::loss::check_tau(self.tau)?;
        if self.lambda_values.is_empty()
            || self.alpha_values.is_empty()
            || self.power_weights.is_empty()
        {
            return Err(Error::InvalidParameter(
                "search grid must have at least one value per axis".into(),
            ));
        }
        if self
            .lambda_values
            .iter()
            .any(|&l| !(l >= F::zero() && l.is_finite()))
        {
            return Err(Error::InvalidParameter(
                "lambda grid values must be finite and nonnegative".into(),
            ));
        }
        if self
            .alpha_values
            .iter()
            .any(|&a| !(a >= F::zero() && a <= F::one()))
        {
            return Err(Error::InvalidParameter(
                "alpha grid values must lie in [0, 1]".into(),
            ));
        }
        if self.power_weights.iter().any(|&g| !g.is_finite()) {
            return Err(Error::InvalidParameter(
                "power-weight values must be finite".into(),
            ));
        }
        Ok(())
    }

    pub fn n_cells(&self) -> usize {
        self.lambda_values.len() * self.alpha_values.len() * self.power_weights.len()
    }
}

/// Logarithmic grid `10^t` for `t = t_min, t_min + step, ...` while
/// `t < t_max + 1e-12`. The default arguments (-5, 1.01, 0.2) produce
/// exactly 31 values from 1e-5 to 10.
pub fn lambda_grid<F: Float>(t_min: F, t_max: F, step: F) -> Result<Vec<F>> {
    if !(step > F::zero()) {
        return Err(Error::InvalidParameter(format!(
            "grid step must be positive, got {step}"
        )));
    }
    if !(t_min <= t_max) {
        return Err(Error::InvalidParameter(format!(
            "grid range is empty: t_min {t_min} > t_max {t_max}"
        )));
    }
    let ten = F::cast(10.0);
    let slack = F::cast(1e-12);
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        // Accumulate t multiplicatively from the origin to avoid
        // compounding addition error over long grids.
        let t = t_min + F::cast(k as f64) * step;
        if t >= t_max + slack {
            break;
        }
        out.push(ten.powf(t));
        k += 1;
    }
    Ok(out)
}

/// One forward-chaining fold: train on the prefix `[0, train_end)`,
/// validate on the following contiguous block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train_end: usize,
    pub validation: Range<usize>,
}

/// Splits `n` samples into `k` forward-chaining folds. The first fold
/// trains on `min_train` rows; the remaining `n - min_train` rows are
/// divided into `k` contiguous validation blocks (earlier blocks take
/// any remainder), each fold training on everything before its block.
pub fn time_series_folds(n: usize, k: usize, min_train: usize) -> Result<Vec<Fold>> {
    if k == 0 {
        return Err(Error::InvalidParameter("need at least one fold".into()));
    }
    if min_train == 0 || min_train + k > n {
        return Err(Error::InvalidData(format!(
            "cannot build {k} folds from {n} samples with min_train {min_train}"
        )));
    }
    let rem = n - min_train;
    let base = rem / k;
    let extras = rem % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = min_train;
    for j in 0..k {
        let size = base + usize::from(j < extras);
        folds.push(Fold {
            train_end: start,
            validation: start..start + size,
        });
        start += size;
    }
    debug_assert_eq!(start, n);
    Ok(folds)
}

/// One row of the cross-validation score table. A non-finite
/// `pinball_loss` marks a (cell, fold) whose fit failed.
#[derive(Debug, Clone, PartialEq)]
pub struct CvRecord<F> {
    pub lambda: F,
    pub alpha: F,
    pub power_weight: F,
    pub fold: usize,
    pub pinball_loss: F,
}

/// Outcome of a grid search: the winning cell and the full table.
#[derive(Debug, Clone)]
pub struct CvSelection<F> {
    pub method: Method,
    pub best: PresetHyperparams<F>,
    pub best_mean_loss: F,
    pub records: Vec<CvRecord<F>>,
    /// Count of (cell, fold) fits that failed outright.
    pub n_failed: usize,
}

/// Mean validation pinball loss for every grid cell across
/// forward-chaining folds; selects the argmin cell.
///
/// Ties are broken toward the larger lambda (more parsimonious), then
/// the smaller alpha, then the smaller power weight. Failed fits poison
/// their cell (strict policy) but not the search, unless every cell
/// fails. Fold/alpha combinations are evaluated in parallel; records are
/// assembled in a fixed order so the output is identical regardless of
/// scheduling.
pub fn cross_validate<F: Float>(
    dataset: &TimeSeriesDataset<F>,
    groups: &GroupStructure,
    grid: &SearchGrid<F>,
    method: Method,
    k: usize,
    config: &SolverConfig<F>,
) -> Result<CvSelection<F>> {
    grid.validate()?;
    let n = dataset.n_samples();
    let min_train = default_min_train(n);
    let folds = time_series_folds(n, k, min_train)?;
    cross_validate_with_folds(dataset, groups, grid, method, &folds, config)
}

/// Default first-fold training size: 60% of the data, at least 2 rows.
pub fn default_min_train(n: usize) -> usize {
    ((n as f64) * 0.6).ceil().max(2.0) as usize
}

/// [`cross_validate`] with caller-supplied folds.
pub fn cross_validate_with_folds<F: Float>(
    dataset: &TimeSeriesDataset<F>,
    groups: &GroupStructure,
    grid: &SearchGrid<F>,
    method: Method,
    folds: &[Fold],
    config: &SolverConfig<F>,
) -> Result<CvSelection<F>> {
    grid.validate()?;
    if folds.is_empty() {
        return Err(Error::InvalidParameter("no folds supplied".into()));
    }
    let n = dataset.n_samples();
    for f in folds {
        if f.train_end < 2 || f.validation.start < f.train_end || f.validation.end > n {
            return Err(Error::InvalidData(format!(
                "fold trains on [0, {}) and validates on {:?}, invalid for {n} rows",
                f.train_end, f.validation
            )));
        }
    }

    let nl = grid.lambda_values.len();
    let ng = grid.power_weights.len();
    let nf = folds.len();

    // Work units: one (fold, alpha) pair each; inside, lambda descends so
    // fits warm-start from the previous (stronger) penalty, and adaptive
    // pilots are shared across power weights.
    let units: Vec<(usize, usize)> = (0..nf)
        .flat_map(|f| (0..grid.alpha_values.len()).map(move |a| (f, a)))
        .collect();
    let unit_losses: Vec<(usize, usize, Vec<F>)> = units
        .par_iter()
        .map(|&(fold_idx, alpha_idx)| {
            let losses =
                evaluate_unit(dataset, groups, grid, method, &folds[fold_idx], alpha_idx, config);
            (fold_idx, alpha_idx, losses)
        })
        .collect();

    // losses[lambda][alpha][g][fold]
    let nan = F::nan();
    let mut losses =
        vec![vec![vec![vec![nan; nf]; ng]; grid.alpha_values.len()]; nl];
    for (fold_idx, alpha_idx, unit) in unit_losses {
        for li in 0..nl {
            for gi in 0..ng {
                losses[li][alpha_idx][gi][fold_idx] = unit[li * ng + gi];
            }
        }
    }

    let mut records = Vec::with_capacity(nl * grid.alpha_values.len() * ng * nf);
    let mut n_failed = 0usize;
    for (li, &lambda) in grid.lambda_values.iter().enumerate() {
        for (ai, &alpha) in grid.alpha_values.iter().enumerate() {
            for (gi, &g) in grid.power_weights.iter().enumerate() {
                for (fi, loss) in losses[li][ai][gi].iter().enumerate() {
                    if !loss.is_finite() {
                        n_failed += 1;
                    }
                    records.push(CvRecord {
                        lambda,
                        alpha,
                        power_weight: g,
                        fold: fi,
                        pinball_loss: *loss,
                    });
                }
            }
        }
    }

    let nf_f = F::cast(nf as f64);
    let mut best: Option<(F, F, F, F)> = None; // (loss, lambda, alpha, g)
    for (li, &lambda) in grid.lambda_values.iter().enumerate() {
        for (ai, &alpha) in grid.alpha_values.iter().enumerate() {
            for (gi, &g) in grid.power_weights.iter().enumerate() {
                let mean = losses[li][ai][gi].iter().copied().sum::<F>() / nf_f;
                if !mean.is_finite() {
                    continue;
                }
                let better = match &best {
                    None => true,
                    Some((bl, blam, bal, bg)) => {
                        mean < *bl
                            || (mean == *bl
                                && (lambda > *blam
                                    || (lambda == *blam
                                        && (alpha < *bal || (alpha == *bal && g < *bg)))))
                    }
                };
                if better {
                    best = Some((mean, lambda, alpha, g));
                }
            }
        }
    }

    match best {
        Some((loss, lambda, alpha, g)) => Ok(CvSelection {
            method,
            best: PresetHyperparams::new(lambda, alpha, g),
            best_mean_loss: loss,
            records,
            n_failed,
        }),
        None => Err(Error::CrossValidation(format!(
            "all {} grid cells failed across {nf} folds ({n_failed} failed fits)",
            grid.n_cells()
        ))),
    }
}

/// Losses for one (fold, alpha) pair over all (lambda, power_weight)
/// cells, flattened as `lambda_idx * n_g + g_idx`.
fn evaluate_unit<F: Float>(
    dataset: &TimeSeriesDataset<F>,
    groups: &GroupStructure,
    grid: &SearchGrid<F>,
    method: Method,
    fold: &Fold,
    alpha_idx: usize,
    config: &SolverConfig<F>,
) -> Vec<F> {
    let nl = grid.lambda_values.len();
    let ng = grid.power_weights.len();
    let nan = F::nan();
    let mut out = vec![nan; nl * ng];

    let train = match dataset.rows(0, fold.train_end) {
        Ok(d) => d,
        Err(_) => return out,
    };
    let val = match dataset.rows(fold.validation.start, fold.validation.end) {
        Ok(d) => d,
        Err(_) => return out,
    };
    let alpha = grid.alpha_values[alpha_idx];

    // Descending-lambda order for warm starts.
    let mut order: Vec<usize> = (0..nl).collect();
    order.sort_by(|&a, &b| {
        grid.lambda_values[b]
            .partial_cmp(&grid.lambda_values[a])
            .expect("finite lambdas")
    });

    if method.is_adaptive() {
        // Pilot chain once per lambda, shared across power weights.
        let mut pilots: Vec<Option<FitResult<F>>> = vec![None; nl];
        let mut prev: Option<FitResult<F>> = None;
        for &li in &order {
            let hp = PresetHyperparams::new(grid.lambda_values[li], alpha, F::zero());
            let spec = pilot_spec(method, grid.tau, &hp).expect("adaptive method has a pilot");
            match fit_with_init(&train, groups, &spec, config, prev.as_ref()) {
                Ok(fit) => {
                    prev = Some(fit.clone());
                    pilots[li] = Some(fit);
                }
                Err(_) => {
                    prev = None;
                }
            }
        }
        for (gi, &g) in grid.power_weights.iter().enumerate() {
            let mut prev: Option<FitResult<F>> = None;
            for &li in &order {
                let Some(pilot) = &pilots[li] else { continue };
                let hp = PresetHyperparams::new(grid.lambda_values[li], alpha, g);
                let fitted = final_spec(method, grid.tau, &hp, groups, Some(pilot))
                    .and_then(|spec| fit_with_init(&train, groups, &spec, config, prev.as_ref()));
                match fitted {
                    Ok(fit) => {
                        out[li * ng + gi] = validation_pinball(&fit, &val, grid.tau);
                        prev = Some(fit);
                    }
                    Err(_) => {
                        prev = None;
                    }
                }
            }
        }
    } else {
        let mut prev: Option<FitResult<F>> = None;
        for &li in &order {
            let hp = PresetHyperparams::new(grid.lambda_values[li], alpha, F::zero());
            let Ok(spec) = final_spec(method, grid.tau, &hp, groups, None) else {
                continue;
            };
            match fit_with_init(&train, groups, &spec, config, prev.as_ref()) {
                Ok(fit) => {
                    let loss = validation_pinball(&fit, &val, grid.tau);
                    // The fit does not depend on the power weight; every
                    // cell in that axis shares the loss.
                    for gi in 0..ng {
                        out[li * ng + gi] = loss;
                    }
                    prev = Some(fit);
                }
                Err(_) => {
                    prev = None;
                }
            }
        }
    }
    out
}

fn validation_pinball<F: Float>(fit: &FitResult<F>, val: &TimeSeriesDataset<F>, tau: F) -> F {
    let preds = fit.predict(val.features());
    let mut total = F::zero();
    for (i, &y) in val.target().iter().enumerate() {
        total = total + pinball(y - preds[i], tau);
    }
    total / F::cast(val.n_samples() as f64)
}

/// Renders the score table as CSV with the canonical column set.
pub fn score_table_csv<F: Float>(records: &[CvRecord<F>]) -> String {
    let mut out = String::from("lambda,alpha,power_weight,fold,pinball_loss\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.lambda, r.alpha, r.power_weight, r.fold, r.pinball_loss
        ));
    }
    out
}
