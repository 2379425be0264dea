//! Lasso-path feature importance: ranks features by the penalty level
//! at which they first enter the model, restricts datasets to the top
//! ranks, and maps retained names onto penalty groups.

use crate::dataset::{GroupStructure, TimeSeriesDataset};
use crate::error::{Error, Result};
use crate::model_selection::{cross_validate, SearchGrid};
use crate::penalty::{Method, PenaltySpec};
use crate::solver::{fit_with_init, FitResult, SolverConfig};
use crate::Float;
use std::collections::HashMap;

/// Loss used by the ranking path. Least squares is the default; the
/// quantile variant ranks with pinball loss at the requested level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RankingLoss {
    #[default]
    LeastSquares,
    Quantile,
}

impl RankingLoss {
    fn method(self) -> Method {
        match self {
            RankingLoss::LeastSquares => Method::LmLasso,
            RankingLoss::Quantile => Method::QrLasso,
        }
    }
}

/// One feature's position on the importance path.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedFeature<F> {
    /// Column index in the original dataset.
    pub index: usize,
    pub name: String,
    /// Largest grid penalty at which the coefficient is nonzero; zero
    /// when the feature never enters anywhere on the grid.
    pub entry_lambda: F,
    /// Coefficient at the cross-validated penalty level.
    pub coefficient: F,
    /// 1-based position after sorting.
    pub rank: usize,
}

/// Full ranking output.
#[derive(Debug, Clone)]
pub struct ImportanceRanking<F> {
    pub features: Vec<RankedFeature<F>>,
    /// Penalty level selected by cross-validation, used for the
    /// tie-breaking coefficients.
    pub cv_lambda: F,
    pub loss: RankingLoss,
    pub tau: F,
}

/// Fits a lasso path over `lambda_grid` (descending, warm-started) and
/// ranks features by entry point, breaking ties by coefficient
/// magnitude at the cross-validated penalty, then by column order.
pub fn importance_rank<F: Float>(
    dataset: &TimeSeriesDataset<F>,
    tau: F,
    lambda_grid: &[F],
    loss: RankingLoss,
    k_folds: usize,
    config: &SolverConfig<F>,
) -> Result<ImportanceRanking<F>> {
    let p = dataset.n_features();
    if p == 0 {
        return Err(Error::InvalidData("no features to rank".into()));
    }
    if lambda_grid.is_empty() {
        return Err(Error::InvalidParameter("empty penalty grid".into()));
    }
    let method = loss.method();
    let groups = GroupStructure::singletons(p);
    let grid = SearchGrid {
        lambda_values: lambda_grid.to_vec(),
        alpha_values: vec![F::one()],
        power_weights: vec![F::zero()],
        tau,
    };
    let selection = cross_validate(dataset, &groups, &grid, method, k_folds, config)?;
    let cv_lambda = selection.best.lambda;

    let mut order: Vec<usize> = (0..lambda_grid.len()).collect();
    order.sort_by(|&a, &b| {
        lambda_grid[b]
            .partial_cmp(&lambda_grid[a])
            .expect("finite grid")
    });

    let mut entry = vec![F::zero(); p];
    let mut coef_at_cv = vec![F::zero(); p];
    let mut prev: Option<FitResult<F>> = None;
    for &li in &order {
        let lambda = lambda_grid[li];
        let spec = PenaltySpec::new(method, tau, lambda, F::one());
        let fit = fit_with_init(dataset, &groups, &spec, config, prev.as_ref())?;
        for (j, &b) in fit.coefficients.iter().enumerate() {
            if b != F::zero() && entry[j] == F::zero() {
                entry[j] = lambda;
            }
        }
        if lambda == cv_lambda {
            coef_at_cv.copy_from_slice(fit.coefficients.as_slice().expect("contiguous"));
        }
        prev = Some(fit);
    }

    let mut idx: Vec<usize> = (0..p).collect();
    idx.sort_by(|&a, &b| {
        entry[b]
            .partial_cmp(&entry[a])
            .expect("finite entry points")
            .then(
                coef_at_cv[b]
                    .abs()
                    .partial_cmp(&coef_at_cv[a].abs())
                    .expect("finite coefficients"),
            )
            .then(a.cmp(&b))
    });
    let names = dataset.feature_names();
    let features = idx
        .iter()
        .enumerate()
        .map(|(r, &j)| RankedFeature {
            index: j,
            name: names[j].clone(),
            entry_lambda: entry[j],
            coefficient: coef_at_cv[j],
            rank: r + 1,
        })
        .collect();
    Ok(ImportanceRanking { features, cv_lambda, loss, tau })
}

/// Restricts the dataset to the `k` best-ranked features, columns
/// ordered by rank.
pub fn select_top_k<F: Float>(
    dataset: &TimeSeriesDataset<F>,
    ranking: &ImportanceRanking<F>,
    k: usize,
) -> Result<TimeSeriesDataset<F>> {
    if k > ranking.features.len() {
        return Err(Error::InvalidParameter(format!(
            "cannot keep {k} of {} ranked features",
            ranking.features.len()
        )));
    }
    let cols: Vec<usize> = ranking.features[..k].iter().map(|f| f.index).collect();
    dataset.restrict_columns(&cols)
}

/// Maps retained feature names onto a group structure using a
/// name-to-label table. Raw labels are relabeled contiguously from 1 in
/// order of first appearance; the relabeled vector is returned for
/// reporting.
pub fn assign_groups(
    retained_names: &[String],
    mapping: &HashMap<String, String>,
) -> Result<(GroupStructure, Vec<usize>)> {
    let mut seen: Vec<&str> = Vec::new();
    let mut labels = Vec::with_capacity(retained_names.len());
    for name in retained_names {
        let raw = mapping.get(name).ok_or_else(|| {
            Error::InvalidGroups(format!("feature {name} has no group mapping"))
        })?;
        let id = match seen.iter().position(|s| s == raw) {
            Some(pos) => pos + 1,
            None => {
                seen.push(raw);
                seen.len()
            }
        };
        labels.push(id);
    }
    let structure = crate::dataset::validate_groups(&labels, retained_names.len())?;
    Ok((structure, labels))
}

/// Feature-selection report: one row per ranked feature with its entry
/// point, tie-break coefficient, rank, retention flag, and (for
/// retained features) relabeled group index.
pub fn selection_csv<F: Float>(
    ranking: &ImportanceRanking<F>,
    k: usize,
    mapping: Option<&HashMap<String, String>>,
) -> Result<String> {
    if k > ranking.features.len() {
        return Err(Error::InvalidParameter(format!(
            "cannot retain {k} of {} ranked features",
            ranking.features.len()
        )));
    }
    let group_labels: Option<Vec<usize>> = match mapping {
        Some(map) => {
            let names: Vec<String> = ranking.features[..k]
                .iter()
                .map(|f| f.name.clone())
                .collect();
            Some(assign_groups(&names, map)?.1)
        }
        None => None,
    };
    let mut out = String::from("name,entry_lambda,coefficient_at_cv_lambda,rank,retained,group\n");
    for (i, f) in ranking.features.iter().enumerate() {
        let retained = i < k;
        let group = match (&group_labels, retained) {
            (Some(labels), true) => labels[i].to_string(),
            _ => String::new(),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            f.name, f.entry_lambda, f.coefficient, f.rank, retained, group
        ));
    }
    Ok(out)
}
