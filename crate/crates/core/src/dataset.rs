//! Dated design matrices, feature grouping and standardization.

use crate::error::{Error, Result};
use crate::Float;
use chrono::NaiveDate;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use std::fmt;

/// What the target column measures. Price series are usually converted
/// to log returns before modeling; the flag records which one is stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    Price,
    LogReturn,
}

impl TargetKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TargetKind::Price => "price",
            TargetKind::LogReturn => "log_return",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "price" => Ok(TargetKind::Price),
            "log_return" => Ok(TargetKind::LogReturn),
            other => Err(Error::InvalidParameter(format!(
                "unknown target kind `{other}` (expected `price` or `log_return`)"
            ))),
        }
    }
}

impl fmt::Display for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A dated target series with aligned feature rows.
///
/// Rows are strictly increasing in date; `features.row(i)` holds the
/// regressors observed at `dates[i]` and `target[i]` the response at the
/// same date. Lag construction for one-step-ahead work is explicit via
/// [`TimeSeriesDataset::lagged_pairs`] rather than implicit in the fit.
#[derive(Debug, Clone)]
pub struct TimeSeriesDataset<F> {
    dates: Vec<NaiveDate>,
    target: Array1<F>,
    features: Array2<F>,
    feature_names: Vec<String>,
    target_kind: TargetKind,
}

impl<F: Float> TimeSeriesDataset<F> {
    pub fn new(
        dates: Vec<NaiveDate>,
        target: Array1<F>,
        features: Array2<F>,
        feature_names: Vec<String>,
        target_kind: TargetKind,
    ) -> Result<Self> {
        let n = dates.len();
        if n == 0 {
            return Err(Error::InvalidData("dataset has no rows".into()));
        }
        if target.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{n} dates but {} target values",
                target.len()
            )));
        }
        if features.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "{n} dates but {} feature rows",
                features.nrows()
            )));
        }
        if feature_names.len() != features.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature columns but {} names",
                features.ncols(),
                feature_names.len()
            )));
        }
        for w in dates.windows(2) {
            if w[1] <= w[0] {
                let msg = if w[1] == w[0] {
                    format!("duplicate date {}", w[0])
                } else {
                    format!("dates not strictly increasing at {}", w[1])
                };
                return Err(Error::InvalidData(msg));
            }
        }
        Ok(Self {
            dates,
            target,
            features,
            feature_names,
            target_kind,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.dates.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn target(&self) -> ArrayView1<'_, F> {
        self.target.view()
    }

    pub fn features(&self) -> ArrayView2<'_, F> {
        self.features.view()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn target_kind(&self) -> TargetKind {
        self.target_kind
    }

    /// Owned copy of rows `start..end`.
    pub fn rows(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.n_samples() {
            return Err(Error::InvalidData(format!(
                "row range {start}..{end} out of bounds for {} rows",
                self.n_samples()
            )));
        }
        Ok(Self {
            dates: self.dates[start..end].to_vec(),
            target: self.target.slice(ndarray::s![start..end]).to_owned(),
            features: self.features.slice(ndarray::s![start..end, ..]).to_owned(),
            feature_names: self.feature_names.clone(),
            target_kind: self.target_kind,
        })
    }

    /// Keeps only the feature columns at `indices`, in the order given.
    pub fn restrict_columns(&self, indices: &[usize]) -> Result<Self> {
        let p = self.n_features();
        let mut seen = vec![false; p];
        for &j in indices {
            if j >= p {
                return Err(Error::InvalidData(format!(
                    "column index {j} out of bounds for {p} features"
                )));
            }
            if seen[j] {
                return Err(Error::InvalidData(format!("column index {j} repeated")));
            }
            seen[j] = true;
        }
        let features = self.features.select(Axis(1), indices);
        let feature_names = indices
            .iter()
            .map(|&j| self.feature_names[j].clone())
            .collect();
        Ok(Self {
            dates: self.dates.clone(),
            target: self.target.clone(),
            features,
            feature_names,
            target_kind: self.target_kind,
        })
    }

    /// One-step-ahead supervised pairs: row `i` of the result carries the
    /// features observed at the original date `i` and the target realized
    /// at date `i + 1` (whose date stamps the row). A model fit on this
    /// view predicts tomorrow from today.
    pub fn lagged_pairs(&self) -> Result<Self> {
        let n = self.n_samples();
        if n < 2 {
            return Err(Error::InvalidData(
                "need at least 2 rows to form lagged pairs".into(),
            ));
        }
        Ok(Self {
            dates: self.dates[1..].to_vec(),
            target: self.target.slice(ndarray::s![1..]).to_owned(),
            features: self.features.slice(ndarray::s![..n - 1, ..]).to_owned(),
            feature_names: self.feature_names.clone(),
            target_kind: self.target_kind,
        })
    }

    /// Replaces the feature matrix, keeping dates and target.
    pub(crate) fn with_features(&self, features: Array2<F>) -> Result<Self> {
        Self::new(
            self.dates.clone(),
            self.target.clone(),
            features,
            self.feature_names.clone(),
            self.target_kind,
        )
    }
}

/// Partition of the feature columns into penalty groups.
///
/// Labels are 1-based and must cover `1..=n_groups` with no empty group.
/// Features of one group need not be adjacent columns; members are
/// tracked per group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupStructure {
    labels: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl GroupStructure {
    /// Every feature in its own group, which makes the group term a
    /// second lasso term and is the right default when no structure is
    /// known.
    pub fn singletons(n_features: usize) -> Self {
        let labels: Vec<usize> = (1..=n_features).collect();
        let members = (0..n_features).map(|j| vec![j]).collect();
        Self { labels, members }
    }

    pub fn n_groups(&self) -> usize {
        self.members.len()
    }

    pub fn n_features(&self) -> usize {
        self.labels.len()
    }

    /// 1-based label per feature column.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Feature indices of group `l` (0-based group index).
    pub fn members(&self, l: usize) -> &[usize] {
        &self.members[l]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }

    /// sqrt(p_l) factors used by the group penalty.
    pub fn sqrt_sizes<F: Float>(&self) -> Vec<F> {
        self.members
            .iter()
            .map(|m| F::cast(m.len() as f64).sqrt())
            .collect()
    }
}

/// Checks a 1-based label vector and builds the group partition.
///
/// Rejected inputs: length not equal to `n_features`, a zero label,
/// label values with gaps (for example `[1, 1, 3]`), which would leave
/// an empty group.
pub fn validate_groups(labels: &[usize], n_features: usize) -> Result<GroupStructure> {
    if labels.len() != n_features {
        return Err(Error::InvalidGroups(format!(
            "{} labels for {} features",
            labels.len(),
            n_features
        )));
    }
    if n_features == 0 {
        return Err(Error::InvalidGroups("no features to group".into()));
    }
    let max = *labels.iter().max().unwrap();
    if labels.iter().any(|&l| l == 0) {
        return Err(Error::InvalidGroups("labels are 1-based; found 0".into()));
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); max];
    for (j, &l) in labels.iter().enumerate() {
        members[l - 1].push(j);
    }
    if let Some(empty) = members.iter().position(Vec::is_empty) {
        return Err(Error::InvalidGroups(format!(
            "label values must cover 1..={max} with no gaps; group {} is empty",
            empty + 1
        )));
    }
    Ok(GroupStructure {
        labels: labels.to_vec(),
        members,
    })
}

/// Per-column centering and scaling parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization<F> {
    pub means: Array1<F>,
    pub scales: Array1<F>,
}

impl<F: Float> Standardization<F> {
    /// No-op transform (zero means, unit scales) for `p` columns.
    pub fn identity(p: usize) -> Self {
        Self {
            means: Array1::zeros(p),
            scales: Array1::ones(p),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.means.iter().all(|&m| m == F::zero()) && self.scales.iter().all(|&s| s == F::one())
    }
}

/// Centers and scales the feature columns; the target is never touched.
///
/// With `stats = None` the column means and sample standard deviations
/// (denominator n - 1) of `dataset` itself are used and returned, which
/// is the training path. Passing training stats transforms validation or
/// test rows consistently. A zero-variance column is an error naming the
/// column, since it cannot be scaled.
pub fn standardize<F: Float>(
    dataset: &TimeSeriesDataset<F>,
    stats: Option<&Standardization<F>>,
) -> Result<(TimeSeriesDataset<F>, Standardization<F>)> {
    let p = dataset.n_features();
    let stats = match stats {
        Some(s) => {
            if s.means.len() != p || s.scales.len() != p {
                return Err(Error::DimensionMismatch(format!(
                    "standardization for {} columns applied to {p}",
                    s.means.len()
                )));
            }
            s.clone()
        }
        None => {
            let n = dataset.n_samples();
            if n < 2 {
                return Err(Error::InvalidData(
                    "need at least 2 rows to estimate column scales".into(),
                ));
            }
            let means = dataset
                .features()
                .mean_axis(Axis(0))
                .expect("non-empty rows");
            let scales = dataset.features().std_axis(Axis(0), F::one());
            for (j, &s) in scales.iter().enumerate() {
                if !(s > F::zero()) {
                    return Err(Error::ZeroVariance {
                        index: j,
                        name: dataset.feature_names()[j].clone(),
                    });
                }
            }
            Standardization { means, scales }
        }
    };

    let mut features = dataset.features().to_owned();
    for j in 0..p {
        let m = stats.means[j];
        let s = stats.scales[j];
        features
            .column_mut(j)
            .mapv_inplace(|x| (x - m) / s);
    }
    let transformed = dataset.with_features(features)?;
    Ok((transformed, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn toy() -> TimeSeriesDataset<f64> {
        TimeSeriesDataset::new(
            vec![d("2020-01-01"), d("2020-01-02"), d("2020-01-03"), d("2020-01-04")],
            array![1.0, 2.0, 3.0, 4.0],
            array![[1.0, 10.0], [2.0, 20.0], [3.0, 30.0], [4.0, 45.0]],
            vec!["a".into(), "b".into()],
            TargetKind::LogReturn,
        )
        .unwrap()
    }

    #[test]
    fn constructor_rejects_duplicate_and_unsorted_dates() {
        let mk = |dates: Vec<NaiveDate>| {
            TimeSeriesDataset::new(
                dates,
                array![1.0, 2.0],
                Array2::zeros((2, 1)),
                vec!["x".into()],
                TargetKind::Price,
            )
        };
        let err = mk(vec![d("2020-01-01"), d("2020-01-01")]).unwrap_err();
        assert!(err.to_string().contains("duplicate date"));
        let err = mk(vec![d("2020-01-02"), d("2020-01-01")]).unwrap_err();
        assert!(err.to_string().contains("not strictly increasing"));
    }

    #[test]
    fn constructor_rejects_shape_mismatches() {
        let err = TimeSeriesDataset::new(
            vec![d("2020-01-01")],
            array![1.0, 2.0],
            Array2::<f64>::zeros((1, 1)),
            vec!["x".into()],
            TargetKind::Price,
        )
        .unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch(_)));
    }

    #[test]
    fn lagged_pairs_shift_target_forward() {
        let ds = toy();
        let shifted = ds.lagged_pairs().unwrap();
        assert_eq!(shifted.n_samples(), 3);
        // Row 0 pairs features at date 1 with the target at date 2.
        assert_eq!(shifted.dates()[0], d("2020-01-02"));
        assert_abs_diff_eq!(shifted.target()[0], 2.0);
        assert_abs_diff_eq!(shifted.features()[[0, 0]], 1.0);
        assert_abs_diff_eq!(shifted.features()[[0, 1]], 10.0);
        // Last row predicts the final date from the one before it.
        assert_eq!(shifted.dates()[2], d("2020-01-04"));
        assert_abs_diff_eq!(shifted.target()[2], 4.0);
        assert_abs_diff_eq!(shifted.features()[[2, 0]], 3.0);
    }

    #[test]
    fn groups_reject_gaps_zeros_and_bad_lengths() {
        assert!(validate_groups(&[1, 1, 3], 3).is_err());
        assert!(validate_groups(&[0, 1], 2).is_err());
        assert!(validate_groups(&[1, 2], 3).is_err());
        assert!(validate_groups(&[], 0).is_err());
    }

    #[test]
    fn groups_accept_contiguous_labels() {
        let g = validate_groups(&[1, 1, 1, 1, 1, 1, 1, 2, 2], 9).unwrap();
        assert_eq!(g.n_groups(), 2);
        assert_eq!(g.sizes(), vec![7, 2]);
        assert_eq!(g.members(1), &[7, 8]);
        let sq: Vec<f64> = g.sqrt_sizes();
        assert_abs_diff_eq!(sq[0], 7.0f64.sqrt());
    }

    #[test]
    fn groups_allow_interleaved_membership() {
        let g = validate_groups(&[1, 2, 1], 3).unwrap();
        assert_eq!(g.members(0), &[0, 2]);
        assert_eq!(g.members(1), &[1]);
    }

    #[test]
    fn standardize_centers_and_scales_with_sample_std() {
        let ds = toy();
        let (std_ds, stats) = standardize(&ds, None).unwrap();
        for j in 0..2 {
            let col = std_ds.features().column(j).to_owned();
            assert_abs_diff_eq!(col.mean().unwrap(), 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(col.std(1.0), 1.0, epsilon = 1e-12);
        }
        // Sample std of [1, 2, 3, 4] with ddof 1 is sqrt(5/3).
        assert_abs_diff_eq!(stats.means[0], 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(stats.scales[0], (5.0f64 / 3.0).sqrt(), epsilon = 1e-12);
        // Target is untouched.
        assert_eq!(std_ds.target(), ds.target());
    }

    #[test]
    fn standardize_reuses_training_stats() {
        let ds = toy();
        let (_, stats) = standardize(&ds, None).unwrap();
        let test_rows = ds.rows(2, 4).unwrap();
        let (std_test, stats2) = standardize(&test_rows, Some(&stats)).unwrap();
        assert_eq!(stats, stats2);
        let expected = (ds.features()[[2, 0]] - stats.means[0]) / stats.scales[0];
        assert_abs_diff_eq!(std_test.features()[[0, 0]], expected, epsilon = 1e-15);
    }

    #[test]
    fn standardize_names_zero_variance_column() {
        let ds = TimeSeriesDataset::new(
            vec![d("2020-01-01"), d("2020-01-02"), d("2020-01-03")],
            array![1.0, 2.0, 3.0],
            array![[1.0, 5.0], [1.0, 6.0], [1.0, 7.0]],
            vec!["flat".into(), "ok".into()],
            TargetKind::Price,
        )
        .unwrap();
        match standardize(&ds, None) {
            Err(Error::ZeroVariance { index, name }) => {
                assert_eq!(index, 0);
                assert_eq!(name, "flat");
            }
            other => panic!("expected zero-variance error, got {other:?}"),
        }
    }

    #[test]
    fn restrict_columns_keeps_order_and_rejects_duplicates() {
        let ds = toy();
        let sub = ds.restrict_columns(&[1, 0]).unwrap();
        assert_eq!(sub.feature_names(), &["b".to_string(), "a".to_string()]);
        assert_abs_diff_eq!(sub.features()[[0, 0]], 10.0);
        assert!(ds.restrict_columns(&[0, 0]).is_err());
        assert!(ds.restrict_columns(&[2]).is_err());
    }
}
