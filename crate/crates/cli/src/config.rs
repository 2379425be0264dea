//! Run configuration: the TOML schema, command-line overrides,
//! validation, and the run manifest.
//!
//! A manifest written by a previous run is itself a valid `--config`
//! argument: the loader descends into its `[config]` table, so a run
//! can always be reproduced from the artifacts it left behind.

use crate::error::{CliError, CliResult};
use chrono::NaiveDate;
use qgl_core::forecast::FillPolicy;
use qgl_core::loss::SmoothingParams;
use qgl_core::model_selection::{lambda_grid, SearchGrid};
use qgl_core::{Method, TargetKind};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: InputConfig,
    pub run: RunSection,
    #[serde(default)]
    pub grid: GridConfig,
    /// Feature name -> group label. Empty means every feature is its
    /// own group. When non-empty it must cover every fitted feature.
    #[serde(default)]
    pub groups: BTreeMap<String, String>,
    #[serde(default)]
    pub selection: SelectionConfig,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub path: PathBuf,
    #[serde(default = "default_date_column")]
    pub date_column: String,
    pub target_column: String,
    /// Empty means every column that is neither the date nor the target.
    #[serde(default)]
    pub feature_columns: Vec<String>,
    /// "price" targets are converted to log returns after filling;
    /// "log_return" targets are modeled as-is.
    #[serde(default = "default_target_kind")]
    pub target_kind: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Last training date; strictly later rows form the test period.
    pub split_date: String,
    #[serde(default = "default_methods")]
    pub methods: Vec<String>,
    #[serde(default = "default_taus")]
    pub taus: Vec<f64>,
    #[serde(default = "default_fill_policy")]
    pub fill_policy: String,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Recorded in the manifest; only the synthetic generator consumes
    /// randomness, the fitting pipeline is deterministic.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lambda_log10_min: f64,
    pub lambda_log10_max: f64,
    pub lambda_log10_step: f64,
    pub alpha_values: Vec<f64>,
    pub power_weights: Vec<f64>,
    pub k_folds: usize,
    pub refit_stride: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            lambda_log10_min: -5.0,
            lambda_log10_max: 1.01,
            lambda_log10_step: 0.2,
            alpha_values: vec![1e-4],
            power_weights: vec![-0.4, -0.2, 0.0, 0.2, 0.4],
            k_folds: 5,
            refit_stride: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionConfig {
    /// When set, the pipeline restricts fitting to this many top-ranked
    /// features; otherwise the ranking is reported but not applied.
    pub top_k: Option<usize>,
    /// Ranking loss: "least_squares" (default) or "quantile".
    #[serde(default = "default_ranking_loss")]
    pub loss: String,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            top_k: None,
            loss: default_ranking_loss(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Smoothing schedule endpoints as multiples of the training
    /// target's standard deviation. Leaving both unset keeps the
    /// per-window default; setting `mu_min_scale` higher (e.g. 1e-5)
    /// trades final-digit precision for a much shorter schedule.
    pub mu0_scale: Option<f64>,
    pub mu_min_scale: Option<f64>,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            max_iterations: default_max_iterations(),
            tolerance: default_tolerance(),
            mu0_scale: None,
            mu_min_scale: None,
        }
    }
}

impl SolverSection {
    /// Smoothing endpoints for a training target with deviation `std`,
    /// or `None` to let each fit derive its own schedule.
    pub fn smoothing_for(&self, std: f64) -> Option<SmoothingParams<f64>> {
        if self.mu0_scale.is_none() && self.mu_min_scale.is_none() {
            return None;
        }
        let s = if std > 0.0 { std } else { 1.0 };
        Some(SmoothingParams {
            mu0: self.mu0_scale.unwrap_or(1e-4) * s,
            factor: 0.5,
            mu_min: self.mu_min_scale.unwrap_or(1e-7) * s,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    pub n_lags: usize,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig { n_lags: 10 }
    }
}

fn default_date_column() -> String {
    "date".into()
}
fn default_target_kind() -> String {
    TargetKind::Price.as_str().into()
}
fn default_methods() -> Vec<String> {
    vec![Method::LSqg.as_str().into()]
}
fn default_taus() -> Vec<f64> {
    vec![0.25, 0.5, 0.75]
}
fn default_max_iterations() -> usize {
    50_000
}
fn default_tolerance() -> f64 {
    1e-6
}
fn default_fill_policy() -> String {
    FillPolicy::TrainMean.as_str().into()
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_ranking_loss() -> String {
    "least_squares".into()
}

/// Per-flag overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub taus: Option<Vec<f64>>,
    /// (log10 min, log10 max, log10 step)
    pub lambda_grid: Option<(f64, f64, f64)>,
    pub methods: Option<Vec<String>>,
    pub split_date: Option<String>,
    pub fill_policy: Option<String>,
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Reads a config file, or the `[config]` table of a manifest.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::io(path.to_path_buf(), e))?;
        let doc: toml::Value = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let table = match doc.get("config") {
            Some(inner) => inner.clone(),
            None => doc,
        };
        table
            .try_into()
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(t) = &o.taus {
            self.run.taus = t.clone();
        }
        if let Some((min, max, step)) = o.lambda_grid {
            self.grid.lambda_log10_min = min;
            self.grid.lambda_log10_max = max;
            self.grid.lambda_log10_step = step;
        }
        if let Some(m) = &o.methods {
            self.run.methods = m.clone();
        }
        if let Some(d) = &o.split_date {
            self.run.split_date = d.clone();
        }
        if let Some(f) = &o.fill_policy {
            self.run.fill_policy = f.clone();
        }
        if let Some(d) = &o.output_dir {
            self.run.output_dir = d.clone();
        }
    }

    /// Cross-field checks that do not need the data; range checks
    /// against the actual dates happen at load time.
    pub fn validate(&self) -> CliResult<()> {
        self.split_date()?;
        self.methods()?;
        self.fill_policy()?;
        self.target_kind()?;
        self.ranking_loss()?;
        if self.run.taus.is_empty() {
            return Err(CliError::Config("no quantile levels given".into()));
        }
        for &t in &self.run.taus {
            if !(t > 0.0 && t < 1.0) {
                return Err(CliError::Config(format!(
                    "quantile level {t} outside (0, 1)"
                )));
            }
        }
        if self.grid.k_folds < 2 {
            return Err(CliError::Config(format!(
                "k_folds must be at least 2, got {}",
                self.grid.k_folds
            )));
        }
        if self.grid.refit_stride == 0 {
            return Err(CliError::Config("refit_stride must be at least 1".into()));
        }
        self.lambda_values()?;
        if let Some(k) = self.selection.top_k {
            if k == 0 {
                return Err(CliError::Config("selection.top_k must be positive".into()));
            }
        }
        if self.solver.max_iterations == 0 {
            return Err(CliError::Config(
                "solver.max_iterations must be at least 1".into(),
            ));
        }
        if !(self.solver.tolerance > 0.0 && self.solver.tolerance.is_finite()) {
            return Err(CliError::Config(format!(
                "solver.tolerance must be positive, got {}",
                self.solver.tolerance
            )));
        }
        if let Some(s) = self.solver.smoothing_for(1.0) {
            s.validate()
                .map_err(|e| CliError::Config(format!("solver smoothing scales: {e}")))?;
        }
        Ok(())
    }

    pub fn split_date(&self) -> CliResult<NaiveDate> {
        parse_date(&self.run.split_date)
            .ok_or_else(|| CliError::Config(format!("bad split date `{}`", self.run.split_date)))
    }

    pub fn methods(&self) -> CliResult<Vec<Method>> {
        if self.run.methods.is_empty() {
            return Err(CliError::Config("no methods given".into()));
        }
        self.run
            .methods
            .iter()
            .map(|m| Method::parse(m).map_err(|e| CliError::Config(e.to_string())))
            .collect()
    }

    pub fn fill_policy(&self) -> CliResult<FillPolicy> {
        FillPolicy::parse(&self.run.fill_policy).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn target_kind(&self) -> CliResult<TargetKind> {
        TargetKind::parse(&self.input.target_kind).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn ranking_loss(&self) -> CliResult<qgl_core::feature_select::RankingLoss> {
        use qgl_core::feature_select::RankingLoss;
        match self.selection.loss.as_str() {
            "least_squares" => Ok(RankingLoss::LeastSquares),
            "quantile" => Ok(RankingLoss::Quantile),
            other => Err(CliError::Config(format!(
                "unknown ranking loss `{other}`; expected least_squares or quantile"
            ))),
        }
    }

    pub fn lambda_values(&self) -> CliResult<Vec<f64>> {
        lambda_grid(
            self.grid.lambda_log10_min,
            self.grid.lambda_log10_max,
            self.grid.lambda_log10_step,
        )
        .map_err(|e| CliError::Config(e.to_string()))
    }

    /// Search grid for one method at one quantile level. Axes a method
    /// cannot use are pinned: the lasso-only methods fix alpha = 1, the
    /// pure group method alpha = 0, and non-adaptive methods have no
    /// power-weight axis.
    pub fn grid_for(&self, method: Method, tau: f64) -> CliResult<SearchGrid<f64>> {
        let alpha_values = match method.forced_alpha() {
            Some(a) => vec![a],
            None => self.grid.alpha_values.clone(),
        };
        let power_weights = if method.is_adaptive() {
            self.grid.power_weights.clone()
        } else {
            vec![0.0]
        };
        let grid = SearchGrid {
            lambda_values: self.lambda_values()?,
            alpha_values,
            power_weights,
            tau,
        };
        grid.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(grid)
    }
}

/// `YYYY-MM-DD`, or `YYYY-MM` meaning the first of the month.
pub fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Some(d);
    }
    NaiveDate::parse_from_str(&format!("{s}-01"), "%Y-%m-%d").ok()
}

/// Written next to the reports; `[config]` echoes the resolved run
/// configuration so the manifest can be passed back to `--config`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub manifest: ManifestHeader,
    pub config: RunConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub command: String,
    pub crate_version: String,
    pub seed: u64,
}

pub fn write_manifest(cfg: &RunConfig, command: &str, dir: &Path) -> CliResult<()> {
    let manifest = Manifest {
        manifest: ManifestHeader {
            command: command.into(),
            crate_version: env!("CARGO_PKG_VERSION").into(),
            seed: cfg.run.seed,
        },
        config: cfg.clone(),
    };
    let text = toml::to_string(&manifest)
        .map_err(|e| CliError::Config(format!("manifest serialization: {e}")))?;
    let path = dir.join("manifest.toml");
    std::fs::write(&path, text).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> RunConfig {
        toml::from_str(
            r#"
            [input]
            path = "data.csv"
            target_column = "price"

            [run]
            split_date = "2020-06-30"
            "#,
        )
        .unwrap()
    }

    #[test]
    fn defaults_fill_in() {
        let cfg = minimal();
        assert_eq!(cfg.input.date_column, "date");
        assert_eq!(cfg.run.taus, vec![0.25, 0.5, 0.75]);
        assert_eq!(cfg.run.methods, vec!["l_sqg".to_string()]);
        assert_eq!(cfg.run.fill_policy, "train_mean");
        assert_eq!(cfg.grid.k_folds, 5);
        assert_eq!(cfg.lambda_values().unwrap().len(), 31);
        cfg.validate().unwrap();
    }

    #[test]
    fn month_dates_resolve_to_the_first() {
        assert_eq!(
            parse_date("2019-12"),
            NaiveDate::from_ymd_opt(2019, 12, 1)
        );
        assert_eq!(
            parse_date("2019-12-31"),
            NaiveDate::from_ymd_opt(2019, 12, 31)
        );
        assert_eq!(parse_date("12/31/2019"), None);
    }

    #[test]
    fn bad_values_are_config_errors() {
        let mut cfg = minimal();
        cfg.run.taus = vec![0.5, 1.0];
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));

        let mut cfg = minimal();
        cfg.run.methods = vec!["ridge".into()];
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));

        let mut cfg = minimal();
        cfg.run.split_date = "soon".into();
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn overrides_take_precedence() {
        let mut cfg = minimal();
        cfg.apply(&Overrides {
            taus: Some(vec![0.5]),
            lambda_grid: Some((-2.0, 0.01, 1.0)),
            methods: Some(vec!["qr_lasso".into()]),
            split_date: Some("2020-01-31".into()),
            fill_policy: Some("backward_fill".into()),
            output_dir: Some(PathBuf::from("elsewhere")),
        });
        assert_eq!(cfg.run.taus, vec![0.5]);
        assert_eq!(cfg.lambda_values().unwrap().len(), 3);
        assert_eq!(cfg.methods().unwrap(), vec![Method::QrLasso]);
        assert_eq!(cfg.run.output_dir, PathBuf::from("elsewhere"));
        cfg.validate().unwrap();
    }

    #[test]
    fn grid_axes_follow_the_method() {
        let mut cfg = minimal();
        cfg.grid.alpha_values = vec![0.2, 0.4];
        cfg.grid.power_weights = vec![-0.2, 0.2];
        let g = cfg.grid_for(Method::QrLasso, 0.5).unwrap();
        assert_eq!((g.alpha_values, g.power_weights), (vec![1.0], vec![0.0]));
        let g = cfg.grid_for(Method::LQg, 0.5).unwrap();
        assert_eq!((g.alpha_values, g.power_weights), (vec![0.0], vec![0.0]));
        let g = cfg.grid_for(Method::LAsqg, 0.5).unwrap();
        assert_eq!(g.alpha_values, vec![0.2, 0.4]);
        assert_eq!(g.power_weights, vec![-0.2, 0.2]);
    }

    #[test]
    fn manifest_round_trips_through_load() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = minimal();
        write_manifest(&cfg, "pipeline", dir.path()).unwrap();
        let reloaded = RunConfig::load(&dir.path().join("manifest.toml")).unwrap();
        assert_eq!(
            toml::to_string(&reloaded).unwrap(),
            toml::to_string(&cfg).unwrap()
        );
    }
}
