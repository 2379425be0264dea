//! The seven subcommands. Each writes its report files into the output
//! directory and a manifest that reproduces the run.

use crate::config::{write_manifest, RunConfig};
use crate::csv_io::{prepare, write_report, PreparedData};
use crate::error::{CliError, CliResult};
use log::info;
use qgl_core::dataset::GroupStructure;
use qgl_core::diagnostics::{diagnose, render_report};
use qgl_core::evaluation::{
    evaluate, metrics_by_tau_csv, metrics_csv, LabeledMetrics, MetricsReport,
};
use qgl_core::feature_select::{assign_groups, importance_rank, select_top_k, selection_csv};
use qgl_core::forecast::{
    expanding_window_forecast, forecast_csv, forecast_with_hyperparams, quantile_profile,
    ForecastOutput, ForecastRecord, ForecastSettings,
};
use qgl_core::model_selection::{cross_validate, CvRecord, CvSelection};
use qgl_core::solver::fit_preset;
use qgl_core::synthetic::{generate, SyntheticConfig};
use qgl_core::{Dataset64, Method, PresetHyperparams, SolverConfig};
use std::collections::HashMap;
use std::path::Path;
use std::time::Instant;

/// Everything the fitting commands share after data preparation.
struct Workspace {
    dataset: Dataset64,
    split: usize,
    groups: GroupStructure,
    methods: Vec<Method>,
}

fn build_workspace(cfg: &RunConfig) -> CliResult<Workspace> {
    let PreparedData { dataset, split } = prepare(cfg)?;
    let groups = groups_for(cfg, dataset.feature_names())?;
    Ok(Workspace {
        methods: cfg.methods()?,
        dataset,
        split,
        groups,
    })
}

fn groups_for(cfg: &RunConfig, names: &[String]) -> CliResult<GroupStructure> {
    if cfg.groups.is_empty() {
        return Ok(GroupStructure::singletons(names.len()));
    }
    let mapping: HashMap<String, String> = cfg
        .groups
        .iter()
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    let (structure, _) = assign_groups(names, &mapping)?;
    Ok(structure)
}

/// Solver settings from the config, with the smoothing schedule (when
/// scale-relative endpoints were given) anchored to the deviation of the
/// training portion of the target so every fit in the run shares it.
fn solver_config(cfg: &RunConfig, ws: &Workspace) -> CliResult<SolverConfig<f64>> {
    let train = ws.dataset.rows(0, ws.split)?;
    let std = train.target().std(1.0);
    Ok(SolverConfig {
        max_iterations: cfg.solver.max_iterations,
        tolerance: cfg.solver.tolerance,
        smoothing: cfg.solver.smoothing_for(std),
        ..SolverConfig::default()
    })
}

pub fn diagnose_cmd(cfg: &RunConfig) -> CliResult<()> {
    let ws = build_workspace(cfg)?;
    let series: Vec<f64> = ws.dataset.target().to_vec();
    let diag = diagnose(&series, cfg.diagnostics.n_lags)?;
    let name = format!("log_return({})", cfg.input.target_column);
    let label = match cfg.target_kind()? {
        qgl_core::TargetKind::Price => &name,
        qgl_core::TargetKind::LogReturn => &cfg.input.target_column,
    };
    let report = render_report(&diag, label);
    write_report(&cfg.run.output_dir, "diagnostics.txt", &report)?;
    write_manifest(cfg, "diagnose", &cfg.run.output_dir)?;
    Ok(())
}

/// Ranks features on the training window; reads the quantile level from
/// the middle of the configured list.
fn rank_features(
    cfg: &RunConfig,
    ws: &Workspace,
) -> CliResult<qgl_core::feature_select::ImportanceRanking<f64>> {
    let train = ws.dataset.rows(0, ws.split)?;
    let pairs = train.lagged_pairs()?;
    let tau = median_tau(&cfg.run.taus);
    let lambdas = cfg.lambda_values()?;
    importance_rank(
        &pairs,
        tau,
        &lambdas,
        cfg.ranking_loss()?,
        cfg.grid.k_folds,
        &solver_config(cfg, ws)?,
    )
    .map_err(CliError::from)
}

pub fn select_cmd(cfg: &RunConfig) -> CliResult<()> {
    let ws = build_workspace(cfg)?;
    let ranking = rank_features(cfg, &ws)?;
    let k = cfg.selection.top_k.unwrap_or(ranking.features.len());
    let mapping = if cfg.groups.is_empty() {
        None
    } else {
        Some(cfg.groups.iter().map(|(a, b)| (a.clone(), b.clone())).collect())
    };
    let csv = selection_csv(&ranking, k, mapping.as_ref())?;
    write_report(&cfg.run.output_dir, "feature_selection.csv", &csv)?;
    write_manifest(cfg, "select", &cfg.run.output_dir)?;
    Ok(())
}

/// Applies `selection.top_k`: restricts the dataset to the retained
/// features and rebuilds the matching group structure.
fn apply_selection(
    cfg: &RunConfig,
    ws: Workspace,
    ranking: &qgl_core::feature_select::ImportanceRanking<f64>,
) -> CliResult<Workspace> {
    let Some(k) = cfg.selection.top_k else {
        return Ok(ws);
    };
    let dataset = select_top_k(&ws.dataset, ranking, k)?;
    let groups = groups_for(cfg, dataset.feature_names())?;
    Ok(Workspace {
        dataset,
        groups,
        ..ws
    })
}

fn median_tau(taus: &[f64]) -> f64 {
    taus.iter()
        .copied()
        .find(|t| *t == 0.5)
        .unwrap_or_else(|| taus[taus.len() / 2])
}

/// Cross-validates one method at every configured quantile level on the
/// initial training window. Returns the per-tau selections.
fn cv_one_method(
    cfg: &RunConfig,
    ws: &Workspace,
    method: Method,
) -> CliResult<Vec<(f64, CvSelection<f64>)>> {
    // Pairs built from the training rows only; identical to the window
    // the expanding forecast cross-validates on.
    let initial = ws.dataset.rows(0, ws.split)?.lagged_pairs()?;
    let mut out = Vec::new();
    for &tau in &cfg.run.taus {
        let grid = cfg.grid_for(method, tau)?;
        let selection = cross_validate(
            &initial,
            &ws.groups,
            &grid,
            method,
            cfg.grid.k_folds.min(initial.n_samples().saturating_sub(1)).max(1),
            &solver_config(cfg, ws)?,
        )?;
        out.push((tau, selection));
    }
    Ok(out)
}

/// Score table averaged over folds: one row per grid cell.
fn mean_score_table(records: &[CvRecord<f64>]) -> String {
    let mut out = String::from("lambda,alpha,power_weight,mean_pinball_loss\n");
    let mut seen: Vec<(f64, f64, f64)> = Vec::new();
    for r in records {
        let key = (r.lambda, r.alpha, r.power_weight);
        if !seen.contains(&key) {
            seen.push(key);
        }
    }
    for (lambda, alpha, g) in seen {
        let cell: Vec<f64> = records
            .iter()
            .filter(|r| (r.lambda, r.alpha, r.power_weight) == (lambda, alpha, g))
            .map(|r| r.pinball_loss)
            .collect();
        let mean = cell.iter().sum::<f64>() / cell.len() as f64;
        out.push_str(&format!("{lambda},{alpha},{g},{mean}\n"));
    }
    out
}

fn quantile_suffix(tau: f64) -> String {
    let pct = tau * 100.0;
    if (pct - pct.round()).abs() < 1e-9 {
        format!("q{}", pct.round() as i64)
    } else {
        format!("q{pct}")
    }
}

pub fn cv_cmd(cfg: &RunConfig) -> CliResult<()> {
    let ws = build_workspace(cfg)?;
    for &method in &ws.methods {
        let t0 = Instant::now();
        let selections = cv_one_method(cfg, &ws, method)?;
        for (tau, sel) in &selections {
            let name = format!("cv_scores_{}_{}.csv", method.as_str(), quantile_suffix(*tau));
            write_report(&cfg.run.output_dir, &name, &mean_score_table(&sel.records))?;
            println!(
                "{} tau={tau}: lambda={} alpha={} power_weight={} mean_loss={}",
                method.as_str(),
                sel.best.lambda,
                sel.best.alpha,
                sel.best.power_weight,
                sel.best_mean_loss
            );
        }
        info!("cv {} took {:.2?}", method.as_str(), t0.elapsed());
    }
    write_manifest(cfg, "cv", &cfg.run.output_dir)?;
    Ok(())
}

fn forecast_settings(cfg: &RunConfig, method: Method) -> CliResult<ForecastSettings<f64>> {
    let grid = cfg.grid_for(method, median_tau(&cfg.run.taus))?;
    let mut settings = ForecastSettings::new(cfg.run.taus.clone(), grid, cfg.grid.k_folds);
    settings.refit_stride = cfg.grid.refit_stride;
    Ok(settings)
}

/// Writes the per-method final-fit artifact: the model refit on the
/// whole training window at the hyperparameters cross-validation chose
/// for the middle quantile.
fn write_fit_artifact(
    cfg: &RunConfig,
    ws: &Workspace,
    method: Method,
    selected: &[(f64, PresetHyperparams<f64>)],
) -> CliResult<()> {
    let tau = median_tau(&cfg.run.taus);
    let hp = selected
        .iter()
        .find(|(t, _)| *t == tau)
        .map(|(_, hp)| hp.clone())
        .unwrap_or_else(|| selected[0].1.clone());
    let pairs = ws.dataset.lagged_pairs()?;
    let train = pairs.rows(0, ws.split - 1)?;
    let fit = fit_preset(method, &train, &ws.groups, tau, &hp, &solver_config(cfg, ws)?)?;
    let name = format!("fit_{}.txt", method.as_str());
    write_report(&cfg.run.output_dir, &name, &fit.to_text())
}

fn emit_forecast_reports(
    cfg: &RunConfig,
    ws: &Workspace,
    outputs: &[(Method, ForecastOutput<f64>)],
) -> CliResult<()> {
    let mut all_records: Vec<ForecastRecord<f64>> = Vec::new();
    for (_, out) in outputs {
        all_records.extend(out.records.iter().cloned());
    }
    let csv = forecast_csv(&all_records)?;
    write_report(&cfg.run.output_dir, "forecast.csv", &csv)?;
    for (method, out) in outputs {
        let profile = quantile_profile(&out.records)?;
        if profile.n_crossings() > 0 {
            println!(
                "{}: quantile crossings on {} of {} dates",
                method.as_str(),
                profile.n_crossings(),
                out.records.len()
            );
        }
        write_fit_artifact(cfg, ws, *method, &out.selected)?;
    }
    Ok(())
}

pub fn forecast_cmd(cfg: &RunConfig) -> CliResult<()> {
    let ws = build_workspace(cfg)?;
    let mut outputs = Vec::new();
    for &method in &ws.methods {
        let t0 = Instant::now();
        let settings = forecast_settings(cfg, method)?;
        let out = expanding_window_forecast(
            &ws.dataset,
            &ws.groups,
            method,
            &settings,
            ws.split,
            &solver_config(cfg, &ws)?,
        )?;
        info!("forecast {} took {:.2?}", method.as_str(), t0.elapsed());
        outputs.push((method, out));
    }
    emit_forecast_reports(cfg, &ws, &outputs)?;
    write_manifest(cfg, "forecast", &cfg.run.output_dir)?;
    Ok(())
}

/// Per-method metrics at every quantile level, from records that carry
/// their own actual values.
fn metrics_from_records(
    taus: &[f64],
    outputs: &[(Method, Vec<ForecastRecord<f64>>)],
) -> CliResult<(String, String)> {
    let mut flat_rows: Vec<LabeledMetrics<f64>> = Vec::new();
    let mut wide_rows: Vec<(String, Vec<MetricsReport<f64>>)> = Vec::new();
    let median = median_tau(taus);
    for (method, records) in outputs {
        let actual: Vec<f64> = records
            .iter()
            .map(|r| {
                r.actual
                    .ok_or_else(|| CliError::Data("forecast row without an actual value".into()))
            })
            .collect::<CliResult<_>>()?;
        let mut reports = Vec::with_capacity(taus.len());
        for &tau in taus {
            let predicted: Vec<f64> = records
                .iter()
                .map(|r| {
                    r.predictions
                        .iter()
                        .find(|(t, _)| *t == tau)
                        .map(|(_, p)| *p)
                        .ok_or_else(|| {
                            CliError::Data(format!("forecast row lacks quantile {tau}"))
                        })
                })
                .collect::<CliResult<_>>()?;
            let report = evaluate(&actual, &predicted)?;
            if tau == median {
                flat_rows.push(LabeledMetrics {
                    label: method.as_str().into(),
                    report: report.clone(),
                });
            }
            reports.push(report);
        }
        wide_rows.push((method.as_str().into(), reports));
    }
    let flat = metrics_csv(&flat_rows);
    let wide = metrics_by_tau_csv(taus, &wide_rows)?;
    Ok((flat, wide))
}

/// Reads `forecast.csv` back and scores it against the prepared input
/// data, so a stale or truncated input surfaces as a length error.
pub fn evaluate_cmd(cfg: &RunConfig) -> CliResult<()> {
    let ws = build_workspace(cfg)?;
    let path = cfg.run.output_dir.join("forecast.csv");
    let parsed = read_forecast_csv(&path)?;

    let test_rows = ws.dataset.n_samples() - ws.split;
    for (method, records) in &parsed.by_method {
        if records.len() != test_rows {
            return Err(CliError::Data(format!(
                "forecast for {} has {} rows but the test period has {test_rows}",
                method.as_str(),
                records.len()
            )));
        }
    }
    let (flat, wide) = metrics_from_records(&parsed.taus, &parsed.by_method)?;
    write_report(&cfg.run.output_dir, "metrics.csv", &flat)?;
    write_report(&cfg.run.output_dir, "metrics_by_tau.csv", &wide)?;
    write_manifest(cfg, "evaluate", &cfg.run.output_dir)?;
    Ok(())
}

struct ParsedForecast {
    taus: Vec<f64>,
    by_method: Vec<(Method, Vec<ForecastRecord<f64>>)>,
}

fn read_forecast_csv(path: &Path) -> CliResult<ParsedForecast> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path.to_path_buf(), e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Data(format!("{}: empty forecast file", path.display())))?;
    let columns: Vec<&str> = header.split(',').collect();
    let mut taus = Vec::new();
    for c in &columns {
        if let Some(pct) = c.strip_prefix("pred_q") {
            let pct: f64 = pct.parse().map_err(|_| {
                CliError::Data(format!("{}: bad prediction column `{c}`", path.display()))
            })?;
            taus.push(pct / 100.0);
        }
    }
    if taus.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no prediction columns",
            path.display()
        )));
    }
    let model_col = columns.iter().position(|c| *c == "model").ok_or_else(|| {
        CliError::Data(format!("{}: missing model column", path.display()))
    })?;
    let converged_col = columns
        .iter()
        .position(|c| *c == "converged")
        .ok_or_else(|| {
            CliError::Data(format!("{}: missing converged column", path.display()))
        })?;

    let mut by_method: Vec<(Method, Vec<ForecastRecord<f64>>)> = Vec::new();
    for (i, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != columns.len() {
            return Err(CliError::Data(format!(
                "{}: line {} has {} cells, expected {}",
                path.display(),
                i + 2,
                cells.len(),
                columns.len()
            )));
        }
        let date = crate::config::parse_date(cells[0]).ok_or_else(|| {
            CliError::Data(format!("{}: line {}: bad date", path.display(), i + 2))
        })?;
        let parse = |s: &str| -> CliResult<f64> {
            s.parse().map_err(|_| {
                CliError::Data(format!(
                    "{}: line {}: bad number `{s}`",
                    path.display(),
                    i + 2
                ))
            })
        };
        let actual = if cells[1].is_empty() {
            None
        } else {
            Some(parse(cells[1])?)
        };
        let mut predictions = Vec::with_capacity(taus.len());
        for (k, &tau) in taus.iter().enumerate() {
            predictions.push((tau, parse(cells[2 + k])?));
        }
        let method = Method::parse(cells[model_col]).map_err(CliError::from)?;
        let converged = cells[converged_col] == "true";
        let record = ForecastRecord {
            date,
            actual,
            predictions,
            model: method,
            converged,
        };
        match by_method.iter_mut().find(|(m, _)| *m == method) {
            Some((_, v)) => v.push(record),
            None => by_method.push((method, vec![record])),
        }
    }
    Ok(ParsedForecast { taus, by_method })
}

/// The full flow: diagnose, rank (and optionally screen) features,
/// cross-validate, forecast the test period, and score it.
pub fn pipeline_cmd(cfg: &RunConfig) -> CliResult<()> {
    let t0 = Instant::now();
    let ws = build_workspace(cfg)?;

    let series: Vec<f64> = ws.dataset.target().to_vec();
    let diag = diagnose(&series, cfg.diagnostics.n_lags)?;
    let name = format!("log_return({})", cfg.input.target_column);
    let label = match cfg.target_kind()? {
        qgl_core::TargetKind::Price => &name,
        qgl_core::TargetKind::LogReturn => &cfg.input.target_column,
    };
    write_report(
        &cfg.run.output_dir,
        "diagnostics.txt",
        &render_report(&diag, label),
    )?;
    info!("diagnose done at {:.2?}", t0.elapsed());

    let ranking = rank_features(cfg, &ws)?;
    let k = cfg.selection.top_k.unwrap_or(ranking.features.len());
    let mapping: Option<HashMap<String, String>> = if cfg.groups.is_empty() {
        None
    } else {
        Some(cfg.groups.iter().map(|(a, b)| (a.clone(), b.clone())).collect())
    };
    write_report(
        &cfg.run.output_dir,
        "feature_selection.csv",
        &selection_csv(&ranking, k, mapping.as_ref())?,
    )?;
    let ws = apply_selection(cfg, ws, &ranking)?;
    info!("selection done at {:.2?}", t0.elapsed());

    let mut outputs = Vec::new();
    for &method in &ws.methods {
        let selections = cv_one_method(cfg, &ws, method)?;
        let mut selected = Vec::with_capacity(selections.len());
        for (tau, sel) in &selections {
            let name = format!("cv_scores_{}_{}.csv", method.as_str(), quantile_suffix(*tau));
            write_report(&cfg.run.output_dir, &name, &mean_score_table(&sel.records))?;
            selected.push((*tau, sel.best.clone()));
        }
        info!("cv {} done at {:.2?}", method.as_str(), t0.elapsed());

        let out = forecast_with_hyperparams(
            &ws.dataset,
            &ws.groups,
            method,
            &selected,
            cfg.grid.refit_stride,
            ws.split,
            &solver_config(cfg, &ws)?,
        )?;
        info!("forecast {} done at {:.2?}", method.as_str(), t0.elapsed());
        outputs.push((method, out));
    }
    emit_forecast_reports(cfg, &ws, &outputs)?;

    let record_sets: Vec<(Method, Vec<ForecastRecord<f64>>)> = outputs
        .into_iter()
        .map(|(m, out)| (m, out.records))
        .collect();
    let (flat, wide) = metrics_from_records(&cfg.run.taus, &record_sets)?;
    write_report(&cfg.run.output_dir, "metrics.csv", &flat)?;
    write_report(&cfg.run.output_dir, "metrics_by_tau.csv", &wide)?;
    write_manifest(cfg, "pipeline", &cfg.run.output_dir)?;
    info!("pipeline done in {:.2?}", t0.elapsed());
    Ok(())
}

/// Materializes a seeded synthetic dataset plus a ready-to-run config
/// pointing at it, so the pipeline can be exercised without real data.
pub fn synth_cmd(preset: &str, seed: u64, out_dir: &Path) -> CliResult<()> {
    let synth_cfg = match preset {
        "benchmark" => SyntheticConfig::benchmark(seed),
        "selection" => SyntheticConfig::selection(seed),
        other => {
            return Err(CliError::Config(format!(
                "unknown preset `{other}`; expected benchmark or selection"
            )))
        }
    };
    let data = generate::<f64>(&synth_cfg)?;
    let ds = &data.dataset;

    let mut csv = String::from("date");
    csv.push_str(",target");
    for name in ds.feature_names() {
        csv.push_str(&format!(",{name}"));
    }
    csv.push('\n');
    for i in 0..ds.n_samples() {
        csv.push_str(&format!("{}", ds.dates()[i]));
        csv.push_str(&format!(",{}", ds.target()[i]));
        for j in 0..ds.n_features() {
            csv.push_str(&format!(",{}", ds.features()[[i, j]]));
        }
        csv.push('\n');
    }
    write_report(out_dir, "data.csv", &csv)?;

    let mut truth = String::from("index\tname\tcoefficient\n");
    for &idx in &data.support {
        truth.push_str(&format!(
            "{idx}\t{}\t{}\n",
            ds.feature_names()[idx],
            data.coefficients[idx]
        ));
    }
    write_report(out_dir, "synth_truth.txt", &truth)?;

    let split = ds.n_samples() * 4 / 5;
    let mut config: RunConfig = toml::from_str(&format!(
        r#"
        [input]
        path = "{}"
        target_column = "target"
        target_kind = "log_return"

        [run]
        split_date = "{}"
        seed = {seed}
        "#,
        out_dir.join("data.csv").display(),
        ds.dates()[split - 1],
    ))
    .map_err(|e| CliError::Config(format!("synth config: {e}")))?;
    config.run.output_dir = out_dir.join("out");
    for l in 0..data.groups.n_groups() {
        for &j in data.groups.members(l) {
            config
                .groups
                .insert(ds.feature_names()[j].clone(), format!("g{}", l + 1));
        }
    }
    let text = toml::to_string(&config)
        .map_err(|e| CliError::Config(format!("synth config: {e}")))?;
    write_report(out_dir, "synthetic_config.toml", &text)?;
    println!(
        "wrote {} rows x {} features to {}",
        ds.n_samples(),
        ds.n_features(),
        out_dir.join("data.csv").display()
    );
    Ok(())
}
