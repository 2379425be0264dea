//! Accelerated proximal-gradient solver for the penalized quantile and
//! least-squares models, plus the preset recipes that build each method.
//!
//! The quantile path minimizes the Moreau-smoothed pinball risk plus the
//! sparse-group penalty with FISTA, tightening the smoothing parameter
//! over a continuation schedule and certifying the final iterate with a
//! prox-fixed-point residual. The intercept rides along as an extra
//! unpenalized coordinate updated by plain gradient steps.

use crate::dataset::{standardize, GroupStructure, Standardization, TimeSeriesDataset};
use crate::error::{Error, Result};
use crate::linalg::augmented_spectral_norm_sq;
use crate::loss::{pinball, smoothed_pinball_unchecked, SmoothingParams};
use crate::penalty::{
    adaptive_weights, prox_inplace, Method, PenaltySpec, DEFAULT_WEIGHT_CAP, DEFAULT_WEIGHT_EPS,
};
use crate::Float;
use ndarray::{Array1, ArrayView1, ArrayView2};

pub use crate::lp::{lp_oracle, LpSolution};

/// Iteration budget, convergence tolerance and smoothing schedule.
///
/// `max_iterations` bounds the total gradient steps across all
/// continuation stages. `tolerance` applies to the step-normalized
/// prox-fixed-point residual `max(|grad_0|, ||b - prox(b - s g)||_inf / s)`,
/// which vanishes exactly at a minimizer and is invariant to the choice
/// of `s`. `smoothing = None` derives the schedule from the target's
/// sample standard deviation. `standardize = false` fits in the raw
/// feature space, which keeps the problem identical to external oracles.
#[derive(Debug, Clone)]
pub struct SolverConfig<F> {
    pub max_iterations: usize,
    pub tolerance: F,
    pub smoothing: Option<SmoothingParams<F>>,
    pub standardize: bool,
}

impl<F: Float> Default for SolverConfig<F> {
    fn default() -> Self {
        Self {
            max_iterations: 50_000,
            tolerance: F::cast(1e-6),
            smoothing: None,
            standardize: true,
        }
    }
}

impl<F: Float> SolverConfig<F> {
    fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter(
                "max_iterations must be at least 1".into(),
            ));
        }
        if !(self.tolerance > F::zero()) {
            return Err(Error::InvalidParameter(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if let Some(s) = &self.smoothing {
            s.validate()?;
        }
        Ok(())
    }
}

/// Grid cell a preset method is fitted at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PresetHyperparams<F> {
    pub lambda: F,
    pub alpha: F,
    /// Shared exponent for the adaptive weights (gamma1 = gamma2).
    pub power_weight: F,
    pub weight_eps: F,
    pub weight_cap: F,
}

impl<F: Float> PresetHyperparams<F> {
    pub fn new(lambda: F, alpha: F, power_weight: F) -> Self {
        Self {
            lambda,
            alpha,
            power_weight,
            weight_eps: F::cast(DEFAULT_WEIGHT_EPS),
            weight_cap: F::cast(DEFAULT_WEIGHT_CAP),
        }
    }
}

/// A fitted model in the original feature space.
///
/// `objective` and `stage_objectives` are the exact (unsmoothed) risk
/// plus penalty evaluated in the space the solver worked in, i.e. on
/// standardized features when standardization was on. Coordinates zeroed
/// by the prox stay exactly zero through destandardization, so
/// [`FitResult::support`] is exact.
#[derive(Debug, Clone)]
pub struct FitResult<F> {
    pub intercept: F,
    pub coefficients: Array1<F>,
    pub feature_names: Vec<String>,
    pub iterations: usize,
    pub converged: bool,
    pub objective: F,
    pub optimality_residual: F,
    /// Smoothing value the residual was measured at; 0 on the
    /// squared-loss path, which needs none.
    pub final_mu: F,
    pub spec: PenaltySpec<F>,
    pub standardization: Standardization<F>,
    pub stage_objectives: Vec<F>,
}

impl<F: Float> FitResult<F> {
    pub fn predict_row(&self, x: ArrayView1<F>) -> F {
        self.intercept + x.dot(&self.coefficients)
    }

    pub fn predict(&self, features: ArrayView2<F>) -> Array1<F> {
        let mut out = features.dot(&self.coefficients);
        let b0 = self.intercept;
        out.mapv_inplace(|v| v + b0);
        out
    }

    /// Indices of exactly nonzero coefficients.
    pub fn support(&self) -> Vec<usize> {
        self.coefficients
            .iter()
            .enumerate()
            .filter(|(_, &b)| b != F::zero())
            .map(|(j, _)| j)
            .collect()
    }

    pub fn n_nonzero(&self) -> usize {
        self.coefficients.iter().filter(|&&b| b != F::zero()).count()
    }

    /// Coefficients mapped back into the standardized fitting space.
    pub fn standardized_coefficients(&self) -> Array1<F> {
        let mut out = self.coefficients.clone();
        for (j, b) in out.iter_mut().enumerate() {
            *b = *b * self.standardization.scales[j];
        }
        out
    }

    /// Intercept in the standardized fitting space.
    pub fn fitting_space_intercept(&self) -> F {
        let mut adj = F::zero();
        for (j, &b) in self.coefficients.iter().enumerate() {
            adj = adj + b * self.standardization.means[j];
        }
        self.intercept + adj
    }

    #[cfg(test)]
    pub(crate) fn for_tests(intercept: F, coefficients: Array1<F>, spec: PenaltySpec<F>) -> Self {
        let p = coefficients.len();
        Self {
            intercept,
            coefficients,
            feature_names: (1..=p).map(|j| format!("x{j}")).collect(),
            iterations: 0,
            converged: true,
            objective: F::zero(),
            optimality_residual: F::zero(),
            final_mu: F::zero(),
            spec,
            standardization: Standardization::identity(p),
            stage_objectives: Vec::new(),
        }
    }

    /// Flat text serialization: `key=value` lines, one tab-separated
    /// line per feature. Floats are printed with the shortest
    /// representation that parses back to the identical value, so a
    /// round trip is exact.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("format=qgl-fit-v1\n");
        s.push_str(&format!("method={}\n", self.spec.method));
        s.push_str(&format!("tau={}\n", self.spec.tau));
        s.push_str(&format!("lambda={}\n", self.spec.lambda));
        s.push_str(&format!("alpha={}\n", self.spec.alpha));
        s.push_str(&format!("use_quantile_loss={}\n", self.spec.use_quantile_loss));
        s.push_str(&format!("gamma1={}\n", self.spec.gamma1));
        s.push_str(&format!("gamma2={}\n", self.spec.gamma2));
        s.push_str(&format!("intercept={}\n", self.intercept));
        s.push_str(&format!("iterations={}\n", self.iterations));
        s.push_str(&format!("converged={}\n", self.converged));
        s.push_str(&format!("objective={}\n", self.objective));
        s.push_str(&format!("optimality_residual={}\n", self.optimality_residual));
        s.push_str(&format!("final_mu={}\n", self.final_mu));
        let stages: Vec<String> = self.stage_objectives.iter().map(|v| format!("{v}")).collect();
        s.push_str(&format!("stage_objectives={}\n", stages.join(" ")));
        match &self.spec.group_weights {
            Some(v) => {
                let vals: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
                s.push_str(&format!("group_weights={}\n", vals.join(" ")));
            }
            None => s.push_str("group_weights=none\n"),
        }
        s.push_str(&format!("n_features={}\n", self.coefficients.len()));
        for j in 0..self.coefficients.len() {
            let w = match &self.spec.lasso_weights {
                Some(w) => format!("{}", w[j]),
                None => "none".to_string(),
            };
            s.push_str(&format!(
                "feature={}\t{}\t{}\t{}\t{}\n",
                self.feature_names[j],
                self.coefficients[j],
                self.standardization.means[j],
                self.standardization.scales[j],
                w,
            ));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut fields = std::collections::BTreeMap::new();
        let mut feature_lines = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: missing `=`", ln + 1)))?;
            if key == "feature" {
                feature_lines.push(value.to_string());
            } else {
                fields.insert(key.to_string(), value.to_string());
            }
        }
        let get = |key: &str| -> Result<&String> {
            fields
                .get(key)
                .ok_or_else(|| Error::Parse(format!("missing field `{key}`")))
        };
        let parse_f = |key: &str, raw: &str| -> Result<F> {
            raw.parse::<F>()
                .map_err(|_| Error::Parse(format!("field `{key}`: bad number `{raw}`")))
        };
        if get("format")? != "qgl-fit-v1" {
            return Err(Error::Parse(format!(
                "unsupported format `{}`",
                get("format")?
            )));
        }
        let method = Method::parse(get("method")?)?;
        let n_features: usize = get("n_features")?
            .parse()
            .map_err(|_| Error::Parse("bad n_features".into()))?;
        if feature_lines.len() != n_features {
            return Err(Error::Parse(format!(
                "expected {n_features} feature lines, found {}",
                feature_lines.len()
            )));
        }
        let mut names = Vec::with_capacity(n_features);
        let mut coefficients = Array1::<F>::zeros(n_features);
        let mut means = Array1::<F>::zeros(n_features);
        let mut scales = Array1::<F>::zeros(n_features);
        let mut lasso_weights: Vec<F> = Vec::new();
        let mut any_weight = false;
        for (j, line) in feature_lines.iter().enumerate() {
            let parts: Vec<&str> = line.split('\t').collect();
            if parts.len() != 5 {
                return Err(Error::Parse(format!(
                    "feature line {j}: expected 5 tab-separated fields, got {}",
                    parts.len()
                )));
            }
            names.push(parts[0].to_string());
            coefficients[j] = parse_f("feature.coefficient", parts[1])?;
            means[j] = parse_f("feature.mean", parts[2])?;
            scales[j] = parse_f("feature.scale", parts[3])?;
            if parts[4] == "none" {
                lasso_weights.push(F::one());
            } else {
                any_weight = true;
                lasso_weights.push(parse_f("feature.weight", parts[4])?);
            }
        }
        let group_weights = match get("group_weights")?.as_str() {
            "none" => None,
            raw => {
                let vals: Result<Vec<F>> = raw
                    .split_whitespace()
                    .map(|t| parse_f("group_weights", t))
                    .collect();
                Some(Array1::from(vals?))
            }
        };
        let stage_objectives: Result<Vec<F>> = get("stage_objectives")?
            .split_whitespace()
            .map(|t| parse_f("stage_objectives", t))
            .collect();
        let parse_bool = |key: &str| -> Result<bool> {
            match get(key)?.as_str() {
                "true" => Ok(true),
                "false" => Ok(false),
                other => Err(Error::Parse(format!("field `{key}`: bad flag `{other}`"))),
            }
        };
        let mut spec = PenaltySpec::new(
            method,
            parse_f("tau", get("tau")?)?,
            parse_f("lambda", get("lambda")?)?,
            parse_f("alpha", get("alpha")?)?,
        );
        // Restore exactly what was stored rather than the constructor's
        // derived defaults.
        spec.alpha = parse_f("alpha", get("alpha")?)?;
        spec.use_quantile_loss = parse_bool("use_quantile_loss")?;
        spec.lasso_weights = if any_weight {
            Some(Array1::from(lasso_weights))
        } else {
            None
        };
        spec.group_weights = group_weights;
        spec.gamma1 = parse_f("gamma1", get("gamma1")?)?;
        spec.gamma2 = parse_f("gamma2", get("gamma2")?)?;
        Ok(Self {
            intercept: parse_f("intercept", get("intercept")?)?,
            coefficients,
            feature_names: names,
            iterations: get("iterations")?
                .parse()
                .map_err(|_| Error::Parse("bad iterations".into()))?,
            converged: parse_bool("converged")?,
            objective: parse_f("objective", get("objective")?)?,
            optimality_residual: parse_f(
                "optimality_residual",
                get("optimality_residual")?,
            )?,
            final_mu: parse_f("final_mu", get("final_mu")?)?,
            spec,
            standardization: Standardization { means, scales },
            stage_objectives: stage_objectives?,
        })
    }
}

/// Result of fitting a preset method, keeping the pilot fit (when the
/// method has one) so forecast streams can warm-start both stages.
#[derive(Debug, Clone)]
pub struct PresetFit<F> {
    pub result: FitResult<F>,
    pub pilot: Option<FitResult<F>>,
}

struct FitProblem<'a, F> {
    x: ArrayView2<'a, F>,
    y: ArrayView1<'a, F>,
    tau: F,
    quantile: bool,
    l1: Array1<F>,
    gf: Array1<F>,
    groups: &'a GroupStructure,
    n_inv: F,
}

#[derive(Clone)]
struct State<F> {
    b0: F,
    b: Array1<F>,
}

impl<'a, F: Float> FitProblem<'a, F> {
    fn loss_at(&self, b0: F, b: &Array1<F>, mu: F) -> F {
        let fitted = self.x.dot(b);
        let mut total = F::zero();
        for (i, &yi) in self.y.iter().enumerate() {
            let u = yi - b0 - fitted[i];
            if self.quantile {
                total = total + smoothed_pinball_unchecked(u, self.tau, mu).0;
            } else {
                total = total + u * u;
            }
        }
        total * self.n_inv
    }

    fn loss_and_grad(&self, b0: F, b: &Array1<F>, mu: F) -> (F, F, Array1<F>) {
        let fitted = self.x.dot(b);
        let mut total = F::zero();
        let mut der = Array1::<F>::zeros(self.y.len());
        for (i, &yi) in self.y.iter().enumerate() {
            let u = yi - b0 - fitted[i];
            if self.quantile {
                let (v, d) = smoothed_pinball_unchecked(u, self.tau, mu);
                total = total + v;
                der[i] = d;
            } else {
                total = total + u * u;
                der[i] = F::cast(2.0) * u;
            }
        }
        let g0 = -self.n_inv * der.sum();
        let mut g = self.x.t().dot(&der);
        let scale = -self.n_inv;
        g.mapv_inplace(|v| v * scale);
        (total * self.n_inv, g0, g)
    }

    fn penalty_at(&self, b: &Array1<F>) -> F {
        let mut total = F::zero();
        for (j, &bj) in b.iter().enumerate() {
            total = total + self.l1[j] * bj.abs();
        }
        for l in 0..self.groups.n_groups() {
            if self.gf[l] == F::zero() {
                continue;
            }
            let norm = self
                .groups
                .members(l)
                .iter()
                .map(|&j| b[j] * b[j])
                .sum::<F>()
                .sqrt();
            total = total + self.gf[l] * norm;
        }
        total
    }

    fn true_risk(&self, b0: F, b: &Array1<F>) -> F {
        let fitted = self.x.dot(b);
        let mut total = F::zero();
        for (i, &yi) in self.y.iter().enumerate() {
            let u = yi - b0 - fitted[i];
            if self.quantile {
                total = total + pinball(u, self.tau);
            } else {
                total = total + u * u;
            }
        }
        total * self.n_inv
    }

    fn true_objective(&self, s: &State<F>) -> F {
        self.true_risk(s.b0, &s.b) + self.penalty_at(&s.b)
    }

    fn prox(&self, v: &mut Array1<F>, step: F) {
        prox_inplace(
            v.as_slice_mut().expect("contiguous"),
            step,
            self.l1.as_slice().expect("contiguous"),
            self.gf.as_slice().expect("contiguous"),
            self.groups,
        );
    }

    /// Step-normalized prox-fixed-point residual at `(b0, b)`.
    fn residual(&self, b0: F, b: &Array1<F>, mu: F, step: F) -> F {
        let (_, g0, g) = self.loss_and_grad(b0, b, mu);
        let mut z = b - &g.mapv(|gj| gj * step);
        self.prox(&mut z, step);
        let mut r = g0.abs();
        for j in 0..b.len() {
            r = r.max((b[j] - z[j]).abs() / step);
        }
        r
    }
}

/// One FISTA run at fixed smoothing, with monotone restarts and
/// backtracking. Mutates `state` to the final iterate and returns the
/// number of iterations spent.
fn fista_stage<F: Float>(
    prob: &FitProblem<F>,
    state: &mut State<F>,
    mu: F,
    step0: F,
    tol: F,
    budget: usize,
) -> usize {
    const CHECK_EVERY: usize = 10;
    const MAX_HALVINGS: usize = 100;

    let mut x0 = state.b0;
    let mut x = state.b.clone();
    let mut fx = prob.loss_at(x0, &x, mu) + prob.penalty_at(&x);
    let mut y0 = x0;
    let mut y = x.clone();
    let mut t = F::one();
    let mut step = step0;
    let mut iterations = 0usize;

    // Backtracked prox-gradient step from (fy0, fy): returns the
    // candidate, its smooth loss, and the (possibly reduced) step.
    let try_step = |from0: F, from: &Array1<F>, mut step: F| -> Option<(F, Array1<F>, F, F)> {
        let (fy, g0, g) = prob.loss_and_grad(from0, from, mu);
        for _ in 0..MAX_HALVINGS {
            let z0 = from0 - step * g0;
            let mut z = from - &g.mapv(|gj| gj * step);
            prob.prox(&mut z, step);
            let d0 = z0 - from0;
            let mut lin = g0 * d0;
            let mut sq = d0 * d0;
            for j in 0..z.len() {
                let dj = z[j] - from[j];
                lin = lin + g[j] * dj;
                sq = sq + dj * dj;
            }
            let quad = fy + lin + sq / (F::cast(2.0) * step);
            let fz = prob.loss_at(z0, &z, mu);
            let slack = F::cast(1e-12) * (F::one() + fy.abs());
            if fz <= quad + slack {
                return Some((z0, z, fz, step));
            }
            step = step * F::cast(0.5);
        }
        None
    };

    while iterations < budget {
        iterations += 1;
        let stepped = match try_step(y0, &y, step) {
            Some(v) => v,
            None => break,
        };
        let (mut z0, mut z, mut fz, new_step) = stepped;
        step = new_step;
        let mut bigf = fz + prob.penalty_at(&z);
        if bigf > fx {
            // Momentum overshot: restart from the last accepted iterate,
            // which majorization guarantees cannot increase the objective.
            t = F::one();
            match try_step(x0, &x, step) {
                Some((r0, r, fr, s)) => {
                    z0 = r0;
                    z = r;
                    fz = fr;
                    step = s;
                    bigf = fz + prob.penalty_at(&z);
                }
                None => break,
            }
        }
        let t_next = (F::one() + (F::one() + F::cast(4.0) * t * t).sqrt()) * F::cast(0.5);
        let c = (t - F::one()) / t_next;
        let mut y_new = z.clone();
        for j in 0..y_new.len() {
            y_new[j] = z[j] + c * (z[j] - x[j]);
        }
        y0 = z0 + c * (z0 - x0);
        y = y_new;
        t = t_next;
        x0 = z0;
        x = z;
        fx = bigf;

        if iterations % CHECK_EVERY == 0 || iterations == budget {
            if prob.residual(x0, &x, mu, step0) <= tol {
                break;
            }
        }
    }

    state.b0 = x0;
    state.b = x;
    iterations
}

/// Fits `spec` on `dataset` from a cold start.
pub fn fit<F: Float>(
    dataset: &TimeSeriesDataset<F>,
    groups: &GroupStructure,
    spec: &PenaltySpec<F>,
    config: &SolverConfig<F>,
) -> Result<FitResult<F>> {
    fit_with_init(dataset, groups, spec, config, None)
}

/// Fits `spec`, optionally warm-starting from a previous result (used
/// along lambda paths and forecast streams). An init whose shape does
/// not match is ignored.
pub fn fit_with_init<F: Float>(
    dataset: &TimeSeriesDataset<F>,
    groups: &GroupStructure,
    spec: &PenaltySpec<F>,
    config: &SolverConfig<F>,
    init: Option<&FitResult<F>>,
) -> Result<FitResult<F>> {
    config.validate()?;
    spec.validate(groups)?;
    let p = dataset.n_features();
    if groups.n_features() != p {
        return Err(Error::DimensionMismatch(format!(
            "groups cover {} features but dataset has {p}",
            groups.n_features()
        )));
    }
    if dataset.target().iter().any(|v| !v.is_finite())
        || dataset.features().iter().any(|v| !v.is_finite())
    {
        return Err(Error::InvalidData(
            "non-finite values in inputs; apply a fill policy first".into(),
        ));
    }

    let (fit_ds, stats) = if config.standardize {
        standardize(dataset, None)?
    } else {
        (dataset.clone(), Standardization::identity(p))
    };
    let n = fit_ds.n_samples();
    let n_f = F::cast(n as f64);
    let y_scale = if n >= 2 {
        fit_ds.target().std(F::one())
    } else {
        F::zero()
    };

    let prob = FitProblem {
        x: fit_ds.features(),
        y: fit_ds.target(),
        tau: spec.tau,
        quantile: spec.use_quantile_loss,
        l1: spec.l1_factors(p),
        gf: spec.group_factors(groups),
        groups,
        n_inv: F::one() / n_f,
    };
    let sigma2 = augmented_spectral_norm_sq(&fit_ds.features().to_owned());

    let smoothing = config
        .smoothing
        .clone()
        .unwrap_or_else(|| SmoothingParams::for_scale(y_scale));
    smoothing.validate()?;
    let schedule: Vec<F> = if prob.quantile {
        smoothing.schedule()
    } else {
        vec![F::zero()]
    };
    let final_mu = if prob.quantile { smoothing.mu_min } else { F::zero() };
    let step_for = |mu: F| -> F {
        if prob.quantile {
            n_f * mu / sigma2
        } else {
            n_f / (F::cast(2.0) * sigma2)
        }
    };

    let mut state = match init {
        Some(r) if r.coefficients.len() == p => {
            let mut b = r.coefficients.clone();
            for (j, bj) in b.iter_mut().enumerate() {
                *bj = *bj * stats.scales[j];
            }
            let mut adj = F::zero();
            for (j, &c) in r.coefficients.iter().enumerate() {
                adj = adj + c * stats.means[j];
            }
            State {
                b0: r.intercept + adj,
                b,
            }
        }
        _ => State {
            b0: F::zero(),
            b: Array1::zeros(p),
        },
    };

    let last = schedule.len() - 1;
    let mut iterations = 0usize;
    let mut stage_objectives: Vec<F> = Vec::with_capacity(schedule.len());
    let mut carried: Option<(State<F>, F)> = None;
    for (s_idx, &mu) in schedule.iter().enumerate() {
        if iterations >= config.max_iterations {
            break;
        }
        let tol = if s_idx == last {
            config.tolerance
        } else {
            config.tolerance * F::cast(10.0)
        };
        iterations += fista_stage(
            &prob,
            &mut state,
            mu,
            step_for(mu),
            tol,
            config.max_iterations - iterations,
        );
        let mut obj = prob.true_objective(&state);
        if s_idx < last {
            // Keep the better iterate between stages; continuation is a
            // heuristic and an occasional regression would otherwise
            // poison later warm starts.
            if let Some((prev, prev_obj)) = &carried {
                if obj > *prev_obj {
                    state = prev.clone();
                    obj = *prev_obj;
                }
            }
            carried = Some((state.clone(), obj));
        }
        stage_objectives.push(obj);
    }

    let residual = prob.residual(state.b0, &state.b, final_mu, step_for(final_mu));
    let converged = residual <= config.tolerance;
    let objective = prob.true_objective(&state);

    let mut coefficients = Array1::<F>::zeros(p);
    let mut adj = F::zero();
    for j in 0..p {
        if state.b[j] != F::zero() {
            coefficients[j] = state.b[j] / stats.scales[j];
            adj = adj + state.b[j] * stats.means[j] / stats.scales[j];
        }
    }
    let intercept = state.b0 - adj;

    Ok(FitResult {
        intercept,
        coefficients,
        feature_names: dataset.feature_names().to_vec(),
        iterations,
        converged,
        objective,
        optimality_residual: residual,
        final_mu,
        spec: spec.clone(),
        standardization: stats,
        stage_objectives,
    })
}

/// Builds the penalty spec for one of the named methods and fits it.
///
/// The lasso-only methods pin alpha to 1 and the pure group method to 0.
/// Adaptive methods first fit an unweighted pilot at the same cell
/// (quantile lasso for `alasso`, sparse-group for `l_asqg`), derive
/// weights with the shared exponent `power_weight`, then fit the
/// weighted problem. The final fit cold-starts unless a warm state is
/// given, so a zero exponent reproduces the unweighted fit bit-for-bit.
pub fn fit_preset<F: Float>(
    method: Method,
    dataset: &TimeSeriesDataset<F>,
    groups: &GroupStructure,
    tau: F,
    hp: &PresetHyperparams<F>,
    config: &SolverConfig<F>,
) -> Result<FitResult<F>> {
    fit_preset_with_warm(method, dataset, groups, tau, hp, config, None).map(|p| p.result)
}

/// Spec of the unweighted pilot a method needs, if any.
pub(crate) fn pilot_spec<F: Float>(method: Method, tau: F, hp: &PresetHyperparams<F>) -> Option<PenaltySpec<F>> {
    match method {
        Method::ALasso => Some(PenaltySpec::new(Method::QrLasso, tau, hp.lambda, F::one())),
        Method::LAsqg => Some(PenaltySpec::new(Method::LSqg, tau, hp.lambda, hp.alpha)),
        _ => None,
    }
}

/// Final spec of a preset method; adaptive methods derive their weights
/// from the supplied pilot.
pub(crate) fn final_spec<F: Float>(
    method: Method,
    tau: F,
    hp: &PresetHyperparams<F>,
    groups: &GroupStructure,
    pilot: Option<&FitResult<F>>,
) -> Result<PenaltySpec<F>> {
    match method {
        Method::LmLasso | Method::QrLasso | Method::LQg | Method::LSqg => {
            Ok(PenaltySpec::new(method, tau, hp.lambda, hp.alpha))
        }
        Method::ALasso => {
            let pilot = pilot.ok_or_else(|| {
                Error::InvalidParameter("adaptive method requires a pilot fit".into())
            })?;
            let (w, _) = adaptive_weights(
                pilot,
                hp.power_weight,
                F::zero(),
                groups,
                hp.weight_eps,
                hp.weight_cap,
            )?;
            Ok(
                PenaltySpec::new(method, tau, hp.lambda, F::one()).with_weights(
                    Some(w),
                    None,
                    hp.power_weight,
                    F::zero(),
                ),
            )
        }
        Method::LAsqg => {
            let pilot = pilot.ok_or_else(|| {
                Error::InvalidParameter("adaptive method requires a pilot fit".into())
            })?;
            let (w, v) = adaptive_weights(
                pilot,
                hp.power_weight,
                hp.power_weight,
                groups,
                hp.weight_eps,
                hp.weight_cap,
            )?;
            Ok(
                PenaltySpec::new(method, tau, hp.lambda, hp.alpha).with_weights(
                    Some(w),
                    Some(v),
                    hp.power_weight,
                    hp.power_weight,
                ),
            )
        }
    }
}

/// Preset fit with warm starts for both the pilot and the final stage,
/// chained from a previous [`PresetFit`] on similar data.
pub fn fit_preset_with_warm<F: Float>(
    method: Method,
    dataset: &TimeSeriesDataset<F>,
    groups: &GroupStructure,
    tau: F,
    hp: &PresetHyperparams<F>,
    config: &SolverConfig<F>,
    warm: Option<&PresetFit<F>>,
) -> Result<PresetFit<F>> {
    if method.uses_groups() && groups.n_groups() == 0 && dataset.n_features() > 0 {
        return Err(Error::InvalidGroups(format!(
            "method {method} needs a group structure"
        )));
    }
    let warm_final = warm.map(|w| &w.result);
    let warm_pilot = warm.and_then(|w| w.pilot.as_ref());
    let pilot = match pilot_spec(method, tau, hp) {
        Some(spec) => Some(fit_with_init(dataset, groups, &spec, config, warm_pilot)?),
        None => None,
    };
    let spec = final_spec(method, tau, hp, groups, pilot.as_ref())?;
    let result = fit_with_init(dataset, groups, &spec, config, warm_final)?;
    Ok(PresetFit { result, pilot })
}

/// Recomputes the prox-fixed-point residual of a (possibly deserialized)
/// fit against a dataset, at the smoothing value recorded in the result.
pub fn optimality_residual<F: Float>(
    result: &FitResult<F>,
    dataset: &TimeSeriesDataset<F>,
    groups: &GroupStructure,
) -> Result<F> {
    let p = dataset.n_features();
    if result.coefficients.len() != p || groups.n_features() != p {
        return Err(Error::DimensionMismatch(format!(
            "fit has {} coefficients, dataset {p} features, groups {}",
            result.coefficients.len(),
            groups.n_features()
        )));
    }
    let (fit_ds, _) = standardize(dataset, Some(&result.standardization))?;
    let n = fit_ds.n_samples();
    let n_f = F::cast(n as f64);
    let prob = FitProblem {
        x: fit_ds.features(),
        y: fit_ds.target(),
        tau: result.spec.tau,
        quantile: result.spec.use_quantile_loss,
        l1: result.spec.l1_factors(p),
        gf: result.spec.group_factors(groups),
        groups,
        n_inv: F::one() / n_f,
    };
    let sigma2 = augmented_spectral_norm_sq(&fit_ds.features().to_owned());
    let mu = if prob.quantile {
        if result.final_mu > F::zero() {
            result.final_mu
        } else {
            let scale = if n >= 2 {
                fit_ds.target().std(F::one())
            } else {
                F::zero()
            };
            SmoothingParams::for_scale(scale).mu_min
        }
    } else {
        F::zero()
    };
    let step = if prob.quantile {
        n_f * mu / sigma2
    } else {
        n_f / (F::cast(2.0) * sigma2)
    };
    let b = result.standardized_coefficients();
    let b0 = result.fitting_space_intercept();
    Ok(prob.residual(b0, &b, mu, step))
}
