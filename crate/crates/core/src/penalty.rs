//! Sparse-group penalty family: value, proximal operator, adaptive weights.

use crate::dataset::GroupStructure;
use crate::error::{Error, Result};
use crate::solver::FitResult;
use crate::Float;
use ndarray::{Array1, ArrayView1};
use std::fmt;
use std::str::FromStr;

/// Floor applied to pilot magnitudes before taking reciprocal powers, so
/// a zeroed pilot coefficient yields a large finite weight.
pub const DEFAULT_WEIGHT_EPS: f64 = 1e-6;
/// Upper clip for adaptive weights.
pub const DEFAULT_WEIGHT_CAP: f64 = 1e6;

/// The estimators the crate knows how to fit.
///
/// `LmLasso` is the least-squares lasso; everything else minimizes mean
/// pinball loss. `LQg` keeps only the group term, `LSqg` mixes both, and
/// the `A`-variants reweight the penalty with a pilot fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    LmLasso,
    QrLasso,
    ALasso,
    LQg,
    LSqg,
    LAsqg,
}

impl Method {
    pub fn all() -> [Method; 6] {
        [
            Method::LmLasso,
            Method::QrLasso,
            Method::ALasso,
            Method::LQg,
            Method::LSqg,
            Method::LAsqg,
        ]
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::LmLasso => "lm_lasso",
            Method::QrLasso => "qr_lasso",
            Method::ALasso => "alasso",
            Method::LQg => "l_qg",
            Method::LSqg => "l_sqg",
            Method::LAsqg => "l_asqg",
        }
    }

    /// Accepts the canonical name with `-`/`_` and case variations.
    pub fn parse(s: &str) -> Result<Self> {
        let norm: String = s
            .trim()
            .chars()
            .map(|c| if c == '-' { '_' } else { c.to_ascii_lowercase() })
            .collect();
        match norm.as_str() {
            "lm_lasso" => Ok(Method::LmLasso),
            "qr_lasso" => Ok(Method::QrLasso),
            "alasso" | "qr_alasso" => Ok(Method::ALasso),
            "l_qg" => Ok(Method::LQg),
            "l_sqg" => Ok(Method::LSqg),
            "l_asqg" => Ok(Method::LAsqg),
            other => Err(Error::InvalidParameter(format!(
                "unknown method `{other}`; expected one of lm_lasso, qr_lasso, alasso, l_qg, l_sqg, l_asqg"
            ))),
        }
    }

    pub fn uses_quantile_loss(&self) -> bool {
        !matches!(self, Method::LmLasso)
    }

    /// Whether the method reweights its penalty from a pilot fit.
    pub fn is_adaptive(&self) -> bool {
        matches!(self, Method::ALasso | Method::LAsqg)
    }

    /// Whether the group term participates, i.e. alpha can differ from 1.
    pub fn uses_groups(&self) -> bool {
        matches!(self, Method::LQg | Method::LSqg | Method::LAsqg)
    }

    /// Mixing value the method pins down, if any: lasso-only methods are
    /// alpha = 1, the pure group method alpha = 0.
    pub fn forced_alpha(&self) -> Option<f64> {
        match self {
            Method::LmLasso | Method::QrLasso | Method::ALasso => Some(1.0),
            Method::LQg => Some(0.0),
            Method::LSqg | Method::LAsqg => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::parse(s)
    }
}

/// Fully resolved penalty: `alpha * lambda * sum_j w_j |beta_j| +
/// (1 - alpha) * lambda * sum_l sqrt(p_l) v_l ||beta^l||_2`, attached to
/// either the pinball loss at `tau` or the squared loss.
///
/// `None` weights mean unit weights. The `method` tag records which
/// recipe produced the spec; the arithmetic only reads the numeric
/// fields and the loss flag.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltySpec<F> {
    pub method: Method,
    pub tau: F,
    pub lambda: F,
    pub alpha: F,
    pub use_quantile_loss: bool,
    pub lasso_weights: Option<Array1<F>>,
    pub group_weights: Option<Array1<F>>,
    /// Exponents behind any adaptive weights, recorded for reporting.
    pub gamma1: F,
    pub gamma2: F,
}

impl<F: Float> PenaltySpec<F> {
    pub fn new(method: Method, tau: F, lambda: F, alpha: F) -> Self {
        let alpha = match method.forced_alpha() {
            Some(a) => F::cast(a),
            None => alpha,
        };
        Self {
            method,
            tau,
            lambda,
            alpha,
            use_quantile_loss: method.uses_quantile_loss(),
            lasso_weights: None,
            group_weights: None,
            gamma1: F::zero(),
            gamma2: F::zero(),
        }
    }

    pub fn with_weights(
        mut self,
        lasso_weights: Option<Array1<F>>,
        group_weights: Option<Array1<F>>,
        gamma1: F,
        gamma2: F,
    ) -> Self {
        self.lasso_weights = lasso_weights;
        self.group_weights = group_weights;
        self.gamma1 = gamma1;
        self.gamma2 = gamma2;
        self
    }

    pub fn validate(&self, groups: &GroupStructure) -> Result<()> {
        let p = groups.n_features();
        if self.use_quantile_loss {
            crate::loss::check_tau(self.tau)?;
        }
        if !(self.lambda >= F::zero() && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be finite and nonnegative, got {}",
                self.lambda
            )));
        }
        if !(self.alpha >= F::zero() && self.alpha <= F::one()) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        if let Some(w) = &self.lasso_weights {
            if w.len() != p {
                return Err(Error::DimensionMismatch(format!(
                    "{} lasso weights for {p} features",
                    w.len()
                )));
            }
            if w.iter().any(|&x| !(x >= F::zero()) || !x.is_finite()) {
                return Err(Error::InvalidParameter(
                    "lasso weights must be finite and nonnegative".into(),
                ));
            }
        }
        if let Some(v) = &self.group_weights {
            if v.len() != groups.n_groups() {
                return Err(Error::DimensionMismatch(format!(
                    "{} group weights for {} groups",
                    v.len(),
                    groups.n_groups()
                )));
            }
            if v.iter().any(|&x| !(x >= F::zero()) || !x.is_finite()) {
                return Err(Error::InvalidParameter(
                    "group weights must be finite and nonnegative".into(),
                ));
            }
        }
        Ok(())
    }

    /// Per-coordinate L1 threshold factors `alpha * lambda * w_j`.
    pub(crate) fn l1_factors(&self, p: usize) -> Array1<F> {
        let base = self.alpha * self.lambda;
        match &self.lasso_weights {
            Some(w) => w.mapv(|wj| base * wj),
            None => Array1::from_elem(p, base),
        }
    }

    /// Per-group L2 threshold factors `(1 - alpha) * lambda * sqrt(p_l) * v_l`.
    pub(crate) fn group_factors(&self, groups: &GroupStructure) -> Array1<F> {
        let base = (F::one() - self.alpha) * self.lambda;
        let sqrt_sizes = groups.sqrt_sizes::<F>();
        let mut out = Array1::from_elem(groups.n_groups(), F::zero());
        for (l, &sq) in sqrt_sizes.iter().enumerate() {
            let v = self
                .group_weights
                .as_ref()
                .map(|v| v[l])
                .unwrap_or_else(F::one);
            out[l] = base * sq * v;
        }
        out
    }
}

/// Value of the penalty at `beta`.
pub fn penalty_value<F: Float>(
    beta: ArrayView1<F>,
    spec: &PenaltySpec<F>,
    groups: &GroupStructure,
) -> Result<F> {
    if beta.len() != groups.n_features() {
        return Err(Error::DimensionMismatch(format!(
            "{} coefficients for {} grouped features",
            beta.len(),
            groups.n_features()
        )));
    }
    spec.validate(groups)?;
    let l1 = spec.l1_factors(beta.len());
    let gf = spec.group_factors(groups);
    let mut total = F::zero();
    for (j, &b) in beta.iter().enumerate() {
        total = total + l1[j] * b.abs();
    }
    for l in 0..groups.n_groups() {
        let norm = group_norm(beta, groups.members(l));
        total = total + gf[l] * norm;
    }
    Ok(total)
}

fn group_norm<F: Float>(beta: ArrayView1<F>, members: &[usize]) -> F {
    members
        .iter()
        .map(|&j| beta[j] * beta[j])
        .sum::<F>()
        .sqrt()
}

/// Prox of `t * | . |`: shrinks toward zero, clamping at it.
#[inline]
pub fn soft_threshold<F: Float>(v: F, t: F) -> F {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        F::zero()
    }
}

/// Prox of `t * || . ||_2` for one group: scales by `max(0, 1 - t/||v||)`.
pub fn group_shrink<F: Float>(v: ArrayView1<F>, t: F) -> Array1<F> {
    let mut out = v.to_owned();
    group_shrink_slice(out.as_slice_mut().expect("contiguous"), t);
    out
}

#[inline]
pub(crate) fn group_shrink_slice<F: Float>(v: &mut [F], t: F) {
    let norm = v.iter().map(|&x| x * x).sum::<F>().sqrt();
    if norm <= t {
        v.iter_mut().for_each(|x| *x = F::zero());
    } else if t > F::zero() {
        let factor = F::one() - t / norm;
        v.iter_mut().for_each(|x| *x = *x * factor);
    }
}

/// Exact proximal operator of `step * penalty`: soft-threshold every
/// coordinate with `step * alpha * lambda * w_j`, then shrink each group
/// with `step * (1 - alpha) * lambda * sqrt(p_l) * v_l`. The composition
/// is exact for this penalty because soft-thresholding commutes with the
/// group norm's subdifferential. The intercept is handled outside.
pub fn sparse_group_prox<F: Float>(
    beta: ArrayView1<F>,
    step: F,
    spec: &PenaltySpec<F>,
    groups: &GroupStructure,
) -> Result<Array1<F>> {
    if !(step > F::zero()) {
        return Err(Error::InvalidParameter(format!(
            "prox step must be positive, got {step}"
        )));
    }
    if beta.len() != groups.n_features() {
        return Err(Error::DimensionMismatch(format!(
            "{} coefficients for {} grouped features",
            beta.len(),
            groups.n_features()
        )));
    }
    spec.validate(groups)?;
    let l1 = spec.l1_factors(beta.len());
    let gf = spec.group_factors(groups);
    let mut out = beta.to_owned();
    prox_inplace(
        out.as_slice_mut().expect("contiguous"),
        step,
        l1.as_slice().expect("contiguous"),
        gf.as_slice().expect("contiguous"),
        groups,
    );
    Ok(out)
}

/// Hot-path prox on a raw slice with precomputed threshold factors.
pub(crate) fn prox_inplace<F: Float>(
    beta: &mut [F],
    step: F,
    l1_factors: &[F],
    group_factors: &[F],
    groups: &GroupStructure,
) {
    for (j, b) in beta.iter_mut().enumerate() {
        *b = soft_threshold(*b, step * l1_factors[j]);
    }
    let mut buf: Vec<F> = Vec::new();
    for l in 0..groups.n_groups() {
        let t = step * group_factors[l];
        if t <= F::zero() {
            continue;
        }
        let members = groups.members(l);
        // Contiguous groups shrink in place; scattered ones go through a
        // scratch buffer.
        if members.len() > 1 && members.windows(2).any(|w| w[1] != w[0] + 1) {
            buf.clear();
            buf.extend(members.iter().map(|&j| beta[j]));
            group_shrink_slice(&mut buf, t);
            for (k, &j) in members.iter().enumerate() {
                beta[j] = buf[k];
            }
        } else {
            let start = members[0];
            group_shrink_slice(&mut beta[start..start + members.len()], t);
        }
    }
}

/// Penalty weights from a pilot fit: `w_j = 1 / max(|b_j|, eps)^gamma1`
/// clipped to `cap`, and likewise per group from the pilot group norms.
///
/// Magnitudes are taken in the standardized space the penalty acts in,
/// reconstructed from the pilot's stored scaling. Zero exponents give
/// exact unit weights.
pub fn adaptive_weights<F: Float>(
    pilot: &FitResult<F>,
    gamma1: F,
    gamma2: F,
    groups: &GroupStructure,
    eps: F,
    cap: F,
) -> Result<(Array1<F>, Array1<F>)> {
    if !(eps > F::zero()) || !(cap > F::zero()) {
        return Err(Error::InvalidParameter(
            "adaptive-weight eps and cap must be positive".into(),
        ));
    }
    if pilot.coefficients.len() != groups.n_features() {
        return Err(Error::DimensionMismatch(format!(
            "pilot has {} coefficients but groups cover {} features",
            pilot.coefficients.len(),
            groups.n_features()
        )));
    }
    let beta = pilot.standardized_coefficients();
    let weight = |magnitude: F, gamma: F| -> F {
        if gamma == F::zero() {
            return F::one();
        }
        let m = magnitude.abs().max(eps);
        let w = m.powf(-gamma);
        w.min(cap)
    };
    let lasso = beta.mapv(|b| weight(b, gamma1));
    let mut group = Array1::from_elem(groups.n_groups(), F::one());
    for l in 0..groups.n_groups() {
        let norm = group_norm(beta.view(), groups.members(l));
        group[l] = weight(norm, gamma2);
    }
    Ok((lasso, group))
}
