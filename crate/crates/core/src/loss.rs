//! Pinball (check) loss, its Moreau-envelope smoothing, and squared loss.

use crate::dataset::TimeSeriesDataset;
use crate::error::{Error, Result};
use crate::Float;
use ndarray::ArrayView1;

/// Check loss `rho_tau(u) = u * (tau - 1{u <= 0})`.
///
/// Positive residuals (under-prediction) cost `tau * u`, negative ones
/// cost `(tau - 1) * u`; at `tau = 0.5` this is half the absolute error.
pub fn pinball<F: Float>(u: F, tau: F) -> F {
    if u > F::zero() {
        tau * u
    } else {
        (tau - F::one()) * u
    }
}

/// Mean pinball loss of the linear model `beta0 + x . beta` on `dataset`.
pub fn pinball_risk<F: Float>(
    beta0: F,
    beta: ArrayView1<F>,
    dataset: &TimeSeriesDataset<F>,
    tau: F,
) -> Result<F> {
    check_tau(tau)?;
    let resid = residuals(beta0, beta, dataset)?;
    let n = F::cast(resid.len() as f64);
    Ok(resid.iter().map(|&u| pinball(u, tau)).sum::<F>() / n)
}

/// Mean squared residual of the linear model on `dataset`.
pub fn least_squares_risk<F: Float>(
    beta0: F,
    beta: ArrayView1<F>,
    dataset: &TimeSeriesDataset<F>,
) -> Result<F> {
    let resid = residuals(beta0, beta, dataset)?;
    let n = F::cast(resid.len() as f64);
    Ok(resid.iter().map(|&u| u * u).sum::<F>() / n)
}

fn residuals<F: Float>(
    beta0: F,
    beta: ArrayView1<F>,
    dataset: &TimeSeriesDataset<F>,
) -> Result<Vec<F>> {
    if beta.len() != dataset.n_features() {
        return Err(Error::DimensionMismatch(format!(
            "{} coefficients for {} features",
            beta.len(),
            dataset.n_features()
        )));
    }
    let fitted = dataset.features().dot(&beta);
    Ok(dataset
        .target()
        .iter()
        .zip(fitted.iter())
        .map(|(&y, &f)| y - beta0 - f)
        .collect())
}

pub(crate) fn check_tau<F: Float>(tau: F) -> Result<()> {
    if !(tau > F::zero() && tau < F::one()) {
        return Err(Error::InvalidParameter(format!(
            "tau must lie strictly in (0, 1), got {tau}"
        )));
    }
    Ok(())
}

/// Moreau envelope of the pinball loss with parameter `mu`, together
/// with its derivative.
///
/// The envelope agrees with the two linear branches of the check loss
/// outside `[mu (tau - 1), mu tau]` up to a constant offset and replaces
/// the kink by the quadratic `u^2 / (2 mu)`. It never exceeds the check
/// loss and undershoots it by at most `mu * max(tau, 1 - tau)^2 / 2`,
/// so at most `mu / 2`. The derivative is continuous, non-decreasing and
/// confined to `[tau - 1, tau]`.
pub fn smoothed_pinball<F: Float>(u: F, tau: F, mu: F) -> Result<(F, F)> {
    check_tau(tau)?;
    if !(mu > F::zero()) {
        return Err(Error::InvalidParameter(format!(
            "smoothing parameter must be positive, got {mu}"
        )));
    }
    Ok(smoothed_pinball_unchecked(u, tau, mu))
}

#[inline]
pub(crate) fn smoothed_pinball_unchecked<F: Float>(u: F, tau: F, mu: F) -> (F, F) {
    let half = F::cast(0.5);
    if u >= mu * tau {
        (tau * u - half * mu * tau * tau, tau)
    } else if u <= mu * (tau - F::one()) {
        let t1 = tau - F::one();
        (t1 * u - half * mu * t1 * t1, t1)
    } else {
        (u * u / (F::cast(2.0) * mu), u / mu)
    }
}

/// Smoothing schedule for the quantile solver: start loose, tighten by a
/// fixed factor, finish exactly at `mu_min`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingParams<F> {
    /// Initial smoothing parameter.
    pub mu0: F,
    /// Multiplicative decrease per continuation stage, in (0, 1).
    pub factor: F,
    /// Final (and smallest) smoothing parameter.
    pub mu_min: F,
}

impl<F: Float> SmoothingParams<F> {
    /// Default schedule tied to the scale of the target: `mu0 = 1e-4 *
    /// scale` down to `mu_min = 1e-7 * scale`, halving per stage. A
    /// non-positive scale (constant target) falls back to unit scale.
    pub fn for_scale(scale: F) -> Self {
        let s = if scale > F::zero() { scale } else { F::one() };
        Self {
            mu0: F::cast(1e-4) * s,
            factor: F::cast(0.5),
            mu_min: F::cast(1e-7) * s,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu_min > F::zero()) {
            return Err(Error::InvalidParameter(format!(
                "mu_min must be positive, got {}",
                self.mu_min
            )));
        }
        if !(self.mu0 >= self.mu_min) {
            return Err(Error::InvalidParameter(format!(
                "mu0 ({}) must be at least mu_min ({})",
                self.mu0, self.mu_min
            )));
        }
        if !(self.factor > F::zero() && self.factor < F::one()) {
            return Err(Error::InvalidParameter(format!(
                "continuation factor must lie in (0, 1), got {}",
                self.factor
            )));
        }
        Ok(())
    }

    /// Strictly decreasing stage values ending exactly at `mu_min`.
    pub fn schedule(&self) -> Vec<F> {
        let mut out = Vec::new();
        let mut mu = self.mu0;
        while mu > self.mu_min {
            out.push(mu);
            mu = mu * self.factor;
        }
        out.push(self.mu_min);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{TargetKind, TimeSeriesDataset};
    use approx::assert_abs_diff_eq;
    use chrono::NaiveDate;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn pinball_matches_hand_values() {
        assert_abs_diff_eq!(pinball(-2.0, 0.25), 1.5);
        assert_abs_diff_eq!(pinball(2.0, 0.25), 0.5);
        assert_abs_diff_eq!(pinball(0.0, 0.7), 0.0);
        assert_abs_diff_eq!(pinball(3.0, 0.9), 2.7);
        assert_abs_diff_eq!(pinball(-3.0, 0.9), 0.3, epsilon = 1e-15);
    }

    #[test]
    fn smoothed_pinball_matches_hand_value() {
        let (v, d) = smoothed_pinball(1.0, 0.5, 0.01).unwrap();
        assert_abs_diff_eq!(v, 0.49875, epsilon = 1e-15);
        assert_abs_diff_eq!(d, 0.5);
    }

    #[test]
    fn smoothed_pinball_rejects_bad_parameters() {
        assert!(smoothed_pinball(1.0, 0.5, 0.0).is_err());
        assert!(smoothed_pinball(1.0, 0.5, -1.0).is_err());
        assert!(smoothed_pinball(1.0, 0.0, 0.1).is_err());
        assert!(smoothed_pinball(1.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn smoothing_schedule_halves_down_to_floor() {
        let sp = SmoothingParams::<f64>::for_scale(1.0);
        let sched = sp.schedule();
        assert_eq!(sched.len(), 11);
        assert_abs_diff_eq!(sched[0], 1e-4);
        assert_abs_diff_eq!(*sched.last().unwrap(), 1e-7);
        for w in sched.windows(2) {
            assert!(w[1] < w[0]);
        }
        assert!(SmoothingParams::<f64> { mu0: 1e-8, factor: 0.5, mu_min: 1e-7 }
            .validate()
            .is_err());
    }

    #[test]
    fn risks_match_manual_computation() {
        let d = |s: &str| NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap();
        let ds = TimeSeriesDataset::new(
            vec![d("2020-01-01"), d("2020-01-02")],
            array![1.0, -1.0],
            array![[2.0], [0.0]],
            vec!["x".into()],
            TargetKind::LogReturn,
        )
        .unwrap();
        let beta = array![0.5];
        // Residuals: 1 - 0.1 - 1 = -0.1 and -1 - 0.1 - 0 = -1.1.
        let pr = pinball_risk(0.1, beta.view(), &ds, 0.25).unwrap();
        assert_abs_diff_eq!(pr, (0.075 + 0.825) / 2.0, epsilon = 1e-15);
        let ls = least_squares_risk(0.1, beta.view(), &ds).unwrap();
        assert_abs_diff_eq!(ls, (0.01 + 1.21) / 2.0, epsilon = 1e-12);
        assert!(pinball_risk(0.0, array![1.0, 2.0].view(), &ds, 0.5).is_err());
    }

    proptest! {
        #[test]
        fn pinball_is_nonnegative_and_zero_only_at_zero(
            u in -1e6f64..1e6,
            tau in 0.01f64..0.99,
        ) {
            let v = pinball(u, tau);
            prop_assert!(v >= 0.0);
            if u != 0.0 {
                prop_assert!(v > 0.0);
            }
        }

        #[test]
        fn envelope_stays_below_pinball_within_half_mu(
            u in -10.0f64..10.0,
            tau in 0.01f64..0.99,
            mu in 1e-6f64..1e-1,
        ) {
            let (v, d) = smoothed_pinball(u, tau, mu).unwrap();
            let gap = pinball(u, tau) - v;
            prop_assert!(gap >= -1e-15);
            let bound = mu * tau.max(1.0 - tau).powi(2) / 2.0;
            prop_assert!(gap <= bound + 1e-15);
            prop_assert!(d >= tau - 1.0 - 1e-15 && d <= tau + 1e-15);
        }
    }
}
