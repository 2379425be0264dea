//! Exact linear-programming oracle for small quantile-lasso instances.
//!
//! The problem `min (1/n) sum rho_tau(y_i - b0 - x_i . b) + lambda ||b||_1`
//! becomes an LP by splitting residuals and coefficients into positive
//! and negative parts. A dense primal simplex solves it exactly (up to
//! pivot tolerance); the initial basis comes for free from the residual
//! columns, so no artificial variables are needed. This is a test-scale
//! oracle for the iterative solver, not a production path.

use crate::dataset::TimeSeriesDataset;
use crate::error::{Error, Result};
use crate::loss::{check_tau, pinball};
use crate::Float;
use ndarray::{Array1, Array2};

/// Exact optimum of the quantile-lasso objective.
#[derive(Debug, Clone)]
pub struct LpSolution<F> {
    pub objective: F,
    pub intercept: F,
    pub coefficients: Array1<F>,
}

const MAX_ROWS: usize = 200;
const MAX_COLS: usize = 20;
const PIVOT_EPS: f64 = 1e-9;
const MAX_PIVOTS: usize = 50_000;

/// Solves the quantile-lasso LP exactly. Limited to `n <= 200`,
/// `p <= 20`; callers wanting the full estimator use the iterative
/// solver instead.
pub fn lp_oracle<F: Float>(
    dataset: &TimeSeriesDataset<F>,
    tau: F,
    lambda: F,
) -> Result<LpSolution<F>> {
    check_tau(tau)?;
    if !(lambda >= F::zero() && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be finite and nonnegative, got {lambda}"
        )));
    }
    let n = dataset.n_samples();
    let p = dataset.n_features();
    if n > MAX_ROWS || p > MAX_COLS {
        return Err(Error::LinearProgram(format!(
            "oracle limited to n <= {MAX_ROWS}, p <= {MAX_COLS}; got n={n}, p={p}"
        )));
    }
    if dataset.target().iter().any(|v| !v.is_finite())
        || dataset.features().iter().any(|v| !v.is_finite())
    {
        return Err(Error::InvalidData("non-finite values in LP input".into()));
    }

    // Columns: b0+, b0-, b+_j, b-_j, u+_i, u-_i.
    let nv = 2 + 2 * p + 2 * n;
    let rhs_col = nv;
    let upos0 = 2 + 2 * p;
    let uneg0 = upos0 + n;

    let x = dataset.features();
    let y = dataset.target();
    let mut t = Array2::<F>::zeros((n, nv + 1));
    let mut basis = vec![0usize; n];
    for i in 0..n {
        let sign = if y[i] < F::zero() { -F::one() } else { F::one() };
        t[[i, 0]] = sign;
        t[[i, 1]] = -sign;
        for j in 0..p {
            t[[i, 2 + j]] = sign * x[[i, j]];
            t[[i, 2 + p + j]] = -sign * x[[i, j]];
        }
        t[[i, upos0 + i]] = sign;
        t[[i, uneg0 + i]] = -sign;
        t[[i, rhs_col]] = sign * y[i];
        basis[i] = if sign > F::zero() {
            upos0 + i
        } else {
            uneg0 + i
        };
    }

    let n_f = F::cast(n as f64);
    let mut cost = vec![F::zero(); nv];
    for j in 0..p {
        cost[2 + j] = lambda;
        cost[2 + p + j] = lambda;
    }
    for i in 0..n {
        cost[upos0 + i] = tau / n_f;
        cost[uneg0 + i] = (F::one() - tau) / n_f;
    }

    // Objective row [c - c_B T | -z], updated by the same eliminations
    // as the constraint rows.
    let mut obj = vec![F::zero(); nv + 1];
    for j in 0..=nv {
        let mut acc = F::zero();
        for i in 0..n {
            acc = acc + cost[basis[i]] * t[[i, j]];
        }
        obj[j] = if j < nv { cost[j] - acc } else { -acc };
    }

    let eps = F::cast(PIVOT_EPS);
    let mut degenerate_streak = 0usize;
    for _ in 0..MAX_PIVOTS {
        // Entering column: most negative reduced cost; Bland's rule
        // (lowest index) after a degenerate streak, which prevents
        // cycling.
        let use_bland = degenerate_streak > 100;
        let mut enter: Option<usize> = None;
        let mut best = -eps;
        for j in 0..nv {
            if obj[j] < best {
                enter = Some(j);
                if use_bland {
                    break;
                }
                best = obj[j];
            }
        }
        let Some(jc) = enter else {
            // Optimal: extract the vertex.
            let mut values = vec![F::zero(); nv];
            for i in 0..n {
                values[basis[i]] = t[[i, rhs_col]];
            }
            let intercept = values[0] - values[1];
            let mut coefficients = Array1::<F>::zeros(p);
            for j in 0..p {
                coefficients[j] = values[2 + j] - values[2 + p + j];
            }
            // Report the original objective at the vertex rather than
            // the tableau accumulator; they agree at optimality and this
            // form is directly comparable with the iterative solver.
            let mut risk = F::zero();
            for i in 0..n {
                let mut fitted = intercept;
                for j in 0..p {
                    fitted = fitted + x[[i, j]] * coefficients[j];
                }
                risk = risk + pinball(y[i] - fitted, tau);
            }
            let l1: F = coefficients.iter().map(|b| b.abs()).sum();
            return Ok(LpSolution {
                objective: risk / n_f + lambda * l1,
                intercept,
                coefficients,
            });
        };

        // Ratio test: tightest row with a positive pivot entry; ties go
        // to the smaller basis index (anti-cycling).
        let mut leave: Option<usize> = None;
        let mut best_ratio = F::infinity();
        for i in 0..n {
            let a = t[[i, jc]];
            if a > eps {
                let ratio = t[[i, rhs_col]] / a;
                let better = match leave {
                    None => true,
                    Some(cur) => {
                        ratio < best_ratio - eps
                            || (ratio < best_ratio + eps && basis[i] < basis[cur])
                    }
                };
                if better {
                    leave = Some(i);
                    best_ratio = ratio;
                }
            }
        }
        let Some(ir) = leave else {
            return Err(Error::LinearProgram(
                "unbounded direction encountered".into(),
            ));
        };
        if best_ratio <= eps {
            degenerate_streak += 1;
        } else {
            degenerate_streak = 0;
        }

        // Pivot on (ir, jc).
        let piv = t[[ir, jc]];
        for j in 0..=nv {
            t[[ir, j]] = t[[ir, j]] / piv;
        }
        for i in 0..n {
            if i == ir {
                continue;
            }
            let factor = t[[i, jc]];
            if factor != F::zero() {
                for j in 0..=nv {
                    let upd = t[[i, j]] - factor * t[[ir, j]];
                    t[[i, j]] = upd;
                }
            }
        }
        let factor = obj[jc];
        if factor != F::zero() {
            for j in 0..=nv {
                obj[j] = obj[j] - factor * t[[ir, j]];
            }
        }
        basis[ir] = jc;
    }
    Err(Error::LinearProgram(format!(
        "simplex did not terminate within {MAX_PIVOTS} pivots"
    )))
}
