//! Small dense linear-algebra helpers: Householder least squares and a
//! power iteration for the squared spectral norm of the augmented design.

use crate::error::{Error, Result};
use crate::Float;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

/// Ordinary least-squares fit of `b ~ a` via Householder QR.
pub(crate) struct OlsFit<F> {
    pub coefficients: Array1<F>,
    /// Standard errors of the coefficients.
    pub standard_errors: Array1<F>,
}

/// Solves min ||a x - b||_2 and returns coefficients and standard
/// errors. Requires `m >= n` and full column rank.
pub(crate) fn least_squares<F: Float>(a: ArrayView2<F>, b: ArrayView1<F>) -> Result<OlsFit<F>> {
    let (m, n) = a.dim();
    if b.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "design has {m} rows but response has {}",
            b.len()
        )));
    }
    if m < n {
        return Err(Error::InvalidData(format!(
            "least squares needs at least as many rows ({m}) as columns ({n})"
        )));
    }

    // Householder QR, reducing `r` in place and applying the same
    // reflections to `qtb`.
    let mut r = a.to_owned();
    let mut qtb = b.to_owned();
    for k in 0..n {
        let mut norm = F::zero();
        for i in k..m {
            norm = norm + r[[i, k]] * r[[i, k]];
        }
        norm = norm.sqrt();
        if norm <= F::cast(1e-300) {
            return Err(Error::InvalidData(format!(
                "rank-deficient regression: column {k} is numerically zero"
            )));
        }
        let alpha = if r[[k, k]] >= F::zero() { -norm } else { norm };
        // Householder vector v = x - alpha * e_k, stored implicitly.
        let mut v = Array1::<F>::zeros(m - k);
        for i in k..m {
            v[i - k] = r[[i, k]];
        }
        v[0] = v[0] - alpha;
        let vnorm2: F = v.iter().map(|&x| x * x).sum();
        if vnorm2 > F::zero() {
            for j in k..n {
                let mut dot = F::zero();
                for i in k..m {
                    dot = dot + v[i - k] * r[[i, j]];
                }
                let scale = F::cast(2.0) * dot / vnorm2;
                for i in k..m {
                    r[[i, j]] = r[[i, j]] - scale * v[i - k];
                }
            }
            let mut dot = F::zero();
            for i in k..m {
                dot = dot + v[i - k] * qtb[i];
            }
            let scale = F::cast(2.0) * dot / vnorm2;
            for i in k..m {
                qtb[i] = qtb[i] - scale * v[i - k];
            }
        }
        r[[k, k]] = alpha;
        for i in (k + 1)..m {
            r[[i, k]] = F::zero();
        }
    }

    let rel_tol = F::cast(1e-12) * r[[0, 0]].abs().max(F::one());
    for k in 0..n {
        if r[[k, k]].abs() <= rel_tol {
            return Err(Error::InvalidData(format!(
                "rank-deficient regression: pivot {k} vanished"
            )));
        }
    }

    // Back substitution for the coefficients.
    let mut coef = Array1::<F>::zeros(n);
    for k in (0..n).rev() {
        let mut s = qtb[k];
        for j in (k + 1)..n {
            s = s - r[[k, j]] * coef[j];
        }
        coef[k] = s / r[[k, k]];
    }

    let fitted = a.dot(&coef);
    let residuals = &b.to_owned() - &fitted;
    let ssr: F = residuals.iter().map(|&e| e * e).sum();
    let dof = m - n;
    let sigma2 = if dof > 0 {
        ssr / F::cast(dof as f64)
    } else {
        F::zero()
    };

    // diag((A^T A)^-1) from the inverse of R: row norms of R^-1.
    let rinv = invert_upper_triangular(&r, n)?;
    let mut standard_errors = Array1::<F>::zeros(n);
    for j in 0..n {
        let mut s = F::zero();
        for k in j..n {
            s = s + rinv[[j, k]] * rinv[[j, k]];
        }
        standard_errors[j] = (sigma2 * s).sqrt();
    }

    Ok(OlsFit {
        coefficients: coef,
        standard_errors,
    })
}

fn invert_upper_triangular<F: Float>(r: &Array2<F>, n: usize) -> Result<Array2<F>> {
    let mut inv = Array2::<F>::zeros((n, n));
    for j in (0..n).rev() {
        inv[[j, j]] = F::one() / r[[j, j]];
        for i in (0..j).rev() {
            let mut s = F::zero();
            for k in (i + 1)..=j {
                s = s + r[[i, k]] * inv[[k, j]];
            }
            inv[[i, j]] = -s / r[[i, i]];
        }
    }
    Ok(inv)
}

/// Largest squared singular value of the augmented design `[1 X]`,
/// estimated by power iteration on `v -> [1 X]^T ([1 X] v)`.
///
/// The Rayleigh-quotient estimate approaches the true value from below;
/// callers that need a step bound pair it with backtracking.
pub(crate) fn augmented_spectral_norm_sq<F: Float>(x: &Array2<F>) -> F {
    let p = x.ncols();
    let dim = p + 1;
    let mut v = Array1::<F>::zeros(dim);
    for (j, vj) in v.iter_mut().enumerate() {
        *vj = F::one() + F::cast(0.25 * ((j % 3) as f64));
    }
    normalize(&mut v);

    let mut estimate = F::zero();
    for _ in 0..300 {
        // t = [1 X] v  (length n)
        let mut t = x.dot(&v.slice(ndarray::s![1..]));
        let v0 = v[0];
        t.mapv_inplace(|ti| ti + v0);
        // w = [1 X]^T t  (length p + 1)
        let mut w = Array1::<F>::zeros(dim);
        w[0] = t.sum();
        let xtt = x.t().dot(&t);
        w.slice_mut(ndarray::s![1..]).assign(&xtt);

        let new_estimate = v.dot(&w);
        let denom = normalize(&mut w);
        if denom == F::zero() {
            return F::zero();
        }
        v = w;
        let change = (new_estimate - estimate).abs();
        estimate = new_estimate;
        if change <= F::cast(1e-14) * estimate.max(F::one()) {
            break;
        }
    }
    estimate
}

fn normalize<F: Float>(v: &mut Array1<F>) -> F {
    let norm = v.iter().map(|&x| x * x).sum::<F>().sqrt();
    if norm > F::zero() {
        v.mapv_inplace(|x| x / norm);
    }
    norm
}
