#!/usr/bin/env python3
"""Regenerates crates/cli/tests/data/prox_oracle.csv.

The acceptance suite checks the closed-form sparse-group proximal
operator against an independent numerical minimizer. This script mirrors
the SplitMix64 stream the Rust test uses to build the seeded instances,
solves each prox problem

    min_x  0.5 * ||x - v||^2
         + step * (alpha * lam * sum_j w_j |x_j|
                   + (1 - alpha) * lam * sum_l sqrt(p_l) * vg_l * ||x_l||_2)

with cvxpy (Clarabel) at tight tolerances, and writes the minimizers to CSV.

Usage: python3 scripts/make_prox_oracle.py
"""

import math
import os

import cvxpy as cp
import numpy as np

MASK = (1 << 64) - 1
SEED = 1000003
N_INSTANCES = 100


class SplitMix64:
    def __init__(self, seed):
        self.state = seed & MASK

    def next_u64(self):
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        return (z ^ (z >> 31)) & MASK

    def next_f64(self):
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def standard_normal(self):
        u1 = ((self.next_u64() >> 11) + 1) * (1.0 / 9007199254740992.0)
        u2 = (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


def instance(rng, i):
    lam = [0.1, 1.0, 10.0][i % 3]
    alpha = [0.0, 0.5, 1.0][(i // 3) % 3]
    n_groups = 1 + rng.next_u64() % 3
    sizes = [1 + rng.next_u64() % 5 for _ in range(n_groups)]
    p = sum(sizes)
    v = np.array([3.0 * rng.standard_normal() for _ in range(p)])
    w = np.array([0.5 + 1.5 * rng.next_f64() for _ in range(p)])
    vg = np.array([0.5 + 1.5 * rng.next_f64() for _ in range(n_groups)])
    step = 0.25 + 1.5 * rng.next_f64()
    return lam, alpha, sizes, v, w, vg, step


def problem(lam, alpha, sizes, v, w, vg, step):
    p = len(v)
    x = cp.Variable(p)
    obj = 0.5 * cp.sum_squares(x - v)
    obj += step * alpha * lam * cp.sum(cp.multiply(w, cp.abs(x)))
    start = 0
    for l, size in enumerate(sizes):
        block = x[start : start + size]
        obj += step * (1.0 - alpha) * lam * math.sqrt(size) * vg[l] * cp.norm2(block)
        start += size
    return x, cp.Problem(cp.Minimize(obj))


def zero_block_residual(r, s1, s2):
    """Minimal-norm subgradient of one block treated as exactly zero."""
    soft = np.sign(r) * np.maximum(np.abs(r) - s1, 0.0)
    ns = np.linalg.norm(soft)
    if ns > s2:
        return soft * (ns - s2) / ns
    return np.zeros_like(r)


def nonzero_block_residual(b, r, s1, s2):
    """Feasible subgradient of one block with at least one nonzero coordinate."""
    full = r + s2 * b / np.linalg.norm(b)
    g = np.empty_like(b)
    for k in range(len(b)):
        if b[k] != 0.0:
            g[k] = full[k] + s1[k] * np.sign(b[k])
        else:
            g[k] = np.sign(full[k]) * max(abs(full[k]) - s1[k], 0.0)
    return g


def certify(x, lam, alpha, sizes, v, w, vg, step):
    """Cleans solver noise off x blockwise and returns (x, residual norm).

    The residual is the norm of a feasible subgradient of the prox
    objective at the cleaned point. The objective is 1-strongly convex,
    so ||x - x*|| <= ||g||: a small residual certifies the written value
    independently of how the solver produced it.
    """
    s1 = step * alpha * lam * w
    out = x.copy()
    total = 0.0
    start = 0
    for l, size in enumerate(sizes):
        sl = slice(start, start + size)
        start += size
        s2 = step * (1.0 - alpha) * lam * math.sqrt(size) * vg[l]
        b = x[sl].copy()
        b[np.abs(b) < 1e-10] = 0.0
        g_zero = zero_block_residual(-v[sl], s1[sl], s2)
        if np.linalg.norm(b) == 0.0:
            out[sl] = 0.0
            total += float(np.sum(g_zero**2))
            continue
        g_nonzero = nonzero_block_residual(b, b - v[sl], s1[sl], s2)
        if np.linalg.norm(g_zero) < np.linalg.norm(g_nonzero):
            out[sl] = 0.0
            total += float(np.sum(g_zero**2))
        else:
            out[sl] = b
            total += float(np.sum(g_nonzero**2))
    return out, math.sqrt(total)


def polish(x, lam, alpha, sizes, v, w, vg, step):
    """Newton-refine x on the support identified by the solver.

    Holding the zero pattern and signs fixed, the optimum of each block
    satisfies the smooth stationarity system
        u - v + s1*sign(u) + s2*u/||u|| = 0
    over its nonzero coordinates. Newton converges quadratically here and
    the final point is re-checked by the subgradient certificate, so a
    wrongly guessed support can only fail the gate, never corrupt the file.
    """
    s1 = step * alpha * lam * w
    out = x.copy()
    start = 0
    for l, size in enumerate(sizes):
        sl = slice(start, start + size)
        start += size
        b = out[sl]
        nz = np.flatnonzero(b)
        if len(nz) == 0:
            continue
        s2 = step * (1.0 - alpha) * lam * math.sqrt(size) * vg[l]
        u = b[nz].copy()
        sign = np.sign(u)
        vv = v[sl][nz]
        ss = s1[sl][nz]
        for _ in range(100):
            nu = np.linalg.norm(u)
            if nu == 0.0:
                break
            f = u - vv + ss * sign + s2 * u / nu
            if np.linalg.norm(f) < 1e-15:
                break
            jac = np.eye(len(u)) + s2 * (np.eye(len(u)) / nu - np.outer(u, u) / nu**3)
            u = u - np.linalg.solve(jac, f)
        if np.all(np.sign(u) == sign):
            b[nz] = u
    return out


def solve(lam, alpha, sizes, v, w, vg, step):
    # Clarabel at decreasingly tight tolerances, keeping the candidate
    # with the best subgradient certificate. Status strings are advisory
    # only ("optimal_inaccurate" at 1e-12 often beats "optimal" at 1e-9);
    # acceptance is gated solely on the certificate.
    best = None
    best_residual = math.inf
    for tol in (1e-12, 1e-11, 1e-10, 1e-9):
        x, prob = problem(lam, alpha, sizes, v, w, vg, step)
        try:
            prob.solve(
                solver=cp.CLARABEL, tol_gap_abs=tol, tol_gap_rel=tol, tol_feas=tol
            )
        except cp.error.SolverError:
            continue
        if x.value is None:
            continue
        raw = np.asarray(x.value).reshape(-1)
        out, residual = certify(raw, lam, alpha, sizes, v, w, vg, step)
        polished = polish(out, lam, alpha, sizes, v, w, vg, step)
        polished, polished_residual = certify(polished, lam, alpha, sizes, v, w, vg, step)
        if polished_residual < residual:
            out, residual = polished, polished_residual
        if residual < best_residual:
            best, best_residual = out, residual
        if best_residual < 1e-10:
            break
    assert best_residual < 1e-8, f"weak optimality certificate: {best_residual}"
    return best


def main():
    rng = SplitMix64(SEED)
    lines = ["instance,coord,expected"]
    for i in range(N_INSTANCES):
        lam, alpha, sizes, v, w, vg, step = instance(rng, i)
        x = solve(lam, alpha, sizes, v, w, vg, step)
        for j, val in enumerate(x):
            lines.append(f"{i},{j},{val:.17e}")
    out = os.path.join(
        os.path.dirname(__file__), "..", "crates", "cli", "tests", "data", "prox_oracle.csv"
    )
    os.makedirs(os.path.dirname(out), exist_ok=True)
    with open(out, "w") as f:
        f.write("\n".join(lines) + "\n")
    print(f"wrote {len(lines) - 1} coordinates for {N_INSTANCES} instances")


if __name__ == "__main__":
    main()
