"""Non-negative least squares with optional per-coordinate ridge penalties.

Lawson-Hanson active-set solver minimizing

    ||y - X b||^2 + sum_i d_i * b_i^2    over  b >= 0.

The iteration works on the normal equations: the Gram matrix ``X'X`` is
formed once (ridge weights add to its diagonal) and each passive-set solve
is a small Cholesky factorization, so the per-iteration cost depends on the
support size rather than on the number of rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

__all__ = ["NnlsProblem", "NnlsSolution", "solve_nnls"]


@dataclass(frozen=True)
class NnlsProblem:
    """A (possibly ridge-penalized) non-negative least squares problem."""

    design: np.ndarray
    response: np.ndarray
    ridge_weights: np.ndarray | None = None

    def __post_init__(self):
        design = np.atleast_2d(np.asarray(self.design, dtype=float))
        response = np.asarray(self.response, dtype=float).ravel()
        object.__setattr__(self, "design", design)
        object.__setattr__(self, "response", response)
        if response.shape[0] != design.shape[0]:
            raise ValueError("response length must equal design row count")
        if not (np.all(np.isfinite(design)) and np.all(np.isfinite(response))):
            raise ValueError("design and response must be finite")
        if self.ridge_weights is not None:
            w = np.asarray(self.ridge_weights, dtype=float).ravel()
            if w.shape[0] != design.shape[1]:
                raise ValueError("ridge_weights length must equal design cols")
            if np.any(w < 0) or not np.all(np.isfinite(w)):
                raise ValueError("ridge_weights must be finite and >= 0")
            object.__setattr__(self, "ridge_weights", w)


@dataclass(frozen=True)
class NnlsSolution:
    coefficients: np.ndarray
    residual_norm: float
    kkt_gap: float
    iterations: int
    converged: bool = True
    ill_conditioned: bool = False


def _passive_solve(G, c, P):
    """Unconstrained minimizer restricted to the passive coordinates ``P``."""
    sub = G[np.ix_(P, P)]
    try:
        factor = sla.cho_factor(sub, check_finite=False)
        return sla.cho_solve(factor, c[P], check_finite=False), False
    except sla.LinAlgError:
        sol, _, _, _ = np.linalg.lstsq(sub, c[P], rcond=None)
        return sol, True


def solve_nnls(problem: NnlsProblem, tol: float = 1e-10,
               max_iter: int | None = None,
               init: np.ndarray | None = None) -> NnlsSolution:
    """Lawson-Hanson active-set NNLS.

    Ties on the entering variable and on the inner step ratio are broken by
    the smallest index, which makes the iteration deterministic and rules
    out cycling on the problem sizes we target.  ``init`` seeds the passive
    set from a previous solution's support; the result is unchanged but a
    good guess skips most of the outer iterations.
    """
    X, y = problem.design, problem.response
    n = X.shape[1]
    if max_iter is None:
        max_iter = max(3 * n, 30)

    G = X.T @ X
    if problem.ridge_weights is not None and np.any(problem.ridge_weights > 0):
        G = G + np.diag(problem.ridge_weights)
    c = X.T @ y
    scale = max(1.0, float(np.max(np.abs(c))) if c.size else 1.0)
    ill = False

    x = np.zeros(n)
    passive = np.zeros(n, dtype=bool)
    if init is not None:
        guess = np.clip(np.asarray(init, dtype=float).ravel(), 0.0, None)
        if guess.shape[0] == n and np.all(np.isfinite(guess)):
            passive = guess > tol
            x = np.where(passive, guess, 0.0)
            if np.any(passive):
                x, passive, ill = _restore_feasible(G, c, x, passive, tol, ill)

    w = c - G @ x
    outer = 0
    while True:
        free = ~passive
        if not np.any(free) or np.max(w[free], initial=-np.inf) <= tol * scale:
            break
        if outer >= max_iter:
            return _finish(problem, G, c, x, outer, converged=False, ill=ill)
        outer += 1

        cand = np.where(free)[0]
        # smallest index attaining the max, up to a tiny slack
        wmax = np.max(w[cand])
        enter = cand[w[cand] >= wmax - 1e-15 * scale][0]
        passive[enter] = True
        x, passive, ill = _restore_feasible(G, c, x, passive, tol, ill)
        w = c - G @ x

    return _finish(problem, G, c, x, outer, converged=True, ill=ill)


def _restore_feasible(G, c, x, passive, tol, ill):
    """Inner loop: solve on the passive set, dropping coordinates that would
    go negative until the restricted solution is feasible."""
    while True:
        P = np.where(passive)[0]
        if P.size == 0:
            return np.zeros_like(x), passive, ill
        sol, bad = _passive_solve(G, c, P)
        ill = ill or bad
        z = np.zeros_like(x)
        z[P] = sol
        if np.all(z[P] > tol):
            return z, passive, ill
        # step toward z, stopping at the first coordinate hitting zero
        neg = P[z[P] <= tol]
        denom = x[neg] - z[neg]
        ratios = np.where(denom > 0, x[neg] / np.where(denom > 0, denom, 1.0), 0.0)
        alpha = np.min(ratios)
        x = x + alpha * (z - x)
        drop = neg[ratios <= alpha + 1e-15][0]
        x[drop] = 0.0
        passive = passive & (x > tol)


def _finish(problem, G, c, x, iterations, converged, ill):
    g = c - G @ x  # penalized gradient, used for the KKT report
    pos = x > 0
    gap = 0.0
    if np.any(pos):
        gap = float(np.max(np.abs(g[pos])))
    if np.any(~pos):
        gap = max(gap, float(np.max(g[~pos], initial=0.0)))
    # residual norm reported on the original (unpenalized) problem
    rorig = problem.response - problem.design @ x
    return NnlsSolution(
        coefficients=x,
        residual_norm=float(np.linalg.norm(rorig)),
        kkt_gap=gap,
        iterations=iterations,
        converged=converged,
        ill_conditioned=ill,
    )
