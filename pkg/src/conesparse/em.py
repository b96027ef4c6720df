"""EM posterior-mode solver for conic-sparse regression.

Model: y = X b + e with b >= 0, e ~ N(0, sigma2 I), and the clique
spike-and-slab prior on b.  The E-step computes per-clique slab inclusion
probabilities, the M-step for b is a ridge-weighted NNLS, sigma2 has a
closed form, and the clique weights are refreshed from the inclusion mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .adjacency import CliqueSet
from .nnls import NnlsProblem, solve_nnls
from .prior import SpikeSlabHyper, truncated_normal_density

__all__ = [
    "EmConfig", "EmState", "EmFit", "NonPositiveDenominator",
    "e_step", "m_step_beta", "m_step_sigma2", "update_hyper",
    "log_posterior", "fit",
]

THETA_CLAMP = 1e-6
SIGMA2_FLOOR = 1e-12


class NonPositiveDenominator(ValueError):
    pass


class _CliqueIndex:
    """Flattened clique membership for vectorized E-steps.

    ``flat``    all clique members concatenated,
    ``splits``  boundaries for np.split back into per-clique arrays,
    ``owner``   clique index of each flat entry.
    """

    def __init__(self, clique_set: CliqueSet):
        sizes = [len(c) for c in clique_set]
        self.flat = np.array([i for c in clique_set for i in c], dtype=int)
        self.splits = np.cumsum(sizes)[:-1]
        self.owner = np.repeat(np.arange(len(sizes)), sizes)


_clique_index_cache: dict[int, tuple[CliqueSet, _CliqueIndex]] = {}


def _clique_index(clique_set: CliqueSet) -> _CliqueIndex:
    key = id(clique_set)
    hit = _clique_index_cache.get(key)
    if hit is not None and hit[0] is clique_set:
        return hit[1]
    idx = _CliqueIndex(clique_set)
    if len(_clique_index_cache) > 64:
        _clique_index_cache.clear()
    _clique_index_cache[key] = (clique_set, idx)
    return idx


@dataclass(frozen=True)
class EmConfig:
    hyper: SpikeSlabHyper = field(default_factory=SpikeSlabHyper)
    max_iter: int = 500
    rel_tol: float = 1e-6
    clamp_theta: bool = True
    freeze_hyper: bool = False
    # fix sigma2 at this value instead of re-estimating (used by the
    # mixed-effects outer loop, which owns the variance update)
    fixed_sigma2: float | None = None

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be positive")


@dataclass(frozen=True)
class EmState:
    beta: np.ndarray
    sigma2: float
    p_star: tuple[np.ndarray, ...]     # aligned with the clique list
    gamma: np.ndarray
    theta: np.ndarray
    log_posterior: float
    iteration: int

    @property
    def p_star_sums(self) -> np.ndarray:
        return np.array([float(p.sum()) for p in self.p_star])


@dataclass(frozen=True)
class EmFit:
    state: EmState
    mu_hat: np.ndarray
    converged: bool
    trace: np.ndarray
    theta_clamped: bool = False


def e_step(beta: np.ndarray, hyper: SpikeSlabHyper, clique_set: CliqueSet,
           gamma: np.ndarray | None = None,
           theta: np.ndarray | None = None) -> tuple[np.ndarray, ...]:
    """Slab inclusion probabilities p*_{w,i} for each clique coordinate."""
    beta = np.asarray(beta, dtype=float).ravel()
    if np.any(beta < 0):
        raise ValueError("beta must be non-negative")
    gamma = hyper.gamma_for(len(clique_set)) if gamma is None else gamma
    theta = hyper.theta_for(len(clique_set)) if theta is None else theta
    idx = _clique_index(clique_set)
    x = beta[idx.flat]
    q = (theta * gamma)[idx.owner]
    slab = q * truncated_normal_density(x, hyper.v1)
    spike = (1.0 - q) * truncated_normal_density(x, hyper.v0)
    return tuple(np.split(slab / (slab + spike), idx.splits))


def _ridge_factors(p_star, clique_set: CliqueSet, hyper: SpikeSlabHyper,
                   d: int) -> np.ndarray:
    """Accumulated penalty p*/V1 + (1-p*)/V0, summed over cliques.

    Coordinates shared by several cliques pick up one term per clique, which
    mirrors the product-of-potentials form of the prior.
    """
    idx = _clique_index(clique_set)
    probs = np.concatenate(p_star) if p_star else np.zeros(0)
    D = np.zeros(d)
    np.add.at(D, idx.flat, probs / hyper.v1 + (1.0 - probs) / hyper.v0)
    return D


def m_step_beta(y: np.ndarray, design: np.ndarray, sigma2: float,
                p_star, clique_set: CliqueSet,
                hyper: SpikeSlabHyper,
                init: np.ndarray | None = None) -> np.ndarray:
    """Ridge-weighted NNLS update of the coefficients."""
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    d = design.shape[1]
    weights = sigma2 * _ridge_factors(p_star, clique_set, hyper, d)
    sol = solve_nnls(NnlsProblem(design, y, ridge_weights=weights), init=init)
    return sol.coefficients


def m_step_sigma2(residual_sum_squares: float, n_obs: int,
                  hyper: SpikeSlabHyper) -> float:
    """Closed-form variance update (rss + 2*beta_ig) / (n + 2*(alpha_ig-1))."""
    if residual_sum_squares < 0 or n_obs < 1:
        raise ValueError("need rss >= 0 and n_obs >= 1")
    denom = n_obs + 2.0 * (hyper.alpha_ig - 1.0)
    if denom <= 0:
        raise NonPositiveDenominator(
            f"n + 2*(alpha_ig - 1) = {denom} is not positive")
    return max((residual_sum_squares + 2.0 * hyper.beta_ig) / denom,
               SIGMA2_FLOOR)


def update_hyper(p_star, clamp: bool = True
                 ) -> tuple[np.ndarray, np.ndarray, bool]:
    """gamma_w = p*_w / sum_k p*_k and theta_w = p*_w / gamma_w.

    With the refreshed gamma plugged in, the ratio collapses to the total
    inclusion mass sum_k p*_k for every clique, and it can exceed one; it is
    clipped into [eps, 1 - eps] when ``clamp`` is on.  Returns
    (gamma, theta, clamped?).
    """
    sums = np.array([float(p.sum()) for p in p_star])
    total = sums.sum()
    k = sums.shape[0]
    if total < 1e-12:
        gamma = np.full(k, 1.0 / k)
        theta = np.full(k, 0.5)
        return gamma, theta, False
    gamma = sums / total
    theta = np.divide(sums, gamma, out=np.zeros_like(sums), where=gamma > 0)
    clamped = bool(np.any(theta > 1 - THETA_CLAMP) or
                   np.any(theta < THETA_CLAMP))
    if clamp:
        theta = np.clip(theta, THETA_CLAMP, 1.0 - THETA_CLAMP)
    return gamma, theta, clamped


def log_posterior(y: np.ndarray, design: np.ndarray, beta: np.ndarray,
                  sigma2: float, gamma: np.ndarray, theta: np.ndarray,
                  clique_set: CliqueSet, hyper: SpikeSlabHyper) -> float:
    """Monitored objective: Gaussian log-likelihood plus the marginal
    spike/slab log-prior and the variance prior terms, up to constants."""
    resid = y - design @ beta
    rss = float(resid @ resid)
    n = y.shape[0]
    val = -0.5 * n * math.log(sigma2) - 0.5 * rss / sigma2
    val += (hyper.alpha_ig - 1.0) * math.log(1.0 / sigma2)
    val -= hyper.beta_ig / sigma2
    idx = _clique_index(clique_set)
    x = beta[idx.flat]
    q = np.clip((theta * gamma)[idx.owner], 1e-300, 1.0)
    phi1 = truncated_normal_density(x, hyper.v1)
    phi0 = truncated_normal_density(x, hyper.v0)
    val += float(np.sum(np.log(q * phi1 + (1.0 - q) * phi0 + 1e-300)))
    return val


def fit(y: np.ndarray, design: np.ndarray, clique_set: CliqueSet,
        config: EmConfig, init_beta: np.ndarray | None = None) -> EmFit:
    """Run EM to the posterior mode.

    The design has one column per generator; ``mu_hat`` is reported in the
    observation space as ``design @ beta``.  ``init_beta`` allows warm
    starts; by default beta starts at the unpenalized NNLS solution.
    """
    y = np.asarray(y, dtype=float).ravel()
    design = np.atleast_2d(np.asarray(design, dtype=float))
    if y.shape[0] != design.shape[0]:
        raise ValueError("response length must match design rows")
    hyper = config.hyper
    n, d = design.shape

    if init_beta is not None:
        beta = np.asarray(init_beta, dtype=float).copy()
    else:
        beta = solve_nnls(NnlsProblem(design, y)).coefficients
    resid = y - design @ beta
    if config.fixed_sigma2 is not None:
        sigma2 = float(config.fixed_sigma2)
    else:
        sigma2 = m_step_sigma2(float(resid @ resid), n, hyper)

    k = len(clique_set)
    gamma = hyper.gamma_for(k)
    theta = hyper.theta_for(k)

    trace = []
    converged = False
    clamped_any = False
    lp = log_posterior(y, design, beta, sigma2, gamma, theta, clique_set,
                       hyper)
    it = 0
    for it in range(1, config.max_iter + 1):
        p_star = e_step(beta, hyper, clique_set, gamma, theta)
        new_beta = m_step_beta(y, design, sigma2, p_star, clique_set, hyper,
                               init=beta)
        resid = y - design @ new_beta
        if config.fixed_sigma2 is None:
            sigma2 = m_step_sigma2(float(resid @ resid), n, hyper)
        if not config.freeze_hyper:
            gamma, theta, clamped = update_hyper(p_star, config.clamp_theta)
            clamped_any = clamped_any or clamped
        new_lp = log_posterior(y, design, new_beta, sigma2, gamma, theta,
                               clique_set, hyper)
        trace.append(new_lp)
        beta_change = np.linalg.norm(new_beta - beta) / max(
            1.0, np.linalg.norm(beta))
        lp_change = abs(new_lp - lp) / max(1.0, abs(lp))
        beta, lp = new_beta, new_lp
        if beta_change < config.rel_tol and lp_change < config.rel_tol:
            converged = True
            break

    state = EmState(beta=beta, sigma2=sigma2, p_star=p_star, gamma=gamma,
                    theta=theta, log_posterior=lp, iteration=it)
    return EmFit(state=state, mu_hat=design @ beta, converged=converged,
                 trace=np.asarray(trace), theta_clamped=clamped_any)
