"""Clique-structured spike-and-slab priors on a polyhedral cone.

The generative hierarchy: pick a maximal clique (categorical with weights
gamma), pick per-coordinate slab indicators (Bernoulli theta_w), then draw
each in-clique coefficient from a half-normal whose variance is the slab
variance V1 on indicator 1 and the narrow spike variance V0 otherwise.
Coefficients outside the clique are exactly zero, so every draw lands on a
low-dimensional face of the cone.  An optional fully-supported mixture
component and an adjacency-neighborhood variant are included.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .adjacency import AdjacencyGraph, CliqueSet
from .geometry import DDPair

__all__ = [
    "SpikeSlabHyper", "PriorDraw", "EmptyCliqueSet", "SupportViolation",
    "truncated_normal_density", "sample_clique", "sample_b_given_clique",
    "sample_prior_mu", "log_prior_b", "sample_adjacency_prior",
]


class EmptyCliqueSet(ValueError):
    pass


class SupportViolation(ValueError):
    pass


@dataclass(frozen=True)
class SpikeSlabHyper:
    """Hyperparameters of the clique spike-and-slab prior.

    Defaults: uniform clique weights and a = b = 1 as stated for the prior
    hierarchy, Gamma(0.5, 0.5) on the noise precision; the spike/slab
    variances and the dense-mixture probability are free knobs chosen to
    separate spike and slab by three orders of magnitude.
    """

    v0: float = 0.01
    v1: float = 10.0
    a: float = 1.0
    b: float = 1.0
    gamma: np.ndarray | None = None
    theta: np.ndarray | float = 0.5
    alpha_ig: float = 0.5
    beta_ig: float = 0.5
    phi: float = 0.05

    def __post_init__(self):
        if not 0 < self.v0 < self.v1:
            raise ValueError("need 0 < v0 < v1")
        if not 0 <= self.phi <= 1:
            raise ValueError("phi must be a probability")
        if self.gamma is not None:
            g = np.asarray(self.gamma, dtype=float).ravel()
            if np.any(g < 0) or abs(g.sum() - 1.0) > 1e-12:
                raise ValueError("gamma must be a probability vector")
            object.__setattr__(self, "gamma", g)
        th = np.asarray(self.theta, dtype=float)
        if np.any(th < 0) or np.any(th > 1):
            raise ValueError("theta entries must lie in [0, 1]")

    def gamma_for(self, n_cliques: int) -> np.ndarray:
        if self.gamma is None:
            return np.full(n_cliques, 1.0 / n_cliques)
        if self.gamma.shape[0] != n_cliques:
            raise ValueError("gamma length does not match the clique count")
        return self.gamma

    def theta_for(self, n_cliques: int) -> np.ndarray:
        th = np.asarray(self.theta, dtype=float)
        if th.ndim == 0:
            return np.full(n_cliques, float(th))
        if th.shape[0] != n_cliques:
            raise ValueError("theta length does not match the clique count")
        return th


@dataclass(frozen=True)
class PriorDraw:
    clique_index: int
    indicators: np.ndarray
    b: np.ndarray
    mu: np.ndarray
    dense_flag: bool = False


def truncated_normal_density(x: float | np.ndarray,
                             variance: float) -> float | np.ndarray:
    """Half-normal density 2 * N(0, variance) on [0, inf)."""
    if variance <= 0:
        raise ValueError("variance must be positive")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("half-normal density is defined for x >= 0")
    out = 2.0 / math.sqrt(2.0 * math.pi * variance) * np.exp(
        -np.square(x) / (2.0 * variance))
    return float(out) if out.ndim == 0 else out


def sample_clique(hyper: SpikeSlabHyper, clique_set: CliqueSet,
                  rng: np.random.Generator) -> int:
    if len(clique_set) == 0:
        raise EmptyCliqueSet("no cliques to sample from")
    gamma = hyper.gamma_for(len(clique_set))
    return int(rng.choice(len(clique_set), p=gamma))


def sample_b_given_clique(hyper: SpikeSlabHyper, clique: tuple[int, ...],
                          d: int, rng: np.random.Generator,
                          theta: float | None = None
                          ) -> tuple[np.ndarray, np.ndarray]:
    """Indicators and coefficients for one clique; zeros off-clique."""
    if len(clique) == 0:
        raise ValueError("clique must be nonempty")
    th = 0.5 if theta is None else float(theta)
    indicators = np.zeros(d, dtype=int)
    b = np.zeros(d)
    for i in clique:
        ind = int(rng.random() < th)
        var = hyper.v1 if ind else hyper.v0
        indicators[i] = ind
        b[i] = abs(rng.normal(0.0, math.sqrt(var)))
    return indicators, b


def sample_prior_mu(pair: DDPair, clique_set: CliqueSet,
                    hyper: SpikeSlabHyper, rng: np.random.Generator,
                    use_mixture: bool = False) -> PriorDraw:
    """One draw of (b, mu) from the clique prior, optionally mixed with a
    fully supported half-normal slab component."""
    d = pair.vertex.n_rays
    if use_mixture and rng.random() < hyper.phi:
        b = np.abs(rng.normal(0.0, math.sqrt(hyper.v1), size=d))
        indicators = np.ones(d, dtype=int)
        return PriorDraw(-1, indicators, b, pair.vertex.delta @ b,
                         dense_flag=True)
    w = sample_clique(hyper, clique_set, rng)
    theta = hyper.theta_for(len(clique_set))[w]
    indicators, b = sample_b_given_clique(hyper, clique_set.cliques[w], d,
                                          rng, theta=theta)
    return PriorDraw(w, indicators, b, pair.vertex.delta @ b)


def log_prior_b(b: np.ndarray, clique: tuple[int, ...],
                hyper: SpikeSlabHyper, slab_weight: float = 0.5) -> float:
    """Log marginal clique density with the indicators integrated out.

    Each in-clique coordinate contributes
    ``log(q * phi1(b_i) + (1 - q) * phi0(b_i))`` where ``q`` is the slab
    probability (theta_w * gamma_w as used in the E-step ratio).
    """
    b = np.asarray(b, dtype=float).ravel()
    if np.any(b < 0):
        raise SupportViolation("coefficients must be non-negative")
    off = set(range(b.shape[0])) - set(clique)
    if any(b[i] > 0 for i in off):
        raise SupportViolation("support extends outside the clique")
    idx = list(clique)
    phi1 = truncated_normal_density(b[idx], hyper.v1)
    phi0 = truncated_normal_density(b[idx], hyper.v0)
    q = float(slab_weight)
    return float(np.sum(np.log(q * phi1 + (1.0 - q) * phi0)))


def sample_adjacency_prior(pair: DDPair, graph: AdjacencyGraph,
                           hyper: SpikeSlabHyper,
                           rng: np.random.Generator) -> PriorDraw:
    """Weakly-sparse variant: support confined to one closed neighborhood.

    Unlike the clique prior, a neighborhood need not be a clique, so draws
    are weakly eps-sparse by construction but not necessarily conically
    sparse.
    """
    d = graph.node_count
    i = int(rng.integers(d))
    hood = tuple(sorted(graph.neighbors(i) | {i}))
    th = np.asarray(hyper.theta, dtype=float)
    theta = float(th) if th.ndim == 0 else float(th.flat[0])
    indicators, b = sample_b_given_clique(hyper, hood, d, rng, theta=theta)
    return PriorDraw(i, indicators, b, pair.vertex.delta @ b)
