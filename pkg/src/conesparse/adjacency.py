"""Adjacency structure of extreme rays and conic sparsity certificates.

Two extreme rays are adjacent when the minimal face containing both holds no
third ray.  The nodes-plus-adjacency structure is an undirected graph whose
maximal cliques index the low-dimensional faces a sparse coefficient vector
may live on; support contained in a clique is exactly what makes a conic
representation unique.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .geometry import DDPair, _rank, _unit_rows, zero_set

__all__ = [
    "AdjacencyGraph", "CliqueSet", "CliqueExplosion",
    "NegativeCoefficient", "InfeasibleCertificate",
    "algebraic_adjacency_test", "combinatorial_adjacency_test",
    "build_adjacency_graph", "enumerate_maximal_cliques",
    "is_conically_sparse", "representation_uniqueness",
    "is_weakly_eps_sparse",
]


class CliqueExplosion(Exception):
    """Raised when the maximal-clique count exceeds the configured cap."""


class NegativeCoefficient(ValueError):
    pass


class InfeasibleCertificate(ValueError):
    pass


@dataclass(frozen=True)
class AdjacencyGraph:
    node_count: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self):
        for i, j in self.edges:
            if i == j:
                raise ValueError("self-loop in adjacency graph")
            if not (0 <= i < self.node_count and 0 <= j < self.node_count):
                raise IndexError("edge endpoint out of range")
        canon = frozenset((min(i, j), max(i, j)) for i, j in self.edges)
        object.__setattr__(self, "edges", canon)

    def neighbors(self, i: int) -> frozenset[int]:
        if not 0 <= i < self.node_count:
            raise IndexError(f"node {i} out of range")
        return frozenset(b if a == i else a for a, b in self.edges
                         if i in (a, b))

    def neighbor_sets(self) -> list[frozenset[int]]:
        sets: list[set[int]] = [set() for _ in range(self.node_count)]
        for i, j in self.edges:
            sets[i].add(j)
            sets[j].add(i)
        return [frozenset(s) for s in sets]

    def has_edge(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self.edges


@dataclass(frozen=True)
class CliqueSet:
    """Maximal cliques, each sorted, the list itself in canonical order."""

    cliques: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        canon = tuple(sorted(tuple(sorted(c)) for c in self.cliques))
        object.__setattr__(self, "cliques", canon)

    def __len__(self) -> int:
        return len(self.cliques)

    def __iter__(self):
        return iter(self.cliques)


def _check_pair_indices(pair: DDPair, i: int, j: int) -> None:
    d = pair.vertex.n_rays
    if not (0 <= i < d and 0 <= j < d):
        raise IndexError(f"ray indices ({i}, {j}) out of range for d={d}")
    if i == j:
        raise ValueError("adjacency is defined for distinct rays")


def algebraic_adjacency_test(pair: DDPair, i: int, j: int) -> bool:
    """Rank test: common active rows must have rank exactly n - 2."""
    _check_pair_indices(pair, i, j)
    common = sorted(zero_set(pair, i) & zero_set(pair, j))
    n = pair.facet.ambient_dim
    return _rank(pair.facet.a[common], pair.tolerance) == n - 2


def combinatorial_adjacency_test(pair: DDPair, i: int, j: int) -> bool:
    """Set test: no third ray's zero set may contain Z(i) & Z(j)."""
    _check_pair_indices(pair, i, j)
    common = zero_set(pair, i) & zero_set(pair, j)
    for k in range(pair.vertex.n_rays):
        if k in (i, j):
            continue
        if common <= zero_set(pair, k):
            return False
    return True


def build_adjacency_graph(pair: DDPair) -> AdjacencyGraph:
    """Graph on the extreme rays with edges from the algebraic test."""
    d = pair.vertex.n_rays
    n = pair.facet.ambient_dim
    an = _unit_rows(pair.facet.a)
    tol = max(pair.tolerance, 1e-9)
    zsets = [frozenset(np.where(np.abs(an @ pair.vertex.delta[:, k]) <= tol)[0].tolist())
             for k in range(d)]
    edges = set()
    for i in range(d):
        for j in range(i + 1, d):
            common = sorted(zsets[i] & zsets[j])
            if len(common) < n - 2:
                continue
            if _rank(pair.facet.a[common], pair.tolerance) == n - 2:
                edges.add((i, j))
    return AdjacencyGraph(d, frozenset(edges))


def enumerate_maximal_cliques(graph: AdjacencyGraph,
                              cap: int = 100_000) -> CliqueSet:
    """All maximal cliques via Bron-Kerbosch with Tomita pivoting."""
    nbrs = graph.neighbor_sets()
    out: list[tuple[int, ...]] = []

    def expand(r: set[int], p: set[int], x: set[int]) -> None:
        if not p and not x:
            out.append(tuple(sorted(r)))
            if len(out) > cap:
                raise CliqueExplosion(
                    f"more than {cap} maximal cliques; the cone is too "
                    "unstructured for a clique prior")
            return
        pivot = max(p | x, key=lambda u: len(p & nbrs[u]))
        for v in sorted(p - nbrs[pivot]):
            expand(r | {v}, p & nbrs[v], x & nbrs[v])
            p.remove(v)
            x.add(v)

    expand(set(), set(range(graph.node_count)), set())
    return CliqueSet(tuple(out))


def support(b: np.ndarray, tol: float = 1e-10) -> frozenset[int]:
    return frozenset(np.where(np.asarray(b, dtype=float) > tol)[0].tolist())


def is_conically_sparse(pair: DDPair, graph: AdjacencyGraph, b: np.ndarray,
                        s: int, tol: float = 1e-10) -> bool:
    """True iff supp(b) is a clique of the adjacency graph of size <= s."""
    b = np.asarray(b, dtype=float).ravel()
    if np.any(b < 0):
        raise NegativeCoefficient("conic coefficients must be non-negative")
    supp = sorted(support(b, tol))
    if len(supp) > s:
        return False
    for a in range(len(supp)):
        for c in range(a + 1, len(supp)):
            if not graph.has_edge(supp[a], supp[c]):
                return False
    return True


def representation_uniqueness(pair: DDPair, mu: np.ndarray, b: np.ndarray,
                              tol: float = 1e-8) -> bool:
    """Decide whether ``mu`` has a unique conic representation.

    For every coordinate the extreme values of ``b'_k`` over the polytope
    ``{b' >= 0 : Delta b' = mu}`` are compared; uniqueness means the maximum
    equals the minimum everywhere.  This is the brute-force counterpart of
    the clique criterion and deliberately shares no code with it.
    """
    delta = pair.vertex.delta
    mu = np.asarray(mu, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if np.any(b < -tol):
        raise NegativeCoefficient("candidate coefficients must be >= 0")
    scale = max(1.0, float(np.linalg.norm(mu)))
    if np.linalg.norm(delta @ b - mu) > max(tol, 1e-8) * scale:
        raise InfeasibleCertificate("Delta b does not reproduce mu")

    d = delta.shape[1]
    for k in range(d):
        c = np.zeros(d)
        c[k] = 1.0
        lo = linprog(c, A_eq=delta, b_eq=mu, bounds=(0, None), method="highs")
        hi = linprog(-c, A_eq=delta, b_eq=mu, bounds=(0, None), method="highs")
        if not (lo.success and hi.success):
            raise InfeasibleCertificate("linear program failed on the fiber")
        if (-hi.fun) - lo.fun > tol * max(1.0, abs(lo.fun), scale):
            return False
    return True


def is_weakly_eps_sparse(graph: AdjacencyGraph, b: np.ndarray,
                         eps: float) -> bool:
    """True iff all coefficients above ``eps`` fit in one closed neighborhood.

    The closed neighborhood of node i is {i} union its adjacent rays; using
    the closed version keeps single-ray vectors weakly sparse.
    """
    if eps < 0:
        raise ValueError("eps must be non-negative")
    b = np.asarray(b, dtype=float).ravel()
    if np.any(b < 0):
        raise NegativeCoefficient("coefficients must be non-negative")
    big = set(np.where(b > eps)[0].tolist())
    if len(big) <= 1:
        return True
    nbrs = graph.neighbor_sets()
    return any(big <= (nbrs[i] | {i}) for i in range(graph.node_count))
