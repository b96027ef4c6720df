"""Shared test oracles.

Everything here is deliberately independent of the library's algorithms:
rays come from exhaustive (n-1)-subset enumeration, NNLS optima from
enumeration of all active sets, cliques from a 2^d subset sweep.  The
oracles are slow and only meant for small instances.
"""

import itertools
import math

import numpy as np
import pytest
import scipy.linalg

from conesparse.geometry import FacetCone

# one line per acceptance criterion, echoed after the test summary so the
# verdicts survive output capture
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def brute_force_rays(a: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Extreme rays of {x : a x >= 0} by enumerating (n-1)-row subsets.

    Every extreme ray of a pointed cone is the 1-D nullspace of some
    rank-(n-1) subset of rows, oriented to satisfy all inequalities.
    Returns unit rays, one per column, deduplicated.
    """
    m, n = a.shape
    rays = []
    for sub in itertools.combinations(range(m), n - 1):
        sa = a[list(sub)]
        if np.linalg.matrix_rank(sa, tol=tol) != n - 1:
            continue
        ns = scipy.linalg.null_space(sa)
        if ns.shape[1] != 1:
            continue
        v = ns[:, 0]
        if np.all(a @ v >= -tol):
            rays.append(v / np.linalg.norm(v))
        elif np.all(a @ -v >= -tol):
            rays.append(-v / np.linalg.norm(v))
    uniq: list[np.ndarray] = []
    for r in rays:
        if not any(np.linalg.norm(r - u) < 1e-7 for u in uniq):
            uniq.append(r)
    if not uniq:
        return np.zeros((n, 0))
    return np.array(uniq).T


def canonical_ray_set(rays: np.ndarray, decimals: int = 7):
    """Order-insensitive comparable form of a unit-ray matrix."""
    return sorted(tuple(np.round(rays[:, j], decimals))
                  for j in range(rays.shape[1]))


def assert_same_rays(r1: np.ndarray, r2: np.ndarray, tol: float = 1e-8):
    assert r1.shape[1] == r2.shape[1], \
        f"ray counts differ: {r1.shape[1]} vs {r2.shape[1]}"
    c1, c2 = canonical_ray_set(r1), canonical_ray_set(r2)
    for x, y in zip(c1, c2):
        assert np.linalg.norm(np.array(x) - np.array(y)) <= tol


def random_proper_cone(rng: np.random.Generator, n: int, m: int,
                       max_tries: int = 200) -> np.ndarray | None:
    """A full-dimensional pointed irreducible facet matrix, or None.

    Rows are drawn to share a strict interior direction (so the cone is
    full-dimensional); redundant rows are detected and removed with the
    brute-force ray oracle alone: a row is redundant exactly when dropping
    it leaves the ray set unchanged.
    """
    for _ in range(max_tries):
        c = rng.standard_normal(n)
        c /= np.linalg.norm(c)
        a = rng.standard_normal((m, n))
        signs = np.sign(a @ c)
        signs[signs == 0] = 1.0
        a *= signs[:, None]
        if np.linalg.matrix_rank(a) < n:
            continue
        base = canonical_ray_set(brute_force_rays(a))
        if len(base) < n:
            continue
        # oracle-driven irreducibility filter
        keep = []
        for i in range(a.shape[0]):
            rest = np.delete(a, i, axis=0)
            if np.linalg.matrix_rank(rest) < n:
                keep.append(i)
                continue
            if canonical_ray_set(brute_force_rays(rest)) != base:
                keep.append(i)
        a = a[keep]
        if a.shape[0] < n or np.linalg.matrix_rank(a) < n:
            continue
        if canonical_ray_set(brute_force_rays(a)) != base:
            continue
        return a
    return None


def exhaustive_nnls(design: np.ndarray, response: np.ndarray,
                    ridge: np.ndarray | None = None,
                    tol: float = 1e-9) -> tuple[np.ndarray, float]:
    """Global NNLS optimum by enumerating every active set.

    For each support S the unconstrained (ridge) least-squares solution is
    kept when it is non-negative; the best feasible candidate is the global
    optimum because the true solution's support is among the subsets.
    Returns (coefficients, objective) with objective
    ||y - X b||^2 + sum d_i b_i^2.
    """
    m, n = design.shape
    d = np.zeros(n) if ridge is None else np.asarray(ridge, dtype=float)

    def objective(b):
        r = response - design @ b
        return float(r @ r + d @ (b * b))

    best = np.zeros(n)
    best_val = objective(best)
    for size in range(1, n + 1):
        for sub in itertools.combinations(range(n), size):
            idx = list(sub)
            Xs = design[:, idx]
            G = Xs.T @ Xs + np.diag(d[idx])
            rhs = Xs.T @ response
            try:
                sol = np.linalg.solve(G, rhs)
            except np.linalg.LinAlgError:
                sol, *_ = np.linalg.lstsq(G, rhs, rcond=None)
            if np.any(sol < -tol):
                continue
            b = np.zeros(n)
            b[idx] = np.clip(sol, 0.0, None)
            val = objective(b)
            if val < best_val:
                best_val, best = val, b
    return best, best_val


def brute_force_maximal_cliques(node_count: int, edges) -> set:
    """All maximal cliques by checking every subset (d <= ~12)."""
    edge_set = {(min(i, j), max(i, j)) for i, j in edges}

    def is_clique(sub):
        return all((min(i, j), max(i, j)) in edge_set
                   for i, j in itertools.combinations(sub, 2))

    cliques = [frozenset(sub)
               for size in range(1, node_count + 1)
               for sub in itertools.combinations(range(node_count), size)
               if is_clique(sub)]
    return {c for c in cliques
            if not any(c < other for other in cliques)}


def hexagon_facets() -> np.ndarray:
    """Facet matrix of the cone over a regular hexagon at height z = 1.

    Six extreme rays (cos t, sin t, 1) with t = 60 degrees apart; each facet
    normal is the cross product of two consecutive rays, oriented so the
    axis (0, 0, 1) is interior.
    """
    angles = np.deg2rad(60.0 * np.arange(6))
    rays = np.stack([np.cos(angles), np.sin(angles), np.ones(6)], axis=1)
    rows = []
    for k in range(6):
        normal = np.cross(rays[k], rays[(k + 1) % 6])
        if normal[2] < 0:
            normal = -normal
        rows.append(normal)
    return np.array(rows)


def hexagon_rays() -> np.ndarray:
    angles = np.deg2rad(60.0 * np.arange(6))
    rays = np.stack([np.cos(angles), np.sin(angles), np.ones(6)])
    return rays / np.linalg.norm(rays, axis=0)


@pytest.fixture(scope="session")
def hexagon_cone() -> FacetCone:
    return FacetCone(hexagon_facets())


@pytest.fixture(scope="session")
def orthant3() -> FacetCone:
    return FacetCone(np.eye(3))
