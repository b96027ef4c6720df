"""Proper polyhedral cones in facet and vertex form, and the DD pair.

A cone is either written as ``{mu : A mu >= 0}`` (facet form, rows of ``A``
are inward-pointing inequality normals, an optional linearity set marks rows
enforced as equalities) or as ``{mu : mu = Delta b, b >= 0}`` (vertex form,
columns of ``Delta`` are the extreme rays).  Conversion between the two is
done with the incremental double description method; the matched pair of
representations is a :class:`DDPair`.

All indices are 0-based.  Operations are pure; the cone types are immutable
and safe to share between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .nnls import NnlsProblem, solve_nnls

__all__ = [
    "ConeError", "NotPointed", "NotIrreducible", "DegenerateCone",
    "ShapeMismatch", "Result1Violated",
    "FacetCone", "VertexCone", "DDPair", "DDReport",
    "facet_to_vertex", "vertex_to_facet", "conically_independent_rows",
    "zero_set", "verify_dd_pair", "project_onto_cone", "transform_cone",
]

DEFAULT_TOL = 1e-10


class ConeError(Exception):
    """Base class for cone-geometry failures."""


class NotPointed(ConeError):
    pass


class NotIrreducible(ConeError):
    def __init__(self, row_index: int, message: str | None = None):
        self.row_index = row_index
        super().__init__(message or f"redundant inequality row {row_index}")


class DegenerateCone(ConeError):
    pass


class ShapeMismatch(ConeError):
    pass


class Result1Violated(ConeError):
    def __init__(self, condition: str):
        self.condition = condition
        super().__init__(f"basis transform violates required condition: {condition}")


# ---------------------------------------------------------------------------
# cone types


@dataclass(frozen=True)
class FacetCone:
    """Facet (half-space) representation ``{mu : a mu >= 0}``.

    Rows listed in ``linearity`` are treated as equalities ``a_i mu = 0``.
    """

    a: np.ndarray
    linearity: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a, dtype=float))
        if not np.all(np.isfinite(a)):
            raise ValueError("facet matrix must be finite")
        object.__setattr__(self, "a", a)
        lin = frozenset(int(i) for i in self.linearity)
        if lin and (min(lin) < 0 or max(lin) >= a.shape[0]):
            raise IndexError("linearity indices out of range")
        object.__setattr__(self, "linearity", lin)

    @property
    def ambient_dim(self) -> int:
        return self.a.shape[1]

    @property
    def n_rows(self) -> int:
        return self.a.shape[0]

    def inequality_rows(self) -> np.ndarray:
        keep = [i for i in range(self.n_rows) if i not in self.linearity]
        return self.a[keep]

    def contains(self, mu: np.ndarray, tol: float = 1e-8) -> bool:
        mu = np.asarray(mu, dtype=float)
        v = self.a @ mu
        ok = np.all(v >= -tol)
        for i in self.linearity:
            ok = ok and abs(v[i]) <= tol
        return bool(ok)


@dataclass(frozen=True)
class VertexCone:
    """Vertex (generator) representation; columns of ``delta`` are rays."""

    delta: np.ndarray

    def __post_init__(self):
        delta = np.atleast_2d(np.asarray(self.delta, dtype=float))
        if not np.all(np.isfinite(delta)):
            raise ValueError("generator matrix must be finite")
        norms = np.linalg.norm(delta, axis=0)
        if np.any(norms == 0):
            raise ValueError("zero generator column")
        object.__setattr__(self, "delta", delta / norms)

    @property
    def ambient_dim(self) -> int:
        return self.delta.shape[0]

    @property
    def n_rays(self) -> int:
        return self.delta.shape[1]


@dataclass(frozen=True)
class DDPair:
    """Matched facet/vertex descriptions of one proper cone."""

    facet: FacetCone
    vertex: VertexCone
    tolerance: float = DEFAULT_TOL

    def __post_init__(self):
        if self.facet.ambient_dim != self.vertex.ambient_dim:
            raise ShapeMismatch("facet and vertex ambient dimensions differ")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")


# ---------------------------------------------------------------------------
# helpers


def _rank(mat: np.ndarray, tol: float) -> int:
    if mat.size == 0:
        return 0
    s = np.linalg.svd(mat, compute_uv=False)
    if s.size == 0:
        return 0
    return int(np.sum(s > tol * s[0] * max(mat.shape)))


def _unit_rows(a: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(a, axis=1)
    return a / np.where(norms > 0, norms, 1.0)[:, None]


def _in_conic_hull(rows: np.ndarray, target: np.ndarray, tol: float) -> bool:
    """Is ``target`` a non-negative combination of ``rows``?"""
    if rows.shape[0] == 0:
        return bool(np.linalg.norm(target) <= tol)
    sol = solve_nnls(NnlsProblem(rows.T, target), tol=min(tol, 1e-12))
    return sol.residual_norm <= max(tol, 1e-10) * max(1.0, np.linalg.norm(target))


def _canonical_ray_order(rays: np.ndarray) -> np.ndarray:
    """Sort unit rays lexicographically on coordinates rounded to 12 places."""
    key = np.round(rays, 12)
    order = np.lexsort(key[::-1])
    return rays[:, order]


def conically_independent_rows(a: np.ndarray, tol: float = 1e-9):
    """Decide whether the rows of ``a`` are conically independent.

    Returns ``(True, None)`` when the only non-negative combination of rows
    summing to zero is the trivial one, otherwise ``(False, witness)`` with a
    witness ``lam >= 0``, ``sum(lam) = 1``, ``a.T lam = 0``.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.shape[0] < 2:
        raise ValueError("need at least 2 rows")
    an = _unit_rows(a)
    system = np.vstack([an.T, np.ones(an.shape[0])])
    target = np.zeros(system.shape[0])
    target[-1] = 1.0
    sol = solve_nnls(NnlsProblem(system, target), tol=1e-13)
    if sol.residual_norm <= max(tol, 1e-9):
        lam = sol.coefficients
        total = lam.sum()
        return False, lam / total if total > 0 else lam
    return True, None


# ---------------------------------------------------------------------------
# double description core (pointed, full-dimensional, no equality rows)


def _dd_core(a: np.ndarray, tol: float) -> np.ndarray:
    """Extreme rays of ``{x : a x >= 0}`` via incremental double description.

    ``a`` must have full column rank and contain no redundant rows.  Rays are
    returned unit-normalized, one per column, in construction order.
    """
    m, n = a.shape
    an = _unit_rows(a)
    if m == n:
        rays = np.linalg.inv(an)
        return rays / np.linalg.norm(rays, axis=0)

    # initial simplicial subcone on n well-conditioned rows
    _, _, piv = scipy.linalg.qr(an.T, pivoting=True)
    base = [int(i) for i in piv[:n]]
    inv = np.linalg.inv(an[base])
    rays = [inv[:, j] / np.linalg.norm(inv[:, j]) for j in range(n)]
    zsets = [frozenset(base) - {base[j]} for j in range(n)]

    for i in (k for k in range(m) if k not in base):
        s = np.array([an[i] @ r for r in rays])
        pos = [k for k, v in enumerate(s) if v > tol]
        neg = [k for k, v in enumerate(s) if v < -tol]
        zer = [k for k, v in enumerate(s) if abs(v) <= tol]
        new_rays: list[np.ndarray] = []
        new_z: list[frozenset[int]] = []
        for p in pos:
            for q in neg:
                common = zsets[p] & zsets[q]
                if len(common) < n - 2:
                    continue
                # combinatorial adjacency relative to the rows inserted so far
                if any(common <= zsets[k]
                       for k in range(len(rays)) if k not in (p, q)):
                    continue
                r = s[p] * rays[q] - s[q] * rays[p]
                norm = np.linalg.norm(r)
                if norm <= tol:
                    continue
                new_rays.append(r / norm)
                new_z.append(common | {i})
        keep = pos + zer
        rays = [rays[k] for k in keep] + new_rays
        zsets = [zsets[k] | ({i} if k in zer else frozenset())
                 for k in keep] + new_z

    if not rays:
        raise DegenerateCone("double description produced no rays")
    return np.column_stack(rays)


def _nullspace(a: np.ndarray, tol: float) -> np.ndarray:
    ns = scipy.linalg.null_space(a, rcond=max(tol, 1e-12))
    return ns


def _reduce_rows(a: np.ndarray, tol: float, reduce: bool) -> np.ndarray:
    """Drop rows lying in the conic hull of the others (redundant facets).

    With ``reduce=False`` a redundant row raises :class:`NotIrreducible`.
    Row indices refer to the matrix as given.
    """
    rows = _unit_rows(np.atleast_2d(a))
    alive = list(range(rows.shape[0]))
    changed = True
    while changed:
        changed = False
        for k in list(alive):
            others = rows[[i for i in alive if i != k]]
            if others.shape[0] == 0:
                continue
            if _in_conic_hull(others, rows[k], tol=max(tol, 1e-9)):
                if not reduce:
                    raise NotIrreducible(k)
                alive.remove(k)
                changed = True
    return rows[alive]


def facet_to_vertex(cone: FacetCone, tol: float = DEFAULT_TOL,
                    reduce: bool = False) -> VertexCone:
    """Convert a facet representation to its extreme-ray representation.

    Equality rows (the linearity set) are eliminated up front by restricting
    to their nullspace; the double description runs on the restricted
    inequalities and the rays are mapped back to the ambient space.

    Raises :class:`NotPointed` when ``rank(a) < n`` and
    :class:`NotIrreducible` when a redundant inequality row is found and
    ``reduce`` is off.
    """
    a = cone.a
    n = cone.ambient_dim
    if _rank(a, tol) < n:
        raise NotPointed(f"facet matrix rank < ambient dimension {n}")

    lin = sorted(cone.linearity)
    ineq = cone.inequality_rows()
    if lin:
        basis = _nullspace(a[lin], tol)
        if basis.shape[1] == 0:
            raise DegenerateCone("equality rows leave only the origin")
        reduced = ineq @ basis
        # rows implied by the equalities vanish in the restricted space
        norms = np.linalg.norm(reduced, axis=1)
        live = norms > max(tol, 1e-12) * max(1.0, norms.max(initial=1.0))
        if not np.all(live) and not reduce:
            raise NotIrreducible(int(np.where(~live)[0][0]),
                                 "row implied by the equality constraints")
        reduced = reduced[live]
    else:
        basis = None
        reduced = ineq

    q = basis.shape[1] if basis is not None else n
    if reduced.shape[0] == 0 or _rank(reduced, tol) < q:
        raise NotPointed("restricted cone is not pointed")
    if reduced.shape[0] >= 2:
        reduced = _reduce_rows(reduced, tol, reduce)

    rays = _dd_core(_unit_rows(reduced), tol)
    if basis is not None:
        rays = basis @ rays
        rays = rays / np.linalg.norm(rays, axis=0)
    rays = _prune_non_extreme(cone.a, sorted(cone.linearity), rays, tol)
    return VertexCone(_canonical_ray_order(rays))


def _prune_non_extreme(a: np.ndarray, lin: list[int], rays: np.ndarray,
                       tol: float) -> np.ndarray:
    """Belt-and-braces filter: keep rays whose active rows have rank n-1."""
    n = a.shape[1]
    an = _unit_rows(a)
    keep, seen = [], []
    for j in range(rays.shape[1]):
        r = rays[:, j]
        active = np.where(np.abs(an @ r) <= max(tol, 1e-9))[0]
        if _rank(a[active], tol) != n - 1:
            continue
        if any(np.linalg.norm(r - s) < 1e-9 for s in seen):
            continue
        seen.append(r)
        keep.append(j)
    if not keep:
        raise DegenerateCone("no extreme rays survive the rank filter")
    return rays[:, keep]


def vertex_to_facet(cone: VertexCone, tol: float = DEFAULT_TOL) -> FacetCone:
    """Convert generators to facet normals through cone duality.

    The facets of ``C`` are the extreme rays of the dual cone
    ``{y : Delta^T y >= 0}``, so this reuses :func:`facet_to_vertex`.
    """
    delta = cone.delta
    n = cone.ambient_dim
    if _rank(delta, tol) < n:
        raise DegenerateCone("conic hull is not full-dimensional")
    dual = FacetCone(delta.T)
    rays = facet_to_vertex(dual, tol=tol, reduce=True)
    return FacetCone(rays.delta.T)


def zero_set(pair: DDPair, ray_index: int) -> frozenset[int]:
    """Indices of facet rows active at the given ray."""
    if not 0 <= ray_index < pair.vertex.n_rays:
        raise IndexError(f"ray index {ray_index} out of range")
    an = _unit_rows(pair.facet.a)
    r = pair.vertex.delta[:, ray_index]
    tol = max(pair.tolerance, 1e-12)
    return frozenset(np.where(np.abs(an @ r) <= max(tol, 1e-9))[0].tolist())


@dataclass(frozen=True)
class DDReport:
    """Validation report for a DD pair; empty lists mean a clean pair."""

    nonneg_violations: list[tuple[int, int]]
    non_extreme_rays: list[int]
    redundant_rays: list[int]
    redundant_rows: list[int]

    @property
    def clean(self) -> bool:
        return not (self.nonneg_violations or self.non_extreme_rays
                    or self.redundant_rays or self.redundant_rows)


def verify_dd_pair(pair: DDPair) -> DDReport:
    a, delta = pair.facet.a, pair.vertex.delta
    if a.shape[1] != delta.shape[0]:
        raise ShapeMismatch("a is m x n but delta is not n x d")
    n = a.shape[1]
    tol = max(pair.tolerance, 1e-9)
    an = _unit_rows(a)
    prod = an @ delta

    nonneg = [(int(i), int(j)) for i, j in zip(*np.where(prod < -tol))
              if i not in pair.facet.linearity]
    nonneg += [(int(i), int(j)) for i, j in zip(*np.where(np.abs(prod) > tol))
               if i in pair.facet.linearity]

    non_extreme = []
    for j in range(delta.shape[1]):
        active = np.where(np.abs(prod[:, j]) <= tol)[0]
        if _rank(a[active], pair.tolerance) != n - 1:
            non_extreme.append(j)

    redundant_rays = []
    for j in range(delta.shape[1]):
        others = np.delete(delta, j, axis=1)
        if others.shape[1] and _in_conic_hull(others.T, delta[:, j], tol):
            redundant_rays.append(j)

    redundant_rows = []
    ineq_idx = [i for i in range(a.shape[0]) if i not in pair.facet.linearity]
    for i in ineq_idx:
        others = an[[k for k in ineq_idx if k != i]]
        if others.shape[0] and _in_conic_hull(others, an[i], tol):
            redundant_rows.append(i)

    return DDReport(nonneg, non_extreme, redundant_rays, redundant_rows)


def project_onto_cone(y: np.ndarray, cone: VertexCone,
                      tol: float = DEFAULT_TOL) -> np.ndarray:
    """Euclidean projection onto the cone spanned by the generators.

    Solves ``argmin_{b >= 0} ||y - Delta b||`` and returns ``Delta b_hat``;
    the result satisfies the Moreau optimality conditions up to ``tol``.
    """
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] != cone.ambient_dim:
        raise ShapeMismatch("vector length must match the ambient dimension")
    sol = solve_nnls(NnlsProblem(cone.delta, y), tol=min(tol, 1e-12))
    return cone.delta @ sol.coefficients


def transform_cone(cone: FacetCone, basis: np.ndarray,
                   tol: float = DEFAULT_TOL) -> FacetCone:
    """Pull a cone back through a basis: ``{theta : (A B) theta >= 0}``.

    The transform is only valid when the rows of ``A B`` stay conically
    independent and ``A B`` keeps full column rank; for a nonsingular square
    basis both hold automatically and only the cheap rank check runs.
    """
    basis = np.atleast_2d(np.asarray(basis, dtype=float))
    n, j = basis.shape
    if n != cone.ambient_dim or j > n:
        raise ShapeMismatch("basis must be n x J with J <= n")
    ab = cone.a @ basis
    if _rank(ab, tol) < j:
        raise Result1Violated("full column rank")
    if j < n:
        ok, _ = conically_independent_rows(ab, tol=max(tol, 1e-9))
        if not ok:
            raise Result1Violated("conically independent rows")
    return FacetCone(ab, linearity=cone.linearity)
