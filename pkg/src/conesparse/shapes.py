"""Regime-based shape constraint matrices over a grid.

A :class:`ShapeSpec` lists ordered regimes, each an interval of grid indices
with a shape tag; rows are emitted per regime, in order:

* ``nonneg``      unit rows for every index in the interval
* ``increasing``  first-difference rows (-1, 1)
* ``decreasing``  first-difference rows (1, -1)
* ``convex``      second-difference rows (1, -2, 1)
* ``concave``     second-difference rows (-1, 2, -1)

The two concrete matrices used in the experiments (a 22 x 20 bell-shape
matrix and a 25 x 24 daily-activity matrix) are available as presets and the
generic builder is tested to reproduce them entry for entry.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import FacetCone

__all__ = [
    "ShapeSpec", "InvalidSpec", "build_constraint_matrix",
    "sparse_scenario_cone", "preset", "PRESETS",
    "bell20_spec", "nhanes24_spec", "BELL20_SPARSE_EQUALITIES",
]

SHAPES = ("nonneg", "increasing", "decreasing", "convex", "concave")


class InvalidSpec(ValueError):
    pass


@dataclass(frozen=True)
class ShapeSpec:
    """Ordered shape regimes over a grid of ``n`` points (0-based indices).

    Each regime is ``(shape, lo, hi)`` with an inclusive index interval;
    consecutive intervals may overlap (curvature regimes share their junction
    points).  ``equality_rows`` indexes rows of the finished matrix that are
    forced to equality.
    """

    n: int
    regimes: tuple[tuple[str, int, int], ...]
    equality_rows: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n < 2:
            raise InvalidSpec("grid needs at least 2 points")
        covered: set[int] = set()
        for shape, lo, hi in self.regimes:
            if shape not in SHAPES:
                raise InvalidSpec(f"unknown shape {shape!r}")
            if not 0 <= lo <= hi < self.n:
                raise InvalidSpec(f"interval ({lo}, {hi}) out of range")
            width = hi - lo + 1
            if shape in ("increasing", "decreasing") and width < 2:
                raise InvalidSpec(f"{shape} regime needs at least 2 points")
            if shape in ("convex", "concave") and width < 3:
                raise InvalidSpec(f"{shape} regime needs at least 3 points")
            covered.update(range(lo, hi + 1))
        if covered != set(range(self.n)):
            raise InvalidSpec("regimes must cover the whole grid")
        object.__setattr__(self, "regimes", tuple(
            (s, int(lo), int(hi)) for s, lo, hi in self.regimes))
        object.__setattr__(self, "equality_rows",
                           frozenset(int(i) for i in self.equality_rows))


def _regime_rows(shape: str, lo: int, hi: int, n: int) -> list[np.ndarray]:
    rows = []
    if shape == "nonneg":
        for i in range(lo, hi + 1):
            r = np.zeros(n)
            r[i] = 1.0
            rows.append(r)
    elif shape in ("increasing", "decreasing"):
        sign = 1.0 if shape == "increasing" else -1.0
        for i in range(lo, hi):
            r = np.zeros(n)
            r[i], r[i + 1] = -sign, sign
            rows.append(r)
    else:
        sign = 1.0 if shape == "convex" else -1.0
        for i in range(lo, hi - 1):
            r = np.zeros(n)
            r[i], r[i + 1], r[i + 2] = sign, -2.0 * sign, sign
            rows.append(r)
    return rows


def build_constraint_matrix(spec: ShapeSpec) -> FacetCone:
    """Assemble the facet cone for a shape specification."""
    rows: list[np.ndarray] = []
    for shape, lo, hi in spec.regimes:
        rows.extend(_regime_rows(shape, lo, hi, spec.n))
    a = np.array(rows)
    if spec.equality_rows and max(spec.equality_rows) >= a.shape[0]:
        raise InvalidSpec("equality row index out of range")
    cone = FacetCone(a, linearity=spec.equality_rows)
    if np.linalg.matrix_rank(a) < spec.n:
        raise InvalidSpec("constraint matrix is not pointed (rank < n)")
    return cone


def sparse_scenario_cone(base: FacetCone,
                         equality_indices: frozenset[int] | set[int]
                         ) -> FacetCone:
    """Turn selected inequality rows of a cone into equality constraints."""
    idx = frozenset(int(i) for i in equality_indices)
    if idx and (min(idx) < 0 or max(idx) >= base.n_rows):
        raise IndexError("equality index outside the row range")
    return FacetCone(base.a, linearity=base.linearity | idx)


# ---------------------------------------------------------------------------
# presets

def bell20_spec() -> ShapeSpec:
    """Bell-shape constraints on 20 grid points (22 rows)."""
    return ShapeSpec(
        n=20,
        regimes=(
            ("convex", 0, 8),
            ("concave", 7, 12),
            ("convex", 11, 19),
            ("increasing", 0, 1),
            ("nonneg", 0, 0),
            ("decreasing", 18, 19),
            ("nonneg", 19, 19),
        ),
    )


def nhanes24_spec() -> ShapeSpec:
    """Daily-activity constraints on 24 hourly points (25 rows)."""
    return ShapeSpec(
        n=24,
        regimes=(
            ("nonneg", 0, 4),
            ("increasing", 4, 5),
            ("convex", 4, 8),
            ("concave", 7, 20),
            ("convex", 19, 22),
            ("decreasing", 22, 23),
            ("nonneg", 23, 23),
        ),
    )


# Rows of the bell-shape matrix driven to equality in the boundary ("sparse")
# simulation scenario; 0-based version of the published 1-based index set.
BELL20_SPARSE_EQUALITIES = frozenset({7, 8, 9, 11, 12, 14, 15, 16, 17, 20, 21})

PRESETS = {
    "bell20": bell20_spec,
    "nhanes24": nhanes24_spec,
}


def preset(name: str) -> FacetCone:
    """Build one of the named constraint matrices."""
    try:
        spec = PRESETS[name]()
    except KeyError:
        raise InvalidSpec(
            f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return build_constraint_matrix(spec)
