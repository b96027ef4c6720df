"""Synthetic shape-restricted regression study.

Generates balanced panels y_{i,j} = f(j) + W_i(j) + e_{i,j} with a bell
shaped true curve, Gaussian-process subject effects, and Gaussian noise,
then compares four estimators of f: cone-restricted and unrestricted, each
with and without a spline representation of the mean.  Results are median
and mean MSE per model over seeded replications.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
import scipy.linalg

from .em import EmConfig
from .geometry import FacetCone, VertexCone, facet_to_vertex, \
    project_onto_cone
from .mixed import LongDataset, MixedConfig, cone_design, \
    fit_mixed, fit_unrestricted
from .prior import SpikeSlabHyper
from .shapes import BELL20_SPARSE_EQUALITIES, bell20_spec, \
    build_constraint_matrix, sparse_scenario_cone

__all__ = [
    "SimConfig", "ReplicationResult", "StudyResult",
    "true_f_dense", "true_f_sparse", "sample_gp_effect",
    "run_replication", "run_study", "MODELS",
]

MODELS = ("restricted", "restricted_spline", "unrestricted",
          "unrestricted_spline")


@dataclass(frozen=True)
class SimConfig:
    n: int = 20
    n_subjects: int = 100
    sigma: float = 1.0
    scenario: str = "dense"
    replications: int = 50
    seed: int = 20240
    kernel_bandwidth: float = 4.0
    basis_count: int = 20

    def __post_init__(self):
        if self.scenario not in ("sparse", "dense"):
            raise ValueError("scenario must be 'sparse' or 'dense'")
        if min(self.n, self.n_subjects, self.replications) < 1 or self.sigma <= 0:
            raise ValueError("counts must be positive and sigma > 0")


@dataclass(frozen=True)
class ReplicationResult:
    rep_index: int
    mse: dict
    f_hat: dict
    failed: tuple = ()


@dataclass(frozen=True)
class StudyResult:
    config: SimConfig
    sigmas: tuple
    median_mse: dict   # (model, sigma) -> float
    mean_mse: dict

    def as_rows(self):
        rows = [("statistic", "model") + tuple(f"sigma={s:g}" for s in self.sigmas)]
        for stat, table in (("median", self.median_mse), ("mean", self.mean_mse)):
            for model in MODELS:
                rows.append((stat, model) + tuple(
                    table[(model, s)] for s in self.sigmas))
        return rows


def true_f_dense(n: int) -> np.ndarray:
    """Scaled bell curve 3 * (1/0.5) * phi(x/0.5) on an even grid over [-2, 2]."""
    if n < 2:
        raise ValueError("need at least 2 grid points")
    x = np.linspace(-2.0, 2.0, n)
    z = x / 0.5
    return 3.0 / 0.5 * np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


def true_f_sparse(f_dense: np.ndarray,
                  cone_with_equalities: FacetCone) -> np.ndarray:
    """Project the dense curve onto the boundary face cut out by equalities.

    The equality rows are eliminated through their orthonormal nullspace N;
    since the restricted cone's rays already live in that subspace, the
    projection reduces to a cone projection of N^T f in the reduced
    coordinates, mapped back by N.
    """
    cone = cone_with_equalities
    f = np.asarray(f_dense, dtype=float).ravel()
    lin = sorted(cone.linearity)
    if not lin:
        if not cone.contains(f):
            raise ValueError("dense curve is outside the target cone")
        return f.copy()
    basis = scipy.linalg.null_space(cone.a[lin])
    vertex = facet_to_vertex(cone, reduce=True)
    reduced = VertexCone(basis.T @ vertex.delta)
    proj = project_onto_cone(basis.T @ f, reduced)
    return basis @ proj


def sample_gp_effect(grid: np.ndarray, bandwidth: float,
                     rng: np.random.Generator,
                     size: int = 1) -> np.ndarray:
    """Zero-mean GP draws with squared-exponential kernel
    exp(-(x - x')^2 / (2 * bandwidth^2)) on the given grid."""
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    grid = np.asarray(grid, dtype=float)
    diff = grid[:, None] - grid[None, :]
    K = np.exp(-diff * diff / (2.0 * bandwidth * bandwidth))
    K[np.diag_indices_from(K)] += 1e-10
    L = np.linalg.cholesky(K)
    draws = (L @ rng.standard_normal((grid.size, size))).T
    return draws[0] if size == 1 else draws


@lru_cache(maxsize=8)
def _study_context(n: int, basis_count: int):
    """Cone artifacts shared across replications (pure function of sizes)."""
    cone = build_constraint_matrix(bell20_spec()) if n == 20 else None
    if cone is None:
        raise ValueError("the reference study is defined on n = 20")
    designs = {
        False: cone_design(cone, n, use_spline=False),
        True: cone_design(cone, n, use_spline=True),
    }
    f_dense = true_f_dense(n)
    sparse_cone = sparse_scenario_cone(cone, BELL20_SPARSE_EQUALITIES)
    f_sparse = true_f_sparse(f_dense, sparse_cone)
    return cone, designs, f_dense, f_sparse


def _default_mixed_config() -> MixedConfig:
    return MixedConfig(em=EmConfig(hyper=SpikeSlabHyper()))


def generate_panel(config: SimConfig, rng: np.random.Generator,
                   true_f: np.ndarray) -> LongDataset:
    n, N = config.n, config.n_subjects
    grid = np.arange(1.0, n + 1.0)
    W = sample_gp_effect(grid, config.kernel_bandwidth, rng, size=N)
    W = np.atleast_2d(W)
    noise = config.sigma * rng.standard_normal((N, n))
    return LongDataset(true_f[None, :] + W + noise)


def run_replication(config: SimConfig, rep_index: int,
                    mixed_config: MixedConfig | None = None
                    ) -> ReplicationResult:
    """One seeded replication: simulate a panel and fit all four models."""
    cone, designs, f_dense, f_sparse = _study_context(config.n,
                                                      config.basis_count)
    true_f = f_sparse if config.scenario == "sparse" else f_dense
    rng = np.random.default_rng([config.seed, rep_index])
    data = generate_panel(config, rng, true_f)
    mixed_config = mixed_config or _default_mixed_config()

    mse: dict = {}
    f_hat: dict = {}
    failed: list[str] = []
    for model in MODELS:
        spline = model.endswith("spline")
        try:
            if model.startswith("restricted"):
                fitted, _ = fit_mixed(data, cone, use_spline=spline,
                                      config=mixed_config,
                                      design=designs[spline])
            else:
                fitted = fit_unrestricted(data, use_spline=spline,
                                          config=mixed_config)
            f_hat[model] = fitted.f_hat
            mse[model] = float(np.mean((true_f - fitted.f_hat) ** 2))
        except Exception:
            failed.append(model)
            f_hat[model] = None
            mse[model] = math.nan
    return ReplicationResult(rep_index=rep_index, mse=mse, f_hat=f_hat,
                             failed=tuple(failed))


def run_study(config: SimConfig, sigmas=(1.0, 2.0, 5.0),
              mixed_config: MixedConfig | None = None,
              progress=None) -> StudyResult:
    """Median/mean MSE table over replications for each noise level."""
    median_mse: dict = {}
    mean_mse: dict = {}
    for sigma in sigmas:
        cfg = replace(config, sigma=float(sigma))
        per_model = {m: [] for m in MODELS}
        for rep in range(cfg.replications):
            res = run_replication(cfg, rep, mixed_config)
            for m in MODELS:
                per_model[m].append(res.mse[m])
            if progress is not None:
                progress(sigma, rep)
        for m in MODELS:
            vals = np.asarray(per_model[m])
            ok = vals[~np.isnan(vals)]
            median_mse[(m, sigma)] = float(np.median(ok)) if ok.size else math.nan
            mean_mse[(m, sigma)] = float(np.mean(ok)) if ok.size else math.nan
    return StudyResult(config=config, sigmas=tuple(float(s) for s in sigmas),
                       median_mse=median_mse, mean_mse=mean_mse)
