"""Mixed-effect functional model with cone-restricted mean curve.

y_{i,j} = f(j) + W_i(j) + e_{i,j} for a balanced panel of N subjects on a
common grid of n time points.  The random curves W_i live in a B-spline
basis with MVN(0, Sigma) coefficients; the mean curve f is restricted to a
polyhedral cone and estimated by alternating random-effect posteriors with
the conic-sparse EM on the pooled residuals.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.interpolate
import scipy.linalg

from . import em
from .adjacency import build_adjacency_graph, enumerate_maximal_cliques
from .em import EmConfig, EmFit
from .geometry import DDPair, FacetCone, facet_to_vertex, transform_cone

__all__ = [
    "BsplineBasis", "MixedModel", "LongDataset", "MixedConfig",
    "SingularBasis", "SingularMarginal",
    "bspline_basis", "random_effect_posterior", "update_sigma_matrix",
    "fit_mixed", "fit_unrestricted", "marginal_loglik", "cone_design",
]


class SingularBasis(ValueError):
    pass


class SingularMarginal(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class BsplineBasis:
    grid: np.ndarray
    basis_count: int
    degree: int
    knots: np.ndarray
    matrix: np.ndarray


@dataclass(frozen=True)
class MixedModel:
    f_hat: np.ndarray
    sigma_mat: np.ndarray          # K x K random-effect covariance
    sigma2: float
    basis: BsplineBasis


@dataclass(frozen=True)
class LongDataset:
    """Balanced subject x time panel.

    ``values`` is an (N, n) array; ``subjects`` keeps the original ids in
    row order.
    """

    values: np.ndarray
    subjects: tuple = ()

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.values, dtype=float))
        if not np.all(np.isfinite(v)):
            raise ValueError("panel values must be finite")
        object.__setattr__(self, "values", v)
        subj = tuple(self.subjects) if self.subjects else tuple(range(v.shape[0]))
        if len(subj) != v.shape[0]:
            raise ValueError("one subject id per row required")
        object.__setattr__(self, "subjects", subj)

    @property
    def n_subjects(self) -> int:
        return self.values.shape[0]

    @property
    def n_times(self) -> int:
        return self.values.shape[1]

    @classmethod
    def from_records(cls, records) -> "LongDataset":
        """Build from (subject, time_index, value) triples; the panel must be
        complete and balanced."""
        by_subject: dict = {}
        for subject, t, value in records:
            by_subject.setdefault(subject, {})[int(t)] = float(value)
        subjects = sorted(by_subject)
        times = sorted({t for row in by_subject.values() for t in row})
        n = len(times)
        if times != list(range(times[0], times[0] + n)):
            raise ValueError("time indices must form a contiguous range")
        values = np.empty((len(subjects), n))
        for r, s in enumerate(subjects):
            row = by_subject[s]
            if len(row) != n:
                raise ValueError(f"subject {s!r} is missing time points")
            values[r] = [row[t] for t in times]
        return cls(values, tuple(subjects))

    @classmethod
    def from_csv(cls, path) -> "LongDataset":
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            records = [(row["subject"], int(row["time"]), float(row["value"]))
                       for row in reader]
        return cls.from_records(records)

    def subset(self, rows) -> "LongDataset":
        rows = list(rows)
        return LongDataset(self.values[rows],
                           tuple(self.subjects[r] for r in rows))


def bspline_basis(n: int, basis_count: int, degree: int = 3) -> BsplineBasis:
    """B-spline design matrix on the grid 1..n.

    Uses an open (clamped) knot vector; when ``basis_count == n`` the
    interior knots are placed at sliding averages of the grid points
    (Schoenberg-Whitney), which makes the square collocation matrix
    nonsingular.
    """
    if basis_count > n or degree < 1 or n < degree + 1:
        raise ValueError("need degree >= 1 and degree + 1 <= basis_count <= n")
    grid = np.arange(1.0, n + 1.0)
    k = degree
    if basis_count == n:
        interior = np.array([grid[j + 1:j + k + 1].mean()
                             for j in range(n - k - 1)])
    else:
        interior = np.linspace(grid[0], grid[-1], basis_count - k + 1)[1:-1]
    knots = np.concatenate([[grid[0]] * (k + 1), interior, [grid[-1]] * (k + 1)])
    design = scipy.interpolate.BSpline.design_matrix(
        grid, knots, k, extrapolate=False).toarray()
    if design.shape[1] != basis_count:
        raise SingularBasis("knot vector does not yield the requested basis")
    if basis_count == n:
        sign, logdet = np.linalg.slogdet(design)
        if sign == 0 or not np.isfinite(logdet):
            raise SingularBasis("square collocation matrix is singular")
    return BsplineBasis(grid=grid, basis_count=basis_count, degree=k,
                        knots=knots, matrix=design)


def random_effect_posterior(y_i: np.ndarray, f_hat: np.ndarray,
                            model: MixedModel):
    """Posterior mean/covariance of one subject's random-effect coefficients.

    Returns ``(u_i, eta_mean, eta_cov)`` with ``u_i = B eta_mean``.
    """
    B = model.basis.matrix
    V = B @ model.sigma_mat @ B.T + model.sigma2 * np.eye(B.shape[0])
    try:
        cho = scipy.linalg.cho_factor(V)
    except np.linalg.LinAlgError as exc:
        raise SingularMarginal(str(exc)) from exc
    resid = np.asarray(y_i, dtype=float) - f_hat
    sb = model.sigma_mat @ B.T
    eta_mean = sb @ scipy.linalg.cho_solve(cho, resid)
    eta_cov = model.sigma_mat - sb @ scipy.linalg.cho_solve(cho, sb.T)
    return B @ eta_mean, eta_mean, eta_cov


def update_sigma_matrix(eta_means: np.ndarray,
                        eta_covs: np.ndarray | list[np.ndarray]) -> np.ndarray:
    """Flat-prior M-step: average posterior second moment, clipped to PSD."""
    eta_means = np.atleast_2d(np.asarray(eta_means, dtype=float))
    covs = np.asarray(eta_covs, dtype=float)
    if covs.ndim == 2:
        covs = covs[None, ...]
    second = eta_means.T @ eta_means / eta_means.shape[0]
    sigma = covs.mean(axis=0) + second
    sigma = 0.5 * (sigma + sigma.T)
    vals, vecs = np.linalg.eigh(sigma)
    return (vecs * np.clip(vals, 0.0, None)) @ vecs.T


@dataclass(frozen=True)
class MixedConfig:
    em: EmConfig = field(default_factory=EmConfig)
    outer_max_iter: int = 200
    outer_rel_tol: float = 1e-5
    spline_degree: int = 3
    # random-effect basis size K; defaults to the number of time points
    random_effect_basis: int | None = None
    inner_max_iter: int = 100


@dataclass(frozen=True)
class ConeDesign:
    """Design artifacts shared by every fit against one cone."""

    pair: DDPair
    design: np.ndarray             # n x d map from conic coefficients to f
    clique_set: object


def cone_design(cone: FacetCone, n: int, use_spline: bool,
                basis: BsplineBasis | None = None,
                degree: int = 3) -> ConeDesign:
    """Rays, adjacency cliques, and the f = X b design for a cone.

    Without a spline the design is the generator matrix itself; with one,
    the cone is pulled back through the basis, its rays are enumerated in
    coefficient space, and the design maps those coefficients back to the
    grid.
    """
    if cone.ambient_dim != n:
        raise ValueError("cone dimension must match the grid length")
    if use_spline:
        if basis is None:
            basis = bspline_basis(n, n, degree)
        native = transform_cone(cone, basis.matrix)
        vertex = facet_to_vertex(native, reduce=True)
        pair = DDPair(native, vertex)
        design = basis.matrix @ vertex.delta
    else:
        vertex = facet_to_vertex(cone, reduce=True)
        pair = DDPair(cone, vertex)
        design = vertex.delta
    graph = build_adjacency_graph(pair)
    cliques = enumerate_maximal_cliques(graph)
    return ConeDesign(pair=pair, design=design, clique_set=cliques)


def _init_model(data: LongDataset, basis: BsplineBasis) -> tuple[np.ndarray, float, np.ndarray]:
    """Moment-based starting values: f at the grid means, sigma2 and Sigma
    from the within/between split of the subject deviations."""
    Y = data.values
    f0 = Y.mean(axis=0)
    dev = Y - f0
    total_var = float(dev.var())
    sigma2 = max(0.25 * total_var, 1e-4)
    B = basis.matrix
    coef, *_ = np.linalg.lstsq(B, dev.T, rcond=None)
    sigma0 = np.cov(coef) if coef.shape[1] > 1 else np.outer(coef[:, 0], coef[:, 0])
    sigma0 = 0.5 * (sigma0 + sigma0.T) + 1e-6 * np.eye(B.shape[1])
    return f0, sigma2, sigma0


def _outer_loop(data: LongDataset, config: MixedConfig, m_step) -> tuple[MixedModel, bool, dict]:
    """Shared alternation: subject posteriors, a mean-curve M-step, then the
    variance updates.  ``m_step(resid_mean, sigma2, state)`` returns the new
    mean curve plus any carry-over state."""
    Y = data.values
    N, n = Y.shape
    K = config.random_effect_basis or n
    basis = bspline_basis(n, K, config.spline_degree)
    B = basis.matrix
    f_hat, sigma2, sigma_mat = _init_model(data, basis)

    info: dict = {"outer_iterations": 0}
    state = None
    converged = False
    eye = np.eye(n)
    for it in range(1, config.outer_max_iter + 1):
        V = B @ sigma_mat @ B.T + sigma2 * eye
        try:
            cho = scipy.linalg.cho_factor(V)
        except np.linalg.LinAlgError as exc:
            raise SingularMarginal(str(exc)) from exc
        resid = Y - f_hat
        sb = sigma_mat @ B.T
        eta_means = (sb @ scipy.linalg.cho_solve(cho, resid.T)).T
        eta_cov = sigma_mat - sb @ scipy.linalg.cho_solve(cho, sb.T)
        U = eta_means @ B.T

        resid_mean = (Y - U).mean(axis=0)
        new_f, state = m_step(resid_mean, sigma2, state)

        rss = float(np.sum((Y - U - new_f) ** 2))
        rss += N * float(np.trace(B @ eta_cov @ B.T))
        sigma2 = em.m_step_sigma2(rss, N * n, config.em.hyper)
        sigma_mat = update_sigma_matrix(eta_means, eta_cov)

        change = np.linalg.norm(new_f - f_hat) / max(1.0, np.linalg.norm(f_hat))
        f_hat = new_f
        info["outer_iterations"] = it
        if change < config.outer_rel_tol:
            converged = True
            break

    model = MixedModel(f_hat=f_hat, sigma_mat=sigma_mat, sigma2=sigma2,
                       basis=basis)
    return model, converged, {**info, "state": state}


def fit_mixed(data: LongDataset, cone: FacetCone, use_spline: bool = False,
              config: MixedConfig | None = None,
              design: ConeDesign | None = None) -> tuple[MixedModel, EmFit]:
    """Cone-restricted mixed-effect fit.

    The conic EM runs on the subject-averaged residuals scaled by sqrt(N),
    which is algebraically the pooled stacked regression; sigma2 and Sigma
    are updated in the outer loop, so the inner EM runs with sigma2 frozen.
    """
    config = config or MixedConfig()
    n = data.n_times
    if design is None:
        design = cone_design(cone, n, use_spline, degree=config.spline_degree)
    N = data.n_subjects
    root_n = math.sqrt(N)
    X = root_n * design.design

    def m_step(resid_mean, sigma2, prev_beta):
        inner_cfg = EmConfig(hyper=config.em.hyper,
                             max_iter=config.inner_max_iter,
                             rel_tol=config.em.rel_tol,
                             clamp_theta=config.em.clamp_theta,
                             freeze_hyper=config.em.freeze_hyper,
                             fixed_sigma2=sigma2)
        fit_res = em.fit(root_n * resid_mean, X, design.clique_set,
                         inner_cfg, init_beta=prev_beta)
        return design.design @ fit_res.state.beta, fit_res.state.beta

    model, converged, info = _outer_loop(data, config, m_step)

    # final EM pass at the converged variance for a full report
    V = model.basis.matrix @ model.sigma_mat @ model.basis.matrix.T \
        + model.sigma2 * np.eye(n)
    cho = scipy.linalg.cho_factor(V)
    sb = model.sigma_mat @ model.basis.matrix.T
    U = (sb @ scipy.linalg.cho_solve(cho, (data.values - model.f_hat).T)).T \
        @ model.basis.matrix.T
    resid_mean = (data.values - U).mean(axis=0)
    final_cfg = EmConfig(hyper=config.em.hyper, max_iter=config.inner_max_iter,
                         rel_tol=config.em.rel_tol,
                         clamp_theta=config.em.clamp_theta,
                         freeze_hyper=config.em.freeze_hyper,
                         fixed_sigma2=model.sigma2)
    em_fit = em.fit(root_n * resid_mean, X, design.clique_set, final_cfg,
                    init_beta=info["state"])
    f_hat = design.design @ em_fit.state.beta
    model = MixedModel(f_hat=f_hat, sigma_mat=model.sigma_mat,
                       sigma2=model.sigma2, basis=model.basis)
    em_fit = EmFit(state=em_fit.state, mu_hat=f_hat,
                   converged=em_fit.converged and converged,
                   trace=em_fit.trace, theta_clamped=em_fit.theta_clamped)
    return model, em_fit


def fit_unrestricted(data: LongDataset, use_spline: bool = False,
                     config: MixedConfig | None = None) -> MixedModel:
    """Baseline fit with an ordinary least-squares mean update."""
    config = config or MixedConfig()
    n = data.n_times
    mean_basis = bspline_basis(n, n, config.spline_degree) if use_spline else None

    def m_step(resid_mean, sigma2, state):
        if mean_basis is None:
            return resid_mean.copy(), None
        theta, *_ = np.linalg.lstsq(mean_basis.matrix, resid_mean, rcond=None)
        return mean_basis.matrix @ theta, None

    model, _, _ = _outer_loop(data, config, m_step)
    return model


def marginal_loglik(data: LongDataset, model: MixedModel) -> float:
    """Sum of subject-level MVN log densities under the marginal model."""
    B = model.basis.matrix
    n = B.shape[0]
    V = B @ model.sigma_mat @ B.T + model.sigma2 * np.eye(n)
    try:
        cho = scipy.linalg.cho_factor(V)
    except np.linalg.LinAlgError as exc:
        raise SingularMarginal(str(exc)) from exc
    logdet = 2.0 * float(np.sum(np.log(np.diag(cho[0]))))
    resid = data.values - model.f_hat
    quad = float(np.sum(resid * scipy.linalg.cho_solve(cho, resid.T).T))
    N = data.n_subjects
    return -0.5 * (N * n * math.log(2.0 * math.pi) + N * logdet + quad)
