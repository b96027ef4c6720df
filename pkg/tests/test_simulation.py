import math

import numpy as np
import pytest

from conesparse.shapes import (BELL20_SPARSE_EQUALITIES, preset,
                               sparse_scenario_cone)
from conesparse.simulation import (MODELS, SimConfig, run_replication,
                                   run_study, sample_gp_effect, true_f_dense,
                                   true_f_sparse)


def test_true_f_dense_closed_form():
    f = true_f_dense(20)
    x = np.linspace(-2, 2, 20)
    expected = 6.0 * np.exp(-x ** 2 / 0.5) / math.sqrt(2 * math.pi)
    np.testing.assert_allclose(f, expected, atol=1e-14)
    np.testing.assert_allclose(f, f[::-1], atol=1e-14)  # symmetric bell
    assert f.max() < 6.0 / math.sqrt(2 * math.pi) < f.max() * 1.05
    with pytest.raises(ValueError):
        true_f_dense(1)


def test_true_f_dense_strictly_feasible():
    cone = preset("bell20")
    slack = cone.a @ true_f_dense(20)
    assert np.min(slack) > 1e-6


def test_true_f_sparse_satisfies_equalities():
    cone = sparse_scenario_cone(preset("bell20"), BELL20_SPARSE_EQUALITIES)
    f = true_f_sparse(true_f_dense(20), cone)
    active = cone.a[sorted(BELL20_SPARSE_EQUALITIES)] @ f
    np.testing.assert_allclose(active, 0.0, atol=1e-8)
    assert np.min(cone.a @ f) >= -1e-10


def test_true_f_sparse_is_the_closest_face_point():
    base = preset("bell20")
    cone = sparse_scenario_cone(base, BELL20_SPARSE_EQUALITIES)
    f_dense = true_f_dense(20)
    f = true_f_sparse(f_dense, cone)
    best = np.linalg.norm(f_dense - f)
    # no other sampled member of the restricted cone is closer
    from conesparse.geometry import facet_to_vertex
    vertex = facet_to_vertex(cone, reduce=True)
    rng = np.random.default_rng(0)
    for _ in range(200):
        other = vertex.delta @ rng.uniform(0, 2, vertex.delta.shape[1])
        assert np.linalg.norm(f_dense - other) >= best - 1e-8


def test_true_f_sparse_identity_without_equalities():
    cone = preset("bell20")
    f = true_f_dense(20)
    np.testing.assert_array_equal(true_f_sparse(f, cone), f)
    with pytest.raises(ValueError):
        true_f_sparse(-f, cone)


def test_gp_effect_moments():
    grid = np.arange(1.0, 11.0)
    rng = np.random.default_rng(1)
    draws = sample_gp_effect(grid, 4.0, rng, size=40_000)
    emp = np.cov(draws.T)
    diff = grid[:, None] - grid[None, :]
    K = np.exp(-diff ** 2 / 32.0)
    assert np.max(np.abs(emp - K)) < 0.03
    single = sample_gp_effect(grid, 4.0, rng)
    assert single.shape == (10,)
    with pytest.raises(ValueError):
        sample_gp_effect(grid, 0.0, rng)


def test_gp_effect_bandwidth_limits():
    grid = np.arange(1.0, 9.0)
    rng = np.random.default_rng(2)
    wide = sample_gp_effect(grid, 1e4, rng, size=500)
    # huge bandwidth: draws are nearly constant curves
    assert np.max(np.std(wide, axis=1)) < 1e-2
    narrow = sample_gp_effect(grid, 1e-3, rng, size=2000)
    corr = np.corrcoef(narrow[:, 0], narrow[:, 1])[0, 1]
    assert abs(corr) < 0.1  # tiny bandwidth: neighbours decorrelate


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(scenario="other")
    with pytest.raises(ValueError):
        SimConfig(sigma=0.0)
    with pytest.raises(ValueError):
        SimConfig(replications=0)


def test_replication_deterministic():
    config = SimConfig(n_subjects=15, replications=1, sigma=1.0)
    a = run_replication(config, 3)
    b = run_replication(config, 3)
    assert a.mse == b.mse
    for m in MODELS:
        np.testing.assert_array_equal(a.f_hat[m], b.f_hat[m])
    c = run_replication(config, 4)
    assert c.mse != a.mse


def test_replication_low_noise_recovers_truth():
    config = SimConfig(n_subjects=40, sigma=1e-3, kernel_bandwidth=1e4,
                       scenario="dense")
    # near-constant subject effects + tiny noise: every model lands close
    res = run_replication(config, 0)
    assert not res.failed
    assert res.mse["restricted"] < 5e-3
    # the sample mean of N near-constant subject effects has variance ~ 1/N,
    # which the unconstrained mean estimate absorbs
    assert res.mse["unrestricted"] < 0.05


def test_study_table_layout():
    config = SimConfig(n_subjects=10, replications=2)
    seen = []
    result = run_study(config, sigmas=(1.0, 2.0),
                       progress=lambda s, r: seen.append((s, r)))
    assert seen == [(1.0, 0), (1.0, 1), (2.0, 0), (2.0, 1)]
    assert result.sigmas == (1.0, 2.0)
    assert set(result.median_mse) == {(m, s) for m in MODELS
                                      for s in (1.0, 2.0)}
    rows = result.as_rows()
    assert rows[0] == ("statistic", "model", "sigma=1", "sigma=2")
    assert len(rows) == 1 + 2 * len(MODELS)
    assert all(np.isfinite(v) for v in result.mean_mse.values())
