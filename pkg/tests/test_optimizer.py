import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lbmax.lattice import EQUILATERAL
from lbmax.mesh import icosphere
from lbmax.optimizer import (
    ConfigError, OptimConfig, _bfgs_update, barrier_gradient, barrier_objective, barrier_value,
    init_constant, init_gaussians, init_periodic_gaussians, init_random, maximize_conformal, maximize_moduli,
    multistart, sphere_points,
)
from lbmax.surfaces import GridSurface, MeshSurface


@pytest.fixture(scope="module")
def small_sphere():
    return MeshSurface(icosphere(2))


@pytest.mark.parametrize("kwargs", [
    dict(k=0), dict(omega_lo=0.0), dict(omega_lo=2.0, omega_hi=1.0), dict(wolfe_c1=0.9, wolfe_c2=0.5),
    dict(wolfe_c2=1.0), dict(barrier_decay=1.0), dict(barrier_mu=-1.0), dict(grad_tol=0.0),
    dict(max_outer=0), dict(cluster_gradient="max"),
])
def test_config_validation(kwargs):
    with pytest.raises(ConfigError):
        OptimConfig(**kwargs)


def test_barrier_examples():
    cfg = OptimConfig(omega_lo=0.5, omega_hi=2.5)
    omega = np.full(7, 1.5)
    assert barrier_objective(30.0, omega, cfg, 0.0) == 30.0
    measure = np.linspace(1, 2, 7)
    # weights are normalized to sum 1, so the midpoint value is 2 log(half width)
    assert barrier_objective(30.0, omega, cfg, 1.0, measure) == pytest.approx(30.0 + 2 * math.log(1.0))
    cfg2 = OptimConfig(omega_lo=1e-3, omega_hi=1e3)
    mid = np.full(3, 0.5 * (1e-3 + 1e3))
    assert barrier_value(mid, 1e-3, 1e3) == pytest.approx(2 * math.log((1e3 - 1e-3) / 2))
    assert barrier_objective(1.0, np.array([1e-3, 1.0]), cfg2, 0.1) == -math.inf
    assert barrier_value(np.array([5.0, 1e3]), 1e-3, 1e3) == -math.inf


@settings(max_examples=30)
@given(st.integers(0, 10_000))
def test_barrier_gradient_finite_differences(seed):
    rng = np.random.default_rng(seed)
    lo, hi = 0.1, 10.0
    omega = np.exp(rng.uniform(math.log(0.2), math.log(8.0), 12))
    measure = rng.uniform(0.5, 2.0, 12)
    g = barrier_gradient(omega, lo, hi, measure)
    for j in range(0, 12, 3):
        h = 1e-6 * omega[j]
        e = np.zeros(12)
        e[j] = h
        fd = (barrier_value(omega + e, lo, hi, measure) - barrier_value(omega - e, lo, hi, measure)) / (2 * h)
        assert g[j] == pytest.approx(fd, rel=1e-7, abs=1e-12)


def test_initializers(small_sphere):
    np.testing.assert_array_equal(init_constant(small_sphere, 2.0), 2.0)
    r = init_random(small_sphere, 3, spread=0.5)
    assert np.all((r >= math.exp(-0.5)) & (r <= math.exp(0.5)))
    np.testing.assert_array_equal(r, init_random(small_sphere, 3, spread=0.5))
    pts = sphere_points(50)
    np.testing.assert_allclose(np.linalg.norm(pts, axis=1), 1.0)
    bump = init_gaussians(small_sphere.nodes(), [[0, 0, 1]], width=0.3, amplitude=2.0)
    assert np.argmax(bump) == np.argmax(small_sphere.nodes()[:, 2])
    assert bump.min() >= 1.0
    x = np.array([0.0, 2 * math.pi - 0.1, math.pi])
    y = np.zeros(3)
    per = init_periodic_gaussians(x, y, [(0.05, 0.0)], width=0.5, amplitude=1.0)
    assert per[1] == pytest.approx(1 + math.exp(-0.15**2 / 0.5))  # wraps around
    assert per[2] < per[1] < per[0]


def test_bfgs_update_secant_and_symmetry():
    rng = np.random.default_rng(0)
    n = 6
    M = rng.normal(size=(n, n))
    H = np.asfortranarray(M @ M.T + n * np.eye(n))
    s, y = rng.normal(size=n), rng.normal(size=n)
    if s @ y < 0:
        y = -y
    H1, ok = _bfgs_update(H.copy(order="F"), s, y)
    assert ok
    np.testing.assert_allclose(H1 @ y, s, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(H1, H1.T, atol=1e-12)
    assert np.all(np.linalg.eigvalsh(H1) > 0)
    H2, ok = _bfgs_update(H.copy(order="F"), s, -y if s @ y > 0 else y)
    assert not ok


def test_stationary_equilateral_conformal():
    surf = GridSurface(EQUILATERAL, 12)
    run = maximize_conformal(surf, OptimConfig(k=1, max_inner=20))
    assert max(h.outer for h in run.history) <= 1
    assert run.Lambda == pytest.approx(8 * math.pi**2 / math.sqrt(3), rel=1e-8)
    np.testing.assert_allclose(run.omega, 1.0)


def test_stationary_equilateral_moduli():
    surf = GridSurface(EQUILATERAL, 12)
    run = maximize_moduli(surf, OptimConfig(k=1, max_inner=20))
    assert max(h.outer for h in run.history) <= 1
    assert run.Lambda == pytest.approx(8 * math.pi**2 / math.sqrt(3), rel=1e-8)
    assert (run.params.a, run.params.b) == pytest.approx((0.5, math.sqrt(3) / 2), abs=1e-12)


def _check_ascent_and_feasibility(run):
    cfg = run.config
    for prev, cur in zip(run.history, run.history[1:]):
        if cur.outer == prev.outer:
            assert cur.objective >= prev.objective - 1e-12 * abs(prev.objective)
    for _, omega in run.snapshots:
        assert np.all(omega > cfg.omega_lo) and np.all(omega < cfg.omega_hi)
    assert np.all(run.omega > cfg.omega_lo) and np.all(run.omega < cfg.omega_hi)


def test_sphere_run_ascends_and_stays_feasible(small_sphere):
    cfg = OptimConfig(k=1, max_inner=15, max_outer=2, omega_lo=0.2, omega_hi=5.0, barrier_mu=1e-2,
                      snapshot_every=1)
    start = init_random(small_sphere, 1, 0.5)
    run = maximize_conformal(small_sphere, cfg, start)
    _check_ascent_and_feasibility(run)
    assert run.Lambda > run.history[0].Lambda
    assert run.termination in ("converged", "max_iterations", "line_search_failure")
    summary = run.summary()
    assert summary["k"] == 1 and summary["Lambda"] == run.Lambda
    assert summary["omega_min"] > 0.2


def test_determinism(small_sphere):
    cfg = OptimConfig(k=2, max_inner=8)
    start = init_random(small_sphere, 5, 0.4)
    a = maximize_conformal(small_sphere, cfg, start)
    b = maximize_conformal(small_sphere, cfg, start)
    assert [h.objective for h in a.history] == [h.objective for h in b.history]
    np.testing.assert_array_equal(a.omega, b.omega)


def test_rejects_bad_starts(small_sphere):
    cfg = OptimConfig(k=1, omega_lo=0.5, omega_hi=2.0)
    with pytest.raises(ConfigError):
        maximize_conformal(small_sphere, cfg, np.full(small_sphere.size, 3.0))
    with pytest.raises(ConfigError):
        maximize_conformal(small_sphere, cfg, np.ones(5))
    with pytest.raises(ConfigError):
        maximize_moduli(small_sphere, cfg)
    with pytest.raises(ConfigError):
        maximize_moduli(GridSurface((0.2, 0.8), 8), cfg)  # outside the fundamental domain


def test_moduli_run_canonicalization_keeps_Lambda():
    surf = GridSurface((0.45, 1.0), 16)
    x, y = surf.nodes()
    # a factor resolved by the grid, so the sheared sampling is exact
    start = init_periodic_gaussians(x, y, [(1.0, 2.0)], width=1.0, amplitude=0.5)
    run = maximize_moduli(surf, OptimConfig(k=1, max_inner=12), start)
    assert run.canonicalizations
    for event in run.canonicalizations:
        assert event["relative_change"] <= 1e-8
    assert run.Lambda > run.history[0].Lambda
    _check_ascent_and_feasibility(run)


def test_unresolved_factor_breaks_exact_shift_equivalence():
    from lbmax.moduli import shift
    from lbmax.spectral import PeriodicGrid, solve_weighted, transport_factor
    g = PeriodicGrid(8)
    w = np.exp(0.3 * np.random.default_rng(0).normal(size=g.size))
    p = (0.2, 1.1)
    before = solve_weighted(p, g, w, 3).normalized[1]
    after = solve_weighted(shift(p), g, transport_factor(w, 8, "shift"), 3).normalized[1]
    assert abs(after - before) / before > 1e-8


def test_multistart_keeps_best(small_sphere):
    cfg = OptimConfig(k=1, max_inner=4)
    starts = [init_random(small_sphere, s, 0.5) for s in range(3)]
    best, runs = multistart(small_sphere, cfg, starts, workers=1)
    assert len(runs) == 3
    assert best.Lambda == max(r.Lambda for r in runs)
    assert [r.config.seed for r in runs] == [0, 1, 2]
    best2, _ = multistart(small_sphere, cfg, starts, workers=2)
    assert best2.Lambda == best.Lambda
