import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lbmax.gradients import (
    cluster_indices, eigen_gradient, gap_threshold, grad_normalized, is_simple,
)
from lbmax.lattice import SQUARE
from lbmax.mesh import icosphere, torus_mesh
from lbmax.surfaces import FlatTorusMeshSurface, GridSurface, MeshSurface

FD_STEP = 1e-5


def fd_omega(surface, omega, k, index, normalized=False):
    e = np.zeros_like(omega)
    e[index] = FD_STEP * omega[index]
    vals = []
    for sign in (1, -1):
        res = surface.solve(omega + sign * e, k + 2)
        vals.append(res.normalized[k] if normalized else res.eigenvalues[k])
    return (vals[0] - vals[1]) / (2 * e[index])


def fd_moduli(surface, omega, k, which, normalized=False):
    p = surface.params
    vals = []
    for sign in (1, -1):
        q = (p.a + sign * FD_STEP, p.b) if which == "a" else (p.a, p.b + sign * FD_STEP)
        res = surface.with_params(q).solve(omega, k + 2)
        vals.append(res.normalized[k] if normalized else res.eigenvalues[k])
    return (vals[0] - vals[1]) / (2 * FD_STEP)


def test_gap_helpers():
    assert gap_threshold(0.1) == 1e-6 and gap_threshold(1e4) == pytest.approx(1e-2)
    vals = [0.0, 1.0, 1.0 + 1e-9, 2.0]
    assert not is_simple(vals, 1) and is_simple(vals, 3) is False and is_simple(vals, 0)
    assert cluster_indices(vals, 2) == ([1, 2], False)
    assert cluster_indices(vals, 3) == ([3], True)


def test_normalized_product_rule():
    g_omega, g_a, g_b = grad_normalized(2.0, 3.0, np.array([-1.0, 0.5]), 0.25, -0.5, b=1.5)
    np.testing.assert_allclose(g_omega, [-1.0, 3.5])
    assert g_a == 0.75
    assert g_b == pytest.approx(3.0 * -0.5 + 2.0 * 3.0 / 1.5)
    with pytest.raises(ValueError):
        grad_normalized(1.0, 0.0, np.zeros(2))
    with pytest.raises(ValueError):
        grad_normalized(1.0, 1.0, np.zeros(2), d_b=1.0)


def test_constant_perturbation_is_dilation():
    surf = GridSurface((0.1, 1.1), 12)
    omega = np.exp(0.2 * np.sin(np.arange(surf.size)))
    res = surf.solve(omega, 4)
    g = eigen_gradient(surf, res, 1)
    # d lambda along delta omega = omega equals -lambda (since lambda(c omega) = lambda / c)
    assert float(np.sum(g.d_omega * omega) * surf.weight) == pytest.approx(-g.lam, rel=1e-10)


def test_grid_constant_factor_moduli_derivatives():
    p = (0.2, 1.3)
    surf = GridSurface(p, 16)
    res = surf.solve(np.ones(surf.size), 3)
    # the first pair is c = (0, +-1) with lambda = 4 pi^2 / b^2; the cluster mean is a-independent
    g = eigen_gradient(surf, res, 1, with_moduli=True)
    assert g.lam == pytest.approx(4 * math.pi**2 / 1.3**2, rel=1e-12)
    assert g.d_b == pytest.approx(-8 * math.pi**2 / 1.3**3, rel=1e-8)
    assert abs(g.d_a) < 1e-8
    assert g.d_b_normalized == pytest.approx(-4 * math.pi**2 / 1.3**2, rel=1e-8)
    assert not g.simple


def test_grid_density_entrywise_square():
    surf = GridSurface(SQUARE, 8)
    omega = np.ones(surf.size)
    omega[5] = 1.3  # split the degenerate first cluster
    res = surf.solve(omega, 4)
    g = eigen_gradient(surf, res, 1)
    assert g.simple
    for j in (0, 5, 17, 40):
        assert g.d_omega[j] * surf.weight == pytest.approx(fd_omega(surf, omega, 1, j), rel=1e-6, abs=1e-10)


def random_factor(surface, seed, scale=0.4):
    rng = np.random.default_rng(seed)
    return np.exp(scale * rng.normal(size=surface.size))


def test_grid_gradients_against_finite_differences():
    surf = GridSurface((0.3, 1.2), 8)
    omega = random_factor(surf, 5)
    res = surf.solve(omega, 5)
    for k in (1, 2, 3):
        g = eigen_gradient(surf, res, k, with_moduli=True)
        assert g.simple
        j = 11 * k
        assert g.d_omega[j] * surf.weight == pytest.approx(fd_omega(surf, omega, k, j), rel=1e-5)
        assert g.d_omega_normalized[j] * surf.weight == pytest.approx(
            fd_omega(surf, omega, k, j, normalized=True), rel=1e-5, abs=1e-8)
        assert g.d_a == pytest.approx(fd_moduli(surf, omega, k, "a"), rel=1e-5)
        assert g.d_b == pytest.approx(fd_moduli(surf, omega, k, "b"), rel=1e-5)
        assert g.d_a_normalized == pytest.approx(fd_moduli(surf, omega, k, "a", True), rel=1e-5)
        assert g.d_b_normalized == pytest.approx(fd_moduli(surf, omega, k, "b", True), rel=1e-5)


def fd_direction(surface, omega, k, direction, normalized=False):
    vals = []
    for sign in (1, -1):
        res = surface.solve(omega + sign * FD_STEP * direction, k + 2)
        vals.append(res.normalized[k] if normalized else res.eigenvalues[k])
    return (vals[0] - vals[1]) / (2 * FD_STEP)


def test_sphere_mesh_gradient_against_finite_differences():
    surf = MeshSurface(icosphere(3))
    omega = random_factor(surf, 9, 0.2)
    res = surf.solve(omega, 4)
    rng = np.random.default_rng(10)
    for k in (1, 2, 3):
        g = eigen_gradient(surf, res, k)
        assert g.simple
        # single-vertex derivatives are O(1/V); a dense direction keeps the
        # finite difference well above eigenvalue rounding
        direction = omega * rng.uniform(-1, 1, surf.size)
        assert float(g.d_omega @ (surf.measure * direction)) == pytest.approx(
            fd_direction(surf, omega, k, direction), rel=1e-5)
        assert float(g.d_omega_normalized @ (surf.measure * direction)) == pytest.approx(
            fd_direction(surf, omega, k, direction, normalized=True), rel=1e-5)


def test_flat_torus_mesh_moduli_against_finite_differences():
    mesh = torus_mesh((0.0, 1.0), 10, 10)
    surf = FlatTorusMeshSurface(mesh, (0.25, 1.15))
    omega = random_factor(surf, 2, 0.3)
    res = surf.solve(omega, 4)
    g = eigen_gradient(surf, res, 2, with_moduli=True)
    assert g.simple
    assert g.d_a == pytest.approx(fd_moduli(surf, omega, 2, "a"), rel=1e-5)
    assert g.d_b == pytest.approx(fd_moduli(surf, omega, 2, "b"), rel=1e-5)
    direction = omega * np.random.default_rng(4).uniform(-1, 1, surf.size)
    assert float(g.d_omega @ (surf.measure * direction)) == pytest.approx(
        fd_direction(surf, omega, 2, direction), rel=1e-5)


def test_cluster_modes():
    surf = GridSurface(SQUARE, 8)
    res = surf.solve(np.ones(surf.size), 6)
    mean = eigen_gradient(surf, res, 1)
    own = eigen_gradient(surf, res, 1, cluster_mode="own")
    assert mean.cluster == own.cluster == (1, 2, 3, 4)
    assert not mean.simple
    # the cluster average of psi^2 over a full cluster of plane waves is constant
    np.testing.assert_allclose(mean.d_omega, mean.d_omega.mean(), rtol=1e-8)
    assert float(np.sum(own.d_omega)) == pytest.approx(float(np.sum(mean.d_omega)), rel=1e-10)
    with pytest.raises(ValueError):
        eigen_gradient(surf, res, 1, cluster_mode="max")


@settings(max_examples=15)
@given(st.integers(0, 10_000), st.integers(1, 4))
def test_dilation_null_direction(seed, k):
    surf = MeshSurface(icosphere(2))
    omega = random_factor(surf, seed, 0.3)
    g = eigen_gradient(surf, surf.solve(omega, k + 2), k)
    scale = np.max(np.abs(g.d_omega_normalized * surf.measure))
    assert abs(float(np.sum(g.d_omega_normalized * surf.measure * omega))) <= 1e-8 * max(scale, 1.0)


@settings(max_examples=15)
@given(st.integers(0, 10_000), st.floats(0.1, 10.0))
def test_normalized_gradient_scaling(seed, c):
    surf = GridSurface((0.1, 1.05), 8)
    omega = random_factor(surf, seed, 0.3)
    base = eigen_gradient(surf, surf.solve(omega, 4), 1, with_moduli=True)
    scaled = eigen_gradient(surf, surf.solve(c * omega, 4), 1, with_moduli=True)
    # Lambda is homogeneous of degree 0 in omega, so its omega-gradient scales like 1/c
    np.testing.assert_allclose(scaled.d_omega_normalized * c, base.d_omega_normalized, rtol=1e-8, atol=1e-8)
    assert scaled.d_b_normalized == pytest.approx(base.d_b_normalized, rel=1e-8, abs=1e-8)
    assert scaled.d_a_normalized == pytest.approx(base.d_a_normalized, rel=1e-8, abs=1e-8)
