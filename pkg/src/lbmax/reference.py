"""Analytic and semi-analytic comparison spectra.

Covers the round sphere, chains of kissing spheres, disjoint unions, the
equilateral torus with attached spheres and tori of revolution. For the
latter, separating variables leaves one periodic ODE per Fourier mode around
the axis, solved here by spectral collocation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize_scalar

from .spectral import toeplitz_d2

EIGHT_PI = 8.0 * math.pi
EQUILATERAL_LAMBDA1 = 8.0 * math.pi**2 / math.sqrt(3.0)


@dataclass(frozen=True)
class ReferenceSpectrum:
    """Named list of normalized eigenvalues ``Lambda_0 <= Lambda_1 <= ...``."""

    label: str
    normalized: tuple[float, ...]
    provenance: str

    def __getitem__(self, k: int) -> float:
        return self.normalized[k]

    def __len__(self):
        return len(self.normalized)


# ---------------------------------------------------------------- spheres

def sphere_spectrum(k_max: int) -> ReferenceSpectrum:
    """Unit-area-normalized round sphere: ``4 pi l (l + 1)`` with multiplicity ``2 l + 1``."""
    if k_max < 0:
        raise ValueError("k_max must be non-negative")
    vals: list[float] = []
    ell = 0
    while len(vals) < k_max + 1:
        vals.extend([4.0 * math.pi * ell * (ell + 1)] * (2 * ell + 1))
        ell += 1
    return ReferenceSpectrum("round sphere", tuple(vals[: k_max + 1]), "4 pi l(l+1), multiplicity 2l+1")


def kissing_spheres(k: int) -> float:
    """``Lambda_k`` of ``k`` equal round spheres touching at points: ``8 pi k``.

    The configuration has ``k`` zero eigenvalues and ``Lambda_k`` has
    multiplicity ``3 k``.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    return EIGHT_PI * k


def attach_sphere(base: float) -> float:
    """``Lambda_{k+1}`` after adding a suitably sized round sphere to a surface with ``Lambda_k = base``."""
    if base < 0:
        raise ValueError("base must be non-negative")
    return EIGHT_PI + base


def equilateral_plus_spheres(k: int) -> float:
    """Equilateral flat torus with ``k - 1`` attached spheres: ``8 pi^2 / sqrt(3) + 8 pi (k - 1)``."""
    if k < 1:
        raise ValueError("k must be at least 1")
    return EQUILATERAL_LAMBDA1 + EIGHT_PI * (k - 1)


def union_spectrum(eigenvalues, volumes, k_max: int) -> np.ndarray:
    """Normalized spectrum of a disjoint union from its components' eigenvalues.

    Parameters
    ----------
    eigenvalues : sequence of arrays
        Unnormalized eigenvalues of each component (as many as available).
    volumes : sequence of float
        Component volumes.
    """
    merged = np.sort(np.concatenate([np.asarray(e, float) for e in eigenvalues]))
    if len(merged) < k_max + 1:
        raise ValueError("not enough component eigenvalues for the requested index")
    return merged[: k_max + 1] * float(np.sum(volumes))


def sphere_isometric_factor(alpha: float, z) -> np.ndarray:
    """Conformal factor ``1 / (cosh a + sinh a z)^2`` of a Moebius dilation of the unit sphere."""
    z = np.asarray(z, dtype=float)
    return 1.0 / (math.cosh(alpha) + math.sinh(alpha) * z) ** 2


# ---------------------------------------------------------------- tori of revolution

def _torus_radii(aspect: float) -> tuple[float, float]:
    # unit area (2 pi)^2 R r = 1 with R / r = aspect^2
    minor = 1.0 / (2.0 * math.pi * aspect)
    return minor, aspect * aspect * minor


def embedded_torus_mode(aspect: float, m: int, count: int, n: int = 128) -> np.ndarray:
    """Lowest ``count`` eigenvalues of the Fourier mode ``m`` of a unit-area torus of revolution.

    With tube radius ``r``, center radius ``R`` and ``rho(u) = r cos u + R``,
    the mode equation multiplied by the area density ``r^2 rho`` becomes the
    symmetric problem ``-(rho phi')' + (r^2 m^2 / rho) phi = lambda r^2 rho phi``.
    The flux term is discretized as ``-(D2 P + P D2)/2 + diag(rho'')/2`` with
    ``P = diag(rho)``, on a grid offset by half a cell so the pinch point of the
    horn torus is never sampled.
    """
    if aspect < 1:
        raise ValueError("aspect must be at least 1")
    r, R = _torus_radii(aspect)
    h = 2.0 * math.pi / n
    u = (np.arange(n) + 0.5) * h
    rho = r * np.cos(u) + R
    D2 = toeplitz_d2(n)
    K = -0.5 * (D2 * rho[None, :] + rho[:, None] * D2)
    K[np.diag_indices(n)] += 0.5 * (-r * np.cos(u)) + (r * r * m * m) / rho
    s = 1.0 / np.sqrt(r * r * rho)
    C = K * s[:, None] * s[None, :]
    # the full spectrum keeps the values independent of ``count``; near the horn pinch the
    # matrix norm is large and partial solvers round differently
    return sla.eigh(0.5 * (C + C.T), eigvals_only=True)[: min(count, n)]


def embedded_torus_spectrum(aspect: float, k_max: int, n: int = 128, m_cap: int | None = None) -> ReferenceSpectrum:
    """Normalized spectrum of the unit-area torus of revolution with ``R / r = aspect^2``.

    Fourier modes are added until the ground eigenvalue of the next mode
    exceeds the current ``k_max``-th merged value; since the mode potential
    grows with ``m``, no later mode can contribute. Modes ``m > 0`` count
    twice (``cos`` and ``sin``).
    """
    if k_max < 0:
        raise ValueError("k_max must be non-negative")
    cap = m_cap if m_cap is not None else 4 * (k_max + 1) + 16
    vals: list[float] = []
    m = 0
    while True:
        if m > cap:
            raise RuntimeError(f"mode cap {cap} reached before the spectrum up to {k_max} was complete")
        mode = embedded_torus_mode(aspect, m, k_max + 1, n)
        if len(vals) >= k_max + 1 and mode[0] > sorted(vals)[k_max]:
            break
        for v in mode:
            vals.extend([v] if m == 0 else [v, v])
        m += 1
    out = np.sort(np.asarray(vals))[: k_max + 1]
    return ReferenceSpectrum(f"torus of revolution, aspect {aspect:g}", tuple(float(v) for v in out),
                             "periodic mode equations by collocation")


def best_embedded_torus(k: int, a_max: float = 4.0, sweep_points: int = 61, n: int = 96,
                        xtol: float = 1e-6) -> tuple[float, float]:
    """Maximize ``Lambda_k`` over tori of revolution; returns ``(aspect, Lambda)``.

    A coarse sweep over ``[1, a_max]`` brackets the best value, then a bounded
    Brent search refines it.
    """
    if k < 1:
        raise ValueError("k must be at least 1")

    def value(a):
        return embedded_torus_spectrum(a, k, n).normalized[k]

    grid = np.linspace(1.0, a_max, sweep_points)
    vals = np.array([value(a) for a in grid])
    i = int(np.argmax(vals))
    if i == len(grid) - 1:
        raise RuntimeError(f"no interior maximum found on [1, {a_max}]")
    lo = grid[max(i - 1, 0)]
    hi = grid[i + 1]
    opt = minimize_scalar(lambda a: -value(a), bounds=(lo, hi), method="bounded",
                          options={"xatol": xtol})
    cand = [(vals[i], grid[i]), (-opt.fun, float(opt.x))]
    best_val, best_a = max(cand)
    return float(best_a), float(best_val)
