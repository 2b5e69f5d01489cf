"""Closed-form spectra of flat tori.

The (a, b)-flat torus is the quotient of the plane by the lattice spanned by
(1, 0) and (a, b). Its Laplace-Beltrami eigenvalues are indexed by the dual
lattice: every integer pair (c1, c2) gives

    lambda = 4 pi^2 / b^2 * [(c1 a - c2)^2 + c1^2 b^2]

and the volume-normalized value is Lambda = b * lambda.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

FOUR_PI2 = 4.0 * math.pi**2

# relative gap below which two lattice values are treated as one eigenvalue
TIE_RTOL = 1e-12


class InsufficientRadiusError(ValueError):
    """Raised when a brute-force enumeration box cannot certify completeness."""


@dataclass(frozen=True)
class TorusParams:
    """A point (a, b) of the upper half plane naming an (a, b)-flat torus."""

    a: float
    b: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ValueError(f"torus parameters must be finite, got ({self.a}, {self.b})")
        if self.b <= 0:
            raise ValueError(f"torus parameter b must be positive, got {self.b}")

    @property
    def volume(self) -> float:
        return self.b

    def as_tuple(self) -> tuple[float, float]:
        return (self.a, self.b)


EQUILATERAL = TorusParams(0.5, math.sqrt(3.0) / 2.0)
SQUARE = TorusParams(0.0, 1.0)


@dataclass(frozen=True)
class LatticeEigenvalue:
    """One flat-torus eigenvalue together with its dual-lattice index.

    The pair (-c1, -c2) always carries the same value.
    """

    lam: float
    c1: int
    c2: int

    @property
    def partner(self) -> tuple[int, int]:
        return (-self.c1, -self.c2)

    @property
    def note(self) -> str:
        return f"c=({self.c1},{self.c2})"


def _as_params(p) -> TorusParams:
    if isinstance(p, TorusParams):
        return p
    a, b = p
    return TorusParams(float(a), float(b))


def _quadratic_form(a: float, b: float, c1: np.ndarray, c2: np.ndarray) -> np.ndarray:
    # (c1 a - c2)^2 + c1^2 b^2, i.e. lambda without the 4 pi^2 / b^2 scale
    return (c1 * a - c2) ** 2 + (c1 * b) ** 2


def _min_form_eigenvalue(a: float, b: float) -> float:
    """Smallest eigenvalue of [[a^2+b^2, -a], [-a, 1]] (cancellation-free)."""
    tr = a * a + b * b + 1.0
    disc = math.sqrt(max(tr * tr - 4.0 * b * b, 0.0))
    return (b * b) / (0.5 * (tr + disc))


def _candidate_bound(a: float, b: float, k: int) -> float:
    # (0, 0), (0, +-1), ..., (0, +-m) are 2m+1 >= k+1 lattice points with form
    # value <= m^2, and likewise (+-j, 0) with value j^2 (a^2+b^2).
    m = (k + 1) // 2
    return m * m * min(1.0, a * a + b * b)


def _ordered_entries(values: np.ndarray, c1: np.ndarray, c2: np.ndarray, count: int):
    """Sort by value, merge rounding-level ties, order ties by (c1, c2)."""
    order = np.lexsort((c2, c1, values))
    values, c1, c2 = values[order], c1[order], c2[order]
    out = []
    i = 0
    n = len(values)
    while i < n and len(out) < count:
        head = values[i]
        j = i + 1
        while j < n and values[j] - head <= TIE_RTOL * max(head, 1e-300):
            j += 1
        members = sorted(zip(c1[i:j].tolist(), c2[i:j].tolist()))
        out.extend((head, m1, m2) for m1, m2 in members)
        i = j
    return out[:count]


def flat_torus_spectrum(p, k_max: int) -> list[LatticeEigenvalue]:
    """Return the eigenvalues lambda_0 <= ... <= lambda_{k_max} of a flat torus.

    Eigenvalues are enumerated from all dual-lattice points inside an ellipse
    that provably contains the first ``k_max + 1`` of them: the value bound
    comes from an explicit set of ``k_max + 1`` lattice points and the radius
    from the smallest eigenvalue of the quadratic form.

    Parameters
    ----------
    p : TorusParams or (a, b)
        Lattice parameters, ``b > 0``.
    k_max : int
        Largest eigenvalue index requested.

    Returns
    -------
    list of LatticeEigenvalue
        ``k_max + 1`` entries in ascending order, repeated values kept.
        Entries whose values agree to ``TIE_RTOL`` share one value and are
        ordered lexicographically by ``(c1, c2)``.
    """
    p = _as_params(p)
    if k_max < 0:
        raise ValueError("k_max must be non-negative")
    a, b = p.a, p.b
    bound = _candidate_bound(a, b, k_max) * (1.0 + 4 * TIE_RTOL)
    radius = int(math.ceil(math.sqrt(bound / _min_form_eigenvalue(a, b)))) + 1
    rng = np.arange(-radius, radius + 1, dtype=np.int64)
    c1, c2 = (g.ravel() for g in np.meshgrid(rng, rng, indexing="ij"))
    q = _quadratic_form(a, b, c1.astype(float), c2.astype(float))
    keep = q <= bound
    entries = _ordered_entries(q[keep], c1[keep], c2[keep], k_max + 1)
    if len(entries) < k_max + 1:  # pragma: no cover - guarded by the bound argument
        raise RuntimeError("lattice enumeration produced too few points")
    scale = FOUR_PI2 / (b * b)
    return [LatticeEigenvalue(float(v * scale), int(m1), int(m2)) for v, m1, m2 in entries]


def normalized_spectrum(p, k_max: int) -> list[float]:
    """Volume-normalized eigenvalues Lambda_k = b * lambda_k for k = 0..k_max."""
    p = _as_params(p)
    return [e.lam * p.b for e in flat_torus_spectrum(p, k_max)]


def flat_torus_local_max(k: int) -> tuple[float, TorusParams]:
    """Closed-form local maximizer of Lambda_k over flat tori.

    With ``m = ceil(k / 2)`` the maximum over the part of the fundamental
    domain with ``a^2 + b^2 >= (m - 1)^2`` is ``4 pi^2 m^2 / sqrt(m^2 - 1/4)``,
    attained at ``(a, b) = (1/2, sqrt(m^2 - 1/4))``.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    m = (k + 1) // 2
    height = math.sqrt(m * m - 0.25)
    return FOUR_PI2 * m * m / height, TorusParams(0.5, height)


def restricted_domain_floor(k: int) -> float:
    """Lower bound on a^2 + b^2 defining the restricted admissible set for index k."""
    m = (k + 1) // 2
    return float((m - 1) ** 2)


def brute_force_kth(p, k: int, radius: int) -> float:
    """k-th flat-torus eigenvalue from exhaustive enumeration of a lattice box.

    All ``(c1, c2)`` with ``|c1|, |c2| <= radius`` are evaluated and sorted.
    The result is certified only when the ellipse through the returned value
    fits in the box; otherwise :class:`InsufficientRadiusError` is raised.
    """
    p = _as_params(p)
    if k < 0 or radius < 0:
        raise ValueError("k and radius must be non-negative")
    a, b = p.a, p.b
    side = np.arange(-radius, radius + 1)
    if side.size**2 <= k:
        raise InsufficientRadiusError(f"box of radius {radius} holds fewer than {k + 1} points")
    c1 = np.repeat(side, side.size).astype(float)
    c2 = np.tile(side, side.size).astype(float)
    values = np.sort(_quadratic_form(a, b, c1, c2))

    # collapse rounding-level ties onto the smallest member of each run
    snapped = values.copy()
    head = values[0]
    for i in range(1, min(len(values), k + 1)):
        if values[i] - head <= TIE_RTOL * max(head, 1e-300):
            snapped[i] = head
        else:
            head = values[i]
    target = snapped[k]

    # bounding box of {c : q(c) <= target}: |c1| <= sqrt(t)/b, |c2| <= sqrt(t(a^2+b^2))/b
    t = values[k] * (1.0 + 4 * TIE_RTOL)
    need1 = math.sqrt(t) / b
    need2 = math.sqrt(t * (a * a + b * b)) / b
    if need1 > radius or need2 > radius:
        raise InsufficientRadiusError(
            f"radius {radius} cannot certify index {k}: need |c1| <= {need1:.3f}, |c2| <= {need2:.3f}"
        )
    return float(target * (FOUR_PI2 / (b * b)))
