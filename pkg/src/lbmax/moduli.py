"""Genus-one moduli space: fundamental domain and modular reduction.

The normalized flat-torus spectrum is unchanged by the reflection
(a, b) -> (-a, b), the shift (a, b) -> (a + 1, b) and the inversion
(a, b) -> (-a, b) / (a^2 + b^2). Composing them reduces every point of the
upper half plane to the fundamental domain

    F = {(a, b) : -1/2 < a <= 1/2, a^2 + b^2 >= 1}.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

from .lattice import TorusParams, _as_params

# tolerance on the unit circle, so that (1/2, sqrt(3)/2) counts as inside F
# although its a^2 + b^2 rounds to 0.9999999999999999
CIRCLE_TOL = 1e-12
MAX_REDUCTION_STEPS = 64

Move = Literal["shift", "reflect", "invert"]


class CanonicalizationError(RuntimeError):
    """Modular reduction did not reach the fundamental domain within the step cap."""


def contains(p) -> bool:
    """Membership in the fundamental domain with a = 1/2 in and a = -1/2 out."""
    p = _as_params(p)
    a, b = p.a, p.b
    return (-0.5 < a <= 0.5) and (a * a + b * b >= 1.0 - CIRCLE_TOL)


def reflect(p) -> TorusParams:
    p = _as_params(p)
    return TorusParams(-p.a, p.b)


def shift(p, by: int = 1) -> TorusParams:
    p = _as_params(p)
    return TorusParams(p.a + by, p.b)


def invert(p) -> TorusParams:
    p = _as_params(p)
    r2 = p.a * p.a + p.b * p.b
    return TorusParams(-p.a / r2, p.b / r2)


@dataclass(frozen=True)
class Reduction:
    """Result of a modular reduction together with the moves that produced it.

    Each move is ``(kind, amount)``; for ``"shift"`` the amount is the integer
    added to ``a``, otherwise it is zero.
    """

    params: TorusParams
    moves: tuple[tuple[Move, int], ...]


def reduce_with_moves(p) -> Reduction:
    """Reduce ``p`` into the fundamental domain and record the generators used."""
    p = _as_params(p)
    moves: list[tuple[Move, int]] = []
    a, b = p.a, p.b
    for _ in range(MAX_REDUCTION_STEPS):
        step = -math.ceil(a - 0.5)
        if step != 0:
            a += step
            moves.append(("shift", step))
        if a * a + b * b < 1.0 - CIRCLE_TOL:
            r2 = a * a + b * b
            a, b = -a / r2, b / r2
            moves.append(("invert", 0))
            continue
        if a == -0.5:
            a = 0.5
            moves.append(("reflect", 0))
        if not (b > 0 and math.isfinite(a) and math.isfinite(b)):
            break
        return Reduction(TorusParams(a, b), tuple(moves))
    raise CanonicalizationError(
        f"modular reduction of ({p.a}, {p.b}) did not settle in {MAX_REDUCTION_STEPS} steps"
    )


def canonicalize(p) -> TorusParams:
    """Return the representative of ``p`` in the fundamental domain."""
    return reduce_with_moves(p).params
