"""Deterministic SVG output: grid heatmaps and Hammer-projected sphere fields.

All coordinates are written with a fixed number of decimals so that equal
inputs give byte-identical documents.
"""
from __future__ import annotations

import math

import numpy as np

# anchors of a perceptually ordered dark-blue to yellow ramp; colors are
# interpolated linearly between consecutive anchors
_RAMP = np.array([
    [68, 1, 84],
    [59, 82, 139],
    [33, 145, 140],
    [94, 201, 98],
    [253, 231, 37],
], dtype=float)


def color_for(t: float) -> str:
    """Hex color for ``t`` in [0, 1] on the module's ramp."""
    t = min(max(float(t), 0.0), 1.0)
    x = t * (len(_RAMP) - 1)
    i = min(int(x), len(_RAMP) - 2)
    c = _RAMP[i] + (x - i) * (_RAMP[i + 1] - _RAMP[i])
    r, g, b = (int(round(v)) for v in c)
    return f"#{r:02x}{g:02x}{b:02x}"


def _normalize(values: np.ndarray, vmin: float, vmax: float) -> np.ndarray:
    if vmax > vmin:
        return (values - vmin) / (vmax - vmin)
    return np.full(values.shape, 0.5)


def _num(x: float) -> str:
    return f"{x:.3f}"


def _label(x: float) -> str:
    return f"{x:.6g}"


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _legend(x0: float, y0: float, height: float, vmin: float, vmax: float, steps: int = 32) -> list[str]:
    out = []
    h = height / steps
    for s in range(steps):
        t = 1.0 - (s + 0.5) / steps
        out.append(f'<rect x="{_num(x0)}" y="{_num(y0 + s * h)}" width="16.000" height="{_num(h)}" '
                   f'fill="{color_for(t)}"/>')
    out.append(f'<text x="{_num(x0 + 22)}" y="{_num(y0 + 10)}" font-size="11">max {_escape(_label(vmax))}</text>')
    out.append(f'<text x="{_num(x0 + 22)}" y="{_num(y0 + height)}" font-size="11">'
               f'min {_escape(_label(vmin))}</text>')
    return out


def _document(width: float, height: float, body: list[str], title: str | None) -> str:
    head = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_num(width)}" '
        f'height="{_num(height)}" viewBox="0 0 {_num(width)} {_num(height)}">',
    ]
    if title:
        head.append(f"<title>{_escape(title)}</title>")
    return "\n".join(head + body + ["</svg>"]) + "\n"


def emit_svg_heatmap(field, *, cell: float = 8.0, title: str | None = None, mask=None,
                     origin: str = "lower") -> str:
    """Render a 2-D array as colored cells with a min/max legend.

    Parameters
    ----------
    field : array_like, shape (rows, cols)
        Values; row ``i`` is drawn at the bottom when ``origin="lower"``.
    mask : array_like of bool, optional
        Cells to leave blank (for instance points outside a domain).
        Unmasked values must be finite.
    """
    F = np.asarray(field, dtype=float)
    if F.ndim != 2 or F.size == 0:
        raise ValueError("field must be a non-empty 2-D array")
    M = np.zeros(F.shape, bool) if mask is None else np.asarray(mask, bool)
    if M.shape != F.shape:
        raise ValueError("mask shape differs from field shape")
    shown = F[~M]
    if shown.size == 0:
        raise ValueError("every cell is masked")
    if not np.all(np.isfinite(shown)):
        raise ValueError("field contains non-finite values")
    vmin, vmax = float(shown.min()), float(shown.max())
    T = _normalize(np.where(M, 0.0, F), vmin, vmax)
    rows, cols = F.shape
    top = 24.0 if title else 8.0
    body = []
    if title:
        body.append(f'<text x="8.000" y="16.000" font-size="13">{_escape(title)}</text>')
    for i in range(rows):
        r = rows - 1 - i if origin == "lower" else i
        y = top + r * cell
        for j in range(cols):
            if M[i, j]:
                continue
            body.append(f'<rect x="{_num(8 + j * cell)}" y="{_num(y)}" width="{_num(cell)}" '
                        f'height="{_num(cell)}" fill="{color_for(T[i, j])}"/>')
    legend_x = 8 + cols * cell + 12
    body.extend(_legend(legend_x, top, max(rows * cell, 60.0), vmin, vmax))
    return _document(legend_x + 110, top + max(rows * cell, 60.0) + 8, body, title)


def hammer_project(theta, phi):
    """Hammer projection of azimuth ``theta`` and latitude ``phi`` (radians).

    ``x = 2 sqrt(2) cos(phi) sin(theta/2) / sqrt(1 + cos(phi) cos(theta/2))`` and
    ``y = sqrt(2) sin(phi) / sqrt(1 + cos(phi) cos(theta/2))``.
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    den = np.sqrt(1.0 + np.cos(phi) * np.cos(theta / 2.0))
    x = 2.0 * math.sqrt(2.0) * np.cos(phi) * np.sin(theta / 2.0) / den
    y = math.sqrt(2.0) * np.sin(phi) / den
    return x, y


def sphere_angles(points) -> tuple[np.ndarray, np.ndarray]:
    """Azimuth in ``(-pi, pi]`` and latitude of points on (or near) the unit sphere."""
    P = np.asarray(points, dtype=float)
    r = np.linalg.norm(P, axis=1)
    theta = np.arctan2(P[:, 1], P[:, 0])
    phi = np.arcsin(np.clip(P[:, 2] / r, -1.0, 1.0))
    return theta, phi


def emit_svg_hammer(points, values, *, scale: float = 100.0, radius: float = 2.5,
                    title: str | None = None) -> str:
    """Hammer-projected scatter of a field sampled at points of the unit sphere."""
    v = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("values contain non-finite entries")
    theta, phi = sphere_angles(points)
    if len(v) != len(theta):
        raise ValueError("one value per point is needed")
    x, y = hammer_project(theta, phi)
    vmin, vmax = float(v.min()), float(v.max())
    T = _normalize(v, vmin, vmax)
    top = 24.0 if title else 8.0
    half_w, half_h = 2.0 * math.sqrt(2.0) * scale, math.sqrt(2.0) * scale
    cx, cy = 8 + half_w, top + half_h
    body = []
    if title:
        body.append(f'<text x="8.000" y="16.000" font-size="13">{_escape(title)}</text>')
    body.append(f'<ellipse cx="{_num(cx)}" cy="{_num(cy)}" rx="{_num(half_w)}" ry="{_num(half_h)}" '
                f'fill="none" stroke="#000000" stroke-width="0.500"/>')
    # draw low values first so that maxima stay visible
    for i in np.argsort(v, kind="stable"):
        body.append(f'<circle cx="{_num(cx + scale * x[i])}" cy="{_num(cy - scale * y[i])}" '
                    f'r="{_num(radius)}" fill="{color_for(T[i])}"/>')
    legend_x = 8 + 2 * half_w + 12
    body.extend(_legend(legend_x, top, 2 * half_h, vmin, vmax))
    return _document(legend_x + 110, top + 2 * half_h + 8, body, title)
