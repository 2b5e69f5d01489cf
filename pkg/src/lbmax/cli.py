"""Command-line front end.

Subcommands
-----------
spectrum   eigenvalues of one surface as CSV
sweep      Lambda_k over the flat-torus moduli domain or over torus-of-revolution aspects
optimize   run a maximization described by a JSON config
reference  table of closed-form and semi-analytic comparison values
project    Hammer-projected SVG of a conformal factor on the sphere

Exit codes: 0 success, 1 numerical failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import io as lio
from . import reference as ref
from .eigensolve import EigenSolverError
from .fem import solve_flat_torus_mesh, solve_mesh
from .lattice import TorusParams, flat_torus_local_max, flat_torus_spectrum, normalized_spectrum
from .mesh import (MeshError, embedded_torus_mesh, icosphere, kissing_spheres_mesh, read_off,
                   torus_mesh)
from .moduli import CanonicalizationError
from .optimizer import (ConfigError, init_constant, init_gaussians, init_periodic_gaussians,
                        init_random, multistart)
from .parallel import worker_count
from .spectral import PeriodicGrid, solve_weighted
from .surfaces import FlatTorusMeshSurface, GridSurface, MeshSurface
from .svg import emit_svg_heatmap, emit_svg_hammer

log = logging.getLogger("lbmax")


class UsageError(ValueError):
    """Bad command-line arguments detected after parsing."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _output(args, text: str) -> None:
    if getattr(args, "output", None):
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"expected a comma-separated list of integers, got {text!r}") from None


# ---------------------------------------------------------------- spectrum

def _params(a: float, b: float) -> TorusParams:
    try:
        return TorusParams(a, b)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_spectrum(args) -> int:
    k = args.k
    if k < 0:
        raise UsageError("--k must be non-negative")
    if args.surface == "flat-torus":
        p = _params(args.a, args.b)
        if args.grid:
            res = solve_weighted(p, PeriodicGrid(args.grid), 1.0, k)
            rows = lio.spectrum_rows(res.eigenvalues, res.volume)
        elif args.mesh:
            res = solve_flat_torus_mesh(torus_mesh(p, args.mesh, args.mesh), p, None, k)
            rows = lio.spectrum_rows(res.eigenvalues, res.volume)
        else:
            ev = flat_torus_spectrum(p, k)
            lam = [e.lam for e in ev]
            notes = [f"{e.note}; {m}" if m else e.note for e, m in zip(ev, lio.multiplicity_notes(lam))]
            rows = lio.spectrum_rows(lam, p.volume, notes)
    elif args.surface == "sphere":
        if args.subdivisions is None:
            vals = ref.sphere_spectrum(k).normalized
            rows = lio.spectrum_rows(np.asarray(vals) / (4 * math.pi), 4 * math.pi)
        else:
            res = solve_mesh(icosphere(args.subdivisions), None, k)
            rows = lio.spectrum_rows(res.eigenvalues, res.volume)
    elif args.surface == "kissing-spheres":
        res = solve_mesh(kissing_spheres_mesh(args.count, args.subdivisions), None, k)
        rows = lio.spectrum_rows(res.eigenvalues, res.volume)
    elif args.surface == "embedded-torus":
        spec = ref.embedded_torus_spectrum(args.aspect, k, args.n)
        rows = lio.spectrum_rows(spec.normalized, 1.0)
    elif args.surface == "mesh":
        if not args.path:
            raise UsageError("spectrum mesh needs --path")
        res = solve_mesh(read_off(args.path), None, k)
        rows = lio.spectrum_rows(res.eigenvalues, res.volume)
    else:  # pragma: no cover - argparse restricts the choices
        raise UsageError(f"unknown surface {args.surface}")
    _output(args, lio.write_spectrum_csv(rows))
    return 0


# ---------------------------------------------------------------- sweep

def moduli_grid(resolution: int, b_max: float):
    """Sample points ``(a, b)`` of the closed fundamental domain with ``b <= b_max``.

    Returns the ``a`` and ``b`` axes and a mask of grid points outside the domain.
    """
    a = np.linspace(-0.5, 0.5, resolution)
    b = np.linspace(math.sqrt(3.0) / 2.0, b_max, resolution)
    A, B = np.meshgrid(a, b, indexing="xy")
    outside = A * A + B * B < 1.0 - 1e-12
    return a, b, outside


def _map(fn, items, workers):
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def cmd_sweep(args) -> int:
    ks = _int_list(args.k)
    if not ks or min(ks) < 1:
        raise UsageError("--k needs indices >= 1")
    workers = worker_count(args.workers)
    if args.surface == "flat-torus":
        if args.resolution < 2 or args.b_max <= math.sqrt(3.0) / 2.0:
            raise UsageError("need --resolution >= 2 and --b-max above sqrt(3)/2")
        a, b, outside = moduli_grid(args.resolution, args.b_max)
        pts = [(i, j) for i in range(len(b)) for j in range(len(a)) if not outside[i, j]]
        spectra = _map(lambda ij: normalized_spectrum((a[ij[1]], b[ij[0]]), max(ks)), pts, workers)
        rows = []
        fields = {k: np.full(outside.shape, np.nan) for k in ks}
        for (i, j), spec in zip(pts, spectra):
            for k in ks:
                rows.append((float(a[j]), float(b[i]), k, float(spec[k])))
                fields[k][i, j] = spec[k]
        rows.sort(key=lambda r: (r[2], r[1], r[0]))
        _output(args, lio.write_table_csv(("a", "b", "k", "Lambda"), rows))
        if args.svg_dir:
            os.makedirs(args.svg_dir, exist_ok=True)
            for k in ks:
                svg = emit_svg_heatmap(fields[k], mask=outside, cell=max(2.0, 400.0 / args.resolution),
                                       title=f"Lambda_{k}(a, b)")
                with open(os.path.join(args.svg_dir, f"sweep_k{k}.svg"), "w", encoding="utf-8") as fh:
                    fh.write(svg)
    else:
        if not (1.0 <= args.a_min < args.a_max) or args.points < 2:
            raise UsageError("need 1 <= --a-min < --a-max and --points >= 2")
        aspects = np.linspace(args.a_min, args.a_max, args.points)
        spectra = _map(lambda x: ref.embedded_torus_spectrum(x, max(ks), args.n).normalized, aspects, workers)
        rows = [(float(x), k, float(spec[k])) for k in ks for x, spec in zip(aspects, spectra)]
        _output(args, lio.write_table_csv(("a", "k", "Lambda"), rows))
    return 0


# ---------------------------------------------------------------- optimize

def build_surface(spec: dict):
    kind = spec["type"]
    if kind == "sphere":
        return MeshSurface(icosphere(spec["subdivisions"]))
    if kind == "kissing-spheres":
        return MeshSurface(kissing_spheres_mesh(spec["count"], spec.get("subdivisions", 3)))
    if kind == "flat-torus":
        return GridSurface((spec["a"], spec["b"]), spec["n"])
    if kind == "flat-torus-mesh":
        p = TorusParams(spec["a"], spec["b"])
        return FlatTorusMeshSurface(torus_mesh(p, spec["n"], spec["n"]), p)
    if kind == "embedded-torus":
        return MeshSurface(embedded_torus_mesh(spec["aspect"], spec.get("n_u", 64), spec.get("n_v", 32)))
    if kind == "mesh":
        return MeshSurface(read_off(spec["path"]))
    raise ConfigError(f"unknown surface type {kind!r}")


def initial_factor(surface, init: dict, seed: int) -> np.ndarray:
    kind = init.get("kind", "constant")
    if kind == "constant":
        return init_constant(surface, init.get("value", 1.0))
    if kind == "random":
        return init_random(surface, seed, init.get("spread", 1.0))
    width = init.get("width")
    amplitude = init.get("amplitude", 4.0)
    rng = np.random.default_rng(seed)
    if isinstance(surface, GridSurface):
        x, y = surface.nodes()
        centers = init.get("centers") or rng.uniform(0, 2 * math.pi, (init.get("count", 1), 2))
        return init_periodic_gaussians(x, y, centers, width or 0.6, amplitude)
    pts = surface.nodes()
    if "centers" in init:
        centers = np.asarray(init["centers"], float)
    elif isinstance(surface, MeshSurface) and np.allclose(np.linalg.norm(pts, axis=1), 1.0, atol=1e-6):
        c = rng.standard_normal((init.get("count", 2), 3))
        centers = c / np.linalg.norm(c, axis=1, keepdims=True)
    else:
        centers = pts[rng.choice(len(pts), init.get("count", 2), replace=False)]
    return init_gaussians(pts, centers, width or 0.35, amplitude)


def _snapshot_svg(surface, omega, title):
    if isinstance(surface, GridSurface):
        return emit_svg_heatmap(omega.reshape(surface.n, surface.n), cell=6.0, title=title)
    if isinstance(surface, MeshSurface):
        pts = surface.nodes()
        if np.allclose(np.linalg.norm(pts, axis=1), 1.0, atol=1e-6):
            return emit_svg_hammer(pts, omega, title=title)
    return None


def cmd_optimize(args) -> int:
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from None
    cfg = lio.parse_run_config(text)
    out_dir = args.output_dir or cfg.output_dir
    try:
        surface = build_surface(cfg.surface)
    except (OSError, MeshError) as exc:
        raise ConfigError(f"cannot build surface: {exc}") from None
    starts = [initial_factor(surface, cfg.init, cfg.optimizer.seed + i) for i in range(cfg.starts)]
    best, runs = multistart(surface, cfg.optimizer, starts, workers=args.workers)

    os.makedirs(out_dir, exist_ok=True)
    stem = os.path.join(out_dir, cfg.experiment)
    summary = best.summary()
    summary["experiment"] = cfg.experiment
    summary["starts"] = [None if r is None else r.Lambda for r in runs]
    summary["canonicalizations"] = best.canonicalizations
    with open(stem + "_summary.json", "w", encoding="utf-8") as fh:
        fh.write(lio.dump_json(summary))
    with open(stem + "_trace.csv", "w", encoding="utf-8", newline="") as fh:
        lio.write_trace_csv(best, fh)
    with open(stem + "_omega.csv", "w", encoding="utf-8", newline="") as fh:
        lio.write_table_csv(("omega",), [(float(v),) for v in best.omega], fh)
    for it, omega in best.snapshots:
        svg = _snapshot_svg(surface, omega, f"{cfg.experiment} iteration {it}")
        if svg is not None:
            with open(f"{stem}_iter{it:05d}.svg", "w", encoding="utf-8") as fh:
                fh.write(svg)
    sys.stdout.write(lio.dump_json({k: summary[k] for k in ("Lambda", "termination", "iterations")
                                    if k in summary} | ({"a": summary["a"], "b": summary["b"]}
                                                        if "a" in summary else {})))
    return 0


# ---------------------------------------------------------------- reference

def cmd_reference(args) -> int:
    if args.k_max < 1:
        raise UsageError("--k-max must be at least 1")
    sphere = ref.sphere_spectrum(args.k_max).normalized
    header = ["k", "round_sphere", "kissing_spheres", "equilateral_plus_spheres", "flat_torus_local_max",
              "flat_torus_a", "flat_torus_b"]
    if args.embedded:
        header += ["embedded_torus_best", "embedded_torus_aspect"]
    rows = []
    for k in range(1, args.k_max + 1):
        val, p = flat_torus_local_max(k)
        row = [k, float(sphere[k]), ref.kissing_spheres(k), ref.equilateral_plus_spheres(k), val, p.a, p.b]
        if args.embedded:
            aspect, best = ref.best_embedded_torus(k)
            row += [best, aspect]
        rows.append(row)
    _output(args, lio.write_table_csv(header, rows))
    return 0


# ---------------------------------------------------------------- project

def cmd_project(args) -> int:
    mesh = icosphere(args.subdivisions)
    pts = mesh.vertices
    if args.isometric is not None:
        values = ref.sphere_isometric_factor(args.isometric, pts[:, 2])
        title = f"isometric factor, alpha = {args.isometric:g}"
    elif args.omega:
        try:
            with open(args.omega, encoding="utf-8") as fh:
                header, rows = lio.read_table_csv(fh.read())
        except OSError as exc:
            raise UsageError(f"cannot read omega file: {exc}") from None
        values = np.array([float(r[0]) for r in rows])
        if len(values) != len(pts):
            raise UsageError(f"omega file has {len(values)} values, the level-{args.subdivisions} "
                             f"sphere has {len(pts)} vertices")
        title = os.path.basename(args.omega)
    else:
        values = np.ones(len(pts))
        title = "round sphere"
    _output(args, emit_svg_hammer(pts, values, title=title))
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lbmax", description="Laplace-Beltrami spectra and conformal eigenvalue maximization.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("spectrum", help="eigenvalues of a surface as CSV")
    sp.add_argument("surface", choices=["flat-torus", "sphere", "kissing-spheres", "embedded-torus", "mesh"])
    sp.add_argument("--k", type=int, required=True, help="largest eigenvalue index")
    sp.add_argument("--a", type=float, default=0.5)
    sp.add_argument("--b", type=float, default=math.sqrt(3.0) / 2.0)
    disc = sp.add_mutually_exclusive_group()
    disc.add_argument("--grid", type=int, help="flat torus on an n x n collocation grid instead of the lattice")
    disc.add_argument("--mesh", type=int, help="flat torus on an n x n triangle mesh instead of the lattice")
    sp.add_argument("--analytic", action="store_true", help="sphere: closed form (the default)")
    sp.add_argument("--subdivisions", type=int, help="sphere / kissing spheres: icosphere level for FEM")
    sp.add_argument("--count", type=int, default=2, help="number of kissing spheres")
    sp.add_argument("--aspect", type=float, default=1.0, help="torus of revolution aspect a, R/r = a^2")
    sp.add_argument("--n", type=int, default=128, help="collocation points per mode (torus of revolution)")
    sp.add_argument("--path", help="OFF mesh file")
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_spectrum)

    sw = sub.add_parser("sweep", help="Lambda_k over flat-torus moduli or torus-of-revolution aspects")
    sw.add_argument("surface", choices=["flat-torus", "embedded-torus"])
    sw.add_argument("--k", default="1", help="comma-separated eigenvalue indices")
    sw.add_argument("--resolution", type=int, default=50)
    sw.add_argument("--b-max", type=float, default=3.0)
    sw.add_argument("--a-min", type=float, default=1.0)
    sw.add_argument("--a-max", type=float, default=4.0)
    sw.add_argument("--points", type=int, default=61)
    sw.add_argument("--n", type=int, default=96)
    sw.add_argument("--svg-dir", help="write one heatmap per k (flat torus)")
    sw.add_argument("--workers", type=int)
    sw.add_argument("-o", "--output")
    sw.set_defaults(func=cmd_sweep)

    op = sub.add_parser("optimize", help="run a maximization from a JSON config")
    op.add_argument("config")
    op.add_argument("--output-dir")
    op.add_argument("--workers", type=int)
    op.set_defaults(func=cmd_optimize)

    rf = sub.add_parser("reference", help="table of comparison values")
    rf.add_argument("--k-max", type=int, default=8)
    rf.add_argument("--embedded", action="store_true", help="include the best torus of revolution (slower)")
    rf.add_argument("-o", "--output")
    rf.set_defaults(func=cmd_reference)

    pj = sub.add_parser("project", help="Hammer projection of a sphere conformal factor as SVG")
    pj.add_argument("--subdivisions", type=int, default=3)
    src = pj.add_mutually_exclusive_group()
    src.add_argument("--isometric", type=float, help="Moebius dilation parameter alpha")
    src.add_argument("--omega", help="CSV with one omega value per vertex (as written by optimize)")
    pj.add_argument("-o", "--output")
    pj.set_defaults(func=cmd_project)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"lbmax: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"lbmax: error: {exc}", file=sys.stderr)
        return 2
    except (EigenSolverError, CanonicalizationError, FloatingPointError) as exc:
        print(f"lbmax: numerical failure: {exc}", file=sys.stderr)
        return 1
    except (ValueError, MeshError, OSError) as exc:
        print(f"lbmax: error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"lbmax: numerical failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
