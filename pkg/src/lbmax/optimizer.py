"""Maximization of normalized eigenvalues over conformal factors and flat moduli.

The objective is ``Lambda_k + mu * barrier(omega)``, where the log barrier
keeps ``omega`` strictly inside ``[omega_lo, omega_hi]`` and ``mu`` shrinks by
``barrier_decay`` after every outer round. Each round runs BFGS with a weak
Wolfe line search (bisection and doubling). The inverse-Hessian seed is the
inverse of the node measure, so search directions are resolution-independent
densities.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.linalg import blas

from .eigensolve import EigenResult, EigenSolverError
from .gradients import eigen_gradient
from .lattice import TorusParams
from .moduli import CanonicalizationError, contains, reduce_with_moves
from .parallel import worker_count
from .spectral import transport_factor
from .surfaces import FlatTorusMeshSurface, GridSurface, Surface

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Invalid optimizer configuration."""


@dataclass(frozen=True)
class OptimConfig:
    """Settings of one constrained maximization run."""

    k: int = 1
    omega_lo: float = 1e-3
    omega_hi: float = 1e3
    barrier_mu: float = 1e-4
    barrier_decay: float = 0.1
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    grad_tol: float = 1e-3
    max_outer: int = 3
    max_inner: int = 200
    vary_moduli: bool = False
    seed: int = 0
    snapshot_every: int = 10
    max_line_search: int = 40
    cluster_gradient: str = "own"
    relative_seed: bool = True

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("k must be at least 1")
        if not (0 < self.omega_lo < self.omega_hi):
            raise ConfigError("need 0 < omega_lo < omega_hi")
        if not (0 < self.wolfe_c1 < self.wolfe_c2 < 1):
            raise ConfigError("need 0 < wolfe_c1 < wolfe_c2 < 1")
        if not (0 < self.barrier_decay < 1):
            raise ConfigError("barrier_decay must lie in (0, 1)")
        if self.barrier_mu < 0 or self.grad_tol <= 0:
            raise ConfigError("barrier_mu must be non-negative and grad_tol positive")
        if self.cluster_gradient not in ("own", "mean"):
            raise ConfigError("cluster_gradient must be 'own' or 'mean'")
        if self.max_outer < 1 or self.max_inner < 0 or self.snapshot_every < 1:
            raise ConfigError("iteration counts must be positive")


@dataclass
class IterRecord:
    iteration: int
    outer: int
    Lambda: float
    objective: float
    grad_norm: float
    mu: float
    step: float
    a: float | None = None
    b: float | None = None
    simple: bool = True


@dataclass
class OptimRun:
    """Configuration, trajectory and outcome of one maximization."""

    config: OptimConfig
    history: list[IterRecord] = field(default_factory=list)
    snapshots: list[tuple[int, np.ndarray]] = field(default_factory=list)
    omega: np.ndarray | None = None
    params: TorusParams | None = None
    final: EigenResult | None = None
    termination: str = ""
    canonicalizations: list[dict] = field(default_factory=list)
    evaluations: int = 0

    @property
    def Lambda(self) -> float:
        return float(self.final.normalized[self.config.k])

    def summary(self) -> dict:
        out = {
            "k": self.config.k,
            "Lambda": self.Lambda,
            "termination": self.termination,
            "iterations": len(self.history) - 1 if self.history else 0,
            "evaluations": self.evaluations,
            "omega_min": float(self.omega.min()),
            "omega_max": float(self.omega.max()),
            "config": asdict(self.config),
        }
        if self.params is not None:
            out["a"], out["b"] = self.params.a, self.params.b
        return out


# ---------------------------------------------------------------- barrier

def _weights(omega, measure):
    if measure is None:
        return np.full(len(omega), 1.0 / len(omega))
    m = np.asarray(measure, dtype=float)
    return m / m.sum()


def barrier_value(omega, lo: float, hi: float, measure=None) -> float:
    """``sum(weights * [log(omega - lo) + log(hi - omega)])`` with weights summing to 1.

    Returns ``-inf`` if any value touches or leaves the box.
    """
    omega = np.asarray(omega, dtype=float)
    if not (np.all(omega > lo) and np.all(omega < hi)):
        return -math.inf
    w = _weights(omega, measure)
    return float(np.sum(w * (np.log(omega - lo) + np.log(hi - omega))))


def barrier_gradient(omega, lo: float, hi: float, measure=None) -> np.ndarray:
    """Gradient of :func:`barrier_value` with respect to the nodal values."""
    omega = np.asarray(omega, dtype=float)
    w = _weights(omega, measure)
    return w * (1.0 / (omega - lo) - 1.0 / (hi - omega))


def barrier_objective(Lambda_k: float, omega, config: OptimConfig, mu: float, measure=None) -> float:
    """Barrier-augmented objective ``Lambda_k + mu * barrier``; ``mu = 0`` gives ``Lambda_k``."""
    if mu == 0:
        return float(Lambda_k)
    val = barrier_value(omega, config.omega_lo, config.omega_hi, measure)
    return float(Lambda_k + mu * val) if math.isfinite(val) else -math.inf


# ---------------------------------------------------------------- initial factors

def init_constant(surface: Surface, value: float = 1.0) -> np.ndarray:
    return np.full(surface.size, float(value))


def init_random(surface: Surface, seed: int = 0, spread: float = 1.0) -> np.ndarray:
    """Independent log-uniform values ``exp(U(-spread, spread))`` per node."""
    rng = np.random.default_rng(seed)
    return np.exp(rng.uniform(-spread, spread, surface.size))


def sphere_points(count: int) -> np.ndarray:
    """Nearly equidistributed unit vectors (Fibonacci lattice)."""
    i = np.arange(count) + 0.5
    z = 1 - 2 * i / count
    phi = math.pi * (1 + math.sqrt(5)) * i
    r = np.sqrt(1 - z * z)
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def init_gaussians(points: np.ndarray, centers: np.ndarray, width: float = 0.35,
                   amplitude: float = 4.0, base: float = 1.0) -> np.ndarray:
    """``base + amplitude * sum_c exp(-|x - c|^2 / (2 width^2))`` at each point."""
    P = np.asarray(points, float)
    C = np.atleast_2d(np.asarray(centers, float))
    d2 = ((P[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)
    return base + amplitude * np.exp(-d2 / (2 * width * width)).sum(axis=1)


def init_periodic_gaussians(x: np.ndarray, y: np.ndarray, centers, width: float = 0.6,
                            amplitude: float = 4.0, base: float = 1.0) -> np.ndarray:
    """Gaussian bumps on the periodic square [0, 2 pi)^2 using wrapped distance."""
    out = np.full(len(x), base, dtype=float)
    for cx, cy in np.atleast_2d(centers):
        dx = np.angle(np.exp(1j * (x - cx)))
        dy = np.angle(np.exp(1j * (y - cy)))
        out += amplitude * np.exp(-(dx * dx + dy * dy) / (2 * width * width))
    return out


# ---------------------------------------------------------------- the run

class _Problem:
    """Objective evaluation in the variable vector ``[omega, (a, b)]``."""

    def __init__(self, surface: Surface, config: OptimConfig):
        self.surface = surface
        self.config = config
        self.moduli = config.vary_moduli
        self.evaluations = 0
        self.warned_multiple = False
        self._cache: dict[bytes, tuple] = {}

    def split(self, z):
        if self.moduli:
            return z[:-2], TorusParams(float(z[-2]), float(z[-1])) if z[-1] > 0 else None
        return z, self.surface.params

    def surface_for(self, params) -> Surface:
        if not self.moduli or params == self.surface.params:
            return self.surface
        return self.surface.with_params(params)

    def metric_weights(self) -> np.ndarray:
        """Diagonal of the inverse-Hessian seed: inverse normalized node measure."""
        m = self.surface.measure / self.surface.measure.sum()
        w = 1.0 / m
        return np.concatenate([w, [1.0, 1.0]]) if self.moduli else w

    def evaluate(self, z, mu):
        """Return ``(f, grad, Lambda, result, gradient_info)`` with ``f = -objective``."""
        key = z.tobytes() + np.float64(mu).tobytes()
        if key in self._cache:
            return self._cache[key]
        omega, params = self.split(z)
        cfg = self.config
        if (self.moduli and params is None) or not (np.all(omega > cfg.omega_lo) and np.all(omega < cfg.omega_hi)):
            out = (math.inf, None, None, None, None)
            self._cache = {key: out}
            return out
        surf = self.surface_for(params)
        res = surf.solve_cluster(omega, cfg.k)
        self.evaluations += 1
        g = eigen_gradient(surf, res, cfg.k, with_moduli=self.moduli, cluster_mode=cfg.cluster_gradient,
                           warn=False)
        if not g.simple and not self.warned_multiple:
            log.warning("eigenvalue %d is not simple (cluster %s); further occurrences in this run "
                        "are recorded in the trace only", cfg.k, list(g.cluster))
            self.warned_multiple = True
        Lam = float(res.normalized[cfg.k])
        obj = barrier_objective(Lam, omega, cfg, mu, surf.measure)
        grad_omega = surf.measure * g.d_omega_normalized
        if mu:
            grad_omega = grad_omega + mu * barrier_gradient(omega, cfg.omega_lo, cfg.omega_hi, surf.measure)
        grad = np.concatenate([grad_omega, [g.d_a_normalized, g.d_b_normalized]]) if self.moduli else grad_omega
        out = (-obj, -grad, Lam, res, g)
        self._cache = {key: out}
        return out


def _grad_norm(grad, hinv_diag) -> float:
    return float(np.sqrt(np.sum(grad * grad * hinv_diag)))


def _wolfe_search(problem, z, f0, g0, d, mu, c1, c2, max_steps):
    """Weak Wolfe line search by bisection and doubling; returns ``(t, z_new, eval)`` or None."""
    slope = float(g0 @ d)
    if not slope < 0:
        return None
    lo, hi = 0.0, math.inf
    t = 1.0
    for _ in range(max_steps):
        zt = z + t * d
        ev = problem.evaluate(zt, mu)
        ft, gt = ev[0], ev[1]
        if not math.isfinite(ft) or ft > f0 + c1 * t * slope:
            hi = t
        elif float(gt @ d) < c2 * slope:
            lo = t
        else:
            return t, zt, ev
        t = 0.5 * (lo + hi) if math.isfinite(hi) else 2.0 * lo
    return None


def _transport_state(problem: _Problem, omega, params: TorusParams):
    """Move a factor and parameters into the fundamental domain, keeping the spectrum."""
    red = reduce_with_moves(params)
    surf = problem.surface
    if isinstance(surf, GridSurface):
        n = surf.n
    elif isinstance(surf, FlatTorusMeshSurface) and surf.mesh.grid_shape and \
            surf.mesh.grid_shape[0] == surf.mesh.grid_shape[1]:
        n = surf.mesh.grid_shape[0]
    else:
        raise CanonicalizationError("this surface cannot carry its factor through moduli moves")
    for move, amount in red.moves:
        omega = transport_factor(omega, n, move, amount if move == "shift" else 1)
    return omega, red.params


def _bfgs_update(H, s, y):
    """Inverse BFGS update in place; ``H`` is Fortran-ordered so BLAS can overwrite it."""
    sy = float(s @ y)
    if sy <= 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
        return H, False
    rho = 1.0 / sy
    Hy = H @ y
    yHy = float(y @ Hy)
    # H + (rho^2 yHy + rho) s s^T - rho (Hy s^T + s Hy^T) as two rank-one updates
    H = blas.dger(1.0, s, (rho * rho * yHy + rho) * s - rho * Hy, a=H, overwrite_a=True)
    H = blas.dger(-rho, Hy, s, a=H, overwrite_a=True)
    return H, True


def _run(surface: Surface, config: OptimConfig, omega0) -> OptimRun:
    cfg = config
    if cfg.vary_moduli and not surface.has_moduli:
        raise ConfigError("vary_moduli needs a flat-torus surface")
    omega0 = np.asarray(omega0, dtype=float).copy()
    if omega0.shape != (surface.size,):
        raise ConfigError(f"initial factor needs {surface.size} values")
    if not (np.all(omega0 > cfg.omega_lo) and np.all(omega0 < cfg.omega_hi)):
        raise ConfigError("initial factor must lie strictly inside the box")
    if cfg.vary_moduli and not contains(surface.params):
        raise ConfigError("initial moduli must lie in the fundamental domain")

    run = OptimRun(config=cfg)
    problem = _Problem(surface, cfg)
    z = np.concatenate([omega0, [surface.params.a, surface.params.b]]) if cfg.vary_moduli else omega0
    mu = cfg.barrier_mu
    it = 0
    termination = "max_iterations"

    f, g, Lam, res, info = problem.evaluate(z, mu)
    if g is None:
        raise ConfigError("initial point is infeasible")

    def record(step, outer):
        omega, params = problem.split(z)
        run.history.append(IterRecord(
            iteration=it, outer=outer, Lambda=Lam, objective=-f, grad_norm=_grad_norm(g, hdiag),
            mu=mu, step=step,
            a=params.a if cfg.vary_moduli else None, b=params.b if cfg.vary_moduli else None,
            simple=info.simple,
        ))
        if it % cfg.snapshot_every == 0:
            run.snapshots.append((it, omega.copy()))

    hdiag = problem.metric_weights()
    record(0.0, 0)
    for outer in range(cfg.max_outer):
        if outer:
            mu *= cfg.barrier_decay
            f, g, Lam, res, info = problem.evaluate(z, mu)
        hdiag = problem.metric_weights()
        H = None
        failures = 0
        converged = False
        for _ in range(cfg.max_inner):
            if _grad_norm(g, hdiag) <= cfg.grad_tol:
                converged = True
                break
            if H is None:
                # seed scaled so the first trial step changes omega by about 10%
                omega_now, _ = problem.split(z)
                seed = hdiag.copy()
                if cfg.relative_seed:
                    seed[: surface.size] *= omega_now ** 2
                d0 = seed * g
                scale = 0.1 / max(float(np.max(np.abs(d0[: surface.size]) / omega_now)), 1e-300)
                H = np.asfortranarray(np.diag(seed * scale))
                fresh = True
            d = -H @ g
            found = _wolfe_search(problem, z, f, g, d, mu, cfg.wolfe_c1, cfg.wolfe_c2, cfg.max_line_search)
            if found is None:
                failures += 1
                log.info("line search failed (%d in a row)", failures)
                H = None
                if failures >= 2:
                    termination = "line_search_failure"
                    break
                continue
            failures = 0
            t, z_new, ev = found
            s = z_new - z
            y = ev[1] - g
            if fresh:
                # Shanno scaling of the seed before the first update
                Hy = H @ y
                gamma = float(s @ y) / float(y @ Hy) if float(y @ Hy) > 0 else 1.0
                if gamma > 0:
                    H *= gamma
            H, _ = _bfgs_update(H, s, y)
            fresh = False
            z = z_new
            f, g, Lam, res, info = ev
            it += 1

            if cfg.vary_moduli:
                omega, params = problem.split(z)
                if not contains(params):
                    before = Lam
                    omega2, params2 = _transport_state(problem, omega, params)
                    problem.surface = problem.surface.with_params(params2)
                    problem._cache = {}
                    z = np.concatenate([omega2, [params2.a, params2.b]])
                    f, g, Lam, res, info = problem.evaluate(z, mu)
                    run.canonicalizations.append({
                        "iteration": it, "from": (params.a, params.b), "to": (params2.a, params2.b),
                        "Lambda_before": before, "Lambda_after": Lam,
                        "relative_change": abs(Lam - before) / abs(before),
                    })
                    H = None  # the coordinates changed; restart the curvature model
                else:
                    problem.surface = problem.surface_for(params)
                hdiag = problem.metric_weights()
            record(t, outer)
        else:
            converged = _grad_norm(g, hdiag) <= cfg.grad_tol
        if termination == "line_search_failure":
            break
        if converged:
            termination = "converged"
            # a small gradient of Lambda itself means smaller barrier weights change nothing
            omega, _ = problem.split(z)
            lam_grad = g.copy()
            if mu:
                lam_grad[: surface.size] += mu * barrier_gradient(
                    omega, cfg.omega_lo, cfg.omega_hi, problem.surface.measure)
            if _grad_norm(lam_grad, hdiag) <= cfg.grad_tol:
                break
        else:
            termination = "max_iterations"

    omega, params = problem.split(z)
    run.omega = omega.copy()
    run.params = params
    run.final = res
    run.termination = termination
    run.evaluations = problem.evaluations
    if not run.snapshots or run.snapshots[-1][0] != it:
        run.snapshots.append((it, omega.copy()))
    return run


def maximize_conformal(surface: Surface, config: OptimConfig, omega0=None) -> OptimRun:
    """Maximize ``Lambda_k`` over the conformal factor on a fixed surface.

    Starts from ``omega0`` (default: constant 1). Accepted steps never lower
    the barrier-augmented objective, and all iterates stay inside the box.
    """
    if config.vary_moduli:
        config = replace(config, vary_moduli=False)
    if omega0 is None:
        omega0 = init_constant(surface)
    return _run(surface, config, omega0)


def maximize_moduli(surface: Surface, config: OptimConfig, omega0=None) -> OptimRun:
    """Jointly maximize ``Lambda_k`` over the conformal factor and the flat moduli (a, b).

    After every accepted step that leaves the fundamental domain, (a, b) is
    reduced back into it and the factor is carried along.
    """
    if not config.vary_moduli:
        config = replace(config, vary_moduli=True)
    if omega0 is None:
        omega0 = init_constant(surface)
    return _run(surface, config, omega0)


def multistart(surface: Surface, config: OptimConfig, starts: list[np.ndarray], *,
               moduli_starts: list | None = None, workers: int | None = None) -> tuple[OptimRun, list[OptimRun]]:
    """Run one maximization per starting factor and return ``(best, all_runs)``.

    ``moduli_starts`` optionally gives a starting (a, b) per run. Runs are
    independent, so they are spread over ``workers`` threads (default from
    ``LBMAX_THREADS``); results are returned in input order.
    """
    def one(i):
        surf = surface
        if moduli_starts is not None:
            surf = surface.with_params(moduli_starts[i])
        cfg = replace(config, seed=config.seed + i)
        fn = maximize_moduli if config.vary_moduli else maximize_conformal
        try:
            return fn(surf, cfg, starts[i])
        except EigenSolverError as exc:
            log.warning("start %d failed: %s", i, exc)
            return None

    n_workers = worker_count(workers)
    if n_workers > 1:
        with ThreadPoolExecutor(n_workers) as pool:
            runs = list(pool.map(one, range(len(starts))))
    else:
        runs = [one(i) for i in range(len(starts))]
    ok = [r for r in runs if r is not None]
    if not ok:
        raise EigenSolverError("every start failed")
    best = max(ok, key=lambda r: r.Lambda)
    return best, runs
