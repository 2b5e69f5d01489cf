"""Serialization: spectrum and sweep CSV files, optimizer traces and run configs.

Numbers are written with 12 significant digits. Run configurations are JSON
documents checked against :data:`RUN_CONFIG_SCHEMA`; unknown keys are errors.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, fields

import jsonschema
import numpy as np

from .gradients import gap_threshold
from .optimizer import ConfigError, OptimConfig, OptimRun

SPECTRUM_HEADER = ("k", "lambda", "Lambda", "multiplicity_note")
TRACE_HEADER = ("iteration", "outer", "Lambda", "objective", "grad_norm", "mu", "step", "a", "b", "simple")


def fmt(x: float) -> str:
    """Decimal text with 12 significant digits."""
    return f"{float(x):.12g}"


@dataclass(frozen=True)
class SpectrumRow:
    k: int
    lam: float
    Lambda: float
    note: str = ""


def multiplicity_notes(values) -> list[str]:
    """``"mult m"`` for members of numerically repeated eigenvalues, ``""`` otherwise."""
    values = np.asarray(values, dtype=float)
    notes = [""] * len(values)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[j + 1] - values[j] <= gap_threshold(values[j]):
            j += 1
        if j > i:
            for t in range(i, j + 1):
                notes[t] = f"mult {j - i + 1}"
        i = j + 1
    return notes


def spectrum_rows(lam, volume: float, notes=None) -> list[SpectrumRow]:
    """Rows for eigenvalues ``lam`` of a surface of the given volume."""
    lam = np.asarray(lam, dtype=float)
    if notes is None:
        notes = multiplicity_notes(lam)
    return [SpectrumRow(k, float(v), float(v * volume), notes[k]) for k, v in enumerate(lam)]


def write_spectrum_csv(rows, stream=None) -> str:
    """Write rows (ascending ``k``) as CSV; returns the text and writes it to ``stream`` if given."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SPECTRUM_HEADER)
    last = -1
    for r in rows:
        if r.k <= last:
            raise ValueError("spectrum rows must be strictly ascending in k")
        last = r.k
        w.writerow((r.k, fmt(r.lam), fmt(r.Lambda), r.note))
    text = buf.getvalue()
    if stream is not None:
        stream.write(text)
    return text


def read_spectrum_csv(text: str) -> list[SpectrumRow]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if tuple(header or ()) != SPECTRUM_HEADER:
        raise ValueError(f"unexpected spectrum header {header!r}")
    return [SpectrumRow(int(k), float(lam), float(Lam), note) for k, lam, Lam, note in reader]


def write_table_csv(header, rows, stream=None) -> str:
    """Generic CSV with floats at 12 significant digits; ``None`` becomes an empty cell."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    text = buf.getvalue()
    if stream is not None:
        stream.write(text)
    return text


def read_table_csv(text: str) -> tuple[list[str], list[list[str]]]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    return header, [row for row in reader]


def write_trace_csv(run: OptimRun, stream=None) -> str:
    rows = [(h.iteration, h.outer, h.Lambda, h.objective, h.grad_norm, h.mu, h.step, h.a, h.b, int(h.simple))
            for h in run.history]
    return write_table_csv(TRACE_HEADER, rows, stream)


# ---------------------------------------------------------------- run configuration

_OPTIM_KEYS = {
    "k": {"type": "integer", "minimum": 1},
    "omega_lo": {"type": "number", "exclusiveMinimum": 0},
    "omega_hi": {"type": "number", "exclusiveMinimum": 0},
    "barrier_mu": {"type": "number", "minimum": 0},
    "barrier_decay": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
    "wolfe_c1": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
    "wolfe_c2": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
    "grad_tol": {"type": "number", "exclusiveMinimum": 0},
    "max_outer": {"type": "integer", "minimum": 1},
    "max_inner": {"type": "integer", "minimum": 0},
    "vary_moduli": {"type": "boolean"},
    "seed": {"type": "integer"},
    "snapshot_every": {"type": "integer", "minimum": 1},
    "max_line_search": {"type": "integer", "minimum": 1},
    "cluster_gradient": {"enum": ["own", "mean"]},
    "relative_seed": {"type": "boolean"},
}


def _surface_variant(kind: str, props: dict, required: list[str]) -> dict:
    return {
        "type": "object",
        "properties": {"type": {"const": kind}, **props},
        "required": ["type", *required],
        "additionalProperties": False,
    }


_POS = {"type": "number", "exclusiveMinimum": 0}
_LEVEL = {"type": "integer", "minimum": 0, "maximum": 7}
_EVEN = {"type": "integer", "minimum": 4, "multipleOf": 2}

RUN_CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "lbmax run configuration",
    "type": "object",
    "properties": {
        "experiment": {"type": "string"},
        "output_dir": {"type": "string"},
        "surface": {
            "oneOf": [
                _surface_variant("sphere", {"subdivisions": _LEVEL}, ["subdivisions"]),
                _surface_variant("kissing-spheres", {"count": {"type": "integer", "minimum": 1},
                                                     "subdivisions": _LEVEL}, ["count"]),
                _surface_variant("flat-torus", {"a": {"type": "number"}, "b": _POS, "n": _EVEN},
                                 ["a", "b", "n"]),
                _surface_variant("flat-torus-mesh", {"a": {"type": "number"}, "b": _POS,
                                                     "n": {"type": "integer", "minimum": 3}},
                                 ["a", "b", "n"]),
                _surface_variant("embedded-torus", {"aspect": {"type": "number", "minimum": 1},
                                                    "n_u": {"type": "integer", "minimum": 3},
                                                    "n_v": {"type": "integer", "minimum": 3}},
                                 ["aspect"]),
                _surface_variant("mesh", {"path": {"type": "string"}}, ["path"]),
            ]
        },
        "init": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["constant", "random", "gaussians"]},
                "spread": _POS,
                "value": _POS,
                "centers": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
                "count": {"type": "integer", "minimum": 1},
                "width": _POS,
                "amplitude": {"type": "number", "minimum": 0},
            },
            "required": ["kind"],
            "additionalProperties": False,
        },
        "starts": {"type": "integer", "minimum": 1},
        "optimizer": {"type": "object", "properties": _OPTIM_KEYS, "additionalProperties": False},
    },
    "required": ["surface", "optimizer"],
    "additionalProperties": False,
}


@dataclass(frozen=True)
class RunConfig:
    surface: dict
    optimizer: OptimConfig
    init: dict
    starts: int = 1
    experiment: str = "run"
    output_dir: str = "."


def parse_run_config(doc) -> RunConfig:
    """Validate a JSON document (text or parsed) and build a :class:`RunConfig`.

    Raises :class:`ConfigError` for schema violations and for settings the
    schema cannot express, such as ``omega_lo >= omega_hi``.
    """
    if isinstance(doc, (str, bytes)):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
    try:
        jsonschema.validate(doc, RUN_CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"schema error at {where}: {exc.message}") from None
    opt = dict(doc["optimizer"])
    if opt.get("omega_lo", 1e-3) >= opt.get("omega_hi", 1e3):
        raise ConfigError("schema error at optimizer: omega_lo must be smaller than omega_hi")
    if doc["surface"]["type"] not in ("flat-torus", "flat-torus-mesh") and opt.get("vary_moduli"):
        raise ConfigError("schema error at optimizer/vary_moduli: needs a flat-torus surface")
    config = OptimConfig(**opt)  # remaining invariants are checked by OptimConfig itself
    return RunConfig(
        surface=dict(doc["surface"]),
        optimizer=config,
        init=dict(doc.get("init", {"kind": "constant"})),
        starts=int(doc.get("starts", 1)),
        experiment=doc.get("experiment", "run"),
        output_dir=doc.get("output_dir", "."),
    )


def run_config_to_dict(cfg: RunConfig) -> dict:
    """Inverse of :func:`parse_run_config`, with every optimizer field spelled out."""
    opt = asdict(cfg.optimizer)
    return {
        "experiment": cfg.experiment,
        "output_dir": cfg.output_dir,
        "surface": dict(cfg.surface),
        "init": dict(cfg.init),
        "starts": cfg.starts,
        "optimizer": {f.name: opt[f.name] for f in fields(OptimConfig)},
    }


def dump_json(obj) -> str:
    """Deterministic JSON text (sorted keys, fixed indentation, trailing newline)."""
    return json.dumps(obj, sort_keys=True, indent=2, default=_json_default) + "\n"


def _json_default(x):
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, tuple):
        return list(x)
    raise TypeError(f"cannot serialize {type(x).__name__}")
