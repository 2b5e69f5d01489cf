import io as stdio
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lbmax.io import (
    RUN_CONFIG_SCHEMA, SPECTRUM_HEADER, SpectrumRow, dump_json, fmt, multiplicity_notes, parse_run_config,
    read_spectrum_csv, read_table_csv, run_config_to_dict, spectrum_rows, write_spectrum_csv, write_table_csv,
    write_trace_csv,
)
from lbmax.optimizer import ConfigError, OptimConfig, OptimRun, IterRecord

finite = st.floats(-1e12, 1e12, allow_nan=False, allow_infinity=False)


def test_number_format():
    assert fmt(math.pi) == "3.14159265359"
    assert fmt(0.0) == "0"
    assert fmt(1e-20) == "1e-20"


def test_multiplicity_notes():
    assert multiplicity_notes([0.0, 1.0, 1.0, 2.0, 3.0, 3.0, 3.0]) == [
        "", "mult 2", "mult 2", "", "mult 3", "mult 3", "mult 3"]
    assert multiplicity_notes([]) == []


def test_spectrum_csv_layout():
    rows = spectrum_rows([0.0, 2.0, 2.0], 4 * math.pi)
    text = write_spectrum_csv(rows)
    lines = text.splitlines()
    assert lines[0] == ",".join(SPECTRUM_HEADER)
    assert lines[1] == "0,0,0,"
    assert lines[2] == "1,2,25.1327412287,mult 2"
    buf = stdio.StringIO()
    write_spectrum_csv(rows, buf)
    assert buf.getvalue() == text


def test_spectrum_rows_must_ascend():
    with pytest.raises(ValueError):
        write_spectrum_csv([SpectrumRow(1, 1.0, 1.0), SpectrumRow(1, 2.0, 2.0)])
    with pytest.raises(ValueError):
        read_spectrum_csv("k,lam\n")


@given(st.lists(st.tuples(finite, finite, st.text(alphabet="abc ,;\"=()", max_size=8)), max_size=20))
def test_spectrum_round_trip(items):
    rows = [SpectrumRow(k, float(fmt(lam)), float(fmt(Lam)), note) for k, (lam, Lam, note) in enumerate(items)]
    assert read_spectrum_csv(write_spectrum_csv(rows)) == rows


@given(st.lists(st.tuples(finite, st.integers(-100, 100)), max_size=20))
def test_table_round_trip(items):
    text = write_table_csv(("x", "n"), [(float(x), n) for x, n in items])
    header, rows = read_table_csv(text)
    assert header == ["x", "n"]
    assert [(float(a), int(b)) for a, b in rows] == [(float(fmt(x)), n) for x, n in items]
    assert write_table_csv(("x", "n"), [(float(a), int(b)) for a, b in rows]) == text


def test_trace_csv():
    run = OptimRun(OptimConfig())
    run.history = [IterRecord(0, 0, 25.0, 25.1, 0.5, 1e-4, 0.0), IterRecord(1, 0, 25.1, 25.2, 0.1, 1e-4, 1.0)]
    header, rows = read_table_csv(write_trace_csv(run))
    assert header[:3] == ["iteration", "outer", "Lambda"]
    assert rows[1][:3] == ["1", "0", "25.1"] and rows[1][7] == ""


def base_config():
    return {
        "experiment": "demo",
        "surface": {"type": "sphere", "subdivisions": 2},
        "init": {"kind": "random", "spread": 0.5},
        "starts": 2,
        "optimizer": {"k": 1, "max_inner": 5},
    }


def test_parse_run_config():
    cfg = parse_run_config(json.dumps(base_config()))
    assert cfg.optimizer.k == 1 and cfg.optimizer.max_inner == 5 and cfg.starts == 2
    assert cfg.surface == {"type": "sphere", "subdivisions": 2}
    again = parse_run_config(run_config_to_dict(cfg))
    assert again == cfg


@pytest.mark.parametrize("mutate, where", [
    (lambda d: d.update(extra=1), "<root>"),
    (lambda d: d["optimizer"].update(bogus=1), "optimizer"),
    (lambda d: d["surface"].update(type="cube"), "surface"),
    (lambda d: d.update(surface={"type": "flat-torus", "a": 0.5, "b": 0.9, "n": 7}), "surface"),
    (lambda d: d["optimizer"].update(omega_lo=2.0, omega_hi=1.0), "optimizer"),
    (lambda d: d["optimizer"].update(vary_moduli=True), "optimizer/vary_moduli"),
    (lambda d: d["init"].update(kind="spiral"), "init/kind"),
    (lambda d: d.pop("optimizer"), "<root>"),
])
def test_schema_errors(mutate, where):
    doc = base_config()
    mutate(doc)
    with pytest.raises(ConfigError, match="schema error at " + where):
        parse_run_config(doc)


def test_bad_json():
    with pytest.raises(ConfigError, match="not valid JSON"):
        parse_run_config("{")


def test_optimizer_schema_covers_config_fields():
    from dataclasses import fields
    keys = set(RUN_CONFIG_SCHEMA["properties"]["optimizer"]["properties"])
    assert keys == {f.name for f in fields(OptimConfig)}


def test_dump_json_is_deterministic():
    obj = {"b": np.float64(1.5), "a": (np.int64(2), np.array([1.0, 2.0]))}
    text = dump_json(obj)
    assert text == '{\n  "a": [\n    2,\n    [\n      1.0,\n      2.0\n    ]\n  ],\n  "b": 1.5\n}\n'
    assert json.loads(text) == {"a": [2, [1.0, 2.0]], "b": 1.5}
    with pytest.raises(TypeError):
        dump_json({"x": object()})


@given(st.dictionaries(st.text(max_size=5), st.one_of(finite, st.integers(), st.text(max_size=5)), max_size=8))
def test_json_round_trip(obj):
    assert json.loads(dump_json(obj)) == obj
