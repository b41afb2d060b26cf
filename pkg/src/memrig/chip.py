"""Chip profile documents and fixture construction.

A chip profile is a JSON object::

    {
      "rows": 12, "cols": 7,
      "default_profile": "stable",
      "seed": 1234,
      "overrides": [
        {"sl": 5, "bl": 2, "profile": "unstable", "n_cmax": 100},
        {"sl": 0, "bl": 0, "resistor_ohms": 10000}
      ]
    }

``profile`` selects the parameter means a cell is drawn around; any other
``CellParams`` field in an override replaces the drawn value verbatim.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np

from .device import PROFILES, CellParams, FixedResistor, ParameterError, create_cell, draw_params
from .frontend import COLS, GAIN_ERROR_BOUND, ROWS, CrossbarFixture

_PARAM_FIELDS = {f.name for f in dataclasses.fields(CellParams)} - {"transistor"}
_OVERRIDE_KEYS = _PARAM_FIELDS | {"sl", "bl", "profile", "resistor_ohms"}

DEFAULT_CHIP = {"rows": ROWS, "cols": COLS, "default_profile": "stable", "seed": 0, "overrides": []}


def load_chip_profile(path: str | Path) -> dict:
    with open(path) as fh:
        return validate_chip_profile(json.load(fh))


def validate_chip_profile(doc: dict) -> dict:
    if not isinstance(doc, dict):
        raise ParameterError("chip profile must be a JSON object")
    chip = {**DEFAULT_CHIP, **doc}
    if chip["rows"] != ROWS or chip["cols"] != COLS:
        raise ParameterError(f"only the {ROWS}x{COLS} pseudo crossbar is supported")
    if chip["default_profile"] not in PROFILES:
        raise ParameterError(f"unknown profile {chip['default_profile']!r}")
    if not isinstance(chip["seed"], int) or chip["seed"] < 0:
        raise ParameterError("seed must be a non-negative integer")
    seen = set()
    for ov in chip["overrides"]:
        unknown = set(ov) - _OVERRIDE_KEYS
        if unknown:
            raise ParameterError(f"unknown override keys {sorted(unknown)}")
        addr = (ov.get("sl"), ov.get("bl"))
        if not (isinstance(addr[0], int) and isinstance(addr[1], int)) or not (0 <= addr[0] < ROWS and 0 <= addr[1] < COLS):
            raise ParameterError(f"override address {addr} outside the array")
        if addr in seen:
            raise ParameterError(f"duplicate override for cell {addr}")
        seen.add(addr)
        if ov.get("profile", chip["default_profile"]) not in PROFILES:
            raise ParameterError(f"unknown profile {ov['profile']!r}")
    return chip


def _cell_seed(seed: int, stream: int, sl: int, bl: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, stream, sl, bl])


def cell_params(chip: dict, sl: int, bl: int) -> CellParams:
    ov = next((o for o in chip["overrides"] if o["sl"] == sl and o["bl"] == bl), {})
    rng = np.random.default_rng(_cell_seed(chip["seed"], 0, sl, bl))
    params = draw_params(ov.get("profile", chip["default_profile"]), rng)
    explicit = {k: v for k, v in ov.items() if k in _PARAM_FIELDS}
    return dataclasses.replace(params, **explicit) if explicit else params


def build_fixture(chip: dict | None = None, seed: int | None = None) -> CrossbarFixture:
    """Instantiate every cell of a chip profile; ``seed`` overrides the document's seed."""
    chip = validate_chip_profile(chip or {})
    if seed is not None:
        chip = {**chip, "seed": seed}
    overrides = {(o["sl"], o["bl"]): o for o in chip["overrides"]}
    cells = []
    for sl in range(ROWS):
        row = []
        for bl in range(COLS):
            ov = overrides.get((sl, bl), {})
            if "resistor_ohms" in ov:
                row.append(FixedResistor(float(ov["resistor_ohms"])))
                continue
            run_seed = int(_cell_seed(chip["seed"], 1, sl, bl).generate_state(1, np.uint64)[0])
            row.append(create_cell(cell_params(chip, sl, bl), run_seed))
        cells.append(row)
    gain_rng = np.random.default_rng(np.random.SeedSequence([chip["seed"], 2]))
    gain_error = float(gain_rng.uniform(-GAIN_ERROR_BOUND, GAIN_ERROR_BOUND))
    return CrossbarFixture(cells, gain_error=gain_error)
