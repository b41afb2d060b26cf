import dataclasses

import numpy as np
import pytest

from memrig.chip import build_fixture
from memrig.client import LoopbackTransport, MemrigClient
from memrig.device import CellParams, CellState, FixedResistor, Phase
from memrig.firmware import setup
from memrig.frontend import COLS, ROWS, CrossbarFixture


def formed_cell(x=0.0, seed=0, **overrides) -> CellState:
    """Noise-free formed cell at filament strength ``x``."""
    params = dataclasses.replace(CellParams().noiseless(), **overrides)
    return CellState(params, np.random.default_rng(seed), phase=Phase.FORMED, x=x)


def resistor_grid(ohms=10e3):
    return [[FixedResistor(ohms) for _ in range(COLS)] for _ in range(ROWS)]


def fixture_with(cell, sl=0, bl=0, gain_error=0.0) -> CrossbarFixture:
    cells = resistor_grid()
    cells[sl][bl] = cell
    return CrossbarFixture(cells, gain_error=gain_error)


def loopback_client(chip=None, seed=0) -> MemrigClient:
    return MemrigClient(LoopbackTransport(setup(build_fixture(chip, seed))))


@pytest.fixture
def client():
    return loopback_client()
