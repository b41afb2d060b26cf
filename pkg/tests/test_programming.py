import dataclasses
import math

import numpy as np
import pytest

from memrig.chip import build_fixture
from memrig.device import CellParams, ParameterError, Phase, PulseOutcome
from memrig.frontend import AddressError, CrossbarFixture, quantize_dac
from memrig.programming import (
    DEFAULTS,
    FORM_DEFAULTS,
    RESET_DEFAULTS,
    SET_DEFAULTS,
    IspvaParams,
    Mode,
    Status,
    incremental_form,
    ispva,
    ramp,
    single_pulse_form,
)

from conftest import fixture_with, formed_cell, resistor_grid


class Switch:
    """Deterministic monotone device: flips once a pulse reaches ``threshold``."""

    def __init__(self, threshold, on=False, low=1e-6, high=100e-6):
        self.threshold = threshold
        self.on = on
        self.low, self.high = low, high
        self.pulses = []

    def pulse(self, spec):
        self.pulses.append(spec.v_cell)
        if spec.v_cell >= self.threshold:
            self.on = True
        elif -spec.v_cell >= self.threshold:
            self.on = False
        return PulseOutcome(0.0, 0.0)

    def sense(self, v_read, v_gate):
        return math.copysign(self.high if self.on else self.low, v_read) if v_gate > 0.6 else 0.0

    def floor_current(self, v_read, v_gate):
        return self.low


def oracle_pulses(v_start, v_step, v_stop, threshold):
    """First ramp index whose DAC-quantized amplitude reaches the threshold, plus one."""
    n = math.floor((v_stop - v_start) / v_step + 1e-9) + 1
    for k in range(n):
        if quantize_dac(round(v_start + k * v_step, 12)) >= threshold:
            return k + 1, True
    return n, False


def test_program_defaults():
    assert (SET_DEFAULTS.v_start, SET_DEFAULTS.v_step, SET_DEFAULTS.v_stop) == (0.5, 0.1, 2.0)
    assert SET_DEFAULTS.v_gate_prog == 1.5 and SET_DEFAULTS.i_target == 80e-6
    assert (RESET_DEFAULTS.v_start, RESET_DEFAULTS.v_step, RESET_DEFAULTS.v_stop) == (0.5, 0.1, 2.0)
    assert RESET_DEFAULTS.v_gate_prog == 2.7 and RESET_DEFAULTS.i_target == 5e-6
    assert FORM_DEFAULTS.v_gate_prog == 1.8
    assert DEFAULTS[Mode.SET] is SET_DEFAULTS


def test_ramp_lengths():
    assert len(ramp(0.5, 0.1, 2.0)) == 16
    assert ramp(0.5, 0.1, 0.7) == [0.5, 0.6, 0.7]
    assert len(ramp(2.0, 0.1, 3.2)) == 13


@pytest.mark.parametrize(
    "kwargs",
    [dict(v_step=0.0), dict(v_start=2.5), dict(t_pulse=0.0), dict(i_target=0.0)],
)
def test_params_validation(kwargs):
    with pytest.raises(ParameterError):
        dataclasses.replace(SET_DEFAULTS, **kwargs)


def test_set_first_success_at_1v3():
    dev = Switch(threshold=1.25)
    res = ispva(fixture_with(dev), 0, 0, SET_DEFAULTS)
    assert res.status is Status.OK
    assert res.pulses == 9 == math.floor((1.3 - 0.5) / 0.1) + 1
    assert res.final_voltage == pytest.approx(1.3)


def test_set_target_not_reached():
    dev = Switch(threshold=2.5)
    res = ispva(fixture_with(dev), 0, 0, SET_DEFAULTS)
    assert res.status is Status.TARGET_NOT_REACHED
    assert res.pulses == 16


def test_reset_polarity_drives_bit_line():
    dev = Switch(threshold=0.85, on=True)
    res = ispva(fixture_with(dev), 0, 0, RESET_DEFAULTS)
    assert res.status is Status.OK
    assert all(v < 0 for v in dev.pulses)
    assert res.pulses == oracle_pulses(0.5, 0.1, 2.0, 0.85)[0]


@pytest.mark.parametrize("v_start", [0.3, 0.5, 0.8])
@pytest.mark.parametrize("v_step", [0.05, 0.1, 0.2])
@pytest.mark.parametrize("offset", [0.37, 0.91, 1.63])
def test_pulse_count_oracle_grid(v_start, v_step, offset):
    th = v_start + offset
    params = dataclasses.replace(SET_DEFAULTS, v_start=v_start, v_step=v_step)
    expected, reached = oracle_pulses(v_start, v_step, 2.0, th)
    res = ispva(fixture_with(Switch(th)), 0, 0, params)
    assert res.pulses == expected
    assert res.ok == reached


def test_trace_strictly_increasing_by_step():
    fx = fixture_with(Switch(threshold=9.0))
    fx.trace = []
    ispva(fx, 0, 0, SET_DEFAULTS)
    requested = SET_DEFAULTS.ramp()
    applied = [t[2] for t in fx.trace]
    assert applied == [quantize_dac(v) for v in requested]
    assert all(b - a == pytest.approx(0.1) for a, b in zip(requested, requested[1:]))


def test_no_pulse_after_target_met():
    dev = Switch(threshold=0.95)
    ispva(fixture_with(dev), 0, 0, SET_DEFAULTS)
    assert max(dev.pulses) == pytest.approx(quantize_dac(1.0))
    assert len(dev.pulses) == 6


def test_reset_on_worn_cell_is_broken():
    cell = formed_cell(x=1.0, kappa=1.0, n_cmax=10)
    cell.d = 10
    res = ispva(fixture_with(cell), 0, 0, RESET_DEFAULTS)
    assert res.status is Status.CELL_BROKEN
    assert res.pulses == 16


def test_reset_on_healthy_cell_not_broken():
    cell = formed_cell(x=1.0, alpha_reset=1.0)  # far too slow to reach HRS
    res = ispva(fixture_with(cell), 0, 0, RESET_DEFAULTS)
    assert res.status is Status.TARGET_NOT_REACHED


def test_address_error():
    with pytest.raises(AddressError):
        ispva(CrossbarFixture(resistor_grid()), 12, 0, SET_DEFAULTS)


def _pristine_fixture(v_form_th):
    fx = build_fixture({"overrides": [{"sl": 0, "bl": 0, "v_form_th": v_form_th, "sigma_program": 0.0}]}, seed=1)
    return fx


def test_single_pulse_form():
    fx = _pristine_fixture(2.4)
    res = single_pulse_form(fx, 0, 0, 2.6)
    assert fx.cell(0, 0).phase is Phase.FORMED
    assert res.pulses == 1
    fx = _pristine_fixture(2.4)
    res = single_pulse_form(fx, 0, 0, 0.0)
    assert res.status is Status.TARGET_NOT_REACHED and res.pulses == 1
    assert fx.cell(0, 0).phase is Phase.PRISTINE


def test_incremental_form_applies_whole_ramp():
    fx = _pristine_fixture(1.6)
    fx.trace = []
    params = dataclasses.replace(SET_DEFAULTS, mode=Mode.FORM, v_gate_prog=1.8)
    res = incremental_form(fx, 0, 0, params)
    assert res.pulses == 16 == len(fx.trace)
    assert fx.cell(0, 0).phase is Phase.FORMED


def test_incremental_form_on_formed_cell():
    cell = formed_cell(x=1.0)
    res = incremental_form(fixture_with(cell), 0, 0, FORM_DEFAULTS)
    assert res.status is Status.OK
    assert cell.phase is Phase.FORMED


def test_yield_ordering_over_population():
    """Program-and-verify forms at least as many cells as blind ramps or single pulses."""
    cells = [(sl, bl) for sl in range(12) for bl in range(7)]
    v_stop = 2.6
    params = dataclasses.replace(FORM_DEFAULTS, v_stop=v_stop)
    yields = {}
    for name in ("ifv", "if", "single"):
        fx = build_fixture(seed=123)
        ok = 0
        for sl, bl in cells:
            if name == "ifv":
                res = ispva(fx, sl, bl, params)
            elif name == "if":
                res = incremental_form(fx, sl, bl, params)
            else:
                res = single_pulse_form(fx, sl, bl, v_stop)
            ok += res.ok
        yields[name] = ok
    assert yields["ifv"] >= yields["if"] >= yields["single"]
    assert yields["ifv"] > 0
