"""Forming, set and reset algorithms driven through the front end."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

from .device import ParameterError
from .frontend import CrossbarFixture

DEFAULT_V_VERIFY = 0.2
DEFAULT_V_GATE_READ = 1.5
DEFAULT_T_PULSE = 10e-6


class Mode(enum.Enum):
    FORM = "form"
    SET = "set"
    RESET = "reset"


class Status(enum.IntEnum):
    OK = 0
    TARGET_NOT_REACHED = 1
    CELL_BROKEN = 2


@dataclass(frozen=True)
class IspvaParams:
    v_start: float
    v_step: float
    v_stop: float
    t_pulse: float
    v_gate_prog: float
    v_gate_read: float
    v_verify: float
    i_target: float
    mode: Mode

    def __post_init__(self):
        if not self.v_step > 0:
            raise ParameterError("v_step must be > 0")
        if self.v_start > self.v_stop:
            raise ParameterError("v_start must not exceed v_stop")
        if self.v_start < 0:
            raise ParameterError("ramp voltages are magnitudes and must be >= 0")
        if not self.t_pulse > 0:
            raise ParameterError("t_pulse must be > 0")
        if not self.i_target > 0:
            raise ParameterError("i_target must be > 0")

    def ramp(self) -> list[float]:
        return ramp(self.v_start, self.v_step, self.v_stop)


@dataclass(frozen=True)
class ProgramResult:
    status: Status
    pulses: int
    final_voltage: float
    final_current: float

    @property
    def ok(self) -> bool:
        return self.status is Status.OK


def ramp(v_start: float, v_step: float, v_stop: float) -> list[float]:
    """Pulse amplitudes v_start, v_start + v_step, ... up to v_stop inclusive."""
    n = math.floor((v_stop - v_start) / v_step + 1e-9) + 1
    return [round(v_start + k * v_step, 12) for k in range(n)]


SET_DEFAULTS = IspvaParams(
    v_start=0.5, v_step=0.1, v_stop=2.0, t_pulse=DEFAULT_T_PULSE,
    v_gate_prog=1.5, v_gate_read=DEFAULT_V_GATE_READ, v_verify=DEFAULT_V_VERIFY,
    i_target=80e-6, mode=Mode.SET,
)
RESET_DEFAULTS = IspvaParams(
    v_start=0.5, v_step=0.1, v_stop=2.0, t_pulse=DEFAULT_T_PULSE,
    v_gate_prog=2.7, v_gate_read=DEFAULT_V_GATE_READ, v_verify=DEFAULT_V_VERIFY,
    i_target=5e-6, mode=Mode.RESET,
)
# vendor forming recipe is not public; these are declared defaults
FORM_DEFAULTS = IspvaParams(
    v_start=2.0, v_step=0.1, v_stop=3.2, t_pulse=DEFAULT_T_PULSE,
    v_gate_prog=1.8, v_gate_read=DEFAULT_V_GATE_READ, v_verify=DEFAULT_V_VERIFY,
    i_target=80e-6, mode=Mode.FORM,
)
DEFAULTS = {Mode.FORM: FORM_DEFAULTS, Mode.SET: SET_DEFAULTS, Mode.RESET: RESET_DEFAULTS}


def _pulse(fixture: CrossbarFixture, sl, bl, v, params: IspvaParams):
    if params.mode is Mode.RESET:
        fixture.drive_cell(sl, bl, 0.0, v, params.v_gate_prog, params.t_pulse)
    else:
        fixture.drive_cell(sl, bl, v, 0.0, params.v_gate_prog, params.t_pulse)


def _verify(fixture: CrossbarFixture, sl, bl, params: IspvaParams) -> tuple[bool, float]:
    reading = fixture.measure_bl_current(bl, params.v_verify, params.v_gate_read, sl)
    current = reading.amps
    if reading.saturated:
        current = math.inf
    if params.mode is Mode.RESET:
        return current <= params.i_target, current
    return current >= params.i_target, current


def _failure(fixture, sl, bl, params: IspvaParams) -> Status:
    if params.mode is Mode.RESET:
        floor = fixture.floor_current(sl, bl, params.v_verify, params.v_gate_read)
        if floor > params.i_target:
            return Status.CELL_BROKEN
    return Status.TARGET_NOT_REACHED


def ispva(fixture: CrossbarFixture, sl: int, bl: int, params: IspvaParams) -> ProgramResult:
    """Incremental step pulse program-and-verify.

    Set and forming pulses drive the word line with the bit line grounded,
    reset pulses the reverse. Each pulse is followed by a verify read; the
    ramp stops at the first read that meets the target.
    """
    fixture.cell(sl, bl)
    current = 0.0
    pulses = 0
    v = params.v_start
    for v in params.ramp():
        _pulse(fixture, sl, bl, v, params)
        pulses += 1
        reached, current = _verify(fixture, sl, bl, params)
        if reached:
            return ProgramResult(Status.OK, pulses, v, current)
    return ProgramResult(_failure(fixture, sl, bl, params), pulses, v, current)


def single_pulse_form(
    fixture: CrossbarFixture,
    sl: int,
    bl: int,
    v: float,
    t_pulse: float = DEFAULT_T_PULSE,
    v_gate: float = FORM_DEFAULTS.v_gate_prog,
    v_gate_read: float = DEFAULT_V_GATE_READ,
    v_verify: float = DEFAULT_V_VERIFY,
    i_target: float = FORM_DEFAULTS.i_target,
) -> ProgramResult:
    params = IspvaParams(v, 1.0, v, t_pulse, v_gate, v_gate_read, v_verify, i_target, Mode.FORM)
    fixture.cell(sl, bl)
    _pulse(fixture, sl, bl, v, params)
    reached, current = _verify(fixture, sl, bl, params)
    status = Status.OK if reached else Status.TARGET_NOT_REACHED
    return ProgramResult(status, 1, v, current)


def incremental_form(fixture: CrossbarFixture, sl: int, bl: int, params: IspvaParams) -> ProgramResult:
    """Whole ramp without intermediate verification, one verify at the end."""
    params = replace(params, mode=Mode.FORM) if params.mode is not Mode.FORM else params
    fixture.cell(sl, bl)
    amplitudes = params.ramp()
    for v in amplitudes:
        _pulse(fixture, sl, bl, v, params)
    reached, current = _verify(fixture, sl, bl, params)
    status = Status.OK if reached else Status.TARGET_NOT_REACHED
    return ProgramResult(status, len(amplitudes), amplitudes[-1], current)
