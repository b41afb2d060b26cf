"""Signal path of the breakout board around a 12x7 pseudo crossbar.

Mux matrix, 12-bit DAC, per-bit-line TIA with switchable feedback resistor and
an 18-bit bipolar ADC. Word lines sit on the west side of the socket, source
lines (transistor gates) on the east side and bit lines on the south side,
where the muxes can also hand the line to the current sensing module.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Protocol

from .device import ParameterError, PulseOutcome, PulseSpec

ROWS = 12
COLS = 7

DAC_BITS = 12
DAC_CODES = 2**DAC_BITS
DAC_MAX_CODE = DAC_CODES - 1
DAC_FULL_SCALE = 5.0
DAC_CHANNELS = 16

ADC_BITS = 18
ADC_FULL_SCALE = 4.096
ADC_LSB = 2 * ADC_FULL_SCALE / 2**ADC_BITS
ADC_MIN_CODE = -(2 ** (ADC_BITS - 1))
ADC_MAX_CODE = 2 ** (ADC_BITS - 1) - 1

FEEDBACK_OHMS = (43.0, 100.0, 430.0, 1e3, 4.3e3, 10e3, 43e3, 100e3)
# bound on the per-fixture gain error; leaves room for ADC quantization
# inside the 0.5 % accuracy budget
GAIN_ERROR_BOUND = 0.0045
SWITCH_TIME = 60e-9

# dac channels feeding the mux inputs DAC1..DAC5
WL_CHANNEL = 0
BL_CHANNEL = 1
GATE_CHANNEL = 2
SENSE_REF_CHANNEL = 4


class AddressError(LookupError):
    pass


class Side(enum.Enum):
    NORTH = "N"
    EAST = "E"
    SOUTH = "S"
    WEST = "W"


# 68 muxes around the socket; one TIA per south pin
PINS_PER_SIDE = {Side.NORTH: 18, Side.EAST: 17, Side.SOUTH: 16, Side.WEST: 17}


class PinId(NamedTuple):
    side: Side
    index: int


class Source(enum.IntEnum):
    DAC1 = 0
    DAC2 = 1
    DAC3 = 2
    DAC4 = 3
    DAC5 = 4
    GROUND = 5
    EXTERNAL = 6
    SENSE = 7


def wl_pin(row: int) -> PinId:
    return PinId(Side.WEST, row)


def sl_pin(row: int) -> PinId:
    return PinId(Side.EAST, row)


def bl_pin(col: int) -> PinId:
    return PinId(Side.SOUTH, col)


ALL_PINS = tuple(PinId(side, i) for side, n in PINS_PER_SIDE.items() for i in range(n))
PIN_INDEX = {pin: k for k, pin in enumerate(ALL_PINS)}
_WL = [PIN_INDEX[wl_pin(r)] for r in range(ROWS)]
_SL = [PIN_INDEX[sl_pin(r)] for r in range(ROWS)]
_BL = [PIN_INDEX[bl_pin(c)] for c in range(COLS)]


class Device(Protocol):
    def pulse(self, spec: PulseSpec) -> PulseOutcome: ...

    def sense(self, v_read: float, v_gate: float) -> float: ...

    def floor_current(self, v_read: float, v_gate: float) -> float: ...


@dataclass(frozen=True)
class TiaConfig:
    feedback_ohms: float = FEEDBACK_OHMS[-1]
    gain: float = 1.0
    saturated: bool = False

    def __post_init__(self):
        if self.feedback_ohms not in FEEDBACK_OHMS:
            raise ParameterError(f"feedback resistor {self.feedback_ohms} not in ladder")


@dataclass(frozen=True)
class AdcReading:
    code: int
    volts: float
    amps: float
    feedback_ohms: float
    v_applied: float = 0.0
    saturated: bool = False


def dac_code_to_voltage(code: int) -> float:
    if not 0 <= code <= DAC_MAX_CODE or int(code) != code:
        raise ParameterError(f"DAC code {code} outside 0..{DAC_MAX_CODE}")
    return code * DAC_FULL_SCALE / DAC_MAX_CODE


def voltage_to_dac_code(volts: float) -> int:
    """Nearest DAC code for a non-negative voltage."""
    if not 0.0 <= volts <= DAC_FULL_SCALE:
        raise ParameterError(f"{volts} V outside DAC range 0..{DAC_FULL_SCALE} V")
    return int(math.floor(volts * DAC_MAX_CODE / DAC_FULL_SCALE + 0.5))


def quantize_dac(volts: float) -> float:
    return dac_code_to_voltage(voltage_to_dac_code(volts))


def adc_quantize(volts: float) -> int:
    code = int(math.floor(volts / ADC_LSB + 0.5))
    return min(max(code, ADC_MIN_CODE), ADC_MAX_CODE)


def adc_dequantize(code: int) -> float:
    return code * ADC_LSB


def tia_autorange(i_estimate: float, gain: float = 1.0) -> TiaConfig:
    """Largest feedback resistor that keeps the TIA output inside ADC full scale."""
    if i_estimate < 0:
        raise ParameterError("current estimate must be >= 0")
    for ohms in reversed(FEEDBACK_OHMS):
        if i_estimate * ohms * gain <= ADC_FULL_SCALE:
            return TiaConfig(ohms, gain)
    return TiaConfig(FEEDBACK_OHMS[0], gain, saturated=True)


class CrossbarFixture:
    """12x7 1T1R pseudo crossbar plugged into the breakout board."""

    def __init__(self, cells, gain_error: float = 0.0, tia_gain: float = 1.0, external_v: float = 0.0):
        if len(cells) != ROWS or any(len(row) != COLS for row in cells):
            raise ParameterError(f"fixture needs a {ROWS}x{COLS} grid of devices")
        if abs(gain_error) > GAIN_ERROR_BOUND:
            raise ParameterError(f"gain error {gain_error} beyond +/-{GAIN_ERROR_BOUND}")
        self.cells: list[list[Device]] = [list(row) for row in cells]
        self.gain_error = gain_error
        self.tia_gain = tia_gain
        self.external_v = external_v
        self._mux = [Source.GROUND] * len(ALL_PINS)
        self.dac_codes = [0] * DAC_CHANNELS
        self.tia: dict[int, TiaConfig] = {}
        # optional pulse trace: (sl, bl, v_wl, v_bl, v_gate, duration)
        self.trace: list[tuple] | None = None
        self.setup()

    def setup(self):
        self.dac_codes = [0] * DAC_CHANNELS
        self._release()
        self.tia = {i: TiaConfig(FEEDBACK_OHMS[-1], self.tia_gain) for i in range(PINS_PER_SIDE[Side.SOUTH])}

    @property
    def mux(self) -> dict[PinId, Source]:
        return dict(zip(ALL_PINS, self._mux))

    def state_snapshot(self) -> tuple:
        return (tuple(self.dac_codes), tuple(self._mux), tuple(sorted(self.tia.items())))

    def _check_address(self, sl: int, bl: int):
        if not (0 <= sl < ROWS and 0 <= bl < COLS):
            raise AddressError(f"cell ({sl}, {bl}) outside {ROWS}x{COLS} array")

    def cell(self, sl: int, bl: int) -> Device:
        self._check_address(sl, bl)
        return self.cells[sl][bl]

    def set_dac(self, channel: int, volts: float) -> float:
        if not 0 <= channel < DAC_CHANNELS:
            raise ParameterError(f"DAC channel {channel} outside 0..{DAC_CHANNELS - 1}")
        self.dac_codes[channel] = voltage_to_dac_code(volts)
        return dac_code_to_voltage(self.dac_codes[channel])

    def route(self, pin: PinId, source: Source | int):
        if pin not in PIN_INDEX:
            raise ParameterError(f"no such pin {pin}")
        if isinstance(source, bool) or int(source) not in range(8):
            raise ParameterError(f"8:1 mux selector must be 0..7, got {source}")
        source = Source(int(source))
        if source is Source.SENSE and pin.side is not Side.SOUTH:
            raise ParameterError("only south pins reach the current sensing module")
        self._mux[PIN_INDEX[pin]] = source

    def _potential(self, k: int) -> float:
        source = self._mux[k]
        if source == Source.GROUND:
            return 0.0
        if source == Source.EXTERNAL:
            return self.external_v
        if source == Source.SENSE:
            # TIA holds its input at the reference set by DAC5
            return self.dac_codes[SENSE_REF_CHANNEL] * DAC_FULL_SCALE / DAC_MAX_CODE
        return self.dac_codes[source] * DAC_FULL_SCALE / DAC_MAX_CODE

    def pin_potential(self, pin: PinId) -> float:
        return self._potential(PIN_INDEX[pin])

    def sensing(self, col: int) -> bool:
        return self._mux[_BL[col]] == Source.SENSE

    def _release(self):
        self._mux = [Source.GROUND] * len(ALL_PINS)

    def _route_row(self, sl: int, bl: int, wl_source: Source, bl_source: Source, inhibit: Source):
        mux = [Source.GROUND] * len(ALL_PINS)
        mux[_WL[sl]] = wl_source
        mux[_SL[sl]] = Source.DAC3
        for c in range(COLS):
            # unselected bit lines follow the word line so the rest of the row sees 0 V
            mux[_BL[c]] = bl_source if c == bl else inhibit
        self._mux = mux

    def _gated_rows(self):
        for r in range(ROWS):
            gate = self._potential(_SL[r])
            if gate > 0.0:
                yield r, gate

    def drive_cell(self, sl: int, bl: int, v_wl: float, v_bl: float, v_gate: float, duration: float):
        self._check_address(sl, bl)
        if not duration > 0:
            raise ParameterError("pulse duration must be > 0")
        v_wl = self.set_dac(WL_CHANNEL, v_wl)
        v_bl = self.set_dac(BL_CHANNEL, v_bl)
        v_gate = self.set_dac(GATE_CHANNEL, v_gate)
        self._route_row(sl, bl, Source.DAC1, Source.DAC2, inhibit=Source.DAC1)
        if self.trace is not None:
            self.trace.append((sl, bl, v_wl, v_bl, v_gate, duration))
        for r, gate in self._gated_rows():
            v_row = self._potential(_WL[r])
            for c in range(COLS):
                v_col = self._potential(_BL[c])
                if v_row != v_col:
                    self.cells[r][c].pulse(PulseSpec(v_row, v_col, gate, duration))
        self._release()

    def _convert(self, current: float, tia: TiaConfig) -> tuple[int, float]:
        v_out = current * tia.feedback_ohms * tia.gain * (1.0 + self.gain_error)
        return adc_quantize(v_out), v_out

    def measure_bl_current(self, bl: int, v_read: float, v_gate: float, sl: int) -> AdcReading:
        self._check_address(sl, bl)
        if abs(v_read) > DAC_FULL_SCALE:
            raise ParameterError(f"read voltage beyond +/-{DAC_FULL_SCALE} V")
        self.set_dac(GATE_CHANNEL, v_gate)
        if v_read >= 0:
            applied = self.set_dac(WL_CHANNEL, v_read)
            self.set_dac(SENSE_REF_CHANNEL, 0.0)
            self._route_row(sl, bl, Source.DAC1, Source.SENSE, inhibit=Source.DAC1)
        else:
            applied = -self.set_dac(SENSE_REF_CHANNEL, -v_read)
            self._route_row(sl, bl, Source.GROUND, Source.SENSE, inhibit=Source.GROUND)
        sense_potential = self._potential(_BL[bl])
        current = 0.0
        for r, gate in self._gated_rows():
            v_cell = self._potential(_WL[r]) - sense_potential
            current += self.cells[r][bl].sense(v_cell, gate)
        self._release()
        self.dac_codes[SENSE_REF_CHANNEL] = 0

        # coarse pass on the least sensitive range, then re-range on the same sample
        coarse = TiaConfig(FEEDBACK_OHMS[0], self.tia_gain)
        code, v_out = self._convert(current, coarse)
        if abs(v_out) > ADC_FULL_SCALE:
            self.tia[bl] = TiaConfig(FEEDBACK_OHMS[0], self.tia_gain, saturated=True)
            return AdcReading(code, adc_dequantize(code), math.nan, coarse.feedback_ohms, applied, saturated=True)
        estimate = (abs(code) + 1) * ADC_LSB / (coarse.feedback_ohms * coarse.gain)
        tia = tia_autorange(estimate, self.tia_gain)
        self.tia[bl] = tia
        code, v_out = self._convert(current, tia)
        volts = adc_dequantize(code)
        saturated = tia.saturated or abs(v_out) > ADC_FULL_SCALE
        amps = volts / (tia.feedback_ohms * tia.gain)
        return AdcReading(code, volts, amps, tia.feedback_ohms, applied, saturated)

    def floor_current(self, sl: int, bl: int, v_read: float, v_gate: float) -> float:
        """Noiseless lower bound on the current the addressed cell can reach."""
        return self.cell(sl, bl).floor_current(v_read, v_gate)
