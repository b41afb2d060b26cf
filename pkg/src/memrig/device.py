"""Behavioral model of a single TiN/Ti/HfO2/TiN 1T1R cell.

The memristor is reduced to a lumped filament strength ``x`` in [0, 1] with a
linear conductance law between an HRS floor and ``g_max``. Programming pulses
grow or dissolve the filament above threshold, reads disturb it stochastically
(strongly in set polarity, weakly in reset polarity) and every completed
set/reset cycle lifts the HRS floor towards the LRS.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

#: Effective disturb exposure of one read. Only ``rate * T_READ`` matters.
T_READ = 10e-6
#: Filament holding voltage used to turn the transistor compliance current
#: into a cap on the conductance a set pulse can build.
COMPLIANCE_HOLD_V = 0.2
#: Front-end full scale for any terminal voltage.
V_LIMIT = 5.0
#: Post-forming filament strength is drawn uniformly from this interval.
X_INIT_RANGE = (0.8, 1.0)


class ParameterError(ValueError):
    """Raised for physically meaningless model or instrument parameters."""


class Phase(enum.Enum):
    PRISTINE = "pristine"
    FORMED = "formed"


@dataclass(frozen=True)
class Transistor:
    """Square-law-free select transistor: I_comp = g_m * max(v_gate - v_th, 0)."""

    v_th: float = 0.6
    g_m: float = 1e-4 / 0.9

    def compliance(self, v_gate: float) -> float:
        return self.g_m * max(v_gate - self.v_th, 0.0)


@dataclass(frozen=True)
class CellParams:
    v_form_th: float = 2.4
    v_set_th: float = 0.6
    v_reset_th: float = 0.6
    g_max: float = 500e-6
    g_min: float = 4e-6
    alpha_set: float = 1e5
    alpha_reset: float = 1e5
    sigma_program: float = 0.01
    sigma0: float = 0.002
    sigma1: float = 0.12
    disturb_set: float = 2.5e4
    disturb_reset: float = 100.0
    # largest fractional filament change of a single disturb event
    disturb_jump: float = 0.1
    n_cmax: int = 10_000
    kappa: float = 0.02
    transistor: Transistor = field(default_factory=Transistor)

    def __post_init__(self):
        if not (0 < self.g_min < self.g_max):
            raise ParameterError(f"need 0 < g_min < g_max, got {self.g_min} / {self.g_max}")
        rates = {
            "alpha_set": self.alpha_set,
            "alpha_reset": self.alpha_reset,
            "sigma_program": self.sigma_program,
            "sigma0": self.sigma0,
            "sigma1": self.sigma1,
            "disturb_set": self.disturb_set,
            "disturb_reset": self.disturb_reset,
            "disturb_jump": self.disturb_jump,
            "kappa": self.kappa,
        }
        for name, value in rates.items():
            if not value >= 0 or not math.isfinite(value):
                raise ParameterError(f"{name} must be a finite value >= 0, got {value}")
        if self.disturb_jump > 1:
            raise ParameterError("disturb_jump must be <= 1")
        if int(self.n_cmax) != self.n_cmax or self.n_cmax < 1:
            raise ParameterError(f"n_cmax must be an integer >= 1, got {self.n_cmax}")
        for name in ("v_form_th", "v_set_th", "v_reset_th"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be > 0")
        if self.transistor.g_m <= 0:
            raise ParameterError("transistor g_m must be > 0")

    def noiseless(self) -> CellParams:
        """Same device with every stochastic knob switched off."""
        return replace(
            self,
            sigma_program=0.0,
            sigma0=0.0,
            sigma1=0.0,
            disturb_set=0.0,
            disturb_reset=0.0,
        )


# Profile means. Per-cell values are drawn lognormally around these to stand
# in for device-to-device spread.
PROFILES: dict[str, CellParams] = {
    "stable": CellParams(),
    "unstable": CellParams(
        disturb_set=1.25e5,
        disturb_reset=50.0,
        disturb_jump=1.0,
        n_cmax=100,
        kappa=0.05,
    ),
}

# lognormal sigma per drawn field; fields not listed are copied verbatim
_SPREAD = {
    "v_form_th": 0.06,
    "v_set_th": 0.05,
    "v_reset_th": 0.05,
    "g_max": 0.03,
    "g_min": 0.1,
    "alpha_set": 0.1,
    "alpha_reset": 0.1,
    "n_cmax": 0.2,
}


def draw_params(profile: str | CellParams, rng: np.random.Generator) -> CellParams:
    """Draw one device's parameters around a named profile."""
    base = PROFILES[profile] if isinstance(profile, str) else profile
    drawn = {}
    for name, sigma in _SPREAD.items():
        value = getattr(base, name) * float(np.exp(rng.normal(0.0, sigma)))
        drawn[name] = max(1, round(value)) if name == "n_cmax" else value
    if drawn["g_min"] >= drawn["g_max"]:
        drawn["g_min"] = base.g_min
    return replace(base, **drawn)


@dataclass(frozen=True)
class PulseSpec:
    v_wl: float
    v_bl: float
    v_gate: float
    duration: float

    def __post_init__(self):
        if not self.duration > 0:
            raise ParameterError("pulse duration must be > 0")
        if abs(self.v_wl) > V_LIMIT or abs(self.v_bl) > V_LIMIT:
            raise ParameterError(f"terminal voltage beyond +/-{V_LIMIT} V")

    @property
    def v_cell(self) -> float:
        return self.v_wl - self.v_bl


@dataclass(frozen=True)
class PulseOutcome:
    delta_x: float
    current: float


@dataclass
class CellState:
    params: CellParams
    rng: np.random.Generator
    phase: Phase = Phase.PRISTINE
    x: float = 0.0
    d: int = 0
    # a set (or forming) happened since the last counted reset event
    armed: bool = False

    def g_floor(self) -> float:
        """HRS floor after endurance drift."""
        p = self.params
        wear = min(self.d / p.n_cmax, 1.0)
        return p.g_min * (1.0 + p.kappa * wear * (p.g_max / p.g_min - 1.0))

    @property
    def conductance(self) -> float:
        if self.phase is Phase.PRISTINE:
            return self.params.g_min
        floor = self.g_floor()
        return floor + self.x * (self.params.g_max - floor)

    def _perturb(self):
        sigma = self.params.sigma_program
        if sigma > 0:
            self.x += self.rng.normal(0.0, sigma)
        self.x = min(max(self.x, 0.0), 1.0)

    def _ohmic(self, v: float, i_comp: float) -> float:
        return math.copysign(min(abs(v) * self.conductance, i_comp), v) if v else 0.0

    def pulse(self, spec: PulseSpec) -> PulseOutcome:
        p = self.params
        i_comp = p.transistor.compliance(spec.v_gate)
        if i_comp <= 0.0:
            return PulseOutcome(0.0, 0.0)
        v = spec.v_cell
        x0 = self.x
        if self.phase is Phase.PRISTINE:
            if v >= p.v_form_th:
                self.phase = Phase.FORMED
                self.x = float(self.rng.uniform(*X_INIT_RANGE))
                self.armed = True
                self._perturb()
        elif v > p.v_set_th:
            grown = self.x + p.alpha_set * (1.0 - self.x) * (v - p.v_set_th) * spec.duration
            floor = self.g_floor()
            x_cap = (i_comp / COMPLIANCE_HOLD_V - floor) / (p.g_max - floor)
            self.x = min(grown, max(x_cap, self.x))
            self.armed = True
            self._perturb()
        elif -v > p.v_reset_th:
            if self.armed:
                self.d += 1
                self.armed = False
            self.x -= p.alpha_reset * self.x * (-v - p.v_reset_th) * spec.duration
            self._perturb()
        return PulseOutcome(self.x - x0, self._ohmic(v, i_comp))

    def sense(self, v_read: float, v_gate: float) -> float:
        if abs(v_read) > V_LIMIT:
            raise ParameterError(f"read voltage beyond +/-{V_LIMIT} V")
        p = self.params
        i_comp = p.transistor.compliance(v_gate)
        if i_comp <= 0.0 or v_read == 0.0:
            return 0.0
        if self.phase is Phase.FORMED:
            rate = p.disturb_set if v_read > 0 else p.disturb_reset
            prob = min(rate * abs(v_read) * T_READ, 1.0)
            if prob > 0 and self.rng.random() < prob:
                jump = self.rng.uniform(0.0, p.disturb_jump)
                if v_read > 0:
                    self.x += jump * (1.0 - self.x)
                else:
                    self.x -= jump * self.x
                self.x = min(max(self.x, 0.0), 1.0)
        current = self._ohmic(v_read, i_comp)
        sigma = p.sigma0 + p.sigma1 * abs(v_read)
        if sigma > 0:
            current *= 1.0 + self.rng.normal(0.0, sigma)
        return current

    def floor_current(self, v_read: float, v_gate: float) -> float:
        """Smallest noiseless |current| any reset sequence can reach."""
        i_comp = self.params.transistor.compliance(v_gate)
        return min(abs(v_read) * self.g_floor(), i_comp)


def create_cell(params: CellParams, seed: int) -> CellState:
    return CellState(params=params, rng=np.random.default_rng(seed))


def apply_pulse(state: CellState, pulse: PulseSpec) -> PulseOutcome:
    return state.pulse(pulse)


def sense_current(state: CellState, v_read: float, v_gate: float) -> float:
    return state.sense(v_read, v_gate)


def conductance(state: CellState) -> float:
    return state.conductance


class FixedResistor:
    """Ideal resistor behind an ideal switch; used to check the measurement path."""

    def __init__(self, ohms: float, v_th: float = 0.6):
        if ohms <= 0:
            raise ParameterError("resistance must be > 0")
        self.ohms = ohms
        self.v_th = v_th

    @property
    def conductance(self) -> float:
        return 1.0 / self.ohms

    def pulse(self, spec: PulseSpec) -> PulseOutcome:
        on = spec.v_gate > self.v_th
        return PulseOutcome(0.0, spec.v_cell / self.ohms if on else 0.0)

    def sense(self, v_read: float, v_gate: float) -> float:
        return v_read / self.ohms if v_gate > self.v_th else 0.0

    def floor_current(self, v_read: float, v_gate: float) -> float:
        return abs(self.sense(v_read, v_gate))
