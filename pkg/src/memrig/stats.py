"""Descriptive statistics for campaign data: empirical CDFs, box statistics, window margin."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

#: Percentiles (as fractions) used for box whiskers and quartiles.
WHISKERS = (0.025, 0.975)
QUARTILES = (0.25, 0.75)


class StatsError(ValueError):
    pass


@dataclass(frozen=True)
class CdfSeries:
    values: tuple[float, ...]
    p: tuple[float, ...]

    def __iter__(self):
        return iter(zip(self.values, self.p))

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class BoxStats:
    q25: float
    q75: float
    median: float
    mean: float
    w2_5: float
    w97_5: float

    @property
    def whiskers(self) -> tuple[float, float]:
        return self.w2_5, self.w97_5


def empirical_cdf(samples: Sequence[float]) -> CdfSeries:
    """Step CDF; tied samples collapse onto their highest rank."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = len(x)
    if n == 0:
        raise StatsError("empirical CDF of an empty sample")
    # last index of every run of equal values
    last = np.flatnonzero(np.append(x[1:] != x[:-1], True))
    values = x[last]
    p = (last + 1) / n
    p[-1] = 1.0
    return CdfSeries(tuple(values.tolist()), tuple(p.tolist()))


def quantile(samples: Sequence[float], q: float) -> float:
    """Linear interpolation between closest order statistics (type 7)."""
    return float(np.quantile(np.asarray(samples, dtype=float), q, method="linear"))


def box_stats(samples: Sequence[float]) -> BoxStats:
    x = np.asarray(samples, dtype=float)
    if len(x) < 2:
        raise StatsError("box statistics need at least two samples")
    w_lo, q25, med, q75, w_hi = np.quantile(x, (WHISKERS[0], QUARTILES[0], 0.5, QUARTILES[1], WHISKERS[1]), method="linear")
    mean = float(np.mean(x))
    if x.min() == x.max():
        # avoid float round-off in the mean of a constant sample
        mean = float(x[0])
    return BoxStats(float(q25), float(q75), float(med), mean, float(w_lo), float(w_hi))


def window_margin(lrs_currents: Sequence[float], hrs_currents: Sequence[float], v_read: float | None = None) -> float:
    """R_OFF / R_ON at a common read voltage, i.e. median(I_LRS) / median(I_HRS).

    ``v_read`` cancels out of the ratio and is accepted only for symmetry with
    the resistance definition. Returns ``math.inf`` when the HRS median current
    is zero.
    """
    if v_read == 0:
        raise StatsError("window margin undefined at 0 V")
    if len(lrs_currents) == 0 or len(hrs_currents) == 0:
        raise StatsError("window margin needs LRS and HRS samples")
    hrs = float(np.median(hrs_currents))
    lrs = float(np.median(lrs_currents))
    if hrs == 0.0:
        return math.inf
    if lrs == 0.0:
        raise StatsError("LRS median current is zero")
    return lrs / hrs


def intervals_overlap(a: tuple[float, float], b: tuple[float, float]) -> bool:
    return max(a[0], b[0]) <= min(a[1], b[1])
