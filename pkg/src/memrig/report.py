"""Figure and table output for campaign datasets.

SVG documents are assembled as text with fixed number formatting so the same
input always yields byte-identical files. Every figure has a CSV twin.
"""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from pathlib import Path
from typing import Mapping, Sequence
from xml.sax.saxutils import escape

from .campaigns import Dataset
from .stats import BoxStats, CdfSeries, box_stats, empirical_cdf

WIDTH, HEIGHT = 720, 480
MARGIN = (70, 30, 30, 60)  # left, right, top, bottom
BOX_EVERY = 10

PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)
STATE_COLORS = {"LRS": "#1f77b4", "HRS": "#d62728"}


class ReportError(ValueError):
    pass


def _f(x: float) -> str:
    return f"{x:.2f}"


def _cell_filter(ds: Dataset, cell) -> list:
    if cell is None:
        return ds.records
    sl, bl = cell
    return [r for r in ds.records if r.sl == sl and r.bl == bl]


def cdf_series_from_dataset(ds: Dataset, cell=None) -> list[tuple[str, CdfSeries]]:
    """One CDF per (read voltage, state), currents in amps, cells pooled unless ``cell`` is given."""
    groups: dict[tuple[int, str], list[float]] = defaultdict(list)
    for r in _cell_filter(ds, cell):
        groups[(r.voltage_mv, r.state)].append(r.current_na * 1e-9)
    if not groups:
        raise ReportError("no records to summarise")
    return [(f"{state} {v:+d} mV", empirical_cdf(groups[(v, state)])) for v, state in sorted(groups)]


def box_groups_from_dataset(
    ds: Dataset, voltage_mv: int, cell=None, every: int = BOX_EVERY
) -> dict[str, list[tuple[int, BoxStats]]]:
    """Box statistics over repeats for every ``every``-th read of a burst.

    Read positions are 1-based, so with 100 reads per burst the boxes sit at
    reads 10, 20, ..., 100.
    """
    samples: dict[tuple[str, int], list[float]] = defaultdict(list)
    for r in _cell_filter(ds, cell):
        if r.voltage_mv == voltage_mv and (r.read_idx + 1) % every == 0:
            samples[(r.state, r.read_idx + 1)].append(r.current_na * 1e-9)
    if not samples:
        raise ReportError(f"no read-disturb records at {voltage_mv} mV")
    out: dict[str, list[tuple[int, BoxStats]]] = {}
    for state, pos in sorted(samples):
        out.setdefault(state, []).append((pos, box_stats(samples[(state, pos)])))
    return out


class _Axes:
    def __init__(self, x_range, y_range):
        self.x0, self.x1 = _pad(*x_range)
        self.y0, self.y1 = _pad(*y_range)
        left, right, top, bottom = MARGIN
        self.px0, self.px1 = left, WIDTH - right
        self.py0, self.py1 = HEIGHT - bottom, top

    def x(self, v: float) -> float:
        return self.px0 + (v - self.x0) / (self.x1 - self.x0) * (self.px1 - self.px0)

    def y(self, v: float) -> float:
        return self.py0 + (v - self.y0) / (self.y1 - self.y0) * (self.py1 - self.py0)

    def frame(self, xlabel: str, ylabel: str, xticks, yticks) -> list[str]:
        parts = [
            f'<rect x="{self.px0}" y="{self.py1}" width="{self.px1 - self.px0}" height="{self.py0 - self.py1}" '
            'fill="none" stroke="#000"/>'
        ]
        for v, label in xticks:
            px = _f(self.x(v))
            parts.append(f'<line x1="{px}" y1="{self.py0}" x2="{px}" y2="{self.py0 + 5}" stroke="#000"/>')
            parts.append(f'<text x="{px}" y="{self.py0 + 18}" text-anchor="middle">{escape(label)}</text>')
        for v, label in yticks:
            py = _f(self.y(v))
            parts.append(f'<line x1="{self.px0 - 5}" y1="{py}" x2="{self.px0}" y2="{py}" stroke="#000"/>')
            parts.append(f'<text x="{self.px0 - 8}" y="{py}" text-anchor="end" dy="4">{escape(label)}</text>')
        cx = (self.px0 + self.px1) / 2
        cy = (self.py0 + self.py1) / 2
        parts.append(f'<text x="{_f(cx)}" y="{HEIGHT - 15}" text-anchor="middle">{escape(xlabel)}</text>')
        parts.append(f'<text x="18" y="{_f(cy)}" text-anchor="middle" transform="rotate(-90 18 {_f(cy)})">{escape(ylabel)}</text>')
        return parts


def _pad(lo: float, hi: float) -> tuple[float, float]:
    if hi == lo:
        d = abs(lo) * 0.05 or 1.0
        return lo - d, hi + d
    d = (hi - lo) * 0.05
    return lo - d, hi + d


def _ticks(lo: float, hi: float, n: int = 5, scale: float = 1.0, fmt: str = "{:.1f}"):
    return [(lo + (hi - lo) * k / n, fmt.format((lo + (hi - lo) * k / n) * scale)) for k in range(n + 1)]


def _document(parts: list[str], title: str) -> str:
    head = (
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">\n'
        f"<title>{escape(title)}</title>\n"
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="#fff"/>\n'
    )
    return head + "\n".join(parts) + "\n</svg>\n"


def render_cdf_svg(series: Sequence[tuple[str, CdfSeries]], path: str | Path, title: str = "Read current CDF"):
    if not series:
        raise ReportError("nothing to plot")
    lo = min(s.values[0] for _, s in series)
    hi = max(s.values[-1] for _, s in series)
    ax = _Axes((lo, hi), (0.0, 1.0))
    parts = ax.frame("read current (uA)", "cumulative probability",
                     _ticks(ax.x0, ax.x1, scale=1e6), _ticks(0.0, 1.0, fmt="{:.1f}"))
    for k, (label, s) in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        dash = "" if label.startswith("LRS") else ' stroke-dasharray="4 2"'
        pts = [(ax.x(s.values[0]), ax.y(0.0))]
        prev = 0.0
        for v, p in s:
            pts.append((ax.x(v), ax.y(prev)))
            pts.append((ax.x(v), ax.y(p)))
            prev = p
        coords = " ".join(f"{_f(x)},{_f(y)}" for x, y in pts)
        parts.append(f'<polyline class="cdf" points="{coords}" fill="none" stroke="{color}"{dash}><title>{escape(label)}</title></polyline>')
        ly = MARGIN[2] + 12 + 13 * k
        lx = WIDTH - MARGIN[1] - 120
        parts.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 18}" y2="{ly - 4}" stroke="{color}"{dash}/>')
        parts.append(f'<text x="{lx + 22}" y="{ly}">{escape(label)}</text>')
    Path(path).write_text(_document(parts, title))


def render_boxplot_svg(
    groups: Mapping[str, Sequence[tuple[int, BoxStats]]], path: str | Path, title: str = "Read disturb"
):
    """Side-by-side boxes per read position and state; dashed lines join the means."""
    if not groups or not any(groups.values()):
        raise ReportError("nothing to plot")
    states = sorted(groups)
    positions = sorted({pos for boxes in groups.values() for pos, _ in boxes})
    lo = min(b.w2_5 for boxes in groups.values() for _, b in boxes)
    hi = max(b.w97_5 for boxes in groups.values() for _, b in boxes)
    slot = {pos: k for k, pos in enumerate(positions)}
    ax = _Axes((-0.5, len(positions) - 0.5), (lo, hi))
    xticks = [(k, str(pos)) for pos, k in slot.items()]
    parts = ax.frame("read access", "read current (uA)", xticks, _ticks(ax.y0, ax.y1, scale=1e6))
    slot_px = (ax.px1 - ax.px0) / len(positions)
    width = slot_px / (len(states) + 1)
    for j, state in enumerate(states):
        color = STATE_COLORS.get(state, PALETTE[j % len(PALETTE)])
        offset = (j - (len(states) - 1) / 2) * width
        means = []
        for pos, b in groups[state]:
            cx = ax.x(slot[pos]) + offset
            x0, x1 = _f(cx - width * 0.4), _f(cx + width * 0.4)
            parts.append(f'<line x1="{_f(cx)}" y1="{_f(ax.y(b.w2_5))}" x2="{_f(cx)}" y2="{_f(ax.y(b.w97_5))}" stroke="{color}"/>')
            for w in (b.w2_5, b.w97_5):
                parts.append(f'<line x1="{x0}" y1="{_f(ax.y(w))}" x2="{x1}" y2="{_f(ax.y(w))}" stroke="{color}"/>')
            top, bottom = ax.y(b.q75), ax.y(b.q25)
            parts.append(
                f'<rect class="box" x="{x0}" y="{_f(top)}" width="{_f(width * 0.8)}" height="{_f(bottom - top)}" '
                f'fill="{color}" fill-opacity="0.25" stroke="{color}"/>'
            )
            parts.append(f'<line x1="{x0}" y1="{_f(ax.y(b.median))}" x2="{x1}" y2="{_f(ax.y(b.median))}" stroke="#000" stroke-width="2"/>')
            means.append(f"{_f(cx)},{_f(ax.y(b.mean))}")
        parts.append(f'<polyline class="mean" points="{" ".join(means)}" fill="none" stroke="{color}" stroke-dasharray="5 3"/>')
        ly = MARGIN[2] + 12 + 13 * j
        lx = WIDTH - MARGIN[1] - 60
        parts.append(f'<rect x="{lx}" y="{ly - 9}" width="12" height="10" fill="{color}" fill-opacity="0.25" stroke="{color}"/>')
        parts.append(f'<text x="{lx + 16}" y="{ly}">{escape(state)}</text>')
    Path(path).write_text(_document(parts, title))


def write_cdf_csv(series: Sequence[tuple[str, CdfSeries]], path: str | Path):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("series", "current_a", "p"))
    for label, s in series:
        for v, p in s:
            w.writerow((label, repr(v), repr(p)))
    Path(path).write_text(buf.getvalue())


def write_box_csv(groups: Mapping[str, Sequence[tuple[int, BoxStats]]], path: str | Path):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("state", "read", "w2_5", "q25", "median", "q75", "w97_5", "mean"))
    for state in sorted(groups):
        for pos, b in groups[state]:
            w.writerow((state, pos, *(repr(x) for x in (b.w2_5, b.q25, b.median, b.q75, b.w97_5, b.mean))))
    Path(path).write_text(buf.getvalue())
