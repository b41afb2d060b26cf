"""Reliability campaigns run from the host: C2C variation, read disturb, endurance."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .client import CellAddress, MemrigClient
from .programming import Status

log = logging.getLogger(__name__)

C2C_VOLTAGES_MV = (-300, -250, -200, -150, -100, 100, 150, 200, 250, 300)

CSV_HEADER = ("cell_sl", "cell_bl", "campaign", "voltage_mv", "cycle", "repeat", "read_idx", "state", "current_na")
ENDURANCE_HEADER = ("cell_sl", "cell_bl", "max_cycles", "cycles", "n_cmax_observed", "broken")

FORMING_NOTE = "one forming-reset-set preamble per cell and session; cells are not re-formed per voltage"


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Record:
    sl: int
    bl: int
    campaign: str
    voltage_mv: int
    cycle: int
    repeat: int
    read_idx: int
    state: str
    current_na: int

    @property
    def key(self) -> tuple:
        return (self.sl, self.bl, self.campaign, self.voltage_mv, self.cycle, self.repeat, self.read_idx, self.state)

    def row(self) -> tuple:
        return (self.sl, self.bl, self.campaign, self.voltage_mv, self.cycle, self.repeat, self.read_idx, self.state, self.current_na)


@dataclass
class Dataset:
    """Append-only measurement log; the row position is the timestamp ordinal."""

    records: list[Record] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self._keys = {r.key for r in self.records}
        if len(self._keys) != len(self.records):
            raise DatasetError("duplicate campaign coordinates")

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __eq__(self, other):
        return isinstance(other, Dataset) and self.records == other.records

    def append(self, record: Record):
        if record.key in self._keys:
            raise DatasetError(f"duplicate record {record.key}")
        self._keys.add(record.key)
        self.records.append(record)

    def extend(self, records: Iterable[Record]):
        for r in records:
            self.append(r)

    def select(self, **criteria) -> list[Record]:
        return [r for r in self.records if all(getattr(r, k) == v for k, v in criteria.items())]

    def cells(self) -> list[tuple[int, int]]:
        return sorted({(r.sl, r.bl) for r in self.records})


def export_csv(dataset: Dataset, path: str | Path):
    if not len(dataset):
        raise DatasetError("refusing to export an empty dataset")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    writer.writerows(r.row() for r in dataset.records)
    Path(path).write_text(buf.getvalue())


def import_csv(path: str | Path) -> Dataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != CSV_HEADER:
            raise DatasetError(f"unexpected CSV header {header}")
        records = []
        for row in reader:
            sl, bl, campaign, v, cycle, repeat, idx, state, i = row
            records.append(Record(int(sl), int(bl), campaign, int(v), int(cycle), int(repeat), int(idx), state, int(i)))
    return Dataset(records)


def _cells(cells) -> list[CellAddress]:
    return [CellAddress.checked(*c) for c in cells]


def prepare_cell(client: MemrigClient, addr: CellAddress) -> Status:
    """Forming-reset-set preamble for cells this session has not formed yet."""
    if addr in client.formed:
        return Status.OK
    client.form_cell(*addr)
    status = client.reset_cell(*addr).status
    if status is Status.CELL_BROKEN:
        return status
    client.set_cell(*addr)
    return Status.OK


def _mark_broken(ds: Dataset, addr: CellAddress, **where):
    ds.meta.setdefault("broken", {})[f"{addr.sl},{addr.bl}"] = where
    log.warning("cell %s broken at %s; skipping rest of campaign", tuple(addr), where)


def _new_dataset(campaign: str, **params) -> Dataset:
    return Dataset(meta={"campaign": campaign, "params": params, "forming": FORMING_NOTE, "broken": {}})


def run_c2c_campaign(client: MemrigClient, cells, voltages_mv=C2C_VOLTAGES_MV, cycles: int = 100) -> Dataset:
    """set-read-reset-read, ``cycles`` times per read voltage."""
    voltages_mv = [int(v) for v in voltages_mv]
    ds = _new_dataset("c2c", voltages_mv=voltages_mv, cycles=cycles)
    for addr in _cells(cells):
        if prepare_cell(client, addr) is Status.CELL_BROKEN:
            _mark_broken(ds, addr, phase="preamble")
            continue
        broken = False
        for v in voltages_mv:
            for k in range(cycles):
                client.set_cell(*addr)
                ds.append(Record(addr.sl, addr.bl, "c2c", v, k, 0, 0, "LRS", client.read_cell_na(*addr, v / 1000)))
                if client.reset_cell(*addr).status is Status.CELL_BROKEN:
                    _mark_broken(ds, addr, voltage_mv=v, cycle=k)
                    broken = True
                    break
                ds.append(Record(addr.sl, addr.bl, "c2c", v, k, 0, 0, "HRS", client.read_cell_na(*addr, v / 1000)))
            if broken:
                break
    return ds


def run_read_disturb_campaign(
    client: MemrigClient, cells, voltages_mv=C2C_VOLTAGES_MV, reads: int = 100, repeats: int = 50
) -> Dataset:
    """set-read(reads)-reset-read(reads), ``repeats`` times per read voltage."""
    voltages_mv = [int(v) for v in voltages_mv]
    ds = _new_dataset("read_disturb", voltages_mv=voltages_mv, reads=reads, repeats=repeats)
    for addr in _cells(cells):
        if prepare_cell(client, addr) is Status.CELL_BROKEN:
            _mark_broken(ds, addr, phase="preamble")
            continue
        broken = False
        for v in voltages_mv:
            for rep in range(repeats):
                client.set_cell(*addr)
                for i in range(reads):
                    ds.append(Record(addr.sl, addr.bl, "read_disturb", v, 0, rep, i, "LRS", client.read_cell_na(*addr, v / 1000)))
                if client.reset_cell(*addr).status is Status.CELL_BROKEN:
                    _mark_broken(ds, addr, voltage_mv=v, repeat=rep)
                    broken = True
                    break
                for i in range(reads):
                    ds.append(Record(addr.sl, addr.bl, "read_disturb", v, 0, rep, i, "HRS", client.read_cell_na(*addr, v / 1000)))
            if broken:
                break
    return ds


@dataclass(frozen=True)
class EnduranceReport:
    sl: int
    bl: int
    max_cycles: int
    cycles: int
    n_cmax_observed: int | None
    broken: bool

    def row(self) -> tuple:
        observed = "" if self.n_cmax_observed is None else self.n_cmax_observed
        return (self.sl, self.bl, self.max_cycles, self.cycles, observed, int(self.broken))


def run_endurance_campaign(client: MemrigClient, cell, max_cycles: int) -> EnduranceReport:
    """Alternate reset and set until a reset fails or ``max_cycles`` is reached.

    On a freshly formed cell, cycle ``k`` performs the cell's ``k``-th reset.
    """
    addr = CellAddress.checked(*cell)
    if max_cycles > 0 and addr not in client.formed:
        client.form_cell(*addr)
    for k in range(1, max_cycles + 1):
        status = client.reset_cell(*addr).status
        if status is not Status.OK:
            return EnduranceReport(addr.sl, addr.bl, max_cycles, k, k, status is Status.CELL_BROKEN)
        client.set_cell(*addr)
    return EnduranceReport(addr.sl, addr.bl, max_cycles, max_cycles, None, False)


def export_endurance_csv(reports: list[EnduranceReport], path: str | Path):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ENDURANCE_HEADER)
    writer.writerows(r.row() for r in reports)
    Path(path).write_text(buf.getvalue())
