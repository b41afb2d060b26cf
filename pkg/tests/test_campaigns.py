import dataclasses

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memrig.campaigns import (
    C2C_VOLTAGES_MV,
    CSV_HEADER,
    Dataset,
    DatasetError,
    Record,
    export_csv,
    export_endurance_csv,
    import_csv,
    run_c2c_campaign,
    run_endurance_campaign,
    run_read_disturb_campaign,
)
from memrig.chip import build_fixture
from memrig.client import LoopbackTransport, MemrigClient
from memrig.firmware import setup

from conftest import loopback_client


class OpCounter(LoopbackTransport):
    def __init__(self, firmware):
        super().__init__(firmware)
        self.ops = 0

    def send(self, data):
        self.ops += 1
        super().send(data)


def test_default_voltages():
    assert C2C_VOLTAGES_MV == (-300, -250, -200, -150, -100, 100, 150, 200, 250, 300)


def test_c2c_one_cycle_record_count(client):
    ds = run_c2c_campaign(client, [(0, 0)], cycles=1)
    assert len(ds) == 20
    assert {r.state for r in ds} == {"LRS", "HRS"}


def test_c2c_default_campaign_one_cell(client):
    ds = run_c2c_campaign(client, [(3, 3)])
    assert len(ds) == 10 * 100 * 2
    assert ds.meta["forming"]


@settings(max_examples=8, deadline=None)
@given(
    st.lists(st.sampled_from(C2C_VOLTAGES_MV), min_size=1, max_size=3, unique=True),
    st.integers(1, 3),
    st.integers(1, 3),
)
def test_read_disturb_record_formula(voltages, reads, repeats):
    ds = run_read_disturb_campaign(loopback_client(), [(0, 0), (1, 1)], voltages, reads=reads, repeats=repeats)
    assert len(ds) == 2 * len(voltages) * repeats * 2 * reads


@settings(max_examples=8, deadline=None)
@given(st.lists(st.sampled_from(C2C_VOLTAGES_MV), min_size=1, max_size=4, unique=True), st.integers(1, 4))
def test_c2c_record_formula(voltages, cycles):
    ds = run_c2c_campaign(loopback_client(), [(2, 2)], voltages, cycles=cycles)
    assert len(ds) == len(voltages) * cycles * 2


def test_read_disturb_operation_count():
    transport = OpCounter(setup(build_fixture(seed=0)))
    client = MemrigClient(transport)
    run_read_disturb_campaign(client, [(0, 0)], [200], reads=1, repeats=1)
    preamble = transport.ops
    run_read_disturb_campaign(client, [(0, 0)], [200, -200], reads=1, repeats=1)
    assert transport.ops - preamble == 2 * 4


def test_operation_totals():
    # per cell: 10 voltages x 50 repeats x (2 writes, 200 reads)
    writes = len(C2C_VOLTAGES_MV) * 50 * 2
    reads = len(C2C_VOLTAGES_MV) * 50 * 2 * 100
    assert (writes, reads) == (1000, 100_000)


def test_export_empty_dataset_fails(tmp_path):
    with pytest.raises(DatasetError):
        export_csv(Dataset(), tmp_path / "x.csv")


def test_csv_round_trip_and_line_count(tmp_path):
    ds = run_c2c_campaign(loopback_client(), [(5, 3)], cycles=100)
    path = tmp_path / "c2c.csv"
    export_csv(ds, path)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert len(lines) == 2001
    assert import_csv(path) == ds


def test_dataset_rejects_duplicates():
    r = Record(0, 0, "c2c", 100, 0, 0, 0, "LRS", 5)
    ds = Dataset([r])
    with pytest.raises(DatasetError):
        ds.append(r)
    with pytest.raises(DatasetError):
        Dataset([r, dataclasses.replace(r)])


def test_import_rejects_bad_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(DatasetError):
        import_csv(p)


def test_campaigns_replay_byte_identical(tmp_path):
    paths = []
    for k in range(2):
        client = loopback_client(seed=21)
        ds = run_c2c_campaign(client, [(0, 1), (4, 4)], (100, -300), cycles=5)
        path = tmp_path / f"run{k}.csv"
        export_csv(ds, path)
        paths.append(path.read_bytes())
    assert paths[0] == paths[1]


def test_broken_cell_is_skipped():
    chip = {"overrides": [{"sl": 0, "bl": 0, "profile": "unstable", "n_cmax": 3, "kappa": 1.0}]}
    ds = run_c2c_campaign(loopback_client(chip), [(0, 0), (0, 1)], (100, 200), cycles=10)
    assert "0,0" in ds.meta["broken"]
    assert len(ds.select(sl=0, bl=1)) == 2 * 10 * 2
    assert len(ds.select(sl=0, bl=0)) < 2 * 10 * 2


def _floor(params, d):
    wear = min(d / params.n_cmax, 1)
    return params.g_min * (1 + params.kappa * wear * (params.g_max / params.g_min - 1))


def _first_cycle(predicate):
    k = 1
    while not predicate(k):
        k += 1
    return k


def test_endurance_noisy_unstable_breaks_near_formula_cycle():
    chip = {"overrides": [{"sl": 0, "bl": 0, "profile": "unstable", "n_cmax": 100}]}
    client = loopback_client(chip)
    params = client.transport.firmware.fixture.cell(0, 0).params
    ideal = _first_cycle(lambda k: 0.2 * _floor(params, k) > 5e-6)
    rep = run_endurance_campaign(client, (0, 0), 1000)
    assert rep.broken
    # broken is only declared once the floor itself is out of reach
    assert ideal <= rep.n_cmax_observed <= ideal + 10


def test_endurance_noise_free_breaks_exactly():
    quiet = dict(sigma_program=0.0, sigma0=0.0, sigma1=0.0, disturb_set=0.0, disturb_reset=0.0)
    chip = {"overrides": [{"sl": 0, "bl": 0, "profile": "unstable", "n_cmax": 100, **quiet}]}
    client = loopback_client(chip, seed=3)
    fixture = client.transport.firmware.fixture
    params = fixture.cell(0, 0).params
    v_verify = round(0.2 * 4095 / 5) * 5 / 4095  # nearest DAC code
    measured = lambda k: v_verify * _floor(params, k) * (1 + fixture.gain_error)
    expected = _first_cycle(lambda k: measured(k) > 5e-6)
    assert min(abs(measured(k) - 5e-6) for k in (expected - 1, expected)) > 1e-9
    rep = run_endurance_campaign(client, (0, 0), 1000)
    assert rep.broken and rep.n_cmax_observed == expected


def test_endurance_stable_survives():
    rep = run_endurance_campaign(loopback_client(), (2, 2), 1000)
    assert not rep.broken and rep.cycles == 1000 and rep.n_cmax_observed is None


def test_endurance_zero_cycles():
    rep = run_endurance_campaign(loopback_client(), (2, 2), 0)
    assert not rep.broken and rep.cycles == 0


def test_endurance_csv(tmp_path):
    rep = run_endurance_campaign(loopback_client(), (2, 2), 3)
    export_endurance_csv([rep], tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_text().splitlines()[1] == "2,2,3,3,,0"
