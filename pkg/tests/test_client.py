import statistics

import pytest

from memrig import protocol as proto
from memrig.chip import build_fixture
from memrig.client import (
    AddressError,
    ClientConfig,
    InvalidFieldError,
    LoopbackTransport,
    MemrigClient,
    SaturationError,
    TransportError,
    parse_endpoint,
)
from memrig.firmware import FIRMWARE_VERSION, setup
from memrig.programming import RESET_DEFAULTS, SET_DEFAULTS, Status

from conftest import loopback_client


class CountingTransport(LoopbackTransport):
    def __init__(self, firmware):
        super().__init__(firmware)
        self.sent = []

    def send(self, data):
        self.sent.append(data)
        super().send(data)


def test_config_defaults():
    cfg = ClientConfig()
    assert (cfg.form.v_gate, cfg.form.i_target, cfg.form.v_gate_read) == (1.8, 80e-6, 1.5)
    assert (cfg.reset.v_gate, cfg.reset.i_target, cfg.reset.v_gate_read) == (2.7, 5e-6, 1.5)
    assert (cfg.set.v_gate, cfg.set.i_target, cfg.set.v_gate_read) == (1.5, 80e-6, 1.5)
    assert cfg.v_gate_read == 1.5
    assert (cfg.set.v_start, cfg.set.v_step, cfg.set.v_stop) == (SET_DEFAULTS.v_start, SET_DEFAULTS.v_step, SET_DEFAULTS.v_stop)
    assert (cfg.reset.v_start, cfg.reset.v_step, cfg.reset.v_stop) == (RESET_DEFAULTS.v_start, RESET_DEFAULTS.v_step, RESET_DEFAULTS.v_stop)


def test_ping(client):
    assert client.ping() == FIRMWARE_VERSION


def test_set_with_defaults_reaches_target(client):
    client.form_cell(2, 3)
    client.reset_cell(2, 3)
    res = client.set_cell(2, 3)
    assert res.status is Status.OK
    assert res.final_current >= 80e-6


def test_reset_on_worn_cell_is_broken():
    chip = {"overrides": [{"sl": 0, "bl": 0, "kappa": 1.0, "n_cmax": 1}]}
    client = loopback_client(chip)
    client.form_cell(0, 0)
    client.reset_cell(0, 0)  # first reset wears the cell out completely
    client.set_cell(0, 0)
    assert client.reset_cell(0, 0).status is Status.CELL_BROKEN


def test_bad_address_sends_nothing():
    transport = CountingTransport(setup(build_fixture(seed=0)))
    client = MemrigClient(transport)
    with pytest.raises(AddressError):
        client.set_cell(12, 0)
    with pytest.raises(AddressError):
        client.read_cell(0, 7, 0.2)
    assert transport.sent == []


def test_read_zero_volts(client):
    client.form_cell(0, 0)
    assert client.read_cell(0, 0, 0.0) == 0.0


def test_lrs_read_matches_ohmic_value():
    client = loopback_client(seed=4)
    client.form_cell(1, 1)
    client.reset_cell(1, 1)
    client.set_cell(1, 1)
    cell = client.transport.firmware.fixture.cell(1, 1)
    expected = min(0.2 * cell.conductance, cell.params.transistor.compliance(1.5))
    pos = [client.read_cell(1, 1, 0.2) for _ in range(30)]
    neg = [client.read_cell(1, 1, -0.2) for _ in range(30)]
    assert all(i > 0 for i in pos) and all(i < 0 for i in neg)
    assert statistics.mean(pos) == pytest.approx(expected, rel=0.03)
    assert statistics.mean(neg) == pytest.approx(-statistics.mean(pos), rel=0.03)


def test_saturation_is_typed():
    client = loopback_client({"overrides": [{"sl": 0, "bl": 0, "resistor_ohms": 1.0}]})
    with pytest.raises(SaturationError):
        client.read_cell(0, 0, 0.2)


def test_invalid_field_is_typed(client):
    with pytest.raises(InvalidFieldError):
        client.set_cell(0, 0, v_step=0.0)
    with pytest.raises(InvalidFieldError):
        client.read_cell(0, 0, 40.0)


def test_overrides_reach_the_wire():
    transport = CountingTransport(setup(build_fixture(seed=0)))
    client = MemrigClient(transport)
    client.set_cell(0, 0, v_gate=2.0, i_target=50e-6)
    (req,) = proto.decode(transport.sent[0])
    assert req == proto.SetRequest(0, 0, 2000, 50_000, 1500, 500, 100, 2000, 10)


def test_closed_transport_raises():
    class Dead:
        def send(self, data):
            pass

        def recv(self):
            return b""

        def close(self):
            pass

    with pytest.raises(TransportError):
        MemrigClient(Dead()).ping()


def test_parse_endpoint():
    assert parse_endpoint("localhost:9000") == ("localhost", 9000)
    assert parse_endpoint(":9000") == ("127.0.0.1", 9000)
    with pytest.raises(ValueError):
        parse_endpoint("localhost")


def test_connect_refused():
    with pytest.raises(TransportError):
        MemrigClient.connect("127.0.0.1:1")
