"""Control-board emulator: setup phase, then receive / process / respond.

One request is handled at a time and answered with exactly one response,
including malformed frames, which are answered with ``ERROR_RESP``.
"""

from __future__ import annotations

import enum
import logging
import math
import os
import selectors
import socket
import threading
from dataclasses import dataclass

from . import protocol as proto
from .device import ParameterError
from .frontend import COLS, DAC_FULL_SCALE, ROWS, AddressError, CrossbarFixture
from .programming import DEFAULT_V_VERIFY, IspvaParams, Mode, ispva
from .protocol import ErrorCode, ErrorResponse, FrameError, FrameErrorKind, MsgType

log = logging.getLogger(__name__)

FIRMWARE_VERSION = 0x0100
MAX_PULSES = 255
_MV_LIMIT = int(DAC_FULL_SCALE * 1000)
_U32_MAX = 2**32 - 1
_I32 = (-(2**31), 2**31 - 1)

_MODES = {MsgType.FORM_REQ: Mode.FORM, MsgType.SET_REQ: Mode.SET, MsgType.RESET_REQ: Mode.RESET}


class Phase(enum.Enum):
    BOOT = "boot"
    READY = "ready"


@dataclass
class Stats:
    requests: int = 0
    errors: int = 0


class InvalidField(ValueError):
    pass


def _program_params(req) -> IspvaParams:
    if req.v_step_mv == 0 or req.t_pulse_us == 0 or req.i_target_na == 0:
        raise InvalidField("v_step, t_pulse and i_target must be non-zero")
    if req.v_start_mv > req.v_stop_mv:
        raise InvalidField("v_start above v_stop")
    if max(req.v_stop_mv, req.v_gate_mv, req.v_gate_read_mv) > _MV_LIMIT:
        raise InvalidField(f"voltage above {_MV_LIMIT} mV")
    if (req.v_stop_mv - req.v_start_mv) // req.v_step_mv + 1 > MAX_PULSES:
        raise InvalidField(f"ramp longer than {MAX_PULSES} pulses")
    return IspvaParams(
        v_start=req.v_start_mv / 1000,
        v_step=req.v_step_mv / 1000,
        v_stop=req.v_stop_mv / 1000,
        t_pulse=req.t_pulse_us * 1e-6,
        v_gate_prog=req.v_gate_mv / 1000,
        v_gate_read=req.v_gate_read_mv / 1000,
        v_verify=DEFAULT_V_VERIFY,
        i_target=req.i_target_na * 1e-9,
        mode=_MODES[req.msg_type],
    )


def _to_na(amps: float, lo: int, hi: int) -> int:
    if math.isnan(amps):
        return hi
    if math.isinf(amps):
        return hi if amps > 0 else lo
    return min(max(round(amps * 1e9), lo), hi)


class Firmware:
    def __init__(self, fixture: CrossbarFixture):
        self.fixture = fixture
        self.phase = Phase.BOOT
        self.stats = Stats()
        self._deframer = proto.Deframer()

    def setup(self) -> Firmware:
        """Clear DACs, ground every mux, put every TIA on its largest resistor."""
        self.fixture.setup()
        self._deframer = proto.Deframer()
        self.phase = Phase.READY
        return self

    def handle_request(self, req) -> proto.Response:
        self.stats.requests += 1
        try:
            return self._dispatch(req)
        except AddressError as exc:
            return self._error(ErrorCode.ADDRESS_ERROR, str(exc))
        except (InvalidField, ParameterError) as exc:
            return self._error(ErrorCode.INVALID_FIELD, str(exc))

    def _error(self, code: ErrorCode, detail: str = "") -> ErrorResponse:
        self.stats.errors += 1
        detail = detail.encode("ascii", "replace")[:255].decode("ascii")
        return ErrorResponse(int(code), detail)

    def _check_address(self, req):
        if not (req.sl < ROWS and req.bl < COLS):
            raise AddressError(f"cell ({req.sl}, {req.bl}) outside {ROWS}x{COLS}")

    def _dispatch(self, req) -> proto.Response:
        if isinstance(req, proto.PingRequest):
            return proto.Pong(FIRMWARE_VERSION)
        if self.phase is not Phase.READY:
            raise InvalidField("firmware not set up")
        if isinstance(req, tuple(proto.PROGRAM_REQUESTS.values())):
            self._check_address(req)
            result = ispva(self.fixture, req.sl, req.bl, _program_params(req))
            return proto.ProgramResponse(
                req.msg_type,
                int(result.status),
                result.pulses,
                round(result.final_voltage * 1000),
                _to_na(result.final_current, 0, _U32_MAX),
            )
        if isinstance(req, proto.ReadRequest):
            self._check_address(req)
            if abs(req.v_read_mv) > _MV_LIMIT or req.v_gate_read_mv > _MV_LIMIT:
                raise InvalidField(f"voltage above {_MV_LIMIT} mV")
            reading = self.fixture.measure_bl_current(req.bl, req.v_read_mv / 1000, req.v_gate_read_mv / 1000, req.sl)
            if reading.saturated:
                return self._error(ErrorCode.DEVICE_SATURATED, "TIA saturated on smallest feedback resistor")
            return proto.ReadResponse(0, _to_na(reading.amps, *_I32))
        return self._error(ErrorCode.UNKNOWN_TYPE, f"not a request: type 0x{req.msg_type:02x}")

    def handle_frame_error(self, err: FrameError) -> ErrorResponse:
        self.stats.requests += 1
        if err.kind is FrameErrorKind.UNKNOWN_TYPE:
            return self._error(ErrorCode.UNKNOWN_TYPE, f"unknown type 0x{err.msg_type:02x}")
        return self._error(ErrorCode.BAD_FRAME, err.kind.value)

    def process(self, data: bytes) -> bytes:
        """Feed raw request bytes; return the encoded responses in order."""
        out = bytearray()
        for item in self._deframer.feed(data):
            if isinstance(item, FrameError):
                resp = self.handle_frame_error(item)
            else:
                resp = self.handle_request(item)
            out += proto.encode(resp)
        return bytes(out)


def setup(fixture: CrossbarFixture) -> Firmware:
    return Firmware(fixture).setup()


def serve_stdio(fw: Firmware, fd_in: int = 0, fd_out: int = 1) -> None:
    """Serve on a pair of file descriptors until end of input."""
    while True:
        chunk = os.read(fd_in, 65536)
        if not chunk:
            return
        reply = fw.process(chunk)
        view = memoryview(reply)
        while view:
            view = view[os.write(fd_out, view):]


def serve_socket(
    fw: Firmware,
    listener: socket.socket,
    stop: threading.Event | None = None,
    once: bool = False,
) -> None:
    """Single-client stream server; extra connections are closed on accept.

    Returns when ``stop`` is set, or after the first client disconnects when
    ``once`` is true.
    """
    stop = stop or threading.Event()
    listener.setblocking(False)
    sel = selectors.DefaultSelector()
    sel.register(listener, selectors.EVENT_READ, "listen")
    client: socket.socket | None = None
    try:
        while not stop.is_set():
            for key, _ in sel.select(timeout=0.1):
                if key.data == "listen":
                    conn, addr = listener.accept()
                    if client is not None:
                        log.info("refusing second connection from %s", addr)
                        conn.close()
                        continue
                    conn.setblocking(True)
                    if conn.family in (socket.AF_INET, socket.AF_INET6):
                        conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                    client = conn
                    sel.register(conn, selectors.EVENT_READ, "client")
                    log.info("client connected from %s", addr)
                    continue
                try:
                    chunk = client.recv(65536)
                except ConnectionError:
                    chunk = b""
                if not chunk:
                    sel.unregister(client)
                    client.close()
                    client = None
                    log.info("client disconnected")
                    if once:
                        return
                    continue
                reply = fw.process(chunk)
                try:
                    client.sendall(reply)
                except ConnectionError:
                    sel.unregister(client)
                    client.close()
                    client = None
                    if once:
                        return
    finally:
        if client is not None:
            client.close()
        sel.close()
        listener.close()


def open_listener(host: str, port: int) -> socket.socket:
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    sock.bind((host, port))
    sock.listen(1)
    return sock
