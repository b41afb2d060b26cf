"""Host-side API for the control board.

Mirrors the board's Python API (formCell, resetCell, setCell, readCell) with
SI units: volts and amps in, volts and amps out. Every call is one request
and one response over a byte transport.
"""

from __future__ import annotations

import os
import socket
import subprocess
from dataclasses import dataclass, field
from typing import NamedTuple, Protocol

from . import protocol as proto
from .frontend import COLS, ROWS
from .programming import ProgramResult, Status
from .protocol import ErrorCode, ErrorResponse, FrameError


class ClientError(Exception):
    pass


class TransportError(ClientError):
    pass


class AddressError(ClientError, LookupError):
    pass


class FirmwareError(ClientError):
    def __init__(self, code: int, detail: str = ""):
        super().__init__(f"firmware error {code}: {detail}")
        self.code = code
        self.detail = detail


class InvalidFieldError(FirmwareError, ValueError):
    pass


class SaturationError(FirmwareError):
    pass


class CellAddress(NamedTuple):
    sl: int
    bl: int

    @classmethod
    def checked(cls, sl: int, bl: int) -> CellAddress:
        if not (0 <= sl < ROWS and 0 <= bl < COLS):
            raise AddressError(f"cell ({sl}, {bl}) outside {ROWS}x{COLS} array")
        return cls(sl, bl)


ALL_CELLS = tuple(CellAddress(sl, bl) for sl in range(ROWS) for bl in range(COLS))


@dataclass(frozen=True)
class ProgramDefaults:
    v_gate: float
    i_target: float
    v_gate_read: float = 1.5
    v_start: float = 0.5
    v_step: float = 0.1
    v_stop: float = 2.0
    t_pulse: float = 10e-6


@dataclass(frozen=True)
class ClientConfig:
    endpoint: str | None = None
    form: ProgramDefaults = ProgramDefaults(v_gate=1.8, i_target=80e-6, v_start=2.0, v_stop=3.2)
    set: ProgramDefaults = ProgramDefaults(v_gate=1.5, i_target=80e-6)
    reset: ProgramDefaults = ProgramDefaults(v_gate=2.7, i_target=5e-6)
    v_gate_read: float = 1.5
    timeout: float = 30.0


class Transport(Protocol):
    def send(self, data: bytes) -> None: ...

    def recv(self) -> bytes: ...

    def close(self) -> None: ...


class SocketTransport:
    def __init__(self, host: str, port: int, timeout: float = 30.0):
        try:
            self.sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise TransportError(f"cannot connect to {host}:{port}: {exc}") from exc
        self.sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)

    def send(self, data: bytes):
        try:
            self.sock.sendall(data)
        except OSError as exc:
            raise TransportError(str(exc)) from exc

    def recv(self) -> bytes:
        try:
            return self.sock.recv(65536)
        except OSError as exc:
            raise TransportError(str(exc)) from exc

    def close(self):
        self.sock.close()


class LoopbackTransport:
    """In-process transport straight into a ``Firmware`` instance."""

    def __init__(self, firmware):
        self.firmware = firmware
        self._pending = bytearray()

    def send(self, data: bytes):
        self._pending += self.firmware.process(data)

    def recv(self) -> bytes:
        data, self._pending = bytes(self._pending), bytearray()
        return data

    def close(self):
        pass


class PipeTransport:
    """Talks to ``memrig-fw --stdio`` running as a subprocess."""

    def __init__(self, argv: list[str]):
        self.proc = subprocess.Popen(argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, bufsize=0)

    def send(self, data: bytes):
        try:
            self.proc.stdin.write(data)
        except OSError as exc:
            raise TransportError(str(exc)) from exc

    def recv(self) -> bytes:
        return os.read(self.proc.stdout.fileno(), 65536)

    def close(self):
        self.proc.stdin.close()
        self.proc.wait(timeout=10)


def parse_endpoint(endpoint: str) -> tuple[str, int]:
    host, sep, port = endpoint.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"endpoint must look like host:port, got {endpoint!r}")
    return host or "127.0.0.1", int(port)


def _mv(volts: float) -> int:
    return round(volts * 1000)


def _na(amps: float) -> int:
    return round(amps * 1e9)


_ERRORS = {
    ErrorCode.ADDRESS_ERROR: AddressError,
    ErrorCode.INVALID_FIELD: InvalidFieldError,
    ErrorCode.DEVICE_SATURATED: SaturationError,
}


@dataclass
class MemrigClient:
    transport: Transport
    config: ClientConfig = field(default_factory=ClientConfig)
    formed: set = field(default_factory=set)

    def __post_init__(self):
        self._deframer = proto.Deframer()
        self._inbox: list = []

    @classmethod
    def connect(cls, endpoint: str, config: ClientConfig | None = None) -> MemrigClient:
        host, port = parse_endpoint(endpoint)
        config = config or ClientConfig(endpoint=endpoint)
        return cls(SocketTransport(host, port, config.timeout), config)

    def close(self):
        self.transport.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def request(self, msg) -> proto.Response:
        self.transport.send(proto.encode(msg))
        while not self._inbox:
            chunk = self.transport.recv()
            if not chunk:
                raise TransportError("connection closed by firmware")
            self._inbox.extend(self._deframer.feed(chunk))
        resp = self._inbox.pop(0)
        if isinstance(resp, FrameError):
            raise TransportError(f"corrupt response frame: {resp.kind.value}")
        if isinstance(resp, ErrorResponse):
            if resp.code == ErrorCode.ADDRESS_ERROR:
                raise AddressError(resp.detail)
            raise _ERRORS.get(resp.code, FirmwareError)(resp.code, resp.detail)
        return resp

    def ping(self) -> int:
        return self.request(proto.PingRequest()).firmware_version

    def _program(self, cls, defaults: ProgramDefaults, sl: int, bl: int, **overrides) -> ProgramResult:
        addr = CellAddress.checked(sl, bl)
        p = {**defaults.__dict__, **overrides}
        req = cls(
            sl=addr.sl,
            bl=addr.bl,
            v_gate_mv=_mv(p["v_gate"]),
            i_target_na=_na(p["i_target"]),
            v_gate_read_mv=_mv(p["v_gate_read"]),
            v_start_mv=_mv(p["v_start"]),
            v_step_mv=_mv(p["v_step"]),
            v_stop_mv=_mv(p["v_stop"]),
            t_pulse_us=round(p["t_pulse"] * 1e6),
        )
        try:
            resp = self.request(req)
        except proto.EncodeError as exc:
            raise InvalidFieldError(int(ErrorCode.INVALID_FIELD), str(exc)) from exc
        return ProgramResult(Status(resp.status), resp.pulses, resp.final_v_mv / 1000, resp.final_i_na * 1e-9)

    def form_cell(self, sl: int, bl: int, **overrides) -> ProgramResult:
        result = self._program(proto.FormRequest, self.config.form, sl, bl, **overrides)
        self.formed.add(CellAddress(sl, bl))
        return result

    def set_cell(self, sl: int, bl: int, **overrides) -> ProgramResult:
        return self._program(proto.SetRequest, self.config.set, sl, bl, **overrides)

    def reset_cell(self, sl: int, bl: int, **overrides) -> ProgramResult:
        return self._program(proto.ResetRequest, self.config.reset, sl, bl, **overrides)

    def read_cell_na(self, sl: int, bl: int, v_read: float, v_gate_read: float | None = None) -> int:
        addr = CellAddress.checked(sl, bl)
        gate = self.config.v_gate_read if v_gate_read is None else v_gate_read
        try:
            req = proto.ReadRequest(addr.sl, addr.bl, _mv(gate), _mv(v_read))
            return self.request(req).i_na
        except proto.EncodeError as exc:
            raise InvalidFieldError(int(ErrorCode.INVALID_FIELD), str(exc)) from exc

    def read_cell(self, sl: int, bl: int, v_read: float, v_gate_read: float | None = None) -> float:
        """Signed bit-line current in amps."""
        return self.read_cell_na(sl, bl, v_read, v_gate_read) * 1e-9
