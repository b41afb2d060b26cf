"""Framed request/response codec between host and control board.

Frame layout (all integers little-endian)::

    A5 5A | version (01) | msg_type | payload_len (u16) | payload | crc16 (u16)

The CRC is CRC-16/CCITT-FALSE over version, msg_type, payload_len and payload.
Payloads are fixed-layout structs; units are mV, nA and microseconds.
"""

from __future__ import annotations

import binascii
import enum
import struct
from dataclasses import dataclass, fields
from typing import ClassVar, Union

MAGIC = b"\xa5\x5a"
VERSION = 0x01
MAX_PAYLOAD = 1024
HEADER = struct.Struct("<BBH")  # version, msg_type, payload_len
HEADER_SIZE = len(MAGIC) + HEADER.size
CRC_SIZE = 2


class EncodeError(ValueError):
    pass


def crc16(data: bytes, init: int = 0xFFFF) -> int:
    """CRC-16/CCITT-FALSE (poly 0x1021, no reflection, no final xor)."""
    return binascii.crc_hqx(data, init)


class MsgType(enum.IntEnum):
    FORM_REQ = 0x01
    SET_REQ = 0x02
    RESET_REQ = 0x03
    READ_REQ = 0x04
    PING_REQ = 0x05
    FORM_RESP = 0x81
    SET_RESP = 0x82
    RESET_RESP = 0x83
    READ_RESP = 0x84
    PONG = 0x85
    ERROR_RESP = 0xFF


class ErrorCode(enum.IntEnum):
    BAD_FRAME = 1
    UNKNOWN_TYPE = 2
    INVALID_FIELD = 3
    ADDRESS_ERROR = 4
    DEVICE_SATURATED = 5


class FrameErrorKind(enum.Enum):
    BAD_MAGIC = "bad_magic"
    BAD_VERSION = "bad_version"
    BAD_LENGTH = "bad_length"
    BAD_CRC = "bad_crc"
    UNKNOWN_TYPE = "unknown_type"


@dataclass(frozen=True)
class FrameError:
    kind: FrameErrorKind
    msg_type: int | None = None


class _Fixed:
    """Messages with a fixed struct payload; field order follows the dataclass."""

    msg_type: ClassVar[int]
    layout: ClassVar[struct.Struct]

    def payload(self) -> bytes:
        try:
            return self.layout.pack(*(getattr(self, f.name) for f in fields(self)))
        except struct.error as exc:
            raise EncodeError(f"{type(self).__name__}: {exc}") from None

    @classmethod
    def from_payload(cls, msg_type: int, data: bytes):
        return cls(*cls.layout.unpack(data))


@dataclass(frozen=True)
class _ProgramRequest(_Fixed):
    sl: int
    bl: int
    v_gate_mv: int
    i_target_na: int
    v_gate_read_mv: int
    v_start_mv: int
    v_step_mv: int
    v_stop_mv: int
    t_pulse_us: int

    layout: ClassVar = struct.Struct("<BBHIHHHHI")


@dataclass(frozen=True)
class FormRequest(_ProgramRequest):
    msg_type: ClassVar = MsgType.FORM_REQ


@dataclass(frozen=True)
class SetRequest(_ProgramRequest):
    msg_type: ClassVar = MsgType.SET_REQ


@dataclass(frozen=True)
class ResetRequest(_ProgramRequest):
    """Same layout as set; i_target is an upper bound."""

    msg_type: ClassVar = MsgType.RESET_REQ


@dataclass(frozen=True)
class ReadRequest(_Fixed):
    sl: int
    bl: int
    v_gate_read_mv: int
    v_read_mv: int

    msg_type: ClassVar = MsgType.READ_REQ
    layout: ClassVar = struct.Struct("<BBHh")


@dataclass(frozen=True)
class PingRequest(_Fixed):
    msg_type: ClassVar = MsgType.PING_REQ
    layout: ClassVar = struct.Struct("<")


@dataclass(frozen=True)
class ProgramResponse(_Fixed):
    """Answer to FORM/SET/RESET; ``op`` is the request type it answers."""

    op: MsgType
    status: int
    pulses: int
    final_v_mv: int
    final_i_na: int

    layout: ClassVar = struct.Struct("<BBHI")

    def __post_init__(self):
        if self.op not in (MsgType.FORM_REQ, MsgType.SET_REQ, MsgType.RESET_REQ):
            raise EncodeError(f"program response for non-program op {self.op!r}")
        object.__setattr__(self, "op", MsgType(self.op))

    @property
    def msg_type(self) -> int:
        return self.op | 0x80

    def payload(self) -> bytes:
        try:
            return self.layout.pack(self.status, self.pulses, self.final_v_mv, self.final_i_na)
        except struct.error as exc:
            raise EncodeError(f"ProgramResponse: {exc}") from None

    @classmethod
    def from_payload(cls, msg_type: int, data: bytes):
        return cls(MsgType(msg_type & 0x7F), *cls.layout.unpack(data))


@dataclass(frozen=True)
class ReadResponse(_Fixed):
    status: int
    i_na: int

    msg_type: ClassVar = MsgType.READ_RESP
    layout: ClassVar = struct.Struct("<Bi")


@dataclass(frozen=True)
class Pong(_Fixed):
    firmware_version: int

    msg_type: ClassVar = MsgType.PONG
    layout: ClassVar = struct.Struct("<H")


@dataclass(frozen=True)
class ErrorResponse:
    code: int
    detail: str = ""

    msg_type: ClassVar = MsgType.ERROR_RESP

    def payload(self) -> bytes:
        try:
            detail = self.detail.encode("ascii")
        except UnicodeEncodeError:
            raise EncodeError("error detail must be ASCII") from None
        if len(detail) > 255 or not 0 <= self.code <= 255:
            raise EncodeError("error code or detail out of range")
        return bytes((self.code, len(detail))) + detail

    @classmethod
    def from_payload(cls, msg_type: int, data: bytes):
        if len(data) < 2 or data[1] != len(data) - 2:
            raise struct.error("detail length mismatch")
        try:
            detail = data[2:].decode("ascii")
        except UnicodeDecodeError:
            raise struct.error("detail is not ASCII") from None
        return cls(data[0], detail)


Request = Union[FormRequest, SetRequest, ResetRequest, ReadRequest, PingRequest]
Response = Union[ProgramResponse, ReadResponse, Pong, ErrorResponse]
Message = Union[Request, Response]

PROGRAM_REQUESTS = {
    MsgType.FORM_REQ: FormRequest,
    MsgType.SET_REQ: SetRequest,
    MsgType.RESET_REQ: ResetRequest,
}
_DECODERS = {
    **PROGRAM_REQUESTS,
    MsgType.READ_REQ: ReadRequest,
    MsgType.PING_REQ: PingRequest,
    MsgType.FORM_RESP: ProgramResponse,
    MsgType.SET_RESP: ProgramResponse,
    MsgType.RESET_RESP: ProgramResponse,
    MsgType.READ_RESP: ReadResponse,
    MsgType.PONG: Pong,
    MsgType.ERROR_RESP: ErrorResponse,
}


def frame(msg_type: int, payload: bytes) -> bytes:
    if len(payload) > MAX_PAYLOAD:
        raise EncodeError(f"payload of {len(payload)} bytes exceeds {MAX_PAYLOAD}")
    body = HEADER.pack(VERSION, msg_type, len(payload)) + payload
    return MAGIC + body + crc16(body).to_bytes(CRC_SIZE, "little")


def encode(msg: Message) -> bytes:
    return frame(msg.msg_type, msg.payload())


def decode_payload(msg_type: int, payload: bytes) -> Message | FrameError:
    cls = _DECODERS.get(msg_type)
    if cls is None:
        return FrameError(FrameErrorKind.UNKNOWN_TYPE, msg_type)
    try:
        return cls.from_payload(msg_type, payload)
    except struct.error:
        return FrameError(FrameErrorKind.BAD_LENGTH, msg_type)


class Deframer:
    """Incremental frame parser that resynchronizes on the next magic.

    Runs of garbage between frames are reported once as BAD_MAGIC; header and
    CRC failures are reported per candidate frame. A candidate whose declared
    length is still incomplete is abandoned as soon as a complete, CRC-valid
    frame is found behind its magic, so a corrupt length field cannot swallow
    the traffic that follows it.
    """

    def __init__(self):
        self._buf = bytearray()
        self._in_garbage = False

    def __len__(self):
        return len(self._buf)

    def _garbage(self, out: list):
        if not self._in_garbage:
            out.append(FrameError(FrameErrorKind.BAD_MAGIC))
            self._in_garbage = True

    def _reject(self, out: list, kind: FrameErrorKind, drop: int):
        out.append(FrameError(kind))
        self._in_garbage = True
        del self._buf[:drop]

    def _check(self, start: int) -> tuple[FrameErrorKind | None, int]:
        """Validate the frame at ``start``; returns (error, total size) or (None, 0) when incomplete."""
        buf = self._buf
        if len(buf) - start < HEADER_SIZE:
            return None, 0
        version, _, length = HEADER.unpack_from(buf, start + len(MAGIC))
        if version != VERSION:
            return FrameErrorKind.BAD_VERSION, 0
        if length > MAX_PAYLOAD:
            return FrameErrorKind.BAD_LENGTH, 0
        total = HEADER_SIZE + length + CRC_SIZE
        if len(buf) - start < total:
            return None, 0
        body = bytes(buf[start + len(MAGIC): start + total - CRC_SIZE])
        crc = int.from_bytes(buf[start + total - CRC_SIZE: start + total], "little")
        if crc16(body) != crc:
            return FrameErrorKind.BAD_CRC, total
        return None, total

    def _complete_frame_after(self, start: int) -> int | None:
        j = self._buf.find(MAGIC, start)
        while j >= 0:
            err, total = self._check(j)
            if err is None and total:
                return j
            j = self._buf.find(MAGIC, j + 1)
        return None

    def feed(self, data: bytes) -> list[Message | FrameError]:
        out: list[Message | FrameError] = []
        buf = self._buf
        buf.extend(data)
        while buf:
            i = buf.find(MAGIC)
            if i < 0:
                keep = 1 if buf[-1] == MAGIC[0] else 0
                if len(buf) > keep:
                    self._garbage(out)
                    del buf[: len(buf) - keep]
                break
            if i > 0:
                self._garbage(out)
                del buf[:i]
            err, total = self._check(0)
            if err is not None:
                self._reject(out, err, len(MAGIC))
                continue
            if not total:
                j = self._complete_frame_after(len(MAGIC)) if len(buf) >= HEADER_SIZE else None
                if j is None:
                    break
                self._reject(out, FrameErrorKind.BAD_LENGTH, j)
                continue
            msg_type = buf[3]
            payload = bytes(buf[HEADER_SIZE: total - CRC_SIZE])
            del buf[:total]
            self._in_garbage = False
            out.append(decode_payload(msg_type, payload))
        return out


def decode(data: bytes) -> list[Message | FrameError]:
    """Decode a complete byte string in one go."""
    return Deframer().feed(data)
