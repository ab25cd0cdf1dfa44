"""Frame codec for protocol swibridge/1, server side.

This is a from-scratch implementation of the byte layouts in the
controller package's docs/wire.md, deliberately sharing no code with the
client codec: two independent readings of the same document meeting on the
wire is the whole point of the compatibility tests.

A frame is a 4-byte little-endian payload length followed by the payload.
A payload is a 1-byte message kind, then kind-specific fields:

  strings     u16 byte length + UTF-8 bytes
  id lists    u8 count (max 255) + count u32 ids
  f32 vectors u32 count + count little-endian 32-bit floats

Requests: Init, StepToken, StepEmbedding, Reset, SpecialIdsReq, EmbeddingRow.
Responses: Ready, Logits, Row, WireError. Init, Reset, and SpecialIdsReq are
all answered with Ready. Anything wrong with the bytes raises FrameError.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import BinaryIO, Sequence

__all__ = [
    "VERSION", "MAX_FRAME", "FrameError",
    "Init", "StepToken", "StepEmbedding", "Reset", "SpecialIdsReq", "EmbeddingRow",
    "Ready", "Logits", "Row", "WireError",
    "encode_message", "decode_message", "write_frame", "read_frame",
]

VERSION = "swibridge/1"
MAX_FRAME = 64 * 1024 * 1024  # refuse anything larger; a frame this big is a bug


class FrameError(ValueError):
    """Bytes that do not form a valid frame or message."""


_K_INIT = 0x01
_K_STEP_TOKEN = 0x02
_K_STEP_EMB = 0x03
_K_RESET = 0x04
_K_SPECIALS = 0x05
_K_ROW_REQ = 0x06
_K_READY = 0x81
_K_LOGITS = 0x82
_K_ROW = 0x83
_K_ERROR = 0xFF


@dataclass(frozen=True)
class Init:
    model: str  # model identifier or filesystem path, server-side meaning
    device: str = "cpu"
    version: str = VERSION


@dataclass(frozen=True)
class StepToken:
    token_id: int


@dataclass(frozen=True)
class StepEmbedding:
    vector: tuple[float, ...]


@dataclass(frozen=True)
class Reset:
    pass


@dataclass(frozen=True)
class SpecialIdsReq:
    pass


@dataclass(frozen=True)
class EmbeddingRow:
    token_id: int


@dataclass(frozen=True)
class Ready:
    dim: int
    vocab: int
    eos: int
    think_begin: tuple[int, ...]
    think_end: tuple[int, ...]
    version: str = VERSION


@dataclass(frozen=True)
class Logits:
    values: tuple[float, ...]


@dataclass(frozen=True)
class Row:
    values: tuple[float, ...]


@dataclass(frozen=True)
class WireError:
    code: str
    text: str


WireMessage = (
    Init | StepToken | StepEmbedding | Reset | SpecialIdsReq | EmbeddingRow
    | Ready | Logits | Row | WireError
)


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise FrameError(f"string too long for the wire ({len(raw)} bytes)")
    return struct.pack("<H", len(raw)) + raw


def _pack_f32(values: Sequence[float]) -> bytes:
    return struct.pack(f"<I{len(values)}f", len(values), *values)


def _pack_ids(ids: Sequence[int]) -> bytes:
    if len(ids) > 0xFF:
        raise FrameError(f"id sequence too long ({len(ids)})")
    return struct.pack(f"<B{len(ids)}I", len(ids), *ids)


class _Cursor:
    """Position in a payload; every read checks bounds."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FrameError(
                f"payload truncated: wanted {n} bytes at offset {self.pos}, "
                f"have {len(self.data)}"
            )
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def string(self) -> str:
        raw = self.take(self.u16())
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FrameError(f"string field is not valid UTF-8: {exc}") from None

    def f32s(self) -> tuple[float, ...]:
        n = self.u32()
        return struct.unpack(f"<{n}f", self.take(4 * n))

    def ids(self) -> tuple[int, ...]:
        n = self.u8()
        return struct.unpack(f"<{n}I", self.take(4 * n))

    def done(self) -> None:
        if self.pos != len(self.data):
            raise FrameError(f"{len(self.data) - self.pos} trailing bytes in payload")


def encode_message(msg: WireMessage) -> bytes:
    if isinstance(msg, Init):
        return bytes([_K_INIT]) + _pack_str(msg.version) + _pack_str(msg.model) + _pack_str(msg.device)
    if isinstance(msg, StepToken):
        return bytes([_K_STEP_TOKEN]) + struct.pack("<I", msg.token_id)
    if isinstance(msg, StepEmbedding):
        return bytes([_K_STEP_EMB]) + _pack_f32(msg.vector)
    if isinstance(msg, Reset):
        return bytes([_K_RESET])
    if isinstance(msg, SpecialIdsReq):
        return bytes([_K_SPECIALS])
    if isinstance(msg, EmbeddingRow):
        return bytes([_K_ROW_REQ]) + struct.pack("<I", msg.token_id)
    if isinstance(msg, Ready):
        return (
            bytes([_K_READY])
            + _pack_str(msg.version)
            + struct.pack("<III", msg.dim, msg.vocab, msg.eos)
            + _pack_ids(msg.think_begin)
            + _pack_ids(msg.think_end)
        )
    if isinstance(msg, Logits):
        return bytes([_K_LOGITS]) + _pack_f32(msg.values)
    if isinstance(msg, Row):
        return bytes([_K_ROW]) + _pack_f32(msg.values)
    if isinstance(msg, WireError):
        return bytes([_K_ERROR]) + _pack_str(msg.code) + _pack_str(msg.text)
    raise FrameError(f"cannot encode {type(msg).__name__}")


def decode_message(payload: bytes) -> WireMessage:
    if not payload:
        raise FrameError("empty payload")
    c = _Cursor(payload)
    kind = c.u8()
    msg: WireMessage
    if kind == _K_INIT:
        msg = Init(version=c.string(), model=c.string(), device=c.string())
    elif kind == _K_STEP_TOKEN:
        msg = StepToken(token_id=c.u32())
    elif kind == _K_STEP_EMB:
        msg = StepEmbedding(vector=c.f32s())
    elif kind == _K_RESET:
        msg = Reset()
    elif kind == _K_SPECIALS:
        msg = SpecialIdsReq()
    elif kind == _K_ROW_REQ:
        msg = EmbeddingRow(token_id=c.u32())
    elif kind == _K_READY:
        version = c.string()
        dim, vocab, eos = c.u32(), c.u32(), c.u32()
        msg = Ready(version=version, dim=dim, vocab=vocab, eos=eos,
                    think_begin=c.ids(), think_end=c.ids())
    elif kind == _K_LOGITS:
        msg = Logits(values=c.f32s())
    elif kind == _K_ROW:
        msg = Row(values=c.f32s())
    elif kind == _K_ERROR:
        msg = WireError(code=c.string(), text=c.string())
    else:
        raise FrameError(f"unknown message kind 0x{kind:02x}")
    c.done()
    return msg


def write_frame(stream: BinaryIO, payload: bytes) -> None:
    if len(payload) > MAX_FRAME:
        raise FrameError(f"frame of {len(payload)} bytes exceeds the {MAX_FRAME} cap")
    stream.write(struct.pack("<I", len(payload)))
    stream.write(payload)
    stream.flush()


def read_frame(stream: BinaryIO) -> bytes | None:
    """One frame, or None on clean end-of-stream before a header."""
    header = stream.read(4)
    if not header:
        return None
    if len(header) < 4:
        raise FrameError("stream ended inside a frame header")
    (length,) = struct.unpack("<I", header)
    if length > MAX_FRAME:
        raise FrameError(f"declared frame of {length} bytes exceeds the cap")
    payload = b""
    while len(payload) < length:
        chunk = stream.read(length - len(payload))
        if not chunk:
            raise FrameError(
                f"stream ended inside a frame body ({len(payload)}/{length} bytes)"
            )
        payload += chunk
    return payload
