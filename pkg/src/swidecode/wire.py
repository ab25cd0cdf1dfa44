"""Wire protocol for serving a real model to the controller, version swibridge/1.

Frames are a 4-byte little-endian payload length followed by the payload.
Payloads are binary: a 1-byte message kind, then kind-specific fields.
Integers are little-endian and unsigned; strings are UTF-8 with a 2-byte
length; embedding and logits vectors travel as 32-bit little-endian floats
to bound frame sizes. docs/wire.md spells out every layout.

Requests: Init, StepToken, StepEmbedding, Reset, SpecialIdsReq, EmbeddingRow.
Responses: Ready, Logits, Row, WireError. Every request gets exactly one
response. Init, Reset, and SpecialIdsReq answer with Ready, which carries
the version, model dimensions, and the special token ids in one record.

BridgeBackend adapts a served model to the backend contract: it spawns the
server command, handshakes, forwards steps, and fetches the embedding table
row by row on first use (cached; fine at tiny-model scale, prohibitive for
production vocabularies, which is a documented limitation). Sampling seeds
and all controller state stay on this side of the pipe.
"""

from __future__ import annotations

import struct
import subprocess
from dataclasses import dataclass
from typing import BinaryIO, Sequence

import numpy as np

from .decode import SpecialIds
from .errors import BackendError, ProtocolError
from .mixing import EmbeddingTable

__all__ = [
    "VERSION", "MAX_FRAME",
    "Init", "StepToken", "StepEmbedding", "Reset", "SpecialIdsReq", "EmbeddingRow",
    "Ready", "Logits", "Row", "WireError",
    "encode_message", "decode_message", "write_frame", "read_frame",
    "BridgeBackend",
]

VERSION = "swibridge/1"
MAX_FRAME = 64 * 1024 * 1024  # refuse anything larger; a frame this big is a bug

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
        raise ProtocolError(f"string too long for the wire ({len(raw)} bytes)")
    return struct.pack("<H", len(raw)) + raw


def _pack_f32(values: Sequence[float]) -> bytes:
    arr = np.asarray(values, dtype="<f4")
    return struct.pack("<I", arr.shape[0]) + arr.tobytes()


def _pack_ids(ids: Sequence[int]) -> bytes:
    if len(ids) > 0xFF:
        raise ProtocolError(f"id sequence too long ({len(ids)})")
    return struct.pack("<B", len(ids)) + b"".join(struct.pack("<I", i) for i in ids)


class _Reader:
    """Cursor over a payload; every read checks bounds."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ProtocolError(
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
        return self.take(self.u16()).decode("utf-8")

    def f32s(self) -> tuple[float, ...]:
        n = self.u32()
        raw = self.take(4 * n)
        return tuple(float(x) for x in np.frombuffer(raw, dtype="<f4"))

    def ids(self) -> tuple[int, ...]:
        n = self.u8()
        return tuple(self.u32() for _ in range(n))

    def done(self) -> None:
        if self.pos != len(self.data):
            raise ProtocolError(f"{len(self.data) - self.pos} trailing bytes in payload")


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
            + struct.pack("<II", msg.dim, msg.vocab)
            + struct.pack("<I", msg.eos)
            + _pack_ids(msg.think_begin)
            + _pack_ids(msg.think_end)
        )
    if isinstance(msg, Logits):
        return bytes([_K_LOGITS]) + _pack_f32(msg.values)
    if isinstance(msg, Row):
        return bytes([_K_ROW]) + _pack_f32(msg.values)
    if isinstance(msg, WireError):
        return bytes([_K_ERROR]) + _pack_str(msg.code) + _pack_str(msg.text)
    raise ProtocolError(f"cannot encode {type(msg).__name__}")


def decode_message(payload: bytes) -> WireMessage:
    if not payload:
        raise ProtocolError("empty payload")
    r = _Reader(payload)
    kind = r.u8()
    msg: WireMessage
    if kind == _K_INIT:
        msg = Init(version=r.string(), model=r.string(), device=r.string())
    elif kind == _K_STEP_TOKEN:
        msg = StepToken(token_id=r.u32())
    elif kind == _K_STEP_EMB:
        msg = StepEmbedding(vector=r.f32s())
    elif kind == _K_RESET:
        msg = Reset()
    elif kind == _K_SPECIALS:
        msg = SpecialIdsReq()
    elif kind == _K_ROW_REQ:
        msg = EmbeddingRow(token_id=r.u32())
    elif kind == _K_READY:
        version = r.string()
        dim, vocab = struct.unpack("<II", r.take(8))
        eos = r.u32()
        msg = Ready(version=version, dim=dim, vocab=vocab, eos=eos,
                    think_begin=r.ids(), think_end=r.ids())
    elif kind == _K_LOGITS:
        msg = Logits(values=r.f32s())
    elif kind == _K_ROW:
        msg = Row(values=r.f32s())
    elif kind == _K_ERROR:
        msg = WireError(code=r.string(), text=r.string())
    else:
        raise ProtocolError(f"unknown message kind 0x{kind:02x}")
    r.done()
    return msg


def write_frame(stream: BinaryIO, payload: bytes) -> None:
    if len(payload) > MAX_FRAME:
        raise ProtocolError(f"frame of {len(payload)} bytes exceeds the {MAX_FRAME} cap")
    stream.write(struct.pack("<I", len(payload)))
    stream.write(payload)
    stream.flush()


def read_frame(stream: BinaryIO) -> bytes | None:
    """One frame, or None on clean end-of-stream before a header."""
    header = stream.read(4)
    if not header:
        return None
    if len(header) < 4:
        raise ProtocolError("stream ended inside a frame header")
    (length,) = struct.unpack("<I", header)
    if length > MAX_FRAME:
        raise ProtocolError(f"declared frame of {length} bytes exceeds the cap")
    payload = b""
    while len(payload) < length:
        chunk = stream.read(length - len(payload))
        if not chunk:
            raise ProtocolError(
                f"stream ended inside a frame body ({len(payload)}/{length} bytes)"
            )
        payload += chunk
    return payload


class BridgeBackend:
    """Backend served by an external process over stdio frames.

    command is the argv of the server. The constructor handshakes and caches
    the model shape; the embedding table is fetched lazily, one row per
    request, then kept. Use as a context manager or call close().
    """

    def __init__(self, command: Sequence[str], model: str, device: str = "cpu"):
        self._proc = subprocess.Popen(
            list(command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
        )
        self._table: EmbeddingTable | None = None
        ready = self._roundtrip(Init(model=model, device=device))
        if not isinstance(ready, Ready):
            raise ProtocolError(f"expected Ready after Init, got {type(ready).__name__}")
        if ready.version != VERSION:
            raise ProtocolError(f"server speaks {ready.version!r}, not {VERSION!r}")
        self._ready = ready

    def _roundtrip(self, msg: WireMessage) -> WireMessage:
        if self._proc.poll() is not None:
            raise BackendError("bridge process is not running")
        try:
            write_frame(self._proc.stdin, encode_message(msg))
            payload = read_frame(self._proc.stdout)
        except (BrokenPipeError, OSError) as exc:
            raise BackendError(f"bridge pipe failed: {exc}") from exc
        if payload is None:
            raise BackendError("bridge closed the stream mid-conversation")
        reply = decode_message(payload)
        if isinstance(reply, WireError):
            raise BackendError(f"bridge error {reply.code}: {reply.text}")
        return reply

    # backend contract -----------------------------------------------------

    def step(self, fed: int | np.ndarray) -> np.ndarray:
        if isinstance(fed, (int, np.integer)):
            reply = self._roundtrip(StepToken(token_id=int(fed)))
        else:
            vec = tuple(float(x) for x in np.asarray(fed, dtype=np.float64))
            reply = self._roundtrip(StepEmbedding(vector=vec))
        if not isinstance(reply, Logits):
            raise ProtocolError(f"expected Logits, got {type(reply).__name__}")
        return np.asarray(reply.values, dtype=np.float64)

    def reset(self) -> None:
        reply = self._roundtrip(Reset())
        if not isinstance(reply, Ready):
            raise ProtocolError(f"expected Ready after Reset, got {type(reply).__name__}")

    def embedding_table(self) -> EmbeddingTable:
        if self._table is None:
            rows = []
            for tid in range(self._ready.vocab):
                reply = self._roundtrip(EmbeddingRow(token_id=tid))
                if not isinstance(reply, Row):
                    raise ProtocolError(f"expected Row, got {type(reply).__name__}")
                rows.append(np.asarray(reply.values, dtype=np.float64))
            self._table = EmbeddingTable(rows=np.vstack(rows))
        return self._table

    def special_ids(self) -> SpecialIds:
        return SpecialIds(
            eos=self._ready.eos,
            think_begin=self._ready.think_begin,
            think_end=self._ready.think_end,
        )

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()

    def __enter__(self) -> "BridgeBackend":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
