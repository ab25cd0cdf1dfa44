"""Request loop: one frame in, one frame out, until the peer closes.

The loop is single-threaded and serves one model per process. A malformed
payload gets WireError("protocol") and the conversation continues; damage at
the framing layer (a torn header or an oversized length) cannot be answered
in-band, so the loop exits instead. Nothing but frames is ever written to
the output stream.
"""

from __future__ import annotations

from typing import BinaryIO, Sequence

from .frames import (
    VERSION,
    EmbeddingRow,
    FrameError,
    Init,
    Logits,
    Ready,
    Reset,
    Row,
    SpecialIdsReq,
    StepEmbedding,
    StepToken,
    WireError,
    WireMessage,
    decode_message,
    encode_message,
    read_frame,
    write_frame,
)
from .hosts import HostContract, HostError, load_host

__all__ = ["serve"]


class _Session:
    """Connection state: at most one loaded host and its resolved eos id."""

    def __init__(
        self,
        think_begin: Sequence[int],
        think_end: Sequence[int],
        eos_override: int | None,
    ):
        self.think_begin = tuple(think_begin)
        self.think_end = tuple(think_end)
        self.eos_override = eos_override
        self.host: HostContract | None = None
        self.eos = 0

    def handle(self, msg: WireMessage) -> WireMessage:
        if isinstance(msg, Init):
            return self._init(msg)
        if self.host is None:
            return WireError(
                code="protocol", text=f"{type(msg).__name__} before a successful Init"
            )
        if isinstance(msg, Reset):
            self.host.reset()
            return self._ready()
        if isinstance(msg, SpecialIdsReq):
            return self._ready()
        try:
            if isinstance(msg, StepToken):
                return Logits(values=tuple(self.host.step_token(msg.token_id)))
            if isinstance(msg, StepEmbedding):
                return Logits(values=tuple(self.host.step_embedding(msg.vector)))
            if isinstance(msg, EmbeddingRow):
                return Row(values=tuple(self.host.row(msg.token_id)))
        except HostError as exc:
            return WireError(code=exc.code, text=exc.text)
        return WireError(
            code="protocol", text=f"{type(msg).__name__} is not a request"
        )

    def _init(self, msg: Init) -> WireMessage:
        if msg.version != VERSION:
            return WireError(
                code="protocol",
                text=f"version {msg.version!r} not supported, this server speaks {VERSION}",
            )
        try:
            host = load_host(msg.model, msg.device)
        except HostError as exc:
            return WireError(code=exc.code, text=exc.text)
        eos = self.eos_override if self.eos_override is not None else host.eos
        if eos is None:
            return WireError(
                code="model_load",
                text=f"model {msg.model!r} declares no end-of-sequence id; "
                "start the server with --eos",
            )
        self.host = host
        self.eos = int(eos)
        return self._ready()

    def _ready(self) -> Ready:
        assert self.host is not None
        return Ready(
            dim=self.host.dim,
            vocab=self.host.vocab,
            eos=self.eos,
            think_begin=self.think_begin,
            think_end=self.think_end,
        )


def serve(
    rin: BinaryIO,
    rout: BinaryIO,
    *,
    think_begin: Sequence[int] = (1,),
    think_end: Sequence[int] = (2,),
    eos_override: int | None = None,
    echo: bool = False,
) -> None:
    """Answer frames from rin on rout until end-of-stream.

    The think markers and the optional eos override are server-side
    configuration reported back in every Ready; the model itself is chosen
    by the client's Init. echo=True skips parsing entirely and reflects
    every payload byte for byte, which is how the wire itself gets tested.
    """
    session = _Session(think_begin, think_end, eos_override)
    while True:
        try:
            payload = read_frame(rin)
        except FrameError:
            return  # framing is gone; there is no channel left to answer on
        if payload is None:
            return
        if echo:
            write_frame(rout, payload)
            continue
        try:
            msg = decode_message(payload)
        except FrameError as exc:
            reply: WireMessage = WireError(code="protocol", text=str(exc))
        else:
            reply = session.handle(msg)
        write_frame(rout, encode_message(reply))
