"""swibridge: steps a causal language model over stdio frames.

The server speaks protocol swibridge/1: fixed-layout binary frames on
stdin/stdout carrying token-id steps, raw embedding steps, embedding row
fetches, and resets. One model per process, one request at a time, greedy
on purpose: sampling, entropy switching, and trace recording all live in
the controller on the other end of the pipe.
"""

from .frames import (
    MAX_FRAME,
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
    decode_message,
    encode_message,
    read_frame,
    write_frame,
)
from .hosts import HFHost, HostError, ToyHost, load_host
from .server import serve

__version__ = "0.1.0"

__all__ = [
    "MAX_FRAME",
    "VERSION",
    "EmbeddingRow",
    "FrameError",
    "HFHost",
    "HostError",
    "Init",
    "Logits",
    "Ready",
    "Reset",
    "Row",
    "SpecialIdsReq",
    "StepEmbedding",
    "StepToken",
    "ToyHost",
    "WireError",
    "decode_message",
    "encode_message",
    "load_host",
    "read_frame",
    "serve",
    "write_frame",
]
