"""The two-mode switch machine.

Generation runs in blocks: latent blocks, where the model consumes soft
embeddings, and explicit blocks, where it consumes sampled tokens. The
machine tracks one reference entropy per block (the entropy observed when
the block started) and decides each step whether to stay or switch:

    Latent   -> Explicit  when h < block_entropy and dwell >= window_l2e
    Explicit -> Latent    when h > block_entropy and dwell >= window_e2l
    otherwise             stay, dwell += 1

Both comparisons are strict. A switch resets the reference entropy to the
current step's value and the dwell counter to zero. window_e2l keeps
explicit blocks from collapsing the moment entropy ticks up; window_l2e is
zero in practice so a confidence drop exits a latent block immediately.

The machine never runs on injected steps, so the decode loop simply does
not call step() for those. State is an immutable value record; step()
returns the successor. Single-threaded by design, one machine per decode.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import NonFiniteLogits

__all__ = ["Mode", "SwitchDecision", "SwitchConfig", "SwitchState", "init", "step"]


class Mode(enum.Enum):
    LATENT = "L"
    EXPLICIT = "E"


class SwitchDecision(enum.Enum):
    NO_SWITCH = "stay"
    TO_EXPLICIT = "to_explicit"
    TO_LATENT = "to_latent"

    @property
    def block_entry(self) -> bool:
        """True on the first step of a new block."""
        return self is not SwitchDecision.NO_SWITCH


@dataclass(frozen=True)
class SwitchConfig:
    window_explicit_to_latent: int = 512  # min dwell before leaving an explicit block
    window_latent_to_explicit: int = 0  # min dwell before leaving a latent block

    def __post_init__(self):
        if self.window_explicit_to_latent < 0 or self.window_latent_to_explicit < 0:
            raise ValueError("dwell windows must be nonnegative")


@dataclass(frozen=True)
class SwitchState:
    mode: Mode
    block_entropy: float  # reference entropy of the current block
    dwell_steps: int  # steps spent in the current block since entry
    switch_count: int  # completed Latent->Explicit transitions


def _check_entropy(h: float) -> float:
    if not math.isfinite(h) or h < 0.0:
        raise NonFiniteLogits(f"entropy must be finite and nonnegative, got {h!r}")
    return h


def init(first_entropy: float) -> SwitchState:
    """State after observing the first step's entropy. Starts latent."""
    h = _check_entropy(first_entropy)
    return SwitchState(mode=Mode.LATENT, block_entropy=h, dwell_steps=0, switch_count=0)


def step(
    state: SwitchState, h: float, config: SwitchConfig
) -> tuple[SwitchState, SwitchDecision]:
    """Advance the machine one (non-injected) step."""
    h = _check_entropy(h)
    if (
        state.mode is Mode.LATENT
        and h < state.block_entropy
        and state.dwell_steps >= config.window_latent_to_explicit
    ):
        nxt = SwitchState(
            mode=Mode.EXPLICIT,
            block_entropy=h,
            dwell_steps=0,
            switch_count=state.switch_count + 1,
        )
        return nxt, SwitchDecision.TO_EXPLICIT
    if (
        state.mode is Mode.EXPLICIT
        and h > state.block_entropy
        and state.dwell_steps >= config.window_explicit_to_latent
    ):
        nxt = SwitchState(
            mode=Mode.LATENT,
            block_entropy=h,
            dwell_steps=0,
            switch_count=state.switch_count,
        )
        return nxt, SwitchDecision.TO_LATENT
    nxt = SwitchState(
        mode=state.mode,
        block_entropy=state.block_entropy,
        dwell_steps=state.dwell_steps + 1,
        switch_count=state.switch_count,
    )
    return nxt, SwitchDecision.NO_SWITCH
