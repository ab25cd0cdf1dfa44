"""The decode loop: sampling policies, the step dance, answer extraction.

One generated position per step. What gets fed back to the model depends on
where the switch machine stands:

    queued injection pending   emit the queued id, machine does not run
    answer phase               sample a token, machine is frozen
    explicit block, dwell > 0  sample a token
    block entry or latent      feed an embedding (soft, possibly mixed)

The first step initializes the machine from the first entropy reading and
feeds either a pure soft embedding (latent start, the default) or a sampled
token (pinned explicit start). Entry and exit mixing happen exactly on
switch steps and nowhere else.

The answer phase begins when the termination prefix is queued or when a
sampled token completes the think-end marker in the discrete output. From
then on the run is plain autoregressive sampling: no switches, no
embeddings, countdown ticking if the termination budget armed it. A decode
ends on EOS (sampled or injected), on the countdown reaching zero, or on
hitting the step limit.

Transcripts record every step with enough detail to replay decisions
offline: entropy, mode, action kind, token, logits digest, mix weights, and
the digest of any fed embedding (full vectors optional). Fixed seeds give
bit-identical transcripts.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, replace
from typing import Protocol, Sequence

import numpy as np

from . import budget as bdg
from . import switching as sw
from .confidence import TokenDistribution, entropy, from_logits
from .errors import ConfigError, DimensionMismatch, EmptySupport
from .mixing import (
    EmbeddingTable,
    MixSchedule,
    alpha_at,
    beta_at,
    mix_block_entry,
    mix_block_exit,
    signal_embedding,
    soft_embedding,
)

__all__ = [
    "SpecialIds",
    "BackendContract",
    "Greedy",
    "Sampled",
    "SamplingPolicy",
    "sample",
    "StepKind",
    "StopReason",
    "TranscriptStep",
    "Transcript",
    "decode",
    "extract_answer",
    "digest_vector",
]

_NEVER = 2**62  # dwell window no run can reach; pins a mode without a special case


@dataclass(frozen=True)
class SpecialIds:
    """Marker ids a backend must expose. Sequences cover multi-id tokenizations."""

    eos: int
    think_begin: tuple[int, ...]
    think_end: tuple[int, ...]


class BackendContract(Protocol):
    """Incremental next-token model.

    step() appends one input (a token id or a raw embedding vector) to the
    running sequence and returns the logits for the next position. reset()
    clears the sequence. The logits returned while feeding a prompt are
    discarded except for the last, which seeds the first generated step.
    """

    def step(self, fed: int | np.ndarray) -> np.ndarray: ...

    def reset(self) -> None: ...

    def embedding_table(self) -> EmbeddingTable: ...

    def special_ids(self) -> SpecialIds: ...


# ---------------------------------------------------------------------------
# sampling


@dataclass(frozen=True)
class Greedy:
    """Argmax of the distribution; ties break toward the lowest token id."""


@dataclass(frozen=True)
class Sampled:
    temperature: float = 1.0
    top_k: int | None = None  # keep the k most probable ids before drawing
    top_p: float | None = None  # nucleus mass cutoff, applied after top_k
    seed: int = 0

    def __post_init__(self):
        if not self.temperature > 0.0:
            raise ConfigError(f"temperature must be > 0, got {self.temperature!r}")
        if self.top_k is not None and self.top_k < 1:
            raise ConfigError(f"top_k must be >= 1, got {self.top_k!r}")
        if self.top_p is not None and not 0.0 < self.top_p <= 1.0:
            raise ConfigError(f"top_p must be in (0, 1], got {self.top_p!r}")


SamplingPolicy = Greedy | Sampled


def sample(
    dist: TokenDistribution,
    policy: SamplingPolicy,
    rng: np.random.Generator | None = None,
) -> int:
    """Draw one token id.

    Greedy ignores rng. Sampled applies temperature, then top-k, then top-p,
    renormalizes, and draws from the caller's generator (a fresh generator
    seeded from the policy is used when rng is None, which makes repeated
    calls identical; decode passes one generator for the whole run).
    """
    if isinstance(policy, Greedy):
        return int(np.argmax(dist.probs))

    if rng is None:
        rng = np.random.default_rng(policy.seed)
    w = dist.probs.astype(np.float64)
    if policy.temperature != 1.0:
        w = np.where(w > 0.0, w ** (1.0 / policy.temperature), 0.0)
    # stable sort on -w: ties resolve toward lower ids
    order = np.argsort(-w, kind="stable")
    if policy.top_k is not None and policy.top_k < w.shape[0]:
        w_cut = np.zeros_like(w)
        keep = order[: policy.top_k]
        w_cut[keep] = w[keep]
        w = w_cut
    if policy.top_p is not None and policy.top_p < 1.0:
        total = float(np.sum(w))
        if total <= 0.0:
            raise EmptySupport("no probability mass before nucleus cut")
        sorted_w = w[order] / total
        before = np.concatenate(([0.0], np.cumsum(sorted_w)[:-1]))
        keep = order[before < policy.top_p]  # smallest prefix reaching the mass
        w_cut = np.zeros_like(w)
        w_cut[keep] = w[keep]
        w = w_cut
    total = float(np.sum(w))
    if total <= 0.0:
        raise EmptySupport("truncation removed all probability mass")
    cum = np.cumsum(w)
    u = rng.random() * total
    idx = int(np.searchsorted(cum, u, side="right"))
    return min(idx, w.shape[0] - 1)


# ---------------------------------------------------------------------------
# transcripts


class StepKind(enum.Enum):
    SAMPLED = "sampled"
    INJECTED = "injected"
    LATENT = "latent"  # an embedding was fed, including block-entry steps


class StopReason(enum.Enum):
    EOS = "eos"
    LENGTH = "length"
    BUDGET = "budget"


def digest_vector(vec: np.ndarray) -> str:
    """Short content hash of a float vector, stable across runs."""
    data = np.ascontiguousarray(vec, dtype=np.float64).tobytes()
    return hashlib.sha256(data).hexdigest()[:16]


@dataclass(frozen=True)
class TranscriptStep:
    t: int  # 1-based global step
    mode: sw.Mode
    kind: StepKind
    entropy: float
    token: int  # emitted id, or argmax hint on embedding-fed steps
    logits_digest: str
    alpha: float | None = None  # set only on latent-block entry
    beta: float | None = None  # set only on explicit-block entry
    emb_digest: str | None = None  # set on embedding-fed steps
    emb: tuple[float, ...] | None = None  # full fed vector, when recording them


@dataclass(frozen=True)
class Transcript:
    steps: tuple[TranscriptStep, ...]
    prompt_length: int
    stop_reason: StopReason
    switch_count: int
    end_think_token_ids: tuple[int, ...]
    eos_token_id: int
    answer_span: tuple[int, int] | None  # half-open step-index range
    incomplete: bool  # True when no think-end marker ever completed

    @property
    def modes(self) -> tuple[sw.Mode, ...]:
        return tuple(s.mode for s in self.steps)

    @property
    def injections(self) -> tuple[tuple[int, int], ...]:
        """(step, token id) pairs for injected emissions, in order."""
        return tuple((s.t, s.token) for s in self.steps if s.kind is StepKind.INJECTED)

    @property
    def discrete_tokens(self) -> tuple[int, ...]:
        """Sampled and injected ids in emission order; latent steps emit none."""
        return tuple(s.token for s in self.steps if s.kind is not StepKind.LATENT)


def _find_answer_start(
    steps: Sequence[TranscriptStep], marker: tuple[int, ...]
) -> int | None:
    """Step index just past the last completed think-end occurrence, or None."""
    discrete = [(i, s.token) for i, s in enumerate(steps) if s.kind is not StepKind.LATENT]
    ids = [tok for _, tok in discrete]
    m = len(marker)
    if m == 0 or len(ids) < m:
        return None
    for j in range(len(ids) - m, -1, -1):
        if tuple(ids[j : j + m]) == marker:
            return discrete[j + m - 1][0] + 1
    return None


def extract_answer(transcript: Transcript) -> list[int]:
    """Discrete tokens strictly after the last think-end occurrence.

    Re-derives the span from the steps; an empty list comes back when the
    marker never completed (the transcript is flagged incomplete) or when
    nothing followed it.  A terminal end-of-sequence token is not part of
    the answer text, so a single trailing one is dropped.
    """
    start = _find_answer_start(transcript.steps, transcript.end_think_token_ids)
    if start is None:
        return []
    tokens = [
        s.token
        for s in transcript.steps[start:]
        if s.kind is not StepKind.LATENT
    ]
    if tokens and tokens[-1] == transcript.eos_token_id:
        tokens.pop()
    return tokens


# ---------------------------------------------------------------------------
# the loop


def _ends_with(seq: list[int], suffix: tuple[int, ...]) -> bool:
    n = len(suffix)
    return n > 0 and len(seq) >= n and tuple(seq[-n:]) == suffix


def decode(
    prompt: Sequence[int],
    backend: BackendContract,
    *,
    schedule: MixSchedule,
    budget_config: bdg.BudgetConfig,
    switch_config: sw.SwitchConfig | None = None,
    policy: SamplingPolicy = Greedy(),
    mode_control: str = "auto",
    record_embeddings: bool = False,
) -> Transcript:
    """Run one generation. The step limit is schedule.t_max.

    mode_control: "auto" switches by entropy; "pin_latent" and "pin_explicit"
    hold one mode for the whole run (the dwell window in the escaping
    direction is set beyond reach, so the same machine code runs unchanged).
    Pinned runs never mix, since mixing only happens on switches.
    """
    if len(prompt) == 0:
        raise ConfigError("prompt must be nonempty")
    if mode_control not in ("auto", "pin_latent", "pin_explicit"):
        raise ConfigError(f"unknown mode_control {mode_control!r}")

    cfg = switch_config if switch_config is not None else sw.SwitchConfig()
    if mode_control == "pin_latent":
        cfg = replace(cfg, window_latent_to_explicit=_NEVER)
    elif mode_control == "pin_explicit":
        cfg = replace(cfg, window_explicit_to_latent=_NEVER)

    backend.reset()
    table = backend.embedding_table()
    specials = backend.special_ids()
    for tid in prompt:
        if not 0 <= int(tid) < table.vocab:
            raise DimensionMismatch(f"prompt id {tid} outside vocab {table.vocab}")
    think_sig = signal_embedding(table, specials.think_begin)
    end_sig = signal_embedding(table, specials.think_end)
    rng = np.random.default_rng(policy.seed) if isinstance(policy, Sampled) else None

    logits = None
    for tid in prompt:
        logits = backend.step(int(tid))

    machine: sw.SwitchState | None = None
    bstate = bdg.new_state()
    answer_phase = False
    steps: list[TranscriptStep] = []
    emitted: list[int] = []
    stop = StopReason.LENGTH
    t_max = schedule.t_max

    t = 0
    while t < t_max:
        t += 1
        dist = from_logits(logits)
        h = entropy(dist)
        ldig = digest_vector(np.asarray(logits, dtype=np.float64))
        fed: int | np.ndarray

        if bstate.queue:
            # draining an injection: the machine does not see this step
            bstate, tok = bdg.next_injected(bstate)
            mode = machine.mode if machine is not None else sw.Mode.LATENT
            steps.append(
                TranscriptStep(t=t, mode=mode, kind=StepKind.INJECTED, entropy=h,
                               token=tok, logits_digest=ldig)
            )
            emitted.append(tok)
            if tok == specials.eos:
                stop = StopReason.EOS
                break
            fed = tok
        elif answer_phase:
            tok = sample(dist, policy, rng)
            steps.append(
                TranscriptStep(t=t, mode=sw.Mode.EXPLICIT, kind=StepKind.SAMPLED,
                               entropy=h, token=tok, logits_digest=ldig)
            )
            emitted.append(tok)
            if tok == specials.eos:
                stop = StopReason.EOS
                break
            bstate, out_of_budget = bdg.tick_answer_budget(bstate)
            if out_of_budget:
                stop = StopReason.BUDGET
                break
            fed = tok
        else:
            if machine is None:
                # first step: observe H_1, no switch decision, no mixing
                if mode_control == "pin_explicit":
                    machine = sw.SwitchState(mode=sw.Mode.EXPLICIT, block_entropy=h,
                                             dwell_steps=0, switch_count=0)
                else:
                    machine = sw.init(h)
                decision = sw.SwitchDecision.NO_SWITCH
                first = True
            else:
                machine, decision = sw.step(machine, h, cfg)
                first = False
                if decision is sw.SwitchDecision.TO_EXPLICIT:
                    bstate = bdg.on_switch_to_explicit(
                        bstate, machine.switch_count, budget_config
                    )
                    if bstate.armed:
                        # termination queued: machine is done after this step
                        answer_phase = True

            sample_now = machine.mode is sw.Mode.EXPLICIT and (
                first or machine.dwell_steps > 0
            )
            if sample_now:
                tok = sample(dist, policy, rng)
                steps.append(
                    TranscriptStep(t=t, mode=sw.Mode.EXPLICIT, kind=StepKind.SAMPLED,
                                   entropy=h, token=tok, logits_digest=ldig)
                )
                emitted.append(tok)
                if tok == specials.eos:
                    stop = StopReason.EOS
                    break
                if _ends_with(emitted, specials.think_end):
                    answer_phase = True  # thinking closed naturally
                fed = tok
            else:
                vec = soft_embedding(dist, table)
                a = b = None
                if decision is sw.SwitchDecision.TO_LATENT:
                    a = alpha_at(schedule, t)
                    vec = mix_block_entry(vec, think_sig, a)
                elif decision is sw.SwitchDecision.TO_EXPLICIT:
                    b = beta_at(schedule, t)
                    vec = mix_block_exit(vec, end_sig, b)
                steps.append(
                    TranscriptStep(
                        t=t, mode=machine.mode, kind=StepKind.LATENT, entropy=h,
                        token=int(np.argmax(dist.probs)), logits_digest=ldig,
                        alpha=a, beta=b, emb_digest=digest_vector(vec),
                        emb=tuple(float(x) for x in vec) if record_embeddings else None,
                    )
                )
                fed = vec

        if t == t_max:
            stop = StopReason.LENGTH
            break
        logits = backend.step(fed)

    marker = tuple(specials.think_end)
    start = _find_answer_start(steps, marker)
    return Transcript(
        steps=tuple(steps),
        prompt_length=len(prompt),
        stop_reason=stop,
        switch_count=machine.switch_count if machine is not None else 0,
        end_think_token_ids=marker,
        eos_token_id=specials.eos,
        answer_span=(start, len(steps)) if start is not None else None,
        incomplete=start is None,
    )
