"""Soft embeddings and block-boundary mixing.

A latent step feeds the model the probability-weighted sum of its own
embedding rows instead of a sampled token's row. At block boundaries the
fed vector is pulled toward a signal embedding (the think-start token's row
on latent entry, the think-end token's row on explicit entry) so the model
is told which regime it just entered. The pull decays over the run on a
linear schedule that reaches exactly 1 at the final step:

    weight(t) = w0 + (1 - w0) * t / t_max     clamped to [w0, 1]

where weight multiplies the soft embedding and (1 - weight) the signal.
w0 = 1 disables mixing outright.

Numerical posture: weights are renormalized to exact unit sum before the
weighted row sum (callers may hand in distributions carrying up to 1e-6 sum
slack, which would otherwise leak outside the row hull), accumulation runs
in extended precision over ascending token ids, and outputs are clamped
into the componentwise hull to absorb terminal roundoff. Mixing outputs are
clamped into the two-point hull of (soft, signal) the same way.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .confidence import TokenDistribution
from .errors import DimensionMismatch, NonFiniteLogits, StepOutOfRange

__all__ = [
    "EmbeddingTable",
    "MixSchedule",
    "soft_embedding",
    "signal_embedding",
    "alpha_at",
    "beta_at",
    "mix_block_entry",
    "mix_block_exit",
]


@dataclass(frozen=True)
class EmbeddingTable:
    """Input embedding matrix, one row per token id. rows is (vocab, dim) float64."""

    rows: np.ndarray

    def __post_init__(self):
        r = self.rows
        if r.ndim != 2 or r.shape[0] < 2 or r.shape[1] < 1:
            raise DimensionMismatch(f"table must be (vocab>=2, dim>=1), got {r.shape}")
        if not np.all(np.isfinite(r)):
            raise NonFiniteLogits("embedding table contains non-finite values")

    @property
    def vocab(self) -> int:
        return int(self.rows.shape[0])

    @property
    def dim(self) -> int:
        return int(self.rows.shape[1])


@dataclass(frozen=True)
class MixSchedule:
    alpha0: float  # initial soft-embedding weight at latent-block entry
    beta0: float  # initial soft-embedding weight at explicit-block entry
    t_max: int  # final decode step; both ramps hit exactly 1 here

    def __post_init__(self):
        if not 0.0 <= self.alpha0 <= 1.0:
            raise ValueError(f"alpha0 must be in [0, 1], got {self.alpha0!r}")
        if not 0.0 <= self.beta0 <= 1.0:
            raise ValueError(f"beta0 must be in [0, 1], got {self.beta0!r}")
        if self.t_max < 1:
            raise ValueError(f"t_max must be >= 1, got {self.t_max!r}")


def soft_embedding(dist: TokenDistribution, table: EmbeddingTable) -> np.ndarray:
    """Probability-weighted sum of embedding rows. Returns a (dim,) float64 vector."""
    if len(dist) != table.vocab:
        raise DimensionMismatch(
            f"distribution has {len(dist)} entries, table has {table.vocab} rows"
        )
    w = dist.probs.astype(np.longdouble)
    w /= w.sum()
    acc = (w[:, None] * table.rows.astype(np.longdouble)).sum(axis=0)
    out = np.asarray(acc, dtype=np.float64)
    lo = table.rows.min(axis=0)
    hi = table.rows.max(axis=0)
    return np.clip(out, lo, hi)


def signal_embedding(table: EmbeddingTable, token_ids: tuple[int, ...]) -> np.ndarray:
    """Embedding for a signal marker; mean of rows when it spans several ids."""
    if not token_ids:
        raise DimensionMismatch("signal needs at least one token id")
    for tid in token_ids:
        if not 0 <= tid < table.vocab:
            raise DimensionMismatch(f"token id {tid} outside vocab {table.vocab}")
    return table.rows[list(token_ids)].mean(axis=0)


def _ramp(w0: float, t: int, t_max: int) -> float:
    if t < 0 or t > t_max:
        raise StepOutOfRange(f"step {t} outside [0, {t_max}]")
    if t == t_max:
        return 1.0  # exact endpoint, no float arithmetic
    w = w0 + (1.0 - w0) * (t / t_max)
    return min(1.0, max(w0, w))


def alpha_at(schedule: MixSchedule, t: int) -> float:
    """Soft-embedding weight for a latent-block entry at global step t."""
    return _ramp(schedule.alpha0, t, schedule.t_max)


def beta_at(schedule: MixSchedule, t: int) -> float:
    """Soft-embedding weight for an explicit-block entry at global step t."""
    return _ramp(schedule.beta0, t, schedule.t_max)


def _mix(soft: np.ndarray, signal: np.ndarray, weight: float) -> np.ndarray:
    if soft.shape != signal.shape:
        raise DimensionMismatch(f"shape mismatch: {soft.shape} vs {signal.shape}")
    if not 0.0 <= weight <= 1.0:
        raise ValueError(f"mix weight must be in [0, 1], got {weight!r}")
    out = weight * soft + (1.0 - weight) * signal
    lo = np.minimum(soft, signal)
    hi = np.maximum(soft, signal)
    return np.clip(out, lo, hi)


def mix_block_entry(soft: np.ndarray, think_signal: np.ndarray, alpha: float) -> np.ndarray:
    """Vector fed on the first step of a latent block."""
    return _mix(soft, think_signal, alpha)


def mix_block_exit(soft: np.ndarray, end_signal: np.ndarray, beta: float) -> np.ndarray:
    """Vector fed on the first step of an explicit block."""
    return _mix(soft, end_signal, beta)
