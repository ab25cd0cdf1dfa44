"""Token distributions and the entropy signal that drives mode switching.

The controller reads one scalar per step: Shannon entropy of the next-token
distribution, in nats, computed on the untempered softmax. Low entropy means
the model is confident in a particular continuation; rising entropy marks
uncertainty. Everything downstream (block detection, switch decisions)
consumes only this scalar, so its computation is pinned here in one place:
float64, max-shifted softmax, 0 * log 0 = 0, deterministic reduction order
over ascending vocabulary ids.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LogitsTooShort, NonFiniteLogits

__all__ = ["TokenDistribution", "from_logits", "entropy"]


@dataclass(frozen=True)
class TokenDistribution:
    """Probabilities over the vocabulary, index = token id.

    probs is float64, nonnegative, and sums to 1 within 1e-6. Hand-built
    distributions within that slack are accepted; from_logits output is
    normalized to machine precision.
    """

    probs: np.ndarray

    def __post_init__(self):
        p = self.probs
        if p.ndim != 1 or p.shape[0] < 2:
            raise LogitsTooShort(f"need at least 2 entries, got shape {p.shape}")
        if not np.all(np.isfinite(p)):
            raise NonFiniteLogits("distribution contains non-finite values")
        if np.any(p < 0.0):
            raise NonFiniteLogits("distribution contains negative mass")
        total = float(np.sum(p))
        if abs(total - 1.0) > 1e-6:
            raise NonFiniteLogits(f"distribution sums to {total!r}, not 1")

    def __len__(self) -> int:
        return int(self.probs.shape[0])


def from_logits(logits: np.ndarray) -> TokenDistribution:
    """Stable softmax of raw model logits.

    Shifts by the max before exponentiating so large logits cannot overflow.
    Rejects non-finite inputs and vectors shorter than 2.
    """
    arr = np.asarray(logits, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] < 2:
        raise LogitsTooShort(f"need at least 2 logits, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteLogits("logits contain NaN or inf")
    shifted = arr - np.max(arr)
    exps = np.exp(shifted)
    return TokenDistribution(probs=exps / np.sum(exps))


def entropy(dist: TokenDistribution) -> float:
    """Shannon entropy in nats. Zero-probability entries contribute zero.

    Bounded by [0, ln(vocab)]; roundoff on near-one-hot inputs is clamped
    at zero so the lower bound holds exactly.
    """
    p = dist.probs
    terms = np.where(p > 0.0, p * np.log(np.where(p > 0.0, p, 1.0)), 0.0)
    h = -float(np.sum(terms))
    return h if h > 0.0 else 0.0
