"""Shared test plumbing: extended-precision oracles and random generators.

The oracles here recompute results with numpy longdouble straight-line code,
independent of the library's float64 paths. Tests freeze specific expected
values from these so regressions show up as numbers, not just flipped
comparisons.
"""

import os

import numpy as np

from swidecode import ScriptedBackend, SpecialIds
from swidecode.mixing import EmbeddingTable

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")


def data_path(name: str) -> str:
    return os.path.join(DATA_DIR, name)


# ---------------------------------------------------------------------------
# extended-precision oracles


def softmax_oracle(logits) -> np.ndarray:
    """Softmax in longdouble, returned as float64."""
    x = np.asarray(logits, dtype=np.longdouble)
    x = x - np.max(x)
    e = np.exp(x)
    return (e / np.sum(e)).astype(np.float64)


def entropy_oracle(probs) -> float:
    """Shannon entropy in nats, longdouble accumulation, 0 log 0 = 0."""
    p = np.asarray(probs, dtype=np.longdouble)
    mask = p > 0
    h = -np.sum(p[mask] * np.log(p[mask]))
    return float(max(h, 0.0))


# ---------------------------------------------------------------------------
# random inputs


def random_dist(rng: np.random.Generator, n: int, style: str | None = None) -> np.ndarray:
    """One probability vector of length n in a chosen shape family."""
    style = style or rng.choice(["flat", "spiky", "peaked", "sparse"])
    if style == "flat":
        w = rng.random(n) + 1e-3
    elif style == "spiky":
        w = rng.exponential(1.0, n) ** 3
    elif style == "peaked":
        w = rng.random(n) * 1e-4
        w[rng.integers(n)] = 1.0
    else:  # sparse: most entries exactly zero
        w = np.zeros(n)
        k = int(rng.integers(1, min(n, 8) + 1))
        w[rng.choice(n, size=k, replace=False)] = rng.random(k) + 1e-3
    w = w.astype(np.float64)
    return w / np.sum(w)


def random_script(
    rng: np.random.Generator, steps: int, vocab: int, wild: bool = True
) -> np.ndarray:
    """Logit rows with per-step sharpness so entropy swings between steps."""
    if wild:
        scales = np.exp(rng.uniform(np.log(0.3), np.log(6.0), size=steps))
    else:
        scales = np.full(steps, 1.0)
    return rng.normal(0.0, 1.0, size=(steps, vocab)) * scales[:, None]


def random_table(rng: np.random.Generator, vocab: int, dim: int) -> EmbeddingTable:
    return EmbeddingTable(rng.normal(0.0, 1.0, size=(vocab, dim)))


def scripted_backend(
    rng: np.random.Generator,
    steps: int,
    vocab: int = 16,
    dim: int = 4,
    specials: SpecialIds | None = None,
    wild: bool = True,
) -> ScriptedBackend:
    script = random_script(rng, steps, vocab, wild=wild)
    table = random_table(rng, vocab, dim)
    return ScriptedBackend(script, table, specials=specials)


def peaked_logits(vocab: int, winner: int, gap: float = 8.0) -> np.ndarray:
    """Low-entropy row whose argmax is `winner`."""
    row = np.zeros(vocab)
    row[winner] = gap
    return row


def flat_logits(vocab: int, winner: int, eps: float = 1e-3) -> np.ndarray:
    """Near-uniform row, argmax nudged to `winner`."""
    row = np.zeros(vocab)
    row[winner] = eps
    return row
