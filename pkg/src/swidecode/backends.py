"""Toy backends for tests, demos, and offline work.

ScriptedBackend replays a fixed logits table and ignores what you feed it,
which makes controller behavior fully scriptable: the i-th step() call
returns row i, prompt feeding included. TinyModel is a deterministic toy
language model (running mean of input embeddings through a fixed output
projection) that treats a token id and that token's embedding row
identically, which is exactly the property soft feeding relies on.
"""

from __future__ import annotations

import numpy as np

from .decode import SpecialIds
from .errors import BackendError, DimensionMismatch
from .mixing import EmbeddingTable

__all__ = ["ScriptedBackend", "TinyModel", "default_special_ids"]


def default_special_ids() -> SpecialIds:
    """Toy convention: id 0 ends generation, 1 opens thinking, 2 closes it."""
    return SpecialIds(eos=0, think_begin=(1,), think_end=(2,))


def _as_embedding(fed: np.ndarray, dim: int) -> np.ndarray:
    arr = np.asarray(fed, dtype=np.float64)
    if arr.shape != (dim,):
        raise DimensionMismatch(f"fed vector has shape {arr.shape}, model dim is {dim}")
    return arr


class ScriptedBackend:
    """Returns script row i on the i-th step() call, whatever was fed.

    Walking past the end of the script raises BackendError; reset() rewinds
    to row zero. The embedding table only matters for what the controller
    builds from it (soft vectors, signal rows); the script never reads it.
    """

    def __init__(
        self,
        script: np.ndarray,
        table: EmbeddingTable,
        specials: SpecialIds | None = None,
    ):
        script = np.asarray(script, dtype=np.float64)
        if script.ndim != 2 or script.shape[1] != table.vocab:
            raise DimensionMismatch(
                f"script must be (steps, {table.vocab}), got {script.shape}"
            )
        self._script = script
        self._table = table
        self._specials = specials if specials is not None else default_special_ids()
        self._i = 0

    def step(self, fed: int | np.ndarray) -> np.ndarray:
        if not isinstance(fed, (int, np.integer)):
            _as_embedding(fed, self._table.dim)  # shape sanity only
        if self._i >= self._script.shape[0]:
            raise BackendError(f"script exhausted after {self._i} steps")
        row = self._script[self._i]
        self._i += 1
        return row

    def reset(self) -> None:
        self._i = 0

    def embedding_table(self) -> EmbeddingTable:
        return self._table

    def special_ids(self) -> SpecialIds:
        return self._specials


class TinyModel:
    """Seeded toy model: logits = mean(inputs so far) @ projection.

    All weights come from one generator seed, so two instances with the same
    (vocab, dim, seed) are interchangeable. Feeding id v and feeding row v of
    the embedding table produce identical logits by construction.
    """

    def __init__(self, vocab: int, dim: int, seed: int = 0,
                 specials: SpecialIds | None = None):
        if vocab < 4 or dim < 1:
            raise DimensionMismatch(f"need vocab >= 4 and dim >= 1, got {vocab}, {dim}")
        rng = np.random.default_rng(seed)
        self._table = EmbeddingTable(rows=rng.standard_normal((vocab, dim)) / np.sqrt(dim))
        self._proj = rng.standard_normal((dim, vocab)) / np.sqrt(dim)
        self._specials = specials if specials is not None else default_special_ids()
        self._sum = np.zeros(dim, dtype=np.float64)
        self._count = 0

    def step(self, fed: int | np.ndarray) -> np.ndarray:
        if isinstance(fed, (int, np.integer)):
            tid = int(fed)
            if not 0 <= tid < self._table.vocab:
                raise DimensionMismatch(f"token id {tid} outside vocab {self._table.vocab}")
            vec = self._table.rows[tid]
        else:
            vec = _as_embedding(fed, self._table.dim)
        self._sum = self._sum + vec
        self._count += 1
        mean = self._sum / self._count
        return mean @ self._proj

    def reset(self) -> None:
        self._sum = np.zeros(self._table.dim, dtype=np.float64)
        self._count = 0

    def embedding_table(self) -> EmbeddingTable:
        return self._table

    def special_ids(self) -> SpecialIds:
        return self._specials
