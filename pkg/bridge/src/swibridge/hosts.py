"""Models the server can step: a seeded numpy toy and any causal LM.

A host answers three questions, one position at a time: what are the next
logits after this token id, what are they after this raw embedding vector,
and what is the embedding row for an id. That is the entire surface the
controller needs; sampling, switching, and every other decision stay on the
client side of the pipe.

Host failures carry a wire error code so the server can report them in-band:
"model_load" for anything that prevents a model from answering at all, and
"dim_mismatch" when an id or a vector does not fit the model's dimensions.
"""

from __future__ import annotations

import math
from typing import Protocol, Sequence

import numpy as np

__all__ = ["HostError", "HostContract", "ToyHost", "HFHost", "load_host"]


class HostError(Exception):
    """Host failure with a wire error code."""

    def __init__(self, code: str, text: str):
        super().__init__(f"{code}: {text}")
        self.code = code
        self.text = text


class HostContract(Protocol):
    @property
    def dim(self) -> int: ...
    @property
    def vocab(self) -> int: ...
    @property
    def eos(self) -> int | None: ...
    def reset(self) -> None: ...
    def step_token(self, token_id: int) -> list[float]: ...
    def step_embedding(self, vector: Sequence[float]) -> list[float]: ...
    def row(self, token_id: int) -> list[float]: ...


class ToyHost:
    """Running-mean toy model, deterministic from its seed.

    The context is summarized as the mean of all embeddings fed so far and
    logits are that mean through a fixed random projection. No learning and
    no attention, but it exercises every wire path with real float traffic,
    which is all a protocol test needs.
    """

    def __init__(self, vocab: int = 32, dim: int = 8, seed: int = 0):
        if vocab < 4 or dim < 1:
            raise HostError(
                "model_load", f"toy model needs vocab >= 4 and dim >= 1, got {vocab}x{dim}"
            )
        rng = np.random.default_rng(seed)
        self._table = rng.standard_normal((vocab, dim)) / math.sqrt(dim)
        self._proj = rng.standard_normal((dim, vocab)) / math.sqrt(dim)
        self._sum = np.zeros(dim)
        self._count = 0

    @classmethod
    def from_spec(cls, spec: str) -> "ToyHost":
        """Parse "toy[:vocab[:dim[:seed]]]"; omitted fields default to 32:8:0."""
        parts = spec.split(":")
        if parts[0] != "toy" or len(parts) > 4:
            raise HostError("model_load", f"bad toy model spec {spec!r}")
        try:
            nums = [int(p) for p in parts[1:]]
        except ValueError:
            raise HostError(
                "model_load",
                f"bad toy model spec {spec!r}: fields after 'toy' must be integers",
            ) from None
        vocab, dim, seed = nums + [32, 8, 0][len(nums):]
        return cls(vocab=vocab, dim=dim, seed=seed)

    @property
    def dim(self) -> int:
        return self._table.shape[1]

    @property
    def vocab(self) -> int:
        return self._table.shape[0]

    @property
    def eos(self) -> int | None:
        return 0

    def reset(self) -> None:
        self._sum = np.zeros(self.dim)
        self._count = 0

    def step_token(self, token_id: int) -> list[float]:
        return self._feed(self._table[self._check_id(token_id)])

    def step_embedding(self, vector: Sequence[float]) -> list[float]:
        if len(vector) != self.dim:
            raise HostError(
                "dim_mismatch", f"embedding has {len(vector)} values, model dim is {self.dim}"
            )
        return self._feed(np.asarray(vector, dtype=np.float64))

    def row(self, token_id: int) -> list[float]:
        return _f32_list(self._table[self._check_id(token_id)])

    def _check_id(self, token_id: int) -> int:
        if not 0 <= token_id < self.vocab:
            raise HostError(
                "dim_mismatch", f"token id {token_id} outside vocab {self.vocab}"
            )
        return token_id

    def _feed(self, emb: np.ndarray) -> list[float]:
        self._sum = self._sum + emb
        self._count += 1
        return _f32_list((self._sum / self._count) @ self._proj)


class HFHost:
    """A causal LM loaded from a local path or hub id, stepped with a KV cache.

    Both input kinds run exactly one position through the model; token ids go
    in as input_ids and vectors as inputs_embeds, so a vector equal to an
    embedding row must land on the same logits up to float32 arithmetic.
    Weights are cast to float32 and the model is kept in eval mode.
    """

    def __init__(self, model_id: str, device: str = "cpu"):
        try:
            import torch
            from transformers import AutoModelForCausalLM
        except ImportError as exc:
            raise HostError("model_load", f"torch/transformers unavailable: {exc}") from None
        self._torch = torch
        try:
            model = AutoModelForCausalLM.from_pretrained(model_id)
        except Exception as exc:  # transformers raises a zoo of types here
            raise HostError("model_load", f"cannot load {model_id!r}: {exc}") from None
        self._model = model.to(device).float().eval()
        self._device = device
        weight = self._model.get_input_embeddings().weight
        self._vocab = int(weight.shape[0])
        self._dim = int(weight.shape[1])
        self._past = None

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def vocab(self) -> int:
        return self._vocab

    @property
    def eos(self) -> int | None:
        eos = self._model.config.eos_token_id
        if isinstance(eos, (list, tuple)):  # some configs declare several
            eos = eos[0] if eos else None
        return None if eos is None else int(eos)

    def reset(self) -> None:
        self._past = None

    def step_token(self, token_id: int) -> list[float]:
        self._check_id(token_id)
        ids = self._torch.tensor([[token_id]], dtype=self._torch.long, device=self._device)
        return self._forward(input_ids=ids)

    def step_embedding(self, vector: Sequence[float]) -> list[float]:
        if len(vector) != self._dim:
            raise HostError(
                "dim_mismatch", f"embedding has {len(vector)} values, model dim is {self._dim}"
            )
        emb = self._torch.tensor(
            list(vector), dtype=self._torch.float32, device=self._device
        ).view(1, 1, -1)
        return self._forward(inputs_embeds=emb)

    def row(self, token_id: int) -> list[float]:
        self._check_id(token_id)
        with self._torch.no_grad():
            weight = self._model.get_input_embeddings().weight[token_id]
        return weight.to(self._torch.float32).tolist()

    def _check_id(self, token_id: int) -> None:
        if not 0 <= token_id < self._vocab:
            raise HostError(
                "dim_mismatch", f"token id {token_id} outside vocab {self._vocab}"
            )

    def _forward(self, **inputs) -> list[float]:
        with self._torch.no_grad():
            out = self._model(**inputs, past_key_values=self._past, use_cache=True)
        self._past = out.past_key_values
        return out.logits[0, -1].to(self._torch.float32).tolist()


def _f32_list(values: np.ndarray) -> list[float]:
    """Quantize to float32, the wire's precision, before encoding."""
    return [float(x) for x in np.asarray(values, dtype=np.float32)]


def load_host(model: str, device: str = "cpu") -> HostContract:
    """"toy[:vocab[:dim[:seed]]]" builds a ToyHost; anything else goes to HF."""
    if model == "toy" or model.startswith("toy:"):
        return ToyHost.from_spec(model)
    return HFHost(model, device)
