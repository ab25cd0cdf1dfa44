"""Shared fixture: a tiny randomly initialized causal LM saved to disk.

Session scope because save_pretrained/from_pretrained dominate the test
runtime; the weights are deterministic from the seed, so every test sees
the same model.
"""

import pytest
import torch
from transformers import LlamaConfig, LlamaForCausalLM

_SHAPE = dict(
    vocab_size=48,
    hidden_size=32,
    intermediate_size=64,
    num_hidden_layers=2,
    num_attention_heads=4,
    num_key_value_heads=4,
    max_position_embeddings=128,
    bos_token_id=1,
    pad_token_id=None,
)


@pytest.fixture(scope="session")
def hf_model_dir(tmp_path_factory) -> str:
    torch.manual_seed(7)
    model = LlamaForCausalLM(LlamaConfig(eos_token_id=0, **_SHAPE))
    out = tmp_path_factory.mktemp("hf") / "tiny-lm"
    model.save_pretrained(out)
    return str(out)


@pytest.fixture(scope="session")
def hf_model_dir_no_eos(tmp_path_factory) -> str:
    torch.manual_seed(11)
    model = LlamaForCausalLM(LlamaConfig(eos_token_id=None, **_SHAPE))
    out = tmp_path_factory.mktemp("hf-noeos") / "tiny-lm-noeos"
    model.save_pretrained(out)
    return str(out)
