"""swidecode: an entropy-guided controller that alternates explicit and
latent decoding, plus the token-efficiency metrics to judge the trade.

The controller watches next-token entropy block by block. While the model
is uncertain it feeds soft embeddings (full distributions folded through
the embedding table) so many continuations stay in play; once confidence
beats the block's reference entropy it switches to ordinary token sampling,
and back again when confidence decays. A switch budget caps how long that
can go on: late switches inject a think-end nudge, overspending injects an
answer prefix and a hard countdown.
"""

from .backends import ScriptedBackend, TinyModel, default_special_ids
from .budget import BudgetConfig, BudgetState
from .confidence import TokenDistribution, entropy, from_logits
from .decode import (
    BackendContract,
    Greedy,
    Sampled,
    SamplingPolicy,
    SpecialIds,
    StepKind,
    StopReason,
    Transcript,
    TranscriptStep,
    decode,
    extract_answer,
    sample,
)
from .errors import SwidecodeError
from .metrics import (
    EfficiencyCurve,
    NormalizationAnchor,
    anchor_from_curve,
    avg_efficiency_gain,
    k_star,
    normalized_efficiency,
    pass_at_k,
    plain_efficiency,
)
from .mixing import EmbeddingTable, MixSchedule, soft_embedding
from .switching import Mode, SwitchConfig, SwitchDecision, SwitchState

__version__ = "0.1.0"

__all__ = [
    "BackendContract",
    "BudgetConfig",
    "BudgetState",
    "EfficiencyCurve",
    "EmbeddingTable",
    "Greedy",
    "MixSchedule",
    "Mode",
    "NormalizationAnchor",
    "Sampled",
    "SamplingPolicy",
    "ScriptedBackend",
    "SpecialIds",
    "StepKind",
    "StopReason",
    "SwidecodeError",
    "SwitchConfig",
    "SwitchDecision",
    "SwitchState",
    "TinyModel",
    "TokenDistribution",
    "Transcript",
    "TranscriptStep",
    "anchor_from_curve",
    "avg_efficiency_gain",
    "decode",
    "default_special_ids",
    "entropy",
    "extract_answer",
    "from_logits",
    "k_star",
    "normalized_efficiency",
    "pass_at_k",
    "plain_efficiency",
    "sample",
    "soft_embedding",
    "__version__",
]
