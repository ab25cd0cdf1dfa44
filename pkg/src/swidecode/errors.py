"""Exception types shared across the package.

Every error raised on a contract violation derives from SwidecodeError so
callers can catch the family in one clause. The CLI maps SwidecodeError
subclasses to exit code 1 (bad input or config) except BackendError, which
maps to exit code 2 (runtime failure of a model backend).
"""

from __future__ import annotations


class SwidecodeError(Exception):
    """Base class for all package errors."""


class NonFiniteLogits(SwidecodeError):
    """Logits contained NaN or +/-inf."""


class LogitsTooShort(SwidecodeError):
    """A distribution needs at least two entries."""


class DimensionMismatch(SwidecodeError):
    """Vector length disagrees with the embedding table or vocab size."""


class StepOutOfRange(SwidecodeError):
    """Schedule queried past the final decode step."""


class EmptySupport(SwidecodeError):
    """Truncation removed all probability mass before sampling."""


class AlreadyTerminated(SwidecodeError):
    """Budget state mutated after the run already terminated."""


class BudgetConfigInvalid(SwidecodeError):
    """Switch budget or injection sequences fail validation."""


class BackendError(SwidecodeError):
    """A model backend failed mid-run (script exhausted, process died)."""


class ZeroTokens(SwidecodeError):
    """Efficiency is undefined at a token count of zero."""


class NoOverlap(SwidecodeError):
    """Two efficiency curves share no token-axis interval."""


class KTooLarge(SwidecodeError):
    """pass@k requested with k exceeding some problem's sample count."""


class NoAnchor(SwidecodeError):
    """Normalization requested but no baseline curve was supplied."""


class TraceVersionMismatch(SwidecodeError):
    """Trace file declares an unknown format version."""


class TraceCorrupt(SwidecodeError):
    """Trace line failed to parse. Carries the 1-based line number."""

    def __init__(self, line_number: int, reason: str):
        super().__init__(f"line {line_number}: {reason}")
        self.line_number = line_number
        self.reason = reason


class ProtocolError(SwidecodeError):
    """Malformed or unexpected wire frame."""


class ConfigError(SwidecodeError):
    """CLI or config-file validation failure. Names the offending field."""
