"""Token-efficiency metrics and pass@k.

Accuracy alone ignores what it cost. These metrics put accuracy over token
count: plain efficiency is accuracy per generated token, normalized
efficiency rescales that by a baseline anchor (the baseline curve's peak
accuracy and the length where it peaks) so 1.0 means "as efficient as the
baseline at its best". The average gain between two curves integrates the
normalized-efficiency difference over the token interval both curves cover
(trapezoid rule, linear interpolation at the shared endpoints) and divides
by the baseline's integral, so identical curves give 0 and a curve with
twice the efficiency everywhere gives +1.

pass@k uses the unbiased combinatorial estimator on (samples, correct)
counts per problem: 1 - C(n-c, k) / C(n, k), averaged over problems. k_star
is the smallest k whose pass@k reaches the curve's maximum within 1e-12.

Curves persist as CSV with a fixed header (method, tokens, accuracy),
accuracy as a fraction in [0, 1], rows grouped per method, token counts
strictly increasing after the per-method sort.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, KTooLarge, NoAnchor, NoOverlap, ZeroTokens

__all__ = [
    "EfficiencyCurve",
    "NormalizationAnchor",
    "anchor_from_curve",
    "plain_efficiency",
    "normalized_efficiency",
    "normalized_points",
    "avg_efficiency_gain",
    "pass_at_k",
    "k_star",
    "curves_to_csv",
    "parse_curves_csv",
]

CSV_HEADER = ("method", "tokens", "accuracy")


@dataclass(frozen=True)
class EfficiencyCurve:
    """(tokens, accuracy) points for one method, tokens strictly increasing."""

    method: str
    points: tuple[tuple[int, float], ...]

    def __post_init__(self):
        if not self.method:
            raise ConfigError("curve method label must be nonempty")
        if not self.points:
            raise ConfigError(f"curve {self.method!r} has no points")
        prev = 0
        for tokens, acc in self.points:
            if tokens <= prev:
                raise ConfigError(
                    f"curve {self.method!r}: token counts must be strictly "
                    f"increasing and positive, saw {tokens} after {prev}"
                )
            if not 0.0 <= acc <= 1.0:
                raise ConfigError(
                    f"curve {self.method!r}: accuracy {acc!r} outside [0, 1]"
                )
            prev = tokens

    @property
    def min_tokens(self) -> int:
        return self.points[0][0]

    @property
    def max_tokens(self) -> int:
        return self.points[-1][0]


@dataclass(frozen=True)
class NormalizationAnchor:
    """Baseline peak: its best accuracy and the token count where it happens."""

    accuracy: float
    tokens: int

    def __post_init__(self):
        if self.tokens <= 0:
            raise ZeroTokens(f"anchor token count must be positive, got {self.tokens}")
        if not 0.0 < self.accuracy <= 1.0:
            raise NoAnchor(f"anchor accuracy must be in (0, 1], got {self.accuracy!r}")


def anchor_from_curve(curve: EfficiencyCurve) -> NormalizationAnchor:
    """Peak accuracy of a curve; ties break toward fewer tokens."""
    best_acc = max(acc for _, acc in curve.points)
    if best_acc <= 0.0:
        raise NoAnchor(f"curve {curve.method!r} never leaves zero accuracy")
    best_tokens = min(tokens for tokens, acc in curve.points if acc == best_acc)
    return NormalizationAnchor(accuracy=best_acc, tokens=best_tokens)


def plain_efficiency(accuracy: float, tokens: int) -> float:
    """Accuracy per generated token."""
    if tokens <= 0:
        raise ZeroTokens(f"token count must be positive, got {tokens}")
    return accuracy / tokens


def normalized_efficiency(
    accuracy: float, tokens: int, anchor: NormalizationAnchor
) -> float:
    """Efficiency relative to the anchor's accuracy-per-token rate."""
    return plain_efficiency(accuracy, tokens) / plain_efficiency(
        anchor.accuracy, anchor.tokens
    )


def normalized_points(
    curve: EfficiencyCurve, anchor: NormalizationAnchor
) -> list[tuple[int, float]]:
    return [
        (tokens, normalized_efficiency(acc, tokens, anchor))
        for tokens, acc in curve.points
    ]


def avg_efficiency_gain(
    curve: EfficiencyCurve,
    baseline: EfficiencyCurve,
    anchor: NormalizationAnchor | None = None,
) -> float:
    """Integrated relative gain of curve over baseline on their shared interval.

    Both curves are normalized by the same anchor (the baseline's own peak
    when not given), interpolated linearly onto the union of their token
    grids inside the overlap, and integrated by the trapezoid rule. The
    anchor cancels in the ratio, so any valid anchor gives the same number.
    """
    lo = max(curve.min_tokens, baseline.min_tokens)
    hi = min(curve.max_tokens, baseline.max_tokens)
    if lo >= hi:
        raise NoOverlap(
            f"curves {curve.method!r} and {baseline.method!r} share no interval "
            f"(would be [{lo}, {hi}])"
        )
    if anchor is None:
        anchor = anchor_from_curve(baseline)

    def grid_values(c: EfficiencyCurve) -> tuple[np.ndarray, np.ndarray]:
        xs = np.array([t for t, _ in c.points], dtype=np.float64)
        es = np.array(
            [normalized_efficiency(a, t, anchor) for t, a in c.points],
            dtype=np.float64,
        )
        return xs, es

    xs_c, es_c = grid_values(curve)
    xs_b, es_b = grid_values(baseline)
    grid = np.unique(np.concatenate([xs_c, xs_b, [lo, hi]]))
    grid = grid[(grid >= lo) & (grid <= hi)]
    e_curve = np.interp(grid, xs_c, es_c)
    e_base = np.interp(grid, xs_b, es_b)
    base_area = float(np.trapezoid(e_base, grid))
    if base_area <= 0.0:
        raise NoAnchor("baseline efficiency integrates to zero over the overlap")
    diff_area = float(np.trapezoid(e_curve - e_base, grid))
    return diff_area / base_area


def pass_at_k(samples: Sequence[tuple[int, int]], k: int) -> float:
    """Unbiased pass@k over per-problem (drawn, correct) counts."""
    if k < 1:
        raise KTooLarge(f"k must be >= 1, got {k}")
    if not samples:
        raise ConfigError("pass_at_k needs at least one problem")
    total = 0.0
    for n, c in samples:
        if n < 1 or not 0 <= c <= n:
            raise ConfigError(f"bad (samples, correct) pair ({n}, {c})")
        if k > n:
            raise KTooLarge(f"k={k} exceeds the sample count {n}")
        total += 1.0 - math.comb(n - c, k) / math.comb(n, k)
    return total / len(samples)


def k_star(points: Sequence[tuple[int, float]], tol: float = 1e-12) -> int:
    """Smallest k whose value is within tol of the curve maximum."""
    if not points:
        raise ConfigError("k_star needs at least one point")
    ordered = sorted(points)
    peak = max(v for _, v in ordered)
    for k, v in ordered:
        if v >= peak - tol:
            return k
    return ordered[-1][0]  # unreachable, the peak itself always qualifies


# ---------------------------------------------------------------------------
# CSV persistence


def curves_to_csv(curves: Iterable[EfficiencyCurve]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for curve in curves:
        for tokens, acc in curve.points:
            writer.writerow([curve.method, tokens, repr(acc)])
    return buf.getvalue()


def parse_curves_csv(text: str) -> list[EfficiencyCurve]:
    """Read curves back; rows may arrive unsorted and get sorted per method.

    Raises ConfigError naming the 1-based row on a malformed line.
    """
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ConfigError(
            f"row 1: expected header {','.join(CSV_HEADER)!r}"
        )
    grouped: dict[str, list[tuple[int, float]]] = {}
    order: list[str] = []
    for i, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 3:
            raise ConfigError(f"row {i}: expected 3 columns, got {len(row)}")
        method, tokens_s, acc_s = row
        try:
            tokens = int(tokens_s)
            acc = float(acc_s)
        except ValueError as exc:
            raise ConfigError(f"row {i}: {exc}") from exc
        if method not in grouped:
            grouped[method] = []
            order.append(method)
        grouped[method].append((tokens, acc))
    return [
        EfficiencyCurve(method=m, points=tuple(sorted(grouped[m])))
        for m in order
    ]
