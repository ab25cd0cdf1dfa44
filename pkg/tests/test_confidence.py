"""Distribution construction and entropy, checked against frozen
extended-precision values and a longdouble oracle."""

import numpy as np
import pytest

from helpers import entropy_oracle, random_dist, softmax_oracle
from swidecode import TokenDistribution, entropy, from_logits
from swidecode.errors import LogitsTooShort, NonFiniteLogits

# mpmath, 50 digits, rounded to float64
SOFTMAX_210 = (0.66524095577482189, 0.24472847105479765, 0.090030573170380458)
ENTROPY_9_1 = 0.32508297339144824
LN4 = 1.3862943611198906


def test_equal_logits_split_evenly():
    d = from_logits(np.array([0.0, 0.0]))
    assert d.probs[0] == 0.5 and d.probs[1] == 0.5


def test_softmax_of_2_1_0():
    d = from_logits(np.array([2.0, 1.0, 0.0]))
    assert np.all(np.abs(d.probs - np.array(SOFTMAX_210)) < 1e-12)


def test_extreme_gap_does_not_overflow():
    d = from_logits(np.array([1000.0, 0.0]))
    assert np.all(np.isfinite(d.probs))
    assert d.probs[0] == 1.0  # exp(-1000) underflows to zero mass
    assert d.probs[1] == 0.0


def test_nonfinite_logits_rejected():
    with pytest.raises(NonFiniteLogits):
        from_logits(np.array([0.0, np.nan]))
    with pytest.raises(NonFiniteLogits):
        from_logits(np.array([np.inf, 0.0]))


def test_single_logit_rejected():
    with pytest.raises(LogitsTooShort):
        from_logits(np.array([1.0]))


def test_uniform_entropy_is_log_vocab():
    d = TokenDistribution(np.full(4, 0.25))
    assert abs(entropy(d) - LN4) < 1e-12


def test_one_hot_entropy_is_zero():
    d = TokenDistribution(np.array([0.0, 1.0, 0.0]))
    assert entropy(d) == 0.0


def test_frozen_two_point_entropy():
    d = TokenDistribution(np.array([0.9, 0.1]))
    assert abs(entropy(d) - ENTROPY_9_1) < 1e-12


def test_entropy_shift_invariant():
    rng = np.random.default_rng(11)
    for _ in range(200):
        n = int(rng.integers(2, 50))
        logits = rng.normal(0.0, 3.0, n)
        c = rng.uniform(-100.0, 100.0)
        h0 = entropy(from_logits(logits))
        h1 = entropy(from_logits(logits + c))
        assert abs(h0 - h1) <= 1e-9


def test_entropy_bounds():
    rng = np.random.default_rng(12)
    for _ in range(300):
        n = int(rng.integers(2, 200))
        p = random_dist(rng, n)
        h = entropy(TokenDistribution(p))
        assert 0.0 <= h <= np.log(n) + 1e-12


def test_entropy_matches_extended_precision_oracle():
    rng = np.random.default_rng(13)
    for _ in range(500):
        n = int(rng.integers(2, 5000))
        p = random_dist(rng, n)
        assert abs(entropy(TokenDistribution(p)) - entropy_oracle(p)) <= 1e-9


def test_softmax_matches_extended_precision_oracle():
    rng = np.random.default_rng(14)
    for _ in range(300):
        n = int(rng.integers(2, 500))
        logits = rng.normal(0.0, 5.0, n)
        got = from_logits(logits).probs
        want = softmax_oracle(logits)
        assert np.max(np.abs(got - want)) <= 1e-12


def test_distribution_validation():
    with pytest.raises(LogitsTooShort):
        TokenDistribution(np.array([0.5]))
    with pytest.raises(NonFiniteLogits):
        TokenDistribution(np.array([0.7, -0.1, 0.4]))
    with pytest.raises(NonFiniteLogits):
        TokenDistribution(np.array([0.7, 0.7]))  # sums far from one
    d = TokenDistribution(np.array([0.5, 0.5]))
    assert len(d) == 2
