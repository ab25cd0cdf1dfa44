"""Soft embeddings, signal rows, and the linear mix schedules."""

import numpy as np
import pytest

from helpers import random_dist, random_table
from swidecode import EmbeddingTable, MixSchedule, TokenDistribution, soft_embedding
from swidecode.errors import DimensionMismatch, StepOutOfRange
from swidecode.mixing import (
    alpha_at,
    beta_at,
    mix_block_entry,
    mix_block_exit,
    signal_embedding,
)


def table_from(rows) -> EmbeddingTable:
    return EmbeddingTable(np.asarray(rows, dtype=np.float64))


def test_one_hot_yields_exact_row():
    t = table_from([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0], [7.0, 8.0]])
    p = np.zeros(4)
    p[3] = 1.0
    out = soft_embedding(TokenDistribution(p), t)
    assert np.array_equal(out, np.array([7.0, 8.0]))


def test_even_split_is_midpoint():
    t = table_from([[0.0, 0.0], [2.0, 2.0]])
    out = soft_embedding(TokenDistribution(np.array([0.5, 0.5])), t)
    assert np.array_equal(out, np.array([1.0, 1.0]))


def test_quarter_three_quarter_mix():
    t = table_from([[0.0, 4.0], [4.0, 0.0]])
    out = soft_embedding(TokenDistribution(np.array([0.25, 0.75])), t)
    assert np.allclose(out, np.array([3.0, 1.0]), atol=1e-12)


def test_soft_embedding_length_mismatch():
    t = table_from([[0.0], [1.0], [2.0]])
    with pytest.raises(DimensionMismatch):
        soft_embedding(TokenDistribution(np.array([0.5, 0.5])), t)


def test_soft_embedding_linear_in_distribution():
    rng = np.random.default_rng(31)
    for _ in range(300):
        n = int(rng.integers(2, 40))
        d = int(rng.integers(1, 8))
        t = random_table(rng, n, d)
        p = random_dist(rng, n)
        q = random_dist(rng, n)
        lam = float(rng.random())
        mixed = lam * p + (1.0 - lam) * q
        mixed /= mixed.sum()
        lhs = soft_embedding(TokenDistribution(mixed), t)
        rhs = lam * soft_embedding(TokenDistribution(p), t) + (1.0 - lam) * soft_embedding(
            TokenDistribution(q), t
        )
        assert np.max(np.abs(lhs - rhs)) <= 1e-9


def test_soft_embedding_stays_in_row_hull():
    rng = np.random.default_rng(32)
    for _ in range(300):
        n = int(rng.integers(2, 50))
        d = int(rng.integers(1, 6))
        t = random_table(rng, n, d)
        out = soft_embedding(TokenDistribution(random_dist(rng, n)), t)
        assert np.all(out >= t.rows.min(axis=0))
        assert np.all(out <= t.rows.max(axis=0))


def test_signal_embedding_single_and_mean():
    t = table_from([[0.0, 0.0], [2.0, 4.0], [4.0, 0.0]])
    assert np.array_equal(signal_embedding(t, (1,)), np.array([2.0, 4.0]))
    assert np.array_equal(signal_embedding(t, (1, 2)), np.array([3.0, 2.0]))
    with pytest.raises(DimensionMismatch):
        signal_embedding(t, (5,))
    with pytest.raises(DimensionMismatch):
        signal_embedding(t, ())


def test_schedule_reaches_exactly_one_at_final_step():
    for w0 in (0.0, 0.3, 0.5, 1.0 / 3.0, 0.9999):
        for t_max in (1, 7, 100, 32768):
            sched = MixSchedule(alpha0=w0, beta0=w0, t_max=t_max)
            assert alpha_at(sched, t_max) == 1.0
            assert beta_at(sched, t_max) == 1.0


def test_schedule_midpoint_value():
    sched = MixSchedule(alpha0=0.5, beta0=0.5, t_max=100)
    assert alpha_at(sched, 50) == 0.75


def test_schedule_start_values():
    sched = MixSchedule(alpha0=0.5, beta0=0.7, t_max=64)
    assert alpha_at(sched, 0) == 0.5
    assert beta_at(sched, 0) == 0.7


def test_schedule_degenerate_weight_one():
    sched = MixSchedule(alpha0=1.0, beta0=1.0, t_max=9)
    for t in range(10):
        assert alpha_at(sched, t) == 1.0


def test_schedule_monotone_and_bounded():
    rng = np.random.default_rng(33)
    for _ in range(100):
        w0 = float(rng.random())
        t_max = int(rng.integers(1, 500))
        sched = MixSchedule(alpha0=w0, beta0=w0, t_max=t_max)
        vals = [alpha_at(sched, t) for t in range(t_max + 1)]
        assert vals[-1] == 1.0
        for a, b in zip(vals, vals[1:]):
            assert b >= a
        assert all(w0 <= v <= 1.0 for v in vals)


def test_schedule_rejects_out_of_range_steps():
    sched = MixSchedule(alpha0=0.5, beta0=0.5, t_max=10)
    with pytest.raises(StepOutOfRange):
        alpha_at(sched, -1)
    with pytest.raises(StepOutOfRange):
        alpha_at(sched, 11)


def test_schedule_validation():
    with pytest.raises(ValueError):
        MixSchedule(alpha0=1.2, beta0=0.5, t_max=10)
    with pytest.raises(ValueError):
        MixSchedule(alpha0=0.5, beta0=-0.1, t_max=10)
    with pytest.raises(ValueError):
        MixSchedule(alpha0=0.5, beta0=0.5, t_max=0)


def test_mix_endpoints_are_exact():
    soft = np.array([1.0, 0.0, 3.0])
    sig = np.array([0.0, 1.0, -2.0])
    assert np.array_equal(mix_block_entry(soft, sig, 1.0), soft)
    assert np.array_equal(mix_block_entry(soft, sig, 0.0), sig)


def test_mix_weighted_example():
    out = mix_block_exit(np.array([1.0, 0.0]), np.array([0.0, 1.0]), 0.6)
    assert np.allclose(out, np.array([0.6, 0.4]), atol=1e-15)


def test_mix_stays_in_two_point_hull():
    rng = np.random.default_rng(34)
    for _ in range(300):
        d = int(rng.integers(1, 10))
        soft = rng.normal(0.0, 5.0, d)
        sig = rng.normal(0.0, 5.0, d)
        w = float(rng.random())
        out = mix_block_entry(soft, sig, w)
        assert np.all(out >= np.minimum(soft, sig) - 0.0)
        assert np.all(out <= np.maximum(soft, sig) + 0.0)


def test_mix_linearity_in_weight():
    rng = np.random.default_rng(35)
    soft = rng.normal(0.0, 1.0, 6)
    sig = rng.normal(0.0, 1.0, 6)
    for w in (0.1, 0.25, 0.5, 0.9):
        out = mix_block_entry(soft, sig, w)
        assert np.max(np.abs(out - (w * soft + (1 - w) * sig))) <= 1e-9


def test_mix_validation():
    with pytest.raises(DimensionMismatch):
        mix_block_entry(np.zeros(3), np.zeros(4), 0.5)
    with pytest.raises(ValueError):
        mix_block_exit(np.zeros(3), np.zeros(3), 1.5)


def test_table_validation():
    with pytest.raises(DimensionMismatch):
        EmbeddingTable(np.zeros((1, 4)))
    with pytest.raises(Exception):
        EmbeddingTable(np.array([[np.nan, 0.0], [0.0, 0.0]]))
