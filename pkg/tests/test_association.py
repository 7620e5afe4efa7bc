import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from amic.association import associate, association_degree, classify, count_periods
from amic.ingest import rank_values
from amic.synth import gen_relation


class TestCounts:
    def test_up_up(self):
        assert count_periods([1, 2, 3], [1, 2, 3]) == (2, 0)

    def test_opposite(self):
        assert count_periods([1, 2, 3], [3, 2, 1]) == (0, 2)

    def test_mixed(self):
        assert count_periods([0, 1, 2], [0, 1, 0]) == (1, 1)

    def test_flat_steps_ignored(self):
        assert count_periods([0, 0, 1], [0, 1, 1]) == (0, 0)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            count_periods([1, 2], [1])


class TestDegree:
    def test_examples(self):
        assert association_degree(2, 0, 3) == 1.0
        assert association_degree(0, 2, 3) == -1.0
        assert association_degree(8, 2, 11) == pytest.approx(0.6)


class TestClassify:
    def test_positive(self):
        assert classify(8, 2, 0.6) == ("positive", 0.75)

    def test_negative(self):
        assert classify(2, 8, -0.6) == ("negative", 0.75)

    def test_neither(self):
        assert classify(5, 5, 0.0) == ("neither", 1.0)


def tie_free(draw_seed, n):
    return np.random.default_rng(draw_seed).permutation(n).astype(float), \
        np.random.default_rng(draw_seed + 1).permutation(n).astype(float)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(2, 200))
def test_bounds_and_antisymmetry(seed, n):
    x, y = tie_free(seed, n)
    a = associate(x, y)
    assert -1 <= a.mu <= 1
    assert 0 <= a.neutral_confidence <= 1 and a.confidence >= 0
    b = associate(x, -y)
    assert (b.pp, b.np) == (a.np, a.pp)
    assert b.mu == -a.mu
    flip = {"positive": "negative", "negative": "positive", "neither": "neither"}
    assert b.sign == flip[a.sign]


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(2, 200))
def test_monotone_transform_and_ranks(seed, n):
    x, y = tie_free(seed, n)
    a = associate(x, y)
    assert associate(np.exp(x / n), y ** 3) == a
    assert associate(rank_values(x), rank_values(y)) == a


def test_quadratic_has_no_direction():
    p = gen_relation("quadratic", 5000, seed=0)
    order = np.argsort(p.x)
    a = associate(p.x[order], p.y[order])
    assert abs(a.mu) < 0.1
    # window centred on the vertex of the noiseless curve
    x = np.linspace(-1, 1, 101)
    a = associate(x, x ** 2)
    assert a.mu == 0 and a.sign == "neither"
