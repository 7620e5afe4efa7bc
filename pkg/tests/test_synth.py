import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from amic.ingest import rank_transform
from amic.ksg import ksg_mi
from amic.synth import RELATIONS, compose, dcor, gen_relation, pearson


def dcor_oracle(x, y):
    a = np.abs(x[:, None] - x[None, :])
    b = np.abs(y[:, None] - y[None, :])
    A = a - a.mean(0) - a.mean(1)[:, None] + a.mean()
    B = b - b.mean(0) - b.mean(1)[:, None] + b.mean()
    vxy, vxx, vyy = (A * B).mean(), (A * A).mean(), (B * B).mean()
    return math.sqrt(max(vxy, 0) / math.sqrt(vxx * vyy))


def mi(kind, seed=0, n=5000, **kw):
    p = rank_transform(gen_relation(kind, n, seed=seed, **kw))
    return ksg_mi(p.u, p.v, 6).clamped


class TestGen:
    @pytest.mark.parametrize("kind", RELATIONS)
    def test_shapes_and_determinism(self, kind):
        a = gen_relation(kind, 300, seed=5)
        b = gen_relation(kind, 300, seed=5)
        assert len(a) == 300
        assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)
        assert not np.array_equal(a.x, gen_relation(kind, 300, seed=6).x)

    def test_noiseless_linear(self):
        assert pearson(gen_relation("linear", 5000, noise=0.0, seed=1)) == 1.0

    def test_independent_mi(self):
        assert np.mean([mi("independent", s) for s in range(10)]) <= 0.05

    def test_quadratic_pattern(self):
        p = gen_relation("quadratic", 5000, noise=0.05, seed=0)
        assert abs(pearson(p)) <= 0.1
        assert mi("quadratic", noise=0.05) > 5 * mi("independent")

    def test_outliers_weaken(self):
        assert mi("linear_outliers") < mi("linear")

    def test_unknown(self):
        with pytest.raises(ValueError):
            gen_relation("spiral", 100)


class TestCompose:
    def test_four_relation_layout(self):
        pair, spans = compose(["cross", "diamond", "sine", "quadratic"], 2000, 1000, seed=0)
        assert len(pair) == 11000
        assert [(s.kind, s.s_idx, s.e_idx) for s in spans] == [
            ("cross", 0, 2000), ("diamond", 3000, 5000), ("sine", 6000, 8000), ("quadratic", 9000, 11000)]

    def test_single(self):
        pair, spans = compose(["circle"], 500, 100)
        assert len(pair) == 500 and (spans[0].s_idx, spans[0].e_idx) == (0, 500)

    def test_no_gap(self):
        _, spans = compose(["linear", "sine"], 400, 0)
        assert spans[0].e_idx == spans[1].s_idx == 400

    def test_empty(self):
        with pytest.raises(ValueError):
            compose([], 100, 10)


class TestBaselines:
    def test_pearson_extremes(self):
        x = np.linspace(0, 1, 50)
        assert pearson(x, x) == 1.0
        assert pearson(x, -x) == -1.0
        with pytest.raises(ValueError):
            pearson(x, np.ones(50))

    def test_circle(self):
        p = gen_relation("circle", 5000, seed=0)
        assert abs(pearson(p)) <= 0.1
        assert 0 < dcor(p) < 0.3

    def test_dcor_extremes(self):
        x = np.random.default_rng(0).random(300)
        assert dcor(x, x) == pytest.approx(1.0)
        p = gen_relation("independent", 3000, seed=2)
        assert dcor(p) <= 0.1
        assert dcor(x, np.ones(300)) == 0.0

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10 ** 6), st.integers(2, 200))
    def test_dcor_oracle(self, seed, n):
        rng = np.random.default_rng(seed)
        x, y = rng.random(n), rng.random(n) + rng.random(n) * 0.5
        assert dcor(x, y) == pytest.approx(dcor_oracle(x, y), abs=1e-9)
