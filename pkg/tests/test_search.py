from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from amic.ingest import rank_transform
from amic.ksg import ksg_mi
from amic.search import (Absolute, CoverageTarget, SearchConfig, SearchResult, TwoStep, WindowResult,
                         build_ladder, check_ladder, complement, data_coverage, describe_window,
                         evaluate_threshold, layered_search, merge_spans, rank_windows, replay,
                         scan_layer, scan_trace, tune_sigma_for_coverage)
from amic.synth import compose, gen_relation


def stats(**kw):
    base = dict(mi_raw=0.0, mi=0.0, h_w=0.0, h_norm=0.0, nmi1=0.0, nmi2=0.0)
    base.update(kw)
    return SimpleNamespace(**base)


@pytest.fixture(scope="module")
def four_rel():
    pair, spans = compose(["cross", "diamond", "sine", "quadratic"], 2000, 1000, seed=0)
    return rank_transform(pair), spans


class TestThreshold:
    def test_entropy_gate_rejects(self):
        assert not evaluate_threshold(TwoStep(0.2, 0.2), stats(h_norm=0.15, nmi2=0.9))

    def test_absolute_accepts(self):
        assert evaluate_threshold(Absolute(0.5), stats(mi=0.651174))
        assert not evaluate_threshold(Absolute(0.7), stats(mi=0.651174))

    def test_two_step_accepts(self):
        assert evaluate_threshold(TwoStep(0.2, 0.2), stats(h_norm=0.8, nmi2=0.3))

    def test_max_norm_variant(self):
        s = stats(h_norm=0.8, nmi1=0.1, nmi2=0.3)
        assert not evaluate_threshold(TwoStep(0.2, 0.2, "max"), s)

    def test_invalid(self):
        with pytest.raises(ValueError):
            TwoStep(0.2, 1.5)
        with pytest.raises(ValueError):
            Absolute(-1)
        with pytest.raises(ValueError):
            TwoStep(norm="bits")
        with pytest.raises(TypeError):
            evaluate_threshold(CoverageTarget(0.5), stats())


class TestLadder:
    def test_default_sizes(self):
        assert build_ladder(11000) == (336, 168, 80, 40)

    def test_halving_multiples_of_eight(self):
        lad = build_ladder(100000)
        assert lad[0] == 3120 and lad[-1] >= 24
        assert all(g % 8 == 0 for g in lad)
        assert all(b < a for a, b in zip(lad, lad[1:]))

    def test_explicit_g_max(self):
        assert build_ladder(1000, g_max=1000, g_min=100) == (1000, 496, 248, 120)

    def test_check_ladder(self):
        assert check_ladder([400, 100], 6) == (400, 100)
        with pytest.raises(ValueError):
            check_ladder([100, 400], 6)
        with pytest.raises(ValueError):
            check_ladder([100, 7], 6)

    def test_slide(self):
        c = SearchConfig()
        assert c.slide_for(336) == 42
        assert c.slide_for(5) == 1


class TestScan:
    def test_noise_segment(self):
        pair = rank_transform(gen_relation("independent", 600, seed=1))
        res = scan_layer(pair, (0, 600), 200, 25, TwoStep(), 6)
        assert res.selected == [] and res.leftout == [(0, 600)]

    def test_exact_relation(self):
        pair = rank_transform(gen_relation("linear", 200, seed=1))
        res = scan_layer(pair, (0, 200), 200, 25, TwoStep(), 6)
        assert res.selected == [(0, 200)] and res.leftout == []

    def test_short_segment(self):
        pair = rank_transform(gen_relation("linear", 200, seed=1))
        res = scan_layer(pair, (0, 100), 150, 10, TwoStep(), 6)
        assert res.too_short and res.selected == []

    def test_fail_then_pass(self):
        seen = []

        def outcome(s):
            seen.append(s)
            return s == 10

        sel = replay((0, 200), 50, 10, outcome)
        assert sel == [(10, 60)]
        assert complement((0, 200), sel) == [(0, 10), (60, 200)]
        assert seen[:3] == [0, 10, 60]

    def test_trace_matches_replay(self, four_rel):
        pair, _ = four_rel
        strat = TwoStep()
        starts, passed = scan_trace(pair.u, pair.v, (0, 4000), 336, 42, strat, 6)
        d = dict(zip(starts.tolist(), passed.tolist()))
        sel = replay((0, 4000), 336, 42, d.__getitem__)
        assert sel == [(int(s), int(s) + 336) for s, ok in zip(starts, passed) if ok]


class TestMerge:
    def test_overlap(self):
        assert merge_spans([(30, 80, 50), (10, 50, 40)]) == [(10, 80, 50)]

    def test_touching(self):
        assert merge_spans([(0, 10, 10), (10, 20, 10)]) == [(0, 20, 10)]

    def test_disjoint(self):
        assert merge_spans([(50, 60, 10), (0, 10, 10)]) == [(0, 10, 10), (50, 60, 10)]

    @settings(max_examples=80, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 300), st.integers(1, 60), st.integers(1, 9)), max_size=20),
           st.randoms(use_true_random=False))
    def test_idempotent_and_order_free(self, items, rnd):
        spans = [(s, s + w, g) for s, w, g in items]
        m = merge_spans(spans)
        assert merge_spans(m) == m
        rnd.shuffle(spans)
        assert merge_spans(spans) == m
        assert all(a[1] < b[0] for a, b in zip(m, m[1:]))


class TestLayeredSearch:
    def test_single_relation_one_window(self):
        pair = rank_transform(gen_relation("linear", 1000, seed=2))
        res = layered_search(pair, SearchConfig(ladder=(1000,)))
        assert res.spans() == [(0, 1000)] and res.leftout == []

    def test_noise_finds_nothing(self):
        pair = rank_transform(gen_relation("independent", 4000, seed=3))
        res = layered_search(pair, SearchConfig())
        assert res.windows == [] and res.leftout == [(0, 4000)]
        assert res.layers_run == list(build_ladder(4000))

    def test_four_relations_recovered(self, four_rel):
        pair, spans = four_rel
        res = layered_search(pair, SearchConfig())
        assert len(res.windows) >= 4
        cover = np.zeros(len(pair), bool)
        for s, e in res.spans():
            cover[s:e] = True
        for sp in spans:
            assert cover[sp.s_idx:sp.e_idx].mean() >= 0.8, sp.kind

    def test_partition_property(self, four_rel):
        pair, _ = four_rel
        res = layered_search(pair, SearchConfig())
        hits = np.zeros(len(pair), int)
        for s, e in res.spans() + res.leftout:
            hits[s:e] += 1
        assert np.all(hits == 1)

    def test_deterministic(self, four_rel):
        pair, _ = four_rel
        assert layered_search(pair, SearchConfig()) == layered_search(pair, SearchConfig())

    def test_window_fields(self, four_rel):
        pair, _ = four_rel
        w = describe_window(pair, 100, 600, 500, 6)
        assert w.mi_raw == ksg_mi(pair.u[100:600], pair.v[100:600], 6).raw
        assert w.start_ts == pair.source.timestamps[100] and w.end_ts == pair.source.timestamps[599]
        assert list(w.to_dict()) == list(WindowResult.FIELDS)
        assert 0 <= w.h_norm <= 1 and 0 <= w.nmi1 <= w.nmi2 <= 1
        assert w.sign in ("positive", "negative", "neither")


class TestCoverage:
    def test_worked_example(self):
        w = describe_window(rank_transform(gen_relation("linear", 500, seed=0)), 0, 100, 100, 6)
        assert data_coverage(SearchResult([w], [], []), 500) == 0.2

    def test_limits(self):
        assert data_coverage(SearchResult([], [(0, 10)], []), 10) == 0.0
        w = describe_window(rank_transform(gen_relation("linear", 50, seed=0)), 0, 50, 50, 6)
        assert data_coverage(SearchResult([w], [], []), 50) == 1.0

    def test_full_target_on_correlated_data(self):
        pair = rank_transform(gen_relation("linear", 2000, seed=4))
        cfg = SearchConfig(ladder=(500, 250))
        sigma, res = tune_sigma_for_coverage(pair, cfg, 1.0, tol=0.01)
        assert data_coverage(res, 2000) == 1.0
        assert sigma <= ksg_mi(pair.u, pair.v, 6).clamped

    def test_tiny_target(self, four_rel):
        pair, _ = four_rel
        sigma, res = tune_sigma_for_coverage(pair, SearchConfig(threshold=Absolute()), 0.001)
        assert data_coverage(res, len(pair)) <= 0.051
        assert sigma > 1.0

    def test_ground_truth_fraction(self, four_rel):
        pair, spans = four_rel
        target = sum(s.e_idx - s.s_idx for s in spans) / len(pair)
        sigma, res = tune_sigma_for_coverage(pair, SearchConfig(), target)
        assert abs(data_coverage(res, len(pair)) - target) <= 0.05

    def test_config_dispatch(self, four_rel):
        pair, _ = four_rel
        res = layered_search(pair, SearchConfig(threshold=CoverageTarget(0.5, Absolute())))
        assert abs(data_coverage(res, len(pair)) - 0.5) <= 0.05


def test_rank_windows_order():
    def w(s, mi):
        return WindowResult(s, s + 10, s, s + 9, 10, mi, mi, 1.0, 0.5, 0.1, 0.2, 0.0, "neither", 1.0)

    ws = [w(30, 0.4124), w(0, 0.651174), w(10, 0.4124)]
    assert [x.s_idx for x in rank_windows(ws)] == [0, 10, 30]
    assert rank_windows(ws, 0) == []
    assert len(rank_windows(ws, 10)) == 3
