import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from amic.ingest import rank_transform
from amic.parallel import Partition, make_partitions, merge_windows, recursive_parallel_search
from amic.search import Absolute, CoverageTarget, SearchConfig, describe_window, layered_search
from amic.synth import compose


@pytest.fixture(scope="module")
def stream():
    pair, spans = compose(["cross", "linear", "circle", "sine"], 3000, 1500, seed=11)
    return rank_transform(pair), spans


class TestPartitions:
    def test_formula(self):
        parts = make_partitions(1000, 100, 2)
        assert [p.span() for p in parts] == [(0, 200), (100, 400), (300, 600), (500, 800), (700, 1000)]
        assert parts[0] == Partition(-100, 200)

    def test_single(self):
        assert [p.span() for p in make_partitions(300, 300, 1)] == [(0, 300)]

    def test_tail(self):
        assert [p.span() for p in make_partitions(250, 100, 2)] == [(0, 200), (100, 250)]

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 5000), st.integers(1, 400), st.integers(1, 6))
    def test_cover_and_overlap(self, N, size, n):
        if size > N:
            with pytest.raises(ValueError):
                make_partitions(N, size, n)
            return
        parts = make_partitions(N, size, n)
        assert parts[0].clamped_start == 0 and parts[-1].end == N
        for a, b in zip(parts, parts[1:]):
            assert a.end - b.clamped_start == size


class TestMerge:
    def test_overlap_recomputed(self, stream):
        pair, _ = stream
        ws = [describe_window(pair, 10, 50, 40, 6), describe_window(pair, 30, 80, 50, 6)]
        assert merge_windows(ws, pair, 6) == [describe_window(pair, 10, 80, 50, 6)]

    def test_duplicates(self, stream):
        pair, _ = stream
        w = describe_window(pair, 100, 200, 100, 6)
        assert merge_windows([w, w], pair, 6) == [w]

    def test_disjoint_sorted(self, stream):
        pair, _ = stream
        a = describe_window(pair, 300, 400, 100, 6)
        b = describe_window(pair, 0, 100, 100, 6)
        assert merge_windows([a, b], pair, 6) == [b, a]

    def test_idempotent_permutation(self, stream):
        pair, _ = stream
        rng = np.random.default_rng(0)
        ws = [describe_window(pair, int(s), int(s) + 60, 60, 6) for s in rng.integers(0, 2000, 12)]
        m = merge_windows(ws, pair, 6)
        assert merge_windows(m, pair, 6) == m
        assert merge_windows(ws[::-1], pair, 6) == m


class TestEquivalence:
    def test_single_worker_equals_sequential(self, stream):
        pair, _ = stream
        assert recursive_parallel_search(pair, SearchConfig()) == layered_search(pair, SearchConfig())

    @pytest.mark.parametrize("p", [2, 3, 4, 8])
    def test_partitions_in_process(self, stream, p):
        pair, _ = stream
        ref = layered_search(pair, SearchConfig())
        assert recursive_parallel_search(pair, SearchConfig(partitions=p)) == ref

    def test_worker_pool(self, stream):
        pair, _ = stream
        ref = layered_search(pair, SearchConfig())
        stats = {}
        got = recursive_parallel_search(pair, SearchConfig(partitions=4, workers=2), stats=stats)
        assert got == ref
        assert stats["tasks"] >= 4

    def test_absolute_and_small_ladder(self, stream):
        pair, _ = stream
        cfg = SearchConfig(ladder=(600, 200, 48), threshold=Absolute(0.8))
        ref = layered_search(pair, cfg)
        for p in (2, 5):
            assert recursive_parallel_search(pair, SearchConfig(ladder=(600, 200, 48), threshold=Absolute(0.8),
                                                                partitions=p)) == ref

    def test_straddling_relation_reported_once(self):
        # relation crosses the boundary between the first two partitions of the top layer
        pair, spans = compose(["linear", "cross"], 1800, 1200, seed=3)
        pair = rank_transform(pair)
        cfg = SearchConfig(ladder=(600, 300, 150), partitions=4)
        parts = make_partitions(len(pair), 600, -(-len(pair) // (4 * 600)))
        bounds = [p.end for p in parts[:-1]]
        assert any(spans[0].s_idx < b < spans[0].e_idx or spans[1].s_idx < b < spans[1].e_idx
                   for b in bounds)
        res = recursive_parallel_search(pair, cfg)
        assert res == layered_search(pair, cfg)
        for sp in spans:
            inside = [w for w in res.windows if w.s_idx < sp.e_idx and w.e_idx > sp.s_idx]
            assert len(inside) == 1

    def test_coverage_target(self, stream):
        pair, _ = stream
        cfg = SearchConfig(threshold=CoverageTarget(0.4, Absolute()), partitions=3)
        ref = layered_search(pair, SearchConfig(threshold=CoverageTarget(0.4, Absolute())))
        assert recursive_parallel_search(pair, cfg) == ref

    def test_bad_workers(self, stream):
        pair, _ = stream
        with pytest.raises(ValueError):
            recursive_parallel_search(pair, SearchConfig(), workers=0)
