"""Partitioned, multi-process version of the layered search.

Each layer splits every leftout segment into overlapping partitions and
scans them on a worker pool. Workers return traces of the window starts
they visited and whether each window passed. The reducer then replays the
left-to-right scan over the whole segment, reading decisions from the
traces and computing any missing one directly. Because batch and
incremental MI are bit-identical, the merged output equals the sequential
search for every partition and worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .ksg import ksg_mi
from .search import (CoverageTarget, SearchConfig, SearchResult, complement, finalize, merge_spans,
                     describe_window, replay, scan_trace, tune_sigma_for_coverage, window_passes)


@dataclass(frozen=True)
class Partition:
    start: int  # before clamping, may be negative
    end: int

    @property
    def clamped_start(self) -> int:
        return max(0, self.start)

    def span(self) -> tuple[int, int]:
        return self.clamped_start, self.end


def make_partitions(N: int, size: int, n: int) -> list[Partition]:
    """Chunks ``(i - size, min(i + n*size, N))`` for ``i = 0, n*size, ...``.

    Consecutive chunks overlap by one window of `size`.
    """
    if size < 1 or n < 1:
        raise ValueError("size and n must be >= 1")
    if size > N:
        raise ValueError("window size exceeds series length")
    step = n * size
    return [Partition(i - size, min(i + step, N)) for i in range(0, N, step)]


def merge_windows(windows, pair, k: int):
    """Union overlapping or touching windows and recompute their statistics."""
    spans = merge_spans((w.s_idx, w.e_idx, w.granularity) for w in windows)
    return [describe_window(pair, s, e, g, k) for s, e, g in spans]


# ---------------------------------------------------------------------------
# worker side

_U = _V = None


def _init_worker(u, v):
    global _U, _V
    _U, _V = u, v


def _scan_task(args):
    domain, g, slide, strategy, k = args
    return scan_trace(_U, _V, domain, g, slide, strategy, k)


class _Pool:
    def __init__(self, workers: int, u, v):
        self.workers = workers
        self.u, self.v = u, v
        self.ex = None

    def __enter__(self):
        if self.workers > 1:
            self.ex = ProcessPoolExecutor(max_workers=self.workers, initializer=_init_worker,
                                          initargs=(self.u, self.v))
        return self

    def __exit__(self, *exc):
        if self.ex is not None:
            self.ex.shutdown()

    def map(self, tasks):
        if self.ex is None:
            _init_worker(self.u, self.v)
            return [_scan_task(t) for t in tasks]
        return list(self.ex.map(_scan_task, tasks))


# ---------------------------------------------------------------------------
# reducer


def _segment_tasks(seg, g, partitions):
    a, b = seg
    n = max(1, math.ceil((b - a) / (partitions * g)))
    return [(a + p.clamped_start, a + p.end) for p in make_partitions(b - a, g, n)]


def recursive_parallel_search(pair, config: SearchConfig, workers: int | None = None,
                              stats: dict | None = None) -> SearchResult:
    """Layered search with `config.partitions` map tasks per segment on `workers` processes.

    If `stats` is given it receives counters: tasks run and windows the
    reducer had to evaluate itself.
    """
    workers = int(config.workers if workers is None else workers)
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if isinstance(config.threshold, CoverageTarget):
        def run(p, c):
            return recursive_parallel_search(p, c, workers, stats)
        return tune_sigma_for_coverage(pair, config, config.threshold.target, search=run)[1]
    N = len(pair)
    ladder = config.resolve_ladder(N)
    u, v, k, strategy = pair.u, pair.v, config.k, config.threshold
    counters = stats if stats is not None else {}
    counters.setdefault("tasks", 0)
    counters.setdefault("direct", 0)
    segments = [(0, N)]
    picks, layers = [], []
    with _Pool(workers, u, v) as pool:
        for g in ladder:
            todo = [s for s in segments if s[1] - s[0] >= g]
            if not todo:
                continue
            layers.append(g)
            slide = config.slide_for(g)
            owner, tasks = [], []
            for si, seg in enumerate(todo):
                for dom in _segment_tasks(seg, g, config.partitions):
                    owner.append(si)
                    tasks.append((dom, g, slide, strategy, k))
            traces = pool.map(tasks)
            counters["tasks"] += len(tasks)
            # deterministic reduce: tasks are in partition order per segment
            known = [dict() for _ in todo]
            for si, (starts, passed) in zip(owner, traces):
                d = known[si]
                for s, ok in zip(starts.tolist(), passed.tolist()):
                    d.setdefault(s, ok)
            nxt = [s for s in segments if s[1] - s[0] < g]
            for si, seg in enumerate(todo):
                d = known[si]

                def outcome(s, d=d):
                    ok = d.get(s)
                    if ok is None:
                        counters["direct"] += 1
                        ok = window_passes(strategy, u, v, s, s + g, ksg_mi(u[s:s + g], v[s:s + g], k))
                        d[s] = ok
                    return ok

                sel = replay(seg, g, slide, outcome)
                picks.extend((s, e, g) for s, e in sel)
                nxt.extend(complement(seg, sel))
            segments = sorted(nxt)
            if not segments:
                break
    return SearchResult(finalize(pair, picks, k), segments, layers)
