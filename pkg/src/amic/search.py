"""Top-down multi-granularity window search.

The series is scanned with the largest window size first. Windows that
pass the threshold are kept and the scan jumps past them; everything else
is left out and rescanned at the next, smaller size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Union

import numpy as np

from .association import associate
from .ksg import (MiEstimate, digamma, entropy_bins, ksg_mi, nmi_entropy, nmi_max, normalized_entropy,
                  plugin_entropy, window_entropy)
from .window import WindowState

# ---------------------------------------------------------------------------
# thresholds


@dataclass(frozen=True)
class Absolute:
    sigma: float = 0.0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")


@dataclass(frozen=True)
class TwoStep:
    """Entropy gate followed by a normalised-MI gate.

    ``norm="entropy"`` compares MI / window entropy, ``norm="max"`` compares
    MI / ln(n).
    """
    sigma_h: float = 0.2
    sigma_i: float = 0.2
    norm: str = "entropy"

    def __post_init__(self):
        if not (0 <= self.sigma_h <= 1 and 0 <= self.sigma_i <= 1):
            raise ValueError("sigma_h and sigma_i must lie in [0, 1]")
        if self.norm not in ("entropy", "max"):
            raise ValueError("norm must be 'entropy' or 'max'")


@dataclass(frozen=True)
class CoverageTarget:
    target: float
    inner: Union[Absolute, TwoStep] = field(default_factory=Absolute)

    def __post_init__(self):
        if not 0 < self.target <= 1:
            raise ValueError("coverage target must lie in (0, 1]")


Strategy = Union[Absolute, TwoStep, CoverageTarget]


@dataclass(frozen=True)
class WindowStats:
    mi_raw: float
    mi: float
    h_w: float
    h_norm: float
    nmi1: float
    nmi2: float


def window_stats(u, v, mi: MiEstimate) -> WindowStats:
    n = len(u)
    b = entropy_bins(n)
    h_w = window_entropy(mi, plugin_entropy(u, b), plugin_entropy(v, b), n)
    return WindowStats(mi.raw, mi.clamped, h_w, normalized_entropy(h_w, n), nmi_max(mi, n),
                       nmi_entropy(mi, h_w))


def evaluate_threshold(strategy: Strategy, stats) -> bool:
    """Decide whether a window passes; `stats` needs the fields of :class:`WindowStats`."""
    if isinstance(strategy, Absolute):
        return stats.mi >= strategy.sigma
    if isinstance(strategy, TwoStep):
        if stats.h_norm < strategy.sigma_h:
            return False
        score = stats.nmi2 if strategy.norm == "entropy" else stats.nmi1
        return score >= strategy.sigma_i
    raise TypeError("coverage targets are resolved by tune_sigma_for_coverage")


def window_passes(strategy: Strategy, u, v, s: int, e: int, mi: MiEstimate) -> bool:
    # MI-only strategies skip the entropy work
    if isinstance(strategy, Absolute):
        return mi.clamped >= strategy.sigma
    return evaluate_threshold(strategy, window_stats(u[s:e], v[s:e], mi))


# ---------------------------------------------------------------------------
# configuration


# default top window is N / DEFAULT_TOP_DIVISOR; keeping it well below
# typical event lengths stops coarse windows from swallowing their neighbours
DEFAULT_TOP_DIVISOR = 32


def default_n_min(k: int) -> int:
    return max(k + 2, 24)


def build_ladder(N: int, k: int = 6, g_max: int | None = None, g_min: int | None = None,
                 n_min: int | None = None, slide_frac: float = 1 / 8) -> tuple[int, ...]:
    """Halving ladder of window sizes from `g_max` (default N/32) down to `g_min`.

    Sizes are rounded down to a multiple of ``1/slide_frac`` when that is an
    integer, so every window start of a layer sits on one slide lattice.
    """
    floor_ = max(default_n_min(k) if n_min is None else n_min, k + 2)
    lo = max(floor_, g_min or 0)
    if N < lo:
        raise ValueError(f"series of {N} samples is shorter than the minimum window {lo}")
    top = min(g_max if g_max is not None else N // DEFAULT_TOP_DIVISOR, N)
    top = max(top, lo)
    q = 1 / slide_frac
    q = int(round(q)) if abs(q - round(q)) < 1e-9 and q >= 1 else 1
    sizes: list[int] = []
    g = top
    while g >= lo:
        r = (g // q) * q
        if r < lo:
            r = g
        if not sizes or r < sizes[-1]:
            sizes.append(r)
        g //= 2
    return tuple(sizes)


def check_ladder(ladder, k: int, n_min: int | None = None) -> tuple[int, ...]:
    lad = tuple(int(g) for g in ladder)
    if not lad:
        raise ValueError("empty ladder")
    if any(b >= a for a, b in zip(lad, lad[1:])):
        raise ValueError("ladder must be strictly decreasing")
    floor_ = max(default_n_min(k) if n_min is None else n_min, k + 2)
    if lad[-1] < floor_:
        raise ValueError(f"smallest window {lad[-1]} is below the minimum {floor_}")
    return lad


@dataclass(frozen=True)
class SearchConfig:
    k: int = 6
    ladder: tuple[int, ...] | None = None
    g_max: int | None = None
    g_min: int | None = None
    slide_frac: float = 1 / 8
    threshold: Strategy = field(default_factory=TwoStep)
    n_min: int | None = None
    partitions: int = 1
    workers: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0 < self.slide_frac <= 1:
            raise ValueError("slide_frac must lie in (0, 1]")
        if self.partitions < 1 or self.workers < 1:
            raise ValueError("partitions and workers must be >= 1")

    def resolve_ladder(self, N: int) -> tuple[int, ...]:
        if self.ladder is not None:
            lad = check_ladder(self.ladder, self.k, self.n_min)
            if N < lad[-1]:
                raise ValueError("series shorter than the smallest window")
            return lad
        return build_ladder(N, self.k, self.g_max, self.g_min, self.n_min, self.slide_frac)

    def slide_for(self, g: int) -> int:
        return max(1, math.ceil(g * self.slide_frac - 1e-9))


# ---------------------------------------------------------------------------
# results


@dataclass(frozen=True)
class WindowResult:
    s_idx: int
    e_idx: int
    start_ts: int
    end_ts: int
    granularity: int
    mi_raw: float
    mi: float
    h_w: float
    h_norm: float
    nmi1: float
    nmi2: float
    mu: float
    sign: str
    confidence: float

    FIELDS = ("s_idx", "e_idx", "start_ts", "end_ts", "granularity", "mi_raw", "mi", "h_w",
              "h_norm", "nmi1", "nmi2", "mu", "sign", "confidence")

    def to_dict(self) -> dict:
        return {f: getattr(self, f) for f in self.FIELDS}


@dataclass(frozen=True)
class SearchResult:
    windows: list
    leftout: list
    layers_run: list

    def spans(self) -> list[tuple[int, int]]:
        return [(w.s_idx, w.e_idx) for w in self.windows]


def describe_window(pair, s: int, e: int, granularity: int, k: int) -> WindowResult:
    """Full statistics of ``[s, e)``: batch MI, entropies and direction."""
    u, v = pair.u[s:e], pair.v[s:e]
    mi = ksg_mi(u, v, k)
    st = window_stats(u, v, mi)
    src = pair.source
    a = associate(src.x[s:e], src.y[s:e])
    return WindowResult(int(s), int(e), int(src.timestamps[s]), int(src.timestamps[e - 1]),
                        int(granularity), st.mi_raw, st.mi, st.h_w, st.h_norm, st.nmi1, st.nmi2,
                        a.mu, a.sign, a.confidence)


def merge_spans(spans) -> list[tuple[int, int, int]]:
    """Coalesce overlapping or touching ``(s, e, g)`` spans.

    Input order does not matter; the merged granularity is the largest one.
    """
    items = sorted(((int(s), int(e), int(g)) for s, e, g in spans), key=lambda t: (t[0], -(t[1] - t[0])))
    out: list[list[int]] = []
    for s, e, g in items:
        if out and s <= out[-1][1]:
            out[-1][1] = max(out[-1][1], e)
            out[-1][2] = max(out[-1][2], g)
        else:
            out.append([s, e, g])
    return [tuple(t) for t in out]


def finalize(pair, picks, k: int) -> list[WindowResult]:
    return [describe_window(pair, s, e, g, k) for s, e, g in merge_spans(picks)]


def complement(segment, selected) -> list[tuple[int, int]]:
    a, b = segment
    out, cur = [], a
    for s, e in sorted(selected):
        if s > cur:
            out.append((cur, s))
        cur = max(cur, e)
    if cur < b:
        out.append((cur, b))
    return out


# ---------------------------------------------------------------------------
# scanning


def scan_trace(u, v, domain, g: int, slide: int, strategy: Strategy, k: int):
    """Run the scan over ``domain`` and record every visited window start.

    Returns ``(starts, passed)`` arrays in visiting order.
    """
    a, b = int(domain[0]), int(domain[1])
    starts, passed = [], []
    if b - a < g:
        return np.array(starts, np.int64), np.array(passed, bool)
    state = WindowState(u, v, k, domain=(a, b), window_hint=g)
    cur = a
    while cur + g <= b:
        mi = state.slide_to(cur, cur + g)
        ok = window_passes(strategy, u, v, cur, cur + g, mi)
        starts.append(cur)
        passed.append(ok)
        cur += g if ok else slide
    return np.array(starts, np.int64), np.array(passed, bool)


def replay(segment, g: int, slide: int, outcome: Callable[[int], bool]):
    """Walk the scan over `segment` using `outcome(start)` for each decision."""
    a, b = segment
    sel = []
    cur = a
    while cur + g <= b:
        if outcome(cur):
            sel.append((cur, cur + g))
            cur += g
        else:
            cur += slide
    return sel


@dataclass(frozen=True)
class LayerScan:
    selected: list
    leftout: list
    too_short: bool = False


def scan_layer(pair, segment, g: int, slide: int, strategy: Strategy, k: int) -> LayerScan:
    """One left-to-right pass of size-`g` windows over `segment`."""
    if slide < 1:
        raise ValueError("slide must be >= 1")
    a, b = int(segment[0]), int(segment[1])
    if b - a < g:
        return LayerScan([], [(a, b)] if b > a else [], True)
    starts, passed = scan_trace(pair.u, pair.v, (a, b), g, slide, strategy, k)
    sel = [(int(s), int(s) + g) for s, ok in zip(starts, passed) if ok]
    return LayerScan(sel, complement((a, b), sel))


def layered_search(pair, config: SearchConfig) -> SearchResult:
    """Sequential top-down search over the whole pair."""
    if isinstance(config.threshold, CoverageTarget):
        return tune_sigma_for_coverage(pair, config, config.threshold.target)[1]
    N = len(pair)
    ladder = config.resolve_ladder(N)
    segments = [(0, N)]
    picks, layers = [], []
    for g in ladder:
        if not any(b - a >= g for a, b in segments):
            continue
        layers.append(g)
        slide = config.slide_for(g)
        nxt = []
        for seg in segments:
            res = scan_layer(pair, seg, g, slide, config.threshold, config.k)
            picks.extend((s, e, g) for s, e in res.selected)
            nxt.extend(res.leftout)
        segments = sorted(nxt)
        if not segments:
            break
    return SearchResult(finalize(pair, picks, config.k), segments, layers)


def data_coverage(result: SearchResult, N: int) -> float:
    """Fraction of the `N` samples inside reported windows."""
    if N <= 0:
        raise ValueError("N must be positive")
    return sum(w.e_idx - w.s_idx for w in result.windows) / N


def tune_sigma_for_coverage(pair, config: SearchConfig, target: float, search=None,
                            tol: float = 0.05, max_iter: int = 20):
    """Bisect the threshold until the reported windows cover about `target` of the data.

    Absolute thresholds are searched over ``[0, psi(N)]``, which bounds the
    estimate of any window since both marginal counts are at least k; a
    two-step inner strategy has its MI gate searched over ``[0, 1]`` with
    the entropy gate fixed.

    Returns
    -------
    sigma : float
    result : SearchResult
    """
    if not 0 < target <= 1:
        raise ValueError("target must lie in (0, 1]")
    search = search or layered_search
    inner = config.threshold.inner if isinstance(config.threshold, CoverageTarget) else config.threshold
    if isinstance(inner, TwoStep):
        lo, hi = 0.0, 1.0

        def make(sig):
            return TwoStep(inner.sigma_h, sig, inner.norm)
    else:
        lo, hi = 0.0, digamma(len(pair))
        make = Absolute
    N = len(pair)
    best = None
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        res = search(pair, replace(config, threshold=make(mid)))
        cov = data_coverage(res, N)
        gap = abs(cov - target)
        if best is None or gap < best[0]:
            best = (gap, mid, res)
        if gap <= tol:
            break
        if cov > target:
            lo = mid
        else:
            hi = mid
    return best[1], best[2]


def rank_windows(windows, top: int | None = None):
    """Sort by MI descending, earlier start first on ties."""
    ranked = sorted(windows, key=lambda w: (-w.mi, w.s_idx))
    return ranked if top is None else ranked[:top]
