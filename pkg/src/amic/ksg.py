"""KSG mutual information with a box-assisted neighbour search, plus the
entropy-based normalisations used for window thresholding.

Conventions shared by every code path in the package:

* distance is the max-norm on the unit square;
* neighbour ties are broken by (distance, sample index) ascending;
* ``d_x``/``d_y`` are the per-axis maxima over the k nearest neighbours;
* marginal counts are inclusive (``<=``) and exclude the point itself;
* the sum of digamma terms is accumulated in fixed point so batch and
  incremental evaluations of the same window agree to the last bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels as K

EULER_GAMMA = 0.57721566490153286061
_HARMONIC_CUTOFF = 64

# psi(n) for n <= cutoff from the harmonic recurrence, summed left to right
_PSI_SMALL = np.empty(_HARMONIC_CUTOFF + 1)
_PSI_SMALL[0] = np.nan
_acc = -EULER_GAMMA
for _n in range(1, _HARMONIC_CUTOFF + 1):
    _PSI_SMALL[_n] = _acc
    _acc += 1.0 / _n
del _acc, _n


def digamma(n: int) -> float:
    """Digamma at a positive integer.

    Exact harmonic sum up to 64, asymptotic series above it. The absolute
    error stays below 1e-12 everywhere.
    """
    n = int(n)
    if n < 1:
        raise ValueError("digamma is defined here for n >= 1 only")
    if n <= _HARMONIC_CUTOFF:
        return float(_PSI_SMALL[n])
    inv = 1.0 / n
    inv2 = inv * inv
    return math.log(n) - 0.5 * inv - inv2 / 12.0 + inv2 * inv2 / 120.0


def digamma_table(n_max: int) -> np.ndarray:
    """``psi(0..n_max)``; entry 0 is NaN."""
    out = np.empty(n_max + 1)
    m = min(n_max, _HARMONIC_CUTOFF)
    out[: m + 1] = _PSI_SMALL[: m + 1]
    if n_max > _HARMONIC_CUTOFF:
        n = np.arange(_HARMONIC_CUTOFF + 1, n_max + 1, dtype=np.float64)
        inv2 = 1.0 / (n * n)
        out[_HARMONIC_CUTOFF + 1:] = np.log(n) - 0.5 / n - inv2 / 12.0 + inv2 * inv2 / 120.0
    return out


_FIXED_CACHE = np.zeros(1, np.int64)


def psi_fixed_table(n_max: int) -> np.ndarray:
    """Digamma values scaled to int64 fixed point, cached and grown on demand."""
    global _FIXED_CACHE
    if len(_FIXED_CACHE) <= n_max:
        size = max(n_max + 1, 2 * len(_FIXED_CACHE))
        t = digamma_table(size - 1)
        t[0] = t[1]
        _FIXED_CACHE = np.round(t * K.FIXED_SCALE).astype(np.int64)
    return _FIXED_CACHE


# ---------------------------------------------------------------------------
# small value types


class Point(NamedTuple):
    idx: int
    u: float
    v: float


class NeighborInfo(NamedTuple):
    kth_idx: int
    d_x: float
    d_y: float


class MarginalCounts(NamedTuple):
    n_x: int
    n_y: int


@dataclass(frozen=True)
class MiEstimate:
    raw: float
    clamped: float
    n: int
    k: int


def max_norm(p, q) -> float:
    """Chebyshev distance between two points given as ``(u, v)`` or :class:`Point`."""
    pu, pv = (p.u, p.v) if isinstance(p, Point) else p
    qu, qv = (q.u, q.v) if isinstance(q, Point) else q
    return max(abs(pu - qu), abs(pv - qv))


def default_cells(n: int) -> int:
    return max(1, math.ceil(math.sqrt(n)))


def _as_unit(a) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    if a.size and (a.min() < 0.0 or a.max() > 1.0 or not np.all(np.isfinite(a))):
        raise ValueError("coordinates must lie in [0, 1]")
    return a


class BoxGrid:
    """Uniform ``c x c`` spatial hash over the unit square.

    Points are referred to by their index into the coordinate arrays given
    at construction; only inserted points take part in queries.
    """

    def __init__(self, u, v, cells_per_axis: int | None = None):
        self.u = _as_unit(u)
        self.v = _as_unit(v)
        n = len(self.u)
        c = int(cells_per_axis or default_cells(n))
        if c < 1:
            raise ValueError("cells_per_axis must be >= 1")
        self.c = c
        self.cu = np.minimum((self.u * c).astype(np.int64), c - 1)
        self.cv = np.minimum((self.v * c).astype(np.int64), c - 1)
        self.head = np.full(c * c, -1, np.int64)
        self.nxt = np.full(n, -1, np.int64)
        self.prv = np.full(n, -1, np.int64)
        self.present = np.zeros(n, dtype=bool)

    def __len__(self) -> int:
        return int(self.present.sum())

    def cell(self, i: int) -> tuple[int, int]:
        return int(self.cu[i]), int(self.cv[i])

    def insert(self, i: int) -> None:
        if self.present[i]:
            raise ValueError(f"point {i} already in grid")
        K.ll_insert(self.head, self.nxt, self.prv, self.cu, self.cv, self.c, i)
        self.present[i] = True

    def remove(self, i: int) -> None:
        if not self.present[i]:
            raise ValueError(f"point {i} not in grid")
        K.ll_remove(self.head, self.nxt, self.prv, self.cu, self.cv, self.c, i)
        self.present[i] = False

    def cell_members(self, cx: int, cy: int) -> list[int]:
        out = []
        j = self.head[cx * self.c + cy]
        while j != -1:
            out.append(int(j))
            j = self.nxt[j]
        return sorted(out)

    @classmethod
    def build(cls, u, v, cells_per_axis=None) -> "BoxGrid":
        g = cls(u, v, cells_per_axis)
        for i in range(len(g.u)):
            g.insert(i)
        return g


def _knn_from_grid(grid: BoxGrid, i: int, k: int):
    if not grid.present[i]:
        raise ValueError(f"point {i} not in grid")
    if len(grid) < k + 1:
        raise ValueError("window too small for the requested k")
    kd = np.empty(k)
    ki = np.empty(k, np.int64)
    K.ll_knn(grid.u, grid.v, i, k, grid.c, grid.cu, grid.cv, grid.head, grid.nxt, kd, ki)
    return kd, ki


def knn_query(grid: BoxGrid, i: int, k: int) -> NeighborInfo:
    """k-th nearest neighbour of point ``i`` among the grid's members."""
    _, ki = _knn_from_grid(grid, i, k)
    dx = float(np.max(np.abs(grid.u[ki] - grid.u[i])))
    dy = float(np.max(np.abs(grid.v[ki] - grid.v[i])))
    return NeighborInfo(int(ki[-1]), dx, dy)


def k_nearest(grid: BoxGrid, i: int, k: int) -> np.ndarray:
    """Indices of the k nearest members of ``i``, closest first."""
    return _knn_from_grid(grid, i, k)[1].copy()


def marginal_counts(u, v, i: int, info: NeighborInfo, members=None) -> MarginalCounts:
    """Inclusive per-axis counts around point ``i``, excluding ``i`` itself."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    mask = np.ones(len(u), dtype=bool) if members is None else np.asarray(members, dtype=bool).copy()
    mask[i] = False
    nx = int(np.count_nonzero(mask & (np.abs(u - u[i]) <= info.d_x)))
    ny = int(np.count_nonzero(mask & (np.abs(v - v[i]) <= info.d_y)))
    return MarginalCounts(nx, ny)


# ---------------------------------------------------------------------------
# estimator


def mi_from_sums(sum_fixed: int, n: int, k: int) -> MiEstimate:
    """KSG estimate from the fixed-point sum of ``psi(n_x) + psi(n_y)``."""
    avg = float(sum_fixed) / (K.FIXED_SCALE * n)
    raw = digamma(k) - 1.0 / k - avg + digamma(n)
    return MiEstimate(raw, max(0.0, raw), n, k)


def ksg_records(u, v, k: int, cells_per_axis: int | None = None):
    """Per-point ``(kth, d_x, d_y, n_x, n_y)`` arrays for a static point set."""
    u = _as_unit(u)
    v = _as_unit(v)
    n = len(u)
    if n < k + 1:
        raise ValueError("too few points for the requested k")
    c = int(cells_per_axis or default_cells(n))
    return K.batch_records(u, v, int(k), c)


def ksg_mi(u, v, k: int = 6, cells_per_axis: int | None = None) -> MiEstimate:
    """Batch KSG mutual information (nats) of points ``(u_i, v_i)`` in [0,1]^2."""
    n = len(u)
    if k < 1:
        raise ValueError("k must be >= 1")
    if n < k + 2:
        raise ValueError(f"need at least k + 2 = {k + 2} points, got {n}")
    _, _, _, nx, ny = ksg_records(u, v, k, cells_per_axis)
    table = psi_fixed_table(n)
    s = int(K.fixed_sum(table, nx)) + int(K.fixed_sum(table, ny))
    return mi_from_sums(s, n, k)


# ---------------------------------------------------------------------------
# entropy and normalisation


def plugin_entropy(values, bins: int) -> float:
    """Histogram entropy (nats) with equal-width bins on [0, 1]."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    x = np.asarray(values, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty array")
    idx = np.minimum((x * bins).astype(np.int64), bins - 1)
    counts = np.bincount(idx, minlength=bins)
    p = counts[counts > 0] / x.size
    return float(-(p * np.log(p)).sum())


def entropy_bins(n: int) -> int:
    return max(1, math.ceil(math.sqrt(n)))


def _mi_value(mi) -> float:
    return mi.clamped if isinstance(mi, MiEstimate) else max(0.0, float(mi))


def window_entropy(mi, hx: float, hy: float, n: int) -> float:
    """Joint entropy ``hx + hy - I`` capped to ``[0, ln n]``."""
    if n < 2:
        raise ValueError("n must be >= 2")
    return float(min(max(hx + hy - _mi_value(mi), 0.0), math.log(n)))


def normalized_entropy(h_w: float, n: int) -> float:
    if n < 2:
        raise ValueError("n must be >= 2")
    return float(min(max(h_w / math.log(n), 0.0), 1.0))


def nmi_max(mi, n: int) -> float:
    """MI relative to the largest possible entropy ``ln n``."""
    if n < 2:
        raise ValueError("n must be >= 2")
    return float(min(max(_mi_value(mi) / math.log(n), 0.0), 1.0))


def nmi_entropy(mi, h_w: float) -> float:
    """MI relative to the window's own joint entropy; 0 when that entropy is 0."""
    if h_w < 0:
        raise ValueError("h_w must be >= 0")
    if h_w == 0:
        return 0.0
    return float(min(max(_mi_value(mi) / h_w, 0.0), 1.0))


def tune_k(u, v, k_range: tuple[int, int] = (1, 20), rel_spread: float = 0.1):
    """Pick the smallest stable k.

    For each k the whole-pair MI is computed. The chosen k is the smallest
    one for which ``max - min`` of the MI over ``k..k_max`` is within
    `rel_spread` of the mean MI over the whole range.

    Returns
    -------
    k : int
    profile : dict[int, float]
        Raw MI per k.
    """
    k_lo, k_hi = int(k_range[0]), int(k_range[1])
    if not 1 <= k_lo <= k_hi <= 20:
        raise ValueError("k_range must lie within [1, 20]")
    if len(u) < k_hi + 2:
        raise ValueError("series too short for the largest k")
    ks = list(range(k_lo, k_hi + 1))
    profile = {k: ksg_mi(u, v, k).raw for k in ks}
    vals = np.array([profile[k] for k in ks])
    bar = rel_spread * abs(vals.mean())
    for j, k in enumerate(ks):
        tail = vals[j:]
        if tail.max() - tail.min() <= bar:
            return k, profile
    return k_hi, profile
