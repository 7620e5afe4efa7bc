"""Sliding-window KSG state with incremental insertion and removal.

Each member point carries its neighbour record (k-th neighbour, per-axis
distances, marginal counts). When a point enters or leaves, only records
whose influenced region or marginal bands contain it are touched: a full
re-search if the point enters/leaves the k-neighbour set, otherwise a
count adjustment. Regions are found with two stabbing trees over the
per-axis bands, so discovery does not depend on grid cell size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .ksg import MiEstimate, NeighborInfo, default_cells, mi_from_sums, psi_fixed_table

REFILL_FRACTION = 0.12


@dataclass(frozen=True)
class PointRecord:
    kth_idx: int
    d_x: float
    d_y: float
    n_x: int
    n_y: int
    valid: bool


@dataclass(frozen=True)
class InfluencedRegion:
    l: float
    r: float
    b: float
    t: float


@dataclass(frozen=True)
class InfluencedMarginalRegion:
    x_band: tuple[float, float]
    y_band: tuple[float, float]


class WindowState:
    """KSG bookkeeping for the members of a window ``[s, e)``.

    Parameters
    ----------
    u, v : arrays in [0, 1]
        Coordinates of the whole ranked pair.
    k : int
    domain : (lo, hi), optional
        Index range the window may move within. Memory is proportional to
        its length. Defaults to the whole pair.
    cells_per_axis : int, optional
        Box-grid resolution; defaults to ``ceil(sqrt(window length))`` at
        the first fill.
    """

    def __init__(self, u, v, k: int, domain=None, cells_per_axis: int | None = None,
                 window_hint: int | None = None):
        n = len(u)
        lo, hi = (0, n) if domain is None else (int(domain[0]), int(domain[1]))
        if not 0 <= lo < hi <= n:
            raise ValueError("invalid domain")
        if k < 1:
            raise ValueError("k must be >= 1")
        self.k = int(k)
        self.lo, self.hi = lo, hi
        c = cells_per_axis or default_cells(window_hint or (hi - lo))
        uu = np.ascontiguousarray(u[lo:hi], dtype=np.float64)
        vv = np.ascontiguousarray(v[lo:hi], dtype=np.float64)
        self._S = K.new_window_arrays(uu, vv, self.k, int(c), psi_fixed_table(hi - lo))
        self.s = self.e = lo
        self.last_touched = 0
        # slides moving more than this fraction of the window refill instead
        self.refill_fraction = REFILL_FRACTION

    # ------------------------------------------------------------------ basic
    @property
    def cells_per_axis(self) -> int:
        return int(self._S.meta[K.M_C])

    @property
    def range(self) -> tuple[int, int]:
        return self.s, self.e

    def __len__(self) -> int:
        return int(self._S.meta[K.M_NMEM])

    def _loc(self, i: int) -> int:
        if not self.lo <= i < self.hi:
            raise IndexError(f"index {i} outside domain [{self.lo}, {self.hi})")
        return i - self.lo

    def contains(self, i: int) -> bool:
        return bool(self._S.member[self._loc(i)])

    def members(self) -> np.ndarray:
        return np.flatnonzero(self._S.member) + self.lo

    # ---------------------------------------------------------------- updates
    def fill(self, s: int, e: int) -> None:
        """Load ``[s, e)`` from scratch into an empty state."""
        if len(self):
            raise ValueError("fill requires an empty state")
        self._check_range(s, e)
        K.win_fill(self._S, s - self.lo, e - self.lo)
        self.s, self.e = s, e

    def clear(self) -> None:
        self._drop_all()
        self.s = self.e = self.lo

    def _drop_all(self):
        a, b = self.s - self.lo, self.e - self.lo
        if int(self._S.member[a:b].sum()) == len(self):  # all members lie in [s, e)
            K.win_clear(self._S, a, b)
        else:
            K.win_clear(self._S, 0, self.hi - self.lo)

    def add_point(self, i: int) -> None:
        li = self._loc(i)
        if self._S.member[li]:
            raise ValueError(f"point {i} already in window")
        self.last_touched = int(K.win_add(self._S, li))

    def remove_point(self, i: int) -> None:
        li = self._loc(i)
        if not self._S.member[li]:
            raise ValueError(f"point {i} not in window")
        self.last_touched = int(K.win_remove(self._S, li))

    def settle(self) -> None:
        """Compute any records left pending while the window was too small."""
        K.win_settle(self._S, 0, self.hi - self.lo)

    def slide_to(self, s: int, e: int) -> MiEstimate:
        """Move to ``[s, e)`` (old points removed first) and return its MI."""
        self._check_range(s, e)
        if e - s < self.k + 2:
            raise ValueError("window too small")
        if (s, e) != (self.s, self.e):
            moved = abs(s - self.s) + abs(e - self.e)
            if not len(self) or e <= self.s or s >= self.e or moved > self.refill_fraction * (e - s):
                # large moves are cheaper from scratch; the sums come out identical
                self._drop_all()
                K.win_fill(self._S, s - self.lo, e - self.lo)
            else:
                self.last_touched = int(K.win_slide(self._S, self.s - self.lo, self.e - self.lo,
                                                    s - self.lo, e - self.lo))
            self.s, self.e = s, e
        return self.mi()

    def _check_range(self, s, e):
        if not self.lo <= s < e <= self.hi:
            raise ValueError(f"range [{s}, {e}) outside domain [{self.lo}, {self.hi})")

    # ---------------------------------------------------------------- queries
    def fixed_sum(self) -> int:
        return int(self._S.meta[K.M_SX]) + int(self._S.meta[K.M_SY])

    def is_settled(self) -> bool:
        S = self._S
        return bool(np.all(S.valid[S.member.astype(bool)]))

    def mi(self) -> MiEstimate:
        n = len(self)
        if n < self.k + 2:
            raise ValueError("window too small")
        if not self.is_settled():
            self.settle()
        return mi_from_sums(self.fixed_sum(), n, self.k)

    def record(self, i: int) -> PointRecord:
        li = self._loc(i)
        S = self._S
        ok = bool(S.valid[li])
        kth = int(S.kth[li]) + self.lo if ok else -1
        return PointRecord(kth, float(S.dx[li]), float(S.dy[li]), int(S.nx[li]), int(S.ny[li]), ok)

    def records(self):
        """Arrays ``(index, kth, d_x, d_y, n_x, n_y)`` for current members in index order."""
        S = self._S
        loc = np.flatnonzero(S.member)
        if not np.all(S.valid[loc]):
            raise ValueError("records pending; call settle()")
        return (loc + self.lo, S.kth[loc] + self.lo, S.dx[loc].copy(), S.dy[loc].copy(),
                S.nx[loc].copy(), S.ny[loc].copy())

    def neighbor_info(self, i: int) -> NeighborInfo:
        r = self.record(i)
        if not r.valid:
            raise ValueError(f"record of {i} is not valid")
        return NeighborInfo(r.kth_idx, r.d_x, r.d_y)


def init_window(pair, rng: tuple[int, int], k: int, cells_per_axis: int | None = None,
                domain=None) -> WindowState:
    """Build a state holding ``[s, e)`` with every record computed from scratch."""
    s, e = int(rng[0]), int(rng[1])
    if e - s < k + 2:
        raise ValueError(f"window [{s}, {e}) too small for k={k}")
    st = WindowState(pair.u, pair.v, k, domain=domain, cells_per_axis=cells_per_axis,
                     window_hint=e - s)
    st.fill(s, e)
    return st


def add_point(state: WindowState, i: int) -> WindowState:
    state.add_point(i)
    return state


def remove_point(state: WindowState, i: int) -> WindowState:
    state.remove_point(i)
    return state


def slide_to(state: WindowState, new_range: tuple[int, int]):
    mi = state.slide_to(int(new_range[0]), int(new_range[1]))
    return state, mi


def influenced_region(state: WindowState, i: int) -> InfluencedRegion:
    """Rectangle ``(u_i +- d_x) x (v_i +- d_y)`` clipped to the unit square."""
    info = state.neighbor_info(i)
    S = state._S
    li = i - state.lo
    u, v = S.u[li], S.v[li]
    return InfluencedRegion(max(0.0, u - info.d_x), min(1.0, u + info.d_x),
                            max(0.0, v - info.d_y), min(1.0, v + info.d_y))


def influenced_marginal_region(state: WindowState, i: int) -> InfluencedMarginalRegion:
    info = state.neighbor_info(i)
    S = state._S
    li = i - state.lo
    u, v = S.u[li], S.v[li]
    return InfluencedMarginalRegion((u - info.d_x, u + info.d_x), (v - info.d_y, v + info.d_y))
