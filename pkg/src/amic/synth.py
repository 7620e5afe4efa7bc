"""Synthetic dependent pairs with known structure, and two baseline metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .ingest import SeriesPair

RELATIONS = (
    "independent", "independent_outliers", "linear", "linear_outliers", "exponential",
    "quadratic", "diamond", "circle", "sine", "cross",
)
OUTLIER_FRACTION = 0.10
DEFAULT_NOISE = 0.02
EXP_RATE = 5.0
# quarter-period phase: the curve is symmetric about x = 0.5, so it carries
# no linear trend over the unit interval
SINE_PHASE = 0.5 * np.pi


@dataclass(frozen=True)
class GroundTruthSpan:
    kind: str
    s_idx: int
    e_idx: int


def _relation_xy(kind: str, n: int, noise: float, rng: np.random.Generator):
    if kind not in RELATIONS:
        raise ValueError(f"unknown relation: {kind}")
    x = rng.random(n)
    eps = rng.normal(0.0, noise, n) if noise > 0 else np.zeros(n)
    n_out = int(round(OUTLIER_FRACTION * n))
    if kind in ("independent", "independent_outliers"):
        y = rng.random(n)
        if kind == "independent_outliers":
            pick = rng.choice(n, n_out, replace=False)
            y[pick] = x[pick] + eps[pick]
    elif kind in ("linear", "linear_outliers"):
        y = x + eps
        if kind == "linear_outliers":
            pick = rng.choice(n, n_out, replace=False)
            y[pick] = rng.random(n_out)
    elif kind == "exponential":
        y = np.expm1(EXP_RATE * x) / math.expm1(EXP_RATE) + eps
    elif kind == "quadratic":
        y = 4.0 * (x - 0.5) ** 2 + eps
    elif kind == "sine":
        y = 0.5 + 0.4 * np.sin(4.0 * np.pi * x + SINE_PHASE) + eps
    elif kind == "cross":
        flip = rng.random(n) < 0.5
        y = np.where(flip, 1.0 - x, x) + eps
    elif kind == "circle":
        theta = rng.uniform(0.0, 2.0 * np.pi, n)
        ex = rng.normal(0.0, noise, n) if noise > 0 else np.zeros(n)
        x = 0.5 + 0.4 * np.cos(theta) + ex
        y = 0.5 + 0.4 * np.sin(theta) + eps
    else:  # diamond: walk the perimeter of |x-.5|+|y-.5| = .4
        s = rng.uniform(0.0, 4.0, n)
        side = np.minimum(s.astype(np.int64), 3)
        f = s - side
        corners = np.array([[0.9, 0.5], [0.5, 0.9], [0.1, 0.5], [0.5, 0.1], [0.9, 0.5]])
        p0 = corners[side]
        p1 = corners[side + 1]
        ex = rng.normal(0.0, noise, n) if noise > 0 else np.zeros(n)
        x = p0[:, 0] + f * (p1[:, 0] - p0[:, 0]) + ex
        y = p0[:, 1] + f * (p1[:, 1] - p0[:, 1]) + eps
    return x, y


def gen_relation(kind: str, n: int, noise: float = DEFAULT_NOISE, seed: int = 0,
                 t0: int = 0, step: int = 1) -> SeriesPair:
    """Sample ``n`` points of one relation kind.

    Timestamps are ``t0, t0 + step, ...``.
    """
    if n < 10:
        raise ValueError("n must be >= 10")
    if noise < 0:
        raise ValueError("noise must be >= 0")
    x, y = _relation_xy(kind, n, noise, np.random.default_rng(seed))
    ts = t0 + step * np.arange(n, dtype=np.int64)
    return SeriesPair(ts, x, y)


def compose(relations, n_each: int, gap: int, seed: int = 0, noise: float = DEFAULT_NOISE,
            t0: int = 0, step: int = 1):
    """Concatenate relations separated by independent-noise gaps.

    Returns the pair and the index span of every embedded relation.
    """
    relations = list(relations)
    if not relations:
        raise ValueError("no relations given")
    children = np.random.SeedSequence(seed).spawn(2 * len(relations))
    xs, ys, spans = [], [], []
    pos = 0
    for j, kind in enumerate(relations):
        if j and gap > 0:
            gx, gy = _relation_xy("independent", gap, noise, np.random.default_rng(children[2 * j - 1]))
            xs.append(gx)
            ys.append(gy)
            pos += gap
        x, y = _relation_xy(kind, n_each, noise, np.random.default_rng(children[2 * j]))
        xs.append(x)
        ys.append(y)
        spans.append(GroundTruthSpan(kind, pos, pos + n_each))
        pos += n_each
    ts = t0 + step * np.arange(pos, dtype=np.int64)
    return SeriesPair(ts, np.concatenate(xs), np.concatenate(ys)), spans


def _xy(pair_or_x, y=None):
    if y is None:
        return np.asarray(pair_or_x.x, dtype=np.float64), np.asarray(pair_or_x.y, dtype=np.float64)
    return np.asarray(pair_or_x, dtype=np.float64), np.asarray(y, dtype=np.float64)


def pearson(pair_or_x, y=None) -> float:
    x, y = _xy(pair_or_x, y)
    if len(x) < 2:
        raise ValueError("need at least 2 samples")
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = float(xc @ xc)
    syy = float(yc @ yc)
    if sxx == 0 or syy == 0:
        raise ValueError("zero variance")
    return float(np.clip((xc @ yc) / math.sqrt(sxx * syy), -1.0, 1.0))


def dcor(pair_or_x, y=None) -> float:
    """Distance correlation in [0, 1] (0 for a constant series)."""
    x, y = _xy(pair_or_x, y)
    if len(x) < 2:
        raise ValueError("need at least 2 samples")
    vxy, vxx, vyy = K.dcor_sums(np.ascontiguousarray(x), np.ascontiguousarray(y))
    if vxx <= 0 or vyy <= 0:
        return 0.0
    r2 = max(vxy, 0.0) / math.sqrt(vxx * vyy)
    return float(min(math.sqrt(r2), 1.0))
