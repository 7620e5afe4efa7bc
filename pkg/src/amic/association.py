"""Direction of a window's dependence from co-movement of consecutive samples."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AssociationStats:
    pp: int
    np: int
    mu: float
    sign: str  # "positive" | "negative" | "neither"
    confidence: float
    # 1 - |mu|: how close the window is to having no net direction
    neutral_confidence: float


def count_periods(x, y) -> tuple[int, int]:
    """Count co-moving (pp) and counter-moving (np) consecutive periods.

    A flat step in either series counts toward neither.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) != len(y):
        raise ValueError("x and y differ in length")
    if len(x) < 2:
        raise ValueError("need at least 2 samples")
    sx = np.sign(np.diff(x))
    sy = np.sign(np.diff(y))
    prod = sx * sy
    return int(np.count_nonzero(prod > 0)), int(np.count_nonzero(prod < 0))


def association_degree(pp: int, np_: int, n: int) -> float:
    if n < 2:
        raise ValueError("n must be >= 2")
    return (pp - np_) / (n - 1)


def classify(pp: int, np_: int, mu: float) -> tuple[str, float]:
    if mu > 0:
        assert pp >= 1
        return "positive", abs(pp - np_) / pp
    if mu < 0:
        assert np_ >= 1
        return "negative", abs(pp - np_) / np_
    return "neither", 1.0 - abs(mu)


def associate(x, y) -> AssociationStats:
    pp, np_ = count_periods(x, y)
    mu = association_degree(pp, np_, len(x))
    sign, conf = classify(pp, np_, mu)
    return AssociationStats(pp, np_, mu, sign, conf, 1.0 - abs(mu))
