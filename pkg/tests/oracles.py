"""Independent reference implementations used as test oracles."""

import math

import numpy as np


def brute_records(u, v, k, members=None):
    """Exhaustive O(n^2) kNN + marginal counts with the (distance, index) tie rule."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    idx = np.arange(len(u)) if members is None else np.asarray(members)
    out = {}
    for i in idx:
        others = idx[idx != i]
        d = np.maximum(np.abs(u[others] - u[i]), np.abs(v[others] - v[i]))
        order = np.lexsort((others, d))
        nn = others[order[:k]]
        dx = np.max(np.abs(u[nn] - u[i]))
        dy = np.max(np.abs(v[nn] - v[i]))
        nx = int(np.count_nonzero(np.abs(u[others] - u[i]) <= dx))
        ny = int(np.count_nonzero(np.abs(v[others] - v[i]) <= dy))
        out[int(i)] = (int(nn[-1]), float(dx), float(dy), nx, ny)
    return out


def harmonic_digamma(n):
    return -0.57721566490153286061 + math.fsum(1.0 / j for j in range(1, n))


def brute_mi(u, v, k, members=None):
    rec = brute_records(u, v, k, members)
    n = len(rec)
    s = math.fsum(harmonic_digamma(max(r[3], 1)) + harmonic_digamma(max(r[4], 1)) for r in rec.values())
    return harmonic_digamma(k) - 1.0 / k - s / n + harmonic_digamma(n)
