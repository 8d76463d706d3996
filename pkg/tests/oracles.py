"""Independent slow reference implementations used by the tests."""

import numpy as np


def brute_force_clusters(x, n, offset):
    """Sign runs of p - MA enumerated with plain loops.

    Returns (start, end, side) triples in parent indices.
    """
    x = [float(v) for v in x]
    d = []
    for i in range(len(x) - n):
        window = x[i : i + n]
        d.append(x[i + offset] - sum(window) / n)
    signs = []
    last = 0
    for v in d:
        s = 1 if v > 0 else (-1 if v < 0 else 0)
        if s != 0:
            last = s
        signs.append(last)
    crossings = [i for i in range(len(signs) - 1) if signs[i] != 0 and signs[i] != signs[i + 1]]
    out = []
    for a, b in zip(crossings, crossings[1:]):
        side = "above" if signs[a + 1] > 0 else "below"
        out.append((a + offset, b + offset, side))
    return out


def exact_power_law(alpha, taus, cutoff=None):
    taus = np.asarray(taus, dtype=float)
    w = taus ** (-alpha)
    if cutoff is not None:
        w = w * np.exp(-taus / cutoff)
    return w / w.sum()
