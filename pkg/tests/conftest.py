"""Brute-force reference implementations shared by the tests.

Everything here works from first principles on the full cube so the
library's transform and closed-form paths have an independent check.
"""

import itertools

import numpy as np
import pytest


def cube(n):
    """All 2**n points of {0,1}^n, first coordinate most significant."""
    idx = np.arange(1 << n)[:, None]
    return ((idx >> np.arange(n - 1, -1, -1)) & 1).astype(np.uint8)


def cube_weights(X, biases):
    b = np.asarray(biases, dtype=float)
    return np.prod(np.where(X == 1, b, 1.0 - b), axis=1)


def addressing_label(x, sets):
    """Label of an addressing target computed from scratch with Python loops."""
    sets = np.asarray(sets, dtype=bool)
    k, n_addr = sets.shape
    address = 0
    for i in range(k):
        z = 0
        for j in range(n_addr):
            if sets[i, j]:
                z ^= int(x[j])
        address = (address << 1) | z
    return int(x[n_addr + address])


def brute_split(labels, X, w, i):
    """(mean, Pr[x_i = 1], mean | x_i = 0, mean | x_i = 1) by direct weighting."""
    total = w.sum()
    mean = float(w @ labels / total)
    on = X[:, i] == 1
    p = float(w[on].sum() / total)
    mu1 = float(w[on] @ labels[on] / w[on].sum())
    mu0 = float(w[~on] @ labels[~on] / w[~on].sum())
    return mean, p, mu0, mu1


def all_subsets(k):
    return [s for r in range(k + 1) for s in itertools.combinations(range(k), r)]


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
