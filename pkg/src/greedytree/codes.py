"""Set families with symmetric-difference distance, and a randomized GV-style search.

A family ``S = (S_1, ..., S_k)`` of subsets of ``[n]`` has distance ``d`` when
every nonempty subcollection has a symmetric difference of size at least
``d``. Reading the indicator vectors as generator rows of a binary linear
code, the distance is the minimum weight of a nonzero codeword.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._bits import subset_xor_table
from .exceptions import InvalidSpecError, SearchFailedError

MAX_K = 20


@dataclass(frozen=True)
class SetFamily:
    """``k`` subsets of ``{0, ..., ground - 1}`` (0-based elements)."""

    sets: tuple
    ground: int

    def __post_init__(self):
        sets = tuple(frozenset(int(j) for j in s) for s in self.sets)
        for s in sets:
            if any(not 0 <= j < self.ground for j in s):
                raise InvalidSpecError(f"set elements must lie in [0, {self.ground})")
        object.__setattr__(self, "sets", sets)

    @property
    def k(self):
        return len(self.sets)

    @classmethod
    def from_indicator(cls, rows):
        rows = np.asarray(rows, dtype=bool)
        return cls(tuple(np.flatnonzero(r).tolist() for r in rows), rows.shape[1])

    def indicator(self):
        out = np.zeros((self.k, self.ground), dtype=bool)
        for i, s in enumerate(self.sets):
            out[i, list(s)] = True
        return out

    def to_dict(self):
        return {"k": self.k, "ground": self.ground, "sets": [sorted(s) for s in self.sets]}


def _as_indicator(S):
    if isinstance(S, SetFamily):
        return S.indicator()
    return np.asarray(S, dtype=bool)


def distance(S) -> int:
    """Minimum symmetric-difference size over nonempty subcollections (subset enumeration)."""
    rows = _as_indicator(S)
    k = rows.shape[0]
    if k > MAX_K:
        raise InvalidSpecError(f"exhaustive distance needs k <= {MAX_K}, got {k}")
    if k == 0:
        raise InvalidSpecError("empty family")
    weights = subset_xor_table(rows).sum(axis=1)
    return int(weights[1:].min())


def min_weight_gray(S) -> int:
    """Minimum nonzero codeword weight by a Gray-code walk over the code.

    Rows are packed into Python integers; consecutive Gray codes differ in
    one generator, so each step is a single XOR and popcount.
    """
    rows = _as_indicator(S)
    k = rows.shape[0]
    if k > MAX_K:
        raise InvalidSpecError(f"exhaustive distance needs k <= {MAX_K}, got {k}")
    packed = [int("".join("1" if v else "0" for v in r) or "0", 2) for r in rows]
    word = 0
    best = None
    for step in range(1, 1 << k):
        flip = (step & -step).bit_length() - 1
        word ^= packed[flip]
        w = bin(word).count("1")
        if best is None or w < best:
            best = w
    return int(best)


def _codeword_weights(G):
    return subset_xor_table(G).sum(axis=1)[1:]


def _greedy_extend(k, n, d, rng, max_candidates):
    """Add random rows one at a time, keeping the span's minimum weight >= d."""
    rows = []
    span = np.zeros((1, n), dtype=bool)
    used = 0
    while len(rows) < k and used < max_candidates:
        cand = rng.integers(0, 2, size=n).astype(bool)
        used += 1
        if (span ^ cand).sum(axis=1).min() >= d:
            rows.append(cand)
            span = np.concatenate([span, span ^ cand], axis=0)
    return (np.array(rows) if len(rows) == k else None), used


def gv_search(k, c, d, seed=0, budget=100_000, auto_scale=False,
              random_trials=200, greedy_candidates=2000):
    """Randomized search for ``k`` subsets of ``[c*k]`` with distance at least ``d``.

    Each scale first tries ``random_trials`` uniformly random generator
    matrices, then a greedy basis extension with up to ``greedy_candidates``
    candidate rows. With ``auto_scale`` the ground-set multiplier ``c`` is
    doubled after a failed scale. Every tried matrix or candidate row counts
    against ``budget``. Results are verified by :func:`distance` before they
    are returned.

    Raises
    ------
    SearchFailedError
        When the budget is exhausted; this does not certify nonexistence.
    """
    if k < 1 or c < 1 or d < 0:
        raise InvalidSpecError("need k >= 1, c >= 1, d >= 0")
    if k > MAX_K:
        raise InvalidSpecError(f"k must be at most {MAX_K}")
    if d > c * k and not auto_scale:
        raise InvalidSpecError(f"distance {d} exceeds the ground set size {c * k}")
    rng = np.random.default_rng(seed)
    trials = 0
    while trials < budget:
        n = c * k
        if d <= n:
            if d <= 1:
                G = np.eye(k, n, dtype=bool)
                if distance(G) >= d:
                    return SetFamily.from_indicator(G)
            for _ in range(min(random_trials, budget - trials)):
                G = rng.integers(0, 2, size=(k, n)).astype(bool)
                trials += 1
                if _codeword_weights(G).min() >= d:
                    return _verified(G, d)
            if trials < budget:
                G, used = _greedy_extend(k, n, d, rng, min(greedy_candidates, budget - trials))
                trials += used
                if G is not None:
                    return _verified(G, d)
        if not auto_scale:
            if trials >= budget or d > n:
                break
            continue
        c *= 2
    raise SearchFailedError(f"no family with distance {d} found in {trials} trials", trials)


def _verified(G, d):
    fam = SetFamily.from_indicator(G)
    if distance(fam) < d:  # pragma: no cover - guarded by construction
        raise AssertionError("search returned an unverified family")
    return fam


def separation_distance(k, delta):
    """Target distance ``ceil(ln5 / delta * k)``."""
    return math.ceil(math.log(5.0) / delta * k - 1e-9)
