"""Impurity criteria and exact purity-gain computation.

An impurity function ``G`` maps a label mean in [0, 1] to [0, 1], is concave,
symmetric around 1/2, and satisfies ``G(0) = G(1) = 0`` and ``G(1/2) = 1``.
Its curvature constants ``alpha <= -G'' <= L`` control how closely the purity
gain of a split tracks the squared difference of the two child means.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .distributions import ProductDistribution, condition
from .exceptions import InfiniteSmoothnessError, InvalidSpecError

GAIN_TOL = 1e-12


@dataclass(frozen=True)
class ImpurityFunction:
    """A named impurity criterion with curvature bounds.

    Parameters
    ----------
    name : str
        Identifier used in CLI flags and configs.
    func : callable
        Vectorized map from [0, 1] to [0, 1].
    alpha : float
        Lower bound on ``-G''`` over [0, 1].
    L : float
        Upper bound on ``-G''`` over [0, 1]; ``math.inf`` when unbounded.
    """

    name: str
    func: Callable[[np.ndarray], np.ndarray]
    alpha: float
    L: float
    diff: Callable | None = None

    def __call__(self, p):
        if isinstance(p, float):
            return float(self.func(min(max(p, 0.0), 1.0)))
        return self.func(np.clip(p, 0.0, 1.0))

    def difference(self, a, b):
        """``G(a) - G(b)``; uses a cancellation-free closed form when one is known."""
        if self.diff is not None:
            return self.diff(np.clip(a, 0.0, 1.0), np.clip(b, 0.0, 1.0))
        return self(a) - self(b)

    @property
    def finite(self) -> bool:
        return math.isfinite(self.L)


def _gini(p):
    p = np.asarray(p, dtype=float)
    return 4.0 * p * (1.0 - p)


def _gini_diff(a, b):
    return 4.0 * (a - b) * (1.0 - a - b)


def _entropy(p):
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(p * np.log2(p) + (1.0 - p) * np.log2(1.0 - p))
    return np.where((p <= 0.0) | (p >= 1.0), 0.0, h)


def _km(p):
    p = np.asarray(p, dtype=float)
    return 2.0 * np.sqrt(np.maximum(p * (1.0 - p), 0.0))


GINI = ImpurityFunction("gini", _gini, alpha=8.0, L=8.0, diff=_gini_diff)
# -H''(p) = 1 / (ln 2 * p(1-p)) is minimized at p = 1/2.
ENTROPY = ImpurityFunction("entropy", _entropy, alpha=4.0 / math.log(2.0), L=math.inf)
# -G''(p) = (1/2) (p(1-p))^{-3/2} is minimized at p = 1/2.
KM = ImpurityFunction("km", _km, alpha=4.0, L=math.inf)

_BUILTIN = {g.name: g for g in (GINI, ENTROPY, KM)}


def builtin_impurities() -> list[ImpurityFunction]:
    """Gini, binary entropy and the Kearns-Mansour square-root criterion."""
    return [GINI, ENTROPY, KM]


def get_impurity(name) -> ImpurityFunction:
    if isinstance(name, ImpurityFunction):
        return name
    try:
        return _BUILTIN[name]
    except KeyError:
        raise InvalidSpecError(
            f"unknown impurity {name!r}; expected one of {sorted(_BUILTIN)}"
        ) from None


def curvature_bounds(G: ImpurityFunction, lo=0.0, hi=1.0, step=1e-4):
    """Estimate ``(min, max)`` of ``-G''`` on ``[lo, hi]`` by central differences.

    Grid points within one step of 0 or 1 are skipped so the stencil stays
    inside the domain.
    """
    lo = max(lo, step)
    hi = min(hi, 1.0 - step)
    n = int(round((hi - lo) / step))
    grid = lo + step * np.arange(n + 1)
    second = (G(grid + step) - 2.0 * G(grid) + G(grid - step)) / step**2
    neg = -second
    return float(neg.min()), float(neg.max())


@dataclass(frozen=True)
class Kappa:
    """Gain-to-squared-difference ratio bound ``max(2/(alpha d (1-d)), L/8)``."""

    value: float
    alpha: float
    L: float
    delta: float

    @classmethod
    def from_constants(cls, alpha, L, delta):
        if alpha <= 0:
            raise InvalidSpecError("alpha must be positive")
        if not 0.0 < delta <= 0.5:
            raise InvalidSpecError("delta must lie in (0, 1/2]")
        value = max(2.0 / (alpha * delta * (1.0 - delta)), L / 8.0)
        return cls(value=value, alpha=alpha, L=L, delta=delta)


def gain_from_means(G: ImpurityFunction, p, mu0, mu1):
    """``G(mean) - p G(mu1) - (1 - p) G(mu0)`` with ``mean = p mu1 + (1 - p) mu0``.

    The parent mean is rebuilt from the children rather than taken from a
    separate computation: the gain is O(1)-sensitive to the parent mean, so
    a rounding mismatch of 1e-16 would swamp gains of order
    ``(mu0 - mu1)^2`` when the children nearly agree. The sum is evaluated
    as ``p (G(mean) - G(mu1)) + (1 - p) (G(mean) - G(mu0))`` so impurities
    with a closed-form difference keep full relative precision.
    Vectorized over its arguments.
    """
    mean = p * mu1 + (1.0 - p) * mu0
    return p * G.difference(mean, mu1) + (1.0 - p) * G.difference(mean, mu0)


def _restricted_means(f, D, i, restriction=None):
    base = condition(D, restriction).biases if restriction else D.biases
    b0 = base.copy()
    b1 = base.copy()
    b0[i] = 0.0
    b1[i] = 1.0
    return f.mean(b0), f.mean(b1)


def purity_gain(f, D: ProductDistribution, G, i: int, restriction=None) -> float:
    """Purity gain of querying variable ``i`` on ``f`` (optionally ``f_pi``).

    Both child means come from the target's exact expectation oracle,
    independently of the vectorized path the learner uses; the parent mean
    is their mixture.
    """
    G = get_impurity(G)
    if not 0 <= i < f.arity:
        raise IndexError(f"variable {i} out of range for arity {f.arity}")
    mu0, mu1 = _restricted_means(f, D, i, restriction)
    p = D.biases[i]
    return float(gain_from_means(G, p, mu0, mu1))


@dataclass(frozen=True)
class GainRatio:
    gain: float
    sq_diff: float
    kappa: Kappa
    ratio_ok: bool

    @property
    def ratio(self):
        return self.gain / self.sq_diff if self.sq_diff > 0 else math.nan


def gain_ratio_bounds(
    f, D: ProductDistribution, G, i: int, *, window=None, tol=1e-9, zero_tol=GAIN_TOL
) -> GainRatio:
    """Check that gain / (mu0 - mu1)^2 lies in ``[1/kappa, kappa]``.

    With ``window=(lo, hi)`` the curvature constants are replaced by
    finite-difference estimates on that interval, which lets criteria with
    unbounded ``-G''`` be checked on instances whose child means stay inside
    the window. Instances whose means leave the window raise ``ValueError``.
    """
    G = get_impurity(G)
    if D.delta is None:
        raise InvalidSpecError("gain_ratio_bounds needs a delta-balanced distribution")
    mu0, mu1 = _restricted_means(f, D, i)
    if window is None:
        if not G.finite:
            raise InfiniteSmoothnessError(f"{G.name} has no finite smoothness bound")
        alpha, L = G.alpha, G.L
    else:
        lo, hi = window
        if not (lo <= min(mu0, mu1) and max(mu0, mu1) <= hi):
            raise ValueError(f"child means ({mu0}, {mu1}) leave window {window}")
        alpha, L = curvature_bounds(G, lo, hi)
    kappa = Kappa.from_constants(alpha, L, D.delta)
    p = D.biases[i]
    gain = float(gain_from_means(G, p, mu0, mu1))
    sq_diff = float((mu0 - mu1) ** 2)
    if sq_diff <= zero_tol:
        ok = gain <= zero_tol
    else:
        ratio = gain / sq_diff
        ok = 1.0 / kappa.value - tol <= ratio <= kappa.value + tol
    return GainRatio(gain=gain, sq_diff=sq_diff, kappa=kappa, ratio_ok=ok)


def memory_first_thresholds(G, delta):
    """Constants ``c0 = ln5/delta`` and ``k0 = ln(2 kappa)/ln(5/4) + 1``.

    Below these values the memory-bits-first guarantee is not promised, so
    experiments report them next to their verdicts. For criteria without a
    finite ``L``, ``kappa`` and ``k0`` are infinite.
    """
    G = get_impurity(G)
    c0 = math.log(5.0) / delta
    kappa = Kappa.from_constants(G.alpha, G.L, delta).value
    k0 = math.log(2.0 * kappa) / math.log(5.0 / 4.0) + 1.0 if math.isfinite(kappa) else math.inf
    return {"c0": c0, "kappa": kappa, "k0": k0}
