"""Product distributions over {0,1}^n, smoothing, and XOR-bias arithmetic.

Random streams
--------------
Every sampler takes an explicit integer seed and builds its own
``numpy.random.default_rng(seed)``. Smoothing draws the perturbation of
coordinate ``i`` as the ``i``-th variate of one ``uniform(-sigma, sigma,
size=n)`` call, so coordinate ``i`` always consumes the ``i``-th draw of the
stream. Experiments derive per-shard seeds with :func:`derive_seed`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConflictingRestrictionError, InvalidSpecError

_BALANCE_TOL = 1e-12


def derive_seed(master, *path):
    """Deterministic child seed for the shard addressed by ``path``."""
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


class ProductDistribution:
    """Independent bits with ``Pr[x_i = 1] = biases[i]``.

    User-built distributions are delta-balanced: every bias lies in
    ``[delta, 1 - delta]`` with ``0 < delta <= 1/2``. When ``delta`` is omitted
    it is taken as ``min_i min(p_i, 1 - p_i)``. Point masses only arise from
    :func:`condition`, whose results carry ``delta=None``.
    """

    __slots__ = ("_biases", "delta")

    def __init__(self, biases, delta=None):
        b = np.array(biases, dtype=float).reshape(-1)
        if b.size == 0:
            raise InvalidSpecError("a distribution needs at least one coordinate")
        if not np.all(np.isfinite(b)) or np.any((b <= 0.0) | (b >= 1.0)):
            raise InvalidSpecError("biases must lie strictly inside (0, 1)")
        if delta is None:
            delta = float(np.min(np.minimum(b, 1.0 - b)))
        delta = float(delta)
        if not 0.0 < delta <= 0.5:
            raise InvalidSpecError(f"delta must lie in (0, 1/2], got {delta}")
        if np.any(b < delta - _BALANCE_TOL) or np.any(b > 1.0 - delta + _BALANCE_TOL):
            raise InvalidSpecError(f"biases are not {delta}-balanced")
        b.setflags(write=False)
        self._biases = b
        self.delta = delta

    @classmethod
    def _conditioned(cls, biases):
        obj = cls.__new__(cls)
        b = np.array(biases, dtype=float)
        b.setflags(write=False)
        obj._biases = b
        obj.delta = None
        return obj

    @classmethod
    def uniform(cls, n):
        return cls(np.full(n, 0.5), delta=0.5)

    @classmethod
    def random_balanced(cls, n, delta, seed):
        """Biases drawn uniformly from ``[delta, 1 - delta]``."""
        rng = np.random.default_rng(seed)
        return cls(rng.uniform(delta, 1.0 - delta, size=n), delta=delta)

    @property
    def biases(self):
        return self._biases

    @property
    def n(self):
        return self._biases.size

    def __len__(self):
        return self._biases.size

    def __repr__(self):
        return f"ProductDistribution(n={self.n}, delta={self.delta})"

    def __eq__(self, other):
        return (
            isinstance(other, ProductDistribution)
            and self.delta == other.delta
            and np.array_equal(self._biases, other._biases)
        )

    def __hash__(self):
        return hash((self.delta, self._biases.tobytes()))

    def to_dict(self):
        return {"kind": "fixed", "n": self.n, "delta": self.delta, "biases": self._biases.tolist()}


@dataclass(frozen=True)
class SmoothedSpec:
    """Base biases perturbed coordinate-wise by ``Uniform[-sigma, sigma]``.

    Every base bias must lie in ``(delta + sigma, 1 - delta - sigma)``; with
    ``sigma = 0`` the closed interval is accepted.
    """

    base_biases: tuple
    sigma: float
    delta: float

    def __post_init__(self):
        b = np.asarray(self.base_biases, dtype=float)
        object.__setattr__(self, "base_biases", tuple(float(x) for x in b))
        if self.sigma < 0:
            raise InvalidSpecError("sigma must be nonnegative")
        if not 0.0 < self.delta <= 0.5:
            raise InvalidSpecError("delta must lie in (0, 1/2]")
        lo, hi = self.delta + self.sigma, 1.0 - self.delta - self.sigma
        if self.sigma == 0:
            bad = (b < lo) | (b > hi)
        else:
            bad = (b <= lo) | (b >= hi)
        if b.size == 0 or np.any(bad):
            raise InvalidSpecError(
                f"base biases must lie in ({lo:g}, {hi:g}) for sigma={self.sigma}, delta={self.delta}"
            )


def sample_smoothed(spec: SmoothedSpec, seed) -> ProductDistribution:
    rng = np.random.default_rng(seed)
    base = np.asarray(spec.base_biases)
    shift = rng.uniform(-spec.sigma, spec.sigma, size=base.size) if spec.sigma > 0 else 0.0
    return ProductDistribution(base + shift, delta=spec.delta)


def xor_bias(biases) -> float:
    """``Pr[x_1 xor ... xor x_n = 1]`` for independent bits with the given biases.

    Uses ``1 - 2 Pr[xor = 1] = prod_j (1 - 2 p_j)``.
    """
    b = np.asarray(biases, dtype=float).reshape(-1)
    if b.size == 0:
        raise InvalidSpecError("xor_bias needs a nonempty sequence")
    if np.any((b < 0.0) | (b > 1.0)):
        raise InvalidSpecError("biases must lie in [0, 1]")
    return float((1.0 - np.prod(1.0 - 2.0 * b)) / 2.0)


def sample_input(D: ProductDistribution, seed, size=None):
    """Bit vector (or ``size`` rows of bit vectors) drawn from ``D``."""
    rng = np.random.default_rng(seed)
    shape = (D.n,) if size is None else (size, D.n)
    return (rng.random(shape) < D.biases).astype(np.uint8)


def _normalize_assignments(restriction, n=None):
    if restriction is None:
        return ()
    items = getattr(restriction, "assignments", restriction)
    seen = {}
    for i, b in items:
        i, b = int(i), int(b)
        if b not in (0, 1):
            raise InvalidSpecError(f"restriction bit for x_{i} must be 0 or 1")
        if n is not None and not 0 <= i < n:
            raise InvalidSpecError(f"restriction index {i} out of range for n={n}")
        if i in seen:
            raise ConflictingRestrictionError(f"variable {i} is restricted twice")
        seen[i] = b
    return tuple(seen.items())


def condition(D: ProductDistribution, restriction) -> ProductDistribution:
    """Law of ``x^pi`` for ``x ~ D``: fixed coordinates become point masses.

    The free coordinates keep their biases, so the result is the product law
    under which ``E[f_pi]`` is the plain expectation.
    """
    assignments = _normalize_assignments(restriction, D.n)
    if not assignments:
        return D
    b = D.biases.copy()
    for i, bit in assignments:
        b[i] = float(bit)
    return ProductDistribution._conditioned(b)
