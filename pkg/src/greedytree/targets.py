"""Boolean target functions with exact expectation oracles.

Variable layout for addressing targets: the ``n_addr`` addressing bits come
first, followed by ``2**k`` memory bits in lexicographic address order. An
address ``a`` is the integer whose most significant bit is ``z_1``.

Every target exposes

* ``eval_batch(X)``: labels for the rows of a 0/1 matrix;
* ``mean(biases)``: exact ``E[f]`` under the product law with those biases
  (biases of 0 or 1 encode restricted coordinates);
* ``split_means(biases)``: ``(mean, mu0, mu1)`` where ``mu_b[i]`` is the
  mean with coordinate ``i`` forced to ``b``.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from ._bits import address_bits, fwht, subset_xor_table
from .distributions import ProductDistribution, _normalize_assignments, condition
from .exceptions import (
    ArityMismatchError,
    InfeasibleEpsilonError,
    InvalidSpecError,
    UnsupportedTargetError,
)

BRUTE_FORCE_CAP = 24
_CHUNK = 1 << 16
_SUM_BLOCK = 1 << 10
_SUM_CELLS = 1 << 22


@dataclass(frozen=True)
class Restriction:
    """Partial assignment ``x_i = b``; every index appears at most once."""

    assignments: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "assignments", _normalize_assignments(self.assignments))

    def __len__(self):
        return len(self.assignments)

    def __iter__(self):
        return iter(self.assignments)

    def as_dict(self):
        return dict(self.assignments)

    def indices(self):
        return [i for i, _ in self.assignments]

    def extend(self, *pairs):
        return Restriction(self.assignments + tuple(pairs))

    def union(self, other):
        """Concatenate two restrictions; shared indices are an error."""
        return Restriction(self.assignments + tuple(other))

    def apply(self, X):
        X = np.array(X, dtype=np.uint8, copy=True)
        for i, b in self.assignments:
            X[..., i] = b
        return X

    def to_list(self):
        return [[i, b] for i, b in self.assignments]


def as_restriction(pi):
    if isinstance(pi, Restriction):
        return pi
    return Restriction(tuple(tuple(p) for p in (pi or ())))


def _check_batch(X, arity):
    X = np.asarray(X)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[-1] != arity:
        raise ArityMismatchError(f"expected inputs of length {arity}, got {X.shape[-1]}")
    return X.astype(np.uint8, copy=False)


def enumerate_mean(f, biases, cap=BRUTE_FORCE_CAP):
    """``E[f]`` by summing over every setting of the non-fixed coordinates."""
    b = np.asarray(biases, dtype=float)
    free = np.flatnonzero((b > 0.0) & (b < 1.0))
    if free.size > cap:
        raise UnsupportedTargetError(
            f"brute force over {free.size} free bits exceeds the cap of {cap}"
        )
    base = (b >= 1.0).astype(np.uint8)
    total = 0.0
    n_rows = 1 << free.size
    shifts = np.arange(free.size - 1, -1, -1)
    for start in range(0, n_rows, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, n_rows))[:, None]
        bits = ((idx >> shifts) & 1).astype(np.uint8)
        X = np.repeat(base[None, :], idx.shape[0], axis=0)
        X[:, free] = bits
        w = np.prod(np.where(bits == 1, b[free], 1.0 - b[free]), axis=1)
        total += float(w @ f.eval_batch(X))
    return total


class TargetFunction:
    """Base class; subclasses override the oracles they can compute exactly."""

    arity: int

    def eval(self, x):
        return int(self.eval_batch(x)[0])

    def eval_batch(self, X):  # pragma: no cover - abstract
        raise NotImplementedError

    def variable_kinds(self):
        return np.full(self.arity, "input", dtype=object)

    def mean(self, biases):
        return enumerate_mean(self, biases)

    def split_means(self, biases):
        b = np.asarray(biases, dtype=float)
        mean = self.mean(b)
        mu0 = np.empty(self.arity)
        mu1 = np.empty(self.arity)
        for i in range(self.arity):
            saved = b[i]
            b[i] = 0.0
            mu0[i] = self.mean(b)
            b[i] = 1.0
            mu1[i] = self.mean(b)
            b[i] = saved
        return mean, mu0, mu1

    def restrict(self, restriction):
        return RestrictedTarget(self, restriction)


class JuntaTable(TargetFunction):
    """Function of the coordinates ``variables`` given by a truth table.

    ``table[t]`` is the value when the relevant bits, read in the order of
    ``variables`` with the first one most significant, spell ``t``.
    """

    def __init__(self, n, variables, table):
        variables = tuple(int(v) for v in variables)
        table = np.asarray(table, dtype=np.uint8).reshape(-1)
        if len(set(variables)) != len(variables) or any(not 0 <= v < n for v in variables):
            raise InvalidSpecError("junta variables must be distinct indices in range")
        if table.size != 1 << len(variables):
            raise InvalidSpecError("truth table length must be 2**len(variables)")
        if np.any(table > 1):
            raise InvalidSpecError("truth table entries must be bits")
        self.arity = int(n)
        self.variables = variables
        self.table = table
        self._patterns = address_bits(len(variables)).astype(bool)

    def eval_batch(self, X):
        X = _check_batch(X, self.arity)
        r = len(self.variables)
        idx = np.zeros(X.shape[0], dtype=np.int64)
        for t, v in enumerate(self.variables):
            idx |= X[:, v].astype(np.int64) << (r - 1 - t)
        return self.table[idx]

    def _mean_relevant(self, p):
        if not self.variables:
            return float(self.table[0])
        w = np.prod(np.where(self._patterns, p[None, :], 1.0 - p[None, :]), axis=1)
        return float(w @ self.table)

    def mean(self, biases):
        b = np.asarray(biases, dtype=float)
        return self._mean_relevant(b[list(self.variables)])

    def split_means(self, biases):
        b = np.asarray(biases, dtype=float)
        p = b[list(self.variables)].copy()
        mean = self._mean_relevant(p)
        mu0 = np.full(self.arity, mean)
        mu1 = np.full(self.arity, mean)
        for t, v in enumerate(self.variables):
            saved = p[t]
            p[t] = 0.0
            mu0[v] = self._mean_relevant(p)
            p[t] = 1.0
            mu1[v] = self._mean_relevant(p)
            p[t] = saved
        return mean, mu0, mu1

    def to_spec(self):
        return {"family": "table", "n": self.arity, "vars": list(self.variables),
                "table": self.table.tolist()}


def dictator(n, i=0):
    return JuntaTable(n, (i,), (0, 1))


def parity(n, variables):
    variables = tuple(variables)
    table = address_bits(len(variables)).sum(axis=1) % 2
    return JuntaTable(n, variables, table)


def random_junta(n, j, seed):
    """Random truth table on ``j`` distinct random coordinates of ``n``."""
    rng = np.random.default_rng(seed)
    variables = tuple(sorted(rng.choice(n, size=j, replace=False).tolist()))
    return JuntaTable(n, variables, rng.integers(0, 2, size=1 << j))


class Complement(TargetFunction):
    def __init__(self, base):
        self.base = base
        self.arity = base.arity

    def eval_batch(self, X):
        return 1 - self.base.eval_batch(X)

    def mean(self, biases):
        return 1.0 - self.base.mean(biases)

    def split_means(self, biases):
        mean, mu0, mu1 = self.base.split_means(biases)
        return 1.0 - mean, 1.0 - mu0, 1.0 - mu1

    def variable_kinds(self):
        return self.base.variable_kinds()


class AddressingTarget(TargetFunction):
    """``y_{z(x)}`` with address bits ``z_i(x) = xor_{j in S_i} x_j``.

    Parameters
    ----------
    sets : array-like of shape (k, n_addr)
        Indicator rows of the sets ``S_i``.
    memory_values : array-like of shape (2**k,), optional
        When given, the memory lookup is replaced by this constant table and
        the memory bits become irrelevant inputs.
    """

    _CACHE_SIZE = 4

    def __init__(self, sets, memory_values=None):
        sets = np.asarray(sets, dtype=bool)
        if sets.ndim != 2 or sets.shape[0] < 1:
            raise InvalidSpecError("sets must be a nonempty (k, n_addr) indicator matrix")
        self.sets = sets
        self.k, self.n_addr = sets.shape
        self.n_memory = 1 << self.k
        self.arity = self.n_addr + self.n_memory
        if memory_values is not None:
            memory_values = np.asarray(memory_values, dtype=np.uint8).reshape(-1)
            if memory_values.size != self.n_memory:
                raise InvalidSpecError("memory_values must have 2**k entries")
        self.memory_values = memory_values
        self._xor_table = None
        self._split_cache = OrderedDict()

    # -- structure -------------------------------------------------------
    @property
    def char_membership(self):
        """Boolean (2**k, n_addr): coordinate ``j`` lies in the symmetric difference ``S_I``."""
        if self._xor_table is None:
            self._xor_table = subset_xor_table(self.sets)
        return self._xor_table

    def memory_index(self, address):
        return self.n_addr + int(address)

    def variable_kinds(self):
        kinds = np.empty(self.arity, dtype=object)
        kinds[: self.n_addr] = "addressing"
        kinds[self.n_addr:] = "memory"
        return kinds

    def addresses(self, X):
        X = _check_batch(X, self.arity)
        z = (X[:, : self.n_addr].astype(np.int64) @ self.sets.T.astype(np.int64)) & 1
        weights = 1 << np.arange(self.k - 1, -1, -1)
        return z @ weights

    def eval_batch(self, X):
        X = _check_batch(X, self.arity)
        a = self.addresses(X)
        if self.memory_values is not None:
            return self.memory_values[a]
        return X[np.arange(X.shape[0]), self.n_addr + a]

    # -- oracles ---------------------------------------------------------
    def _factors(self, addr_biases):
        t = 1.0 - 2.0 * np.asarray(addr_biases, dtype=float)
        return np.where(self.char_membership, t[None, :], 1.0)

    def characters(self, addr_biases):
        """``E[prod_{i in I} (1 - 2 z_i)]`` for every ``I``."""
        return np.prod(self._factors(addr_biases), axis=1)

    def pmf(self, addr_biases):
        """Exact law of the address via the character-sum identity."""
        chi = self.characters(addr_biases)
        return fwht(chi) / self.n_memory

    def memory_means(self, biases):
        if self.memory_values is not None:
            return self.memory_values.astype(float)
        return np.asarray(biases, dtype=float)[self.n_addr:]

    def mean(self, biases):
        b = np.asarray(biases, dtype=float)
        return float(self.pmf(b[: self.n_addr]) @ self.memory_means(b))

    def _split_matrices(self, addr_biases):
        key = np.asarray(addr_biases, dtype=float).tobytes()
        hit = self._split_cache.get(key)
        if hit is not None:
            self._split_cache.move_to_end(key)
            return hit
        F = self._factors(addr_biases)
        ones = np.ones((F.shape[0], 1))
        prefix = np.cumprod(np.concatenate([ones, F[:, :-1]], axis=1), axis=1)
        suffix = np.cumprod(np.concatenate([ones, F[:, :0:-1]], axis=1), axis=1)[:, ::-1]
        without = prefix * suffix
        member = self.char_membership
        c_out = np.where(member, 0.0, without).T.copy()
        c_in = np.where(member, without, 0.0).T.copy()
        pmf = fwht(np.prod(F, axis=1)) / self.n_memory
        entry = (c_out, c_in, pmf)
        self._split_cache[key] = entry
        if len(self._split_cache) > self._CACHE_SIZE:
            self._split_cache.popitem(last=False)
        return entry

    def split_means(self, biases):
        b = np.asarray(biases, dtype=float)
        c_out, c_in, pmf = self._split_matrices(b[: self.n_addr])
        m = self.memory_means(b)
        mean = float(pmf @ m)
        w = fwht(m)
        a_part = c_out @ w
        b_part = c_in @ w
        scale = 1.0 / self.n_memory
        mu0 = np.empty(self.arity)
        mu1 = np.empty(self.arity)
        mu0[: self.n_addr] = (a_part + b_part) * scale
        mu1[: self.n_addr] = (a_part - b_part) * scale
        if self.memory_values is not None:
            mu0[self.n_addr:] = mean
            mu1[self.n_addr:] = mean
        else:
            mu0[self.n_addr:] = mean - pmf * m
            mu1[self.n_addr:] = mean + pmf * (1.0 - m)
        return mean, mu0, mu1

    def to_spec(self):
        return {"family": "fcks", "k": self.k, "n_addr": self.n_addr,
                "sets": [np.flatnonzero(r).tolist() for r in self.sets]}


class CodedAddressing(AddressingTarget):
    """Addressing target over ``c*k`` bits whose address parities come from a set family."""

    def __init__(self, c, k, family):
        sets = family.indicator() if hasattr(family, "indicator") else np.asarray(family, dtype=bool)
        if sets.shape != (k, c * k):
            raise InvalidSpecError(f"expected {k} sets over a ground set of size {c * k}")
        super().__init__(sets)
        self.c = int(c)
        self.family = family

    def to_spec(self):
        return {"family": "fcks", "c": self.c, "k": self.k,
                "sets": [np.flatnonzero(r).tolist() for r in self.sets]}


def disjoint_blocks(c, k):
    """Indicator rows of ``k`` disjoint consecutive blocks of size ``c*k``."""
    block = c * k
    sets = np.zeros((k, block * k), dtype=bool)
    for i in range(k):
        sets[i, i * block:(i + 1) * block] = True
    return sets


class DisjointParityAddressing(AddressingTarget):
    """``k`` address bits, each the parity of its own group of ``c*k`` bits.

    Addressing bit ``x_{i,j}`` sits at index ``i*c*k + j`` (row-major).
    Evaluation and the address law use the group structure directly; the
    per-variable split means reuse the generic character machinery.
    """

    def __init__(self, c, k):
        if c < 1 or k < 1:
            raise InvalidSpecError("c and k must be positive")
        super().__init__(disjoint_blocks(c, k))
        self.c = int(c)
        self.group = self.c * self.k

    def addresses(self, X):
        X = _check_batch(X, self.arity)
        groups = X[:, : self.n_addr].reshape(X.shape[0], self.k, self.group)
        z = np.bitwise_xor.reduce(groups, axis=2).astype(np.int64)
        return z @ (1 << np.arange(self.k - 1, -1, -1))

    def pmf(self, addr_biases):
        b = np.asarray(addr_biases, dtype=float).reshape(self.k, self.group)
        q = (1.0 - np.prod(1.0 - 2.0 * b, axis=1)) / 2.0
        bits = address_bits(self.k).astype(bool)
        return np.prod(np.where(bits, q[None, :], 1.0 - q[None, :]), axis=1)

    def to_spec(self):
        return {"family": "fck", "c": self.c, "k": self.k}


class AddressJunta(AddressingTarget):
    """``g(x, y) = 1[z(x) in accept]``: depends on the addressing bits only."""

    def __init__(self, sets, accept):
        sets = np.asarray(sets, dtype=bool)
        values = np.zeros(1 << sets.shape[0], dtype=np.uint8)
        values[list(accept)] = 1
        super().__init__(sets, memory_values=values)
        self.accept = frozenset(int(a) for a in accept)


class RestrictedTarget(TargetFunction):
    """``f_pi(x) = f(x^pi)``: the base target with some inputs forced."""

    def __init__(self, base, restriction):
        self.base = base
        self.restriction = as_restriction(restriction)
        self.arity = base.arity
        for i in self.restriction.indices():
            if not 0 <= i < self.arity:
                raise InvalidSpecError(f"restriction index {i} out of range")
        self._idx = np.array(self.restriction.indices(), dtype=np.int64)
        self._val = np.array([b for _, b in self.restriction], dtype=float)

    def _overwrite(self, biases):
        b = np.array(biases, dtype=float, copy=True)
        if self._idx.size:
            b[self._idx] = self._val
        return b

    def eval_batch(self, X):
        X = _check_batch(X, self.arity)
        return self.base.eval_batch(self.restriction.apply(X))

    def variable_kinds(self):
        return self.base.variable_kinds()

    def mean(self, biases):
        return self.base.mean(self._overwrite(biases))

    def split_means(self, biases):
        mean, mu0, mu1 = self.base.split_means(self._overwrite(biases))
        if self._idx.size:
            mu0[self._idx] = mean
            mu1[self._idx] = mean
        return mean, mu0, mu1

    def restrict(self, restriction):
        # f_{pi + pi'} = (f_pi)_{pi'} when pi and pi' touch disjoint indices
        return RestrictedTarget(self.base, self.restriction.union(as_restriction(restriction)))


def addressing_view(f):
    """``(addressing_target, forced_bits)`` for an addressing target or a restriction of one."""
    if isinstance(f, AddressingTarget):
        return f, {}
    if isinstance(f, RestrictedTarget) and isinstance(f.base, AddressingTarget):
        return f.base, f.restriction.as_dict()
    raise UnsupportedTargetError("not an addressing target")


def _effective_biases(f, D, restriction):
    if D.n != f.arity:
        raise ArityMismatchError(f"distribution has {D.n} coordinates, target arity {f.arity}")
    return condition(D, restriction).biases


def address_pmf(f, D: ProductDistribution, restriction=None):
    """Exact distribution of the address ``z(x)`` under ``D`` conditioned on ``pi``.

    Returns an array of length ``2**k`` indexed by address.
    """
    base, forced = addressing_view(f)
    b = _effective_biases(f, D, restriction).copy()
    for i, bit in forced.items():
        b[i] = bit
    return base.pmf(b[: base.n_addr])


def enumerate_address_pmf(f, D: ProductDistribution, restriction=None, cap=BRUTE_FORCE_CAP):
    """Address law by exhaustive enumeration of the free addressing bits."""
    base, forced = addressing_view(f)
    b = _effective_biases(f, D, restriction).copy()
    for i, bit in forced.items():
        b[i] = bit
    addr_b = b[: base.n_addr]
    free = np.flatnonzero((addr_b > 0.0) & (addr_b < 1.0))
    if free.size > cap:
        raise UnsupportedTargetError(f"{free.size} free addressing bits exceed the cap")
    fixed = (addr_b >= 1.0).astype(np.uint8)
    rows = 1 << free.size
    shifts = np.arange(free.size - 1, -1, -1)
    # rows are summed in short blocks then the block totals are added, which keeps
    # rounding far below 1e-12 where one running sum over 2**20 rows would not
    n_blocks = max(1, min(rows // _SUM_BLOCK, _SUM_CELLS // base.n_memory))
    partial = np.zeros(n_blocks * base.n_memory)
    weights = np.ones(1)
    for p in addr_b[free]:
        weights = np.outer(weights, [1.0 - p, p]).ravel()
    for start in range(0, rows, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, rows))[:, None]
        X = np.zeros((idx.shape[0], base.arity), dtype=np.uint8)
        X[:, : base.n_addr] = fixed
        X[:, free] = (idx >> shifts) & 1
        w = weights[start:start + idx.shape[0]]
        key = (idx[:, 0] * n_blocks // rows) * base.n_memory + base.addresses(X)
        partial += np.bincount(key, weights=w, minlength=partial.size)
    return partial.reshape(n_blocks, base.n_memory).sum(axis=0)


def expectation(f, D: ProductDistribution, restriction=None) -> float:
    """Exact ``E[f_pi]`` under ``D``."""
    return float(f.mean(_effective_biases(f, D, restriction)))


# -- agnostic construction -------------------------------------------------

@dataclass(frozen=True)
class AgnosticPartition:
    k: int
    epsilon: float
    A0: tuple
    A1: tuple
    Afree: tuple


def free_address_count(k, epsilon):
    """Largest ``s`` in ``[eps 2^(k-2), eps 2^(k-1)]`` with ``2^k - s`` even."""
    if not 0.0 < epsilon <= 1.0:
        raise InfeasibleEpsilonError("epsilon must lie in (0, 1]")
    lo = epsilon * 2.0 ** (k - 2)
    hi = epsilon * 2.0 ** (k - 1)
    if lo < 1.0:
        raise InfeasibleEpsilonError(f"epsilon * 2^(k-2) = {lo:g} < 1")
    s = math.floor(hi + 1e-9)
    while s >= math.ceil(lo - 1e-9):
        if ((1 << k) - s) % 2 == 0:
            return s
        s -= 1
    raise InfeasibleEpsilonError(f"no free-address count in [{lo:g}, {hi:g}] leaves an even complement")


def make_agnostic_restriction(base: AddressingTarget, epsilon, seed=None):
    """Fix memory bits to 0 on ``A0`` and 1 on ``A1``; leave ``Afree`` open.

    Without a seed, ``Afree`` is the first block of addresses in
    lexicographic order and the rest is split in half (lower half ``A0``).
    With a seed, the three sets are a uniformly random partition of the
    prescribed sizes.

    Returns ``(restriction, partition, junta)`` where the junta is
    ``g(x, y) = 1[z(x) in A1]`` on the same domain.
    """
    if not isinstance(base, AddressingTarget) or base.memory_values is not None:
        raise InvalidSpecError("the agnostic construction needs an addressing target with free memory")
    k = base.k
    s = free_address_count(k, epsilon)
    order = np.arange(1 << k)
    if seed is not None:
        order = np.random.default_rng(seed).permutation(order)
    half = ((1 << k) - s) // 2
    afree = tuple(sorted(order[:s].tolist()))
    a0 = tuple(sorted(order[s:s + half].tolist()))
    a1 = tuple(sorted(order[s + half:].tolist()))
    pairs = [(base.memory_index(a), 0) for a in a0] + [(base.memory_index(a), 1) for a in a1]
    pairs.sort()
    partition = AgnosticPartition(k=k, epsilon=float(epsilon), A0=a0, A1=a1, Afree=afree)
    return Restriction(tuple(pairs)), partition, AddressJunta(base.sets, a1)


def junta_distance(f, g, D: ProductDistribution, cap=BRUTE_FORCE_CAP) -> float:
    """Exact ``Pr[f(x) != g(x)]`` under ``D``.

    Two addressing targets over the same address map (possibly with memory
    bits restricted, or constant memory tables) are compared address by
    address; anything else is enumerated.
    """
    if f.arity != g.arity:
        raise ArityMismatchError("targets have different arities")
    if D.n != f.arity:
        raise ArityMismatchError("distribution does not match target arity")
    try:
        fb, f_forced = addressing_view(f)
        gb, g_forced = addressing_view(g)
    except UnsupportedTargetError:
        fb = None
    if (
        fb is not None
        and np.array_equal(fb.sets, gb.sets)
        and not any(i < fb.n_addr for i in (*f_forced, *g_forced))
    ):
        pmf = fb.pmf(D.biases[: fb.n_addr])
        dis = np.empty(fb.n_memory)
        for a in range(fb.n_memory):
            dis[a] = _memory_disagreement(fb, f_forced, gb, g_forced, a, D)
        return float(pmf @ dis)
    return _enumerate_disagreement(f, g, D, cap)


def _memory_cell(target, forced, a):
    """``('const', bit)`` or ``('var', index)`` describing the value at address ``a``."""
    if target.memory_values is not None:
        return ("const", int(target.memory_values[a]))
    idx = target.memory_index(a)
    if idx in forced:
        return ("const", int(forced[idx]))
    return ("var", idx)


def _memory_disagreement(fb, f_forced, gb, g_forced, a, D):
    cf = _memory_cell(fb, f_forced, a)
    cg = _memory_cell(gb, g_forced, a)
    if cf[0] == "const" and cg[0] == "const":
        return float(cf[1] != cg[1])
    if cf[0] == "var" and cg[0] == "var":
        return 0.0
    const, var = (cf, cg) if cf[0] == "const" else (cg, cf)
    p = D.biases[var[1]]
    return float(1.0 - p if const[1] == 1 else p)


def _enumerate_disagreement(f, g, D, cap):
    diff = _Disagreement(f, g)
    return enumerate_mean(diff, D.biases, cap)


class _Disagreement(TargetFunction):
    def __init__(self, f, g):
        self.f, self.g, self.arity = f, g, f.arity

    def eval_batch(self, X):
        return (self.f.eval_batch(X) != self.g.eval_batch(X)).astype(np.uint8)


# -- JSON specs ------------------------------------------------------------

def target_from_spec(spec):
    """Build a target from its JSON description.

    Families: ``fck`` (c, k), ``fcks`` (c, k, sets as 0-based index lists),
    ``restricted`` (base, restriction, or epsilon for the agnostic
    restriction), ``junta`` (base, epsilon: the junta ``g``), plus the small
    families ``dictator`` (n, i), ``parity`` (n, vars) and ``table``
    (n, vars, table).
    """
    if not isinstance(spec, dict) or "family" not in spec:
        raise InvalidSpecError("target spec must be an object with a 'family' field")
    fam = spec["family"]
    try:
        if fam == "fck":
            return DisjointParityAddressing(_pos_int(spec, "c"), _pos_int(spec, "k"))
        if fam == "fcks":
            c, k = _pos_int(spec, "c"), _pos_int(spec, "k")
            sets = spec.get("sets")
            if sets is None or len(sets) != k:
                raise InvalidSpecError("fcks needs 'sets' with k entries")
            ind = np.zeros((k, c * k), dtype=bool)
            for i, s in enumerate(sets):
                for j in s:
                    if not 0 <= int(j) < c * k:
                        raise InvalidSpecError(f"set element {j} outside [0, {c * k})")
                    ind[i, int(j)] = True
            return CodedAddressing(c, k, ind)
        if fam in ("restricted", "junta"):
            base = target_from_spec(spec["base"])
            if "epsilon" in spec:
                pi, _, g = make_agnostic_restriction(base, float(spec["epsilon"]), spec.get("partition_seed"))
                return g if fam == "junta" else RestrictedTarget(base, pi)
            if fam == "junta":
                raise InvalidSpecError("junta spec needs 'epsilon'")
            return RestrictedTarget(base, Restriction(tuple(tuple(p) for p in spec.get("restriction", []))))
        if fam == "dictator":
            return dictator(_pos_int(spec, "n"), int(spec.get("i", 0)))
        if fam == "parity":
            return parity(_pos_int(spec, "n"), spec["vars"])
        if fam == "table":
            return JuntaTable(_pos_int(spec, "n"), spec["vars"], spec["table"])
    except KeyError as exc:
        raise InvalidSpecError(f"target spec for {fam!r} is missing field {exc.args[0]!r}") from None
    raise InvalidSpecError(f"unknown target family {fam!r}")


def _pos_int(spec, key):
    v = spec[key]
    if not isinstance(v, int) or isinstance(v, bool) or v < 1:
        raise InvalidSpecError(f"field {key!r} must be a positive integer")
    return v
