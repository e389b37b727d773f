"""Tree error measurement and the lower-bound experiments.

Leaf-conditional Monte Carlo
    Leaves are sampled (by walking the tree on draws from the distribution,
    or by drawing the memory assignment of a full memory-only tree), and the
    exact conditional error ``min(mu, 1 - mu)`` of each sampled leaf is
    averaged. Only the leaf is random, so the interval is per leaf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .codes import gv_search, separation_distance
from .distributions import (
    ProductDistribution,
    SmoothedSpec,
    derive_seed,
    sample_input,
    sample_smoothed,
)
from .exceptions import ArityMismatchError, InfeasibleEpsilonError, InvalidSpecError
from .impurity import get_impurity, memory_first_thresholds, purity_gain
from .learner import GrowthPolicy, audit_query_order, build_tree_exact, build_tree_sampled
from .targets import (
    CodedAddressing,
    DisjointParityAddressing,
    RestrictedTarget,
    addressing_view,
    junta_distance,
    make_agnostic_restriction,
    parity,
    random_junta,
)

Z95 = 1.959963984540054
EXACT_LEAF_CAP = 1 << 17
DESK_MIN_K = 4


@dataclass
class ErrorReport:
    error: float
    method: str
    ci_halfwidth: float = 0.0
    leaf_stats: dict = field(default_factory=dict)

    def to_dict(self):
        return {"error": self.error, "method": self.method,
                "ci_halfwidth": self.ci_halfwidth, "leaf_stats": self.leaf_stats}


def _summary(values, weights=None):
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return {}
    if weights is None:
        mean = float(values.mean())
    else:
        mean = float(np.average(values, weights=weights))
    return {"mean": mean, "min": float(values.min()), "max": float(values.max()),
            "count": int(values.size)}


def _reach_all(T, biases):
    """Reach probability of every node; parents always precede children."""
    reach = np.ones(T.node_count)
    for v in range(1, T.node_count):
        u = T.parent[v]
        b = biases[T.feature[u]]
        reach[v] = reach[u] * (b if T.branch[v] == 1 else 1.0 - b)
    return reach


def tree_error(T, f, D: ProductDistribution, method="auto", n_samples=10_000, seed=0):
    """Error ``Pr[T(x) != f(x)]`` of tree ``T`` for target ``f`` under ``D``.

    ``exact`` enumerates the leaves: each contributes its reach probability
    times its disagreement with the exact leaf mean. ``mc`` walks ``T`` on
    ``n_samples`` draws and averages the exact conditional disagreements.
    ``auto`` is exact up to ``2**17`` leaves.
    """
    if T.n_features != f.arity or D.n != f.arity:
        raise ArityMismatchError("tree, target and distribution must share the arity")
    leaves = T.leaves()
    if method == "auto":
        method = "exact" if len(leaves) <= EXACT_LEAF_CAP else "mc"
    p = D.biases
    if method == "exact":
        reach = _reach_all(T, p)[leaves]
        mus = np.empty(len(leaves))
        dis = np.empty(len(leaves))
        for t, v in enumerate(leaves):
            path = T.path(v).assignments
            mu = _leaf_mean(f, p, path)
            mus[t] = mu
            dis[t] = 1.0 - mu if T.label(v) == 1 else mu
        err = float(reach @ dis)
        return ErrorReport(min(max(err, 0.0), 1.0), "exact-enumeration", 0.0,
                           _summary(mus, reach))
    if method != "mc":
        raise InvalidSpecError(f"unknown error method {method!r}")
    X = sample_input(D, seed, size=n_samples)
    hit = T.apply(X)
    cache = {}
    for v in np.unique(hit):
        mu = _leaf_mean(f, p, T.path(int(v)).assignments)
        cache[int(v)] = (mu, 1.0 - mu if T.label(int(v)) == 1 else mu)
    dis = np.array([cache[int(v)][1] for v in hit])
    err = float(dis.mean())
    ci = float(Z95 * dis.std(ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else math.inf
    return ErrorReport(err, "leaf-conditional-MC", ci,
                       _summary([cache[int(v)][0] for v in hit]))


def _leaf_mean(f, p, path):
    b = p.copy()
    for i, bit in path:
        b[i] = bit
    return float(f.mean(b))


def enumerate_tree_error(T, f, D, cap=24):
    """Reference error by weighting every point of the cube (small arity only)."""
    n = f.arity
    if n > cap:
        raise InvalidSpecError(f"arity {n} exceeds the enumeration cap {cap}")
    idx = np.arange(1 << n)[:, None]
    X = ((idx >> np.arange(n - 1, -1, -1)) & 1).astype(np.uint8)
    w = np.prod(np.where(X == 1, D.biases, 1.0 - D.biases), axis=1)
    return float(w @ (T.predict(X) != f.eval_batch(X)))


def depth_error_curve(T, D):
    """Error of ``T`` truncated at each depth, using its recorded exact node means.

    Every split creates both children, so the nodes at depth ``d`` together
    with the shallower leaves partition the input space.
    """
    reach = _reach_all(T, D.biases)
    mean = np.asarray(T.mean)
    cond = reach * np.minimum(mean, 1.0 - mean)
    depth = np.asarray(T.depth_of)
    leaf = np.asarray(T.feature) == -1
    rows = []
    for d in range(T.depth + 1):
        mask = (depth == d) | ((depth < d) & leaf)
        rows.append({"depth": d, "error": float(cond[mask].sum())})
    return rows


# -- memory-only trees over addressing targets ----------------------------

def _memory_layout(f, D):
    base, forced = addressing_view(f)
    b = D.biases.copy()
    for i, bit in forced.items():
        b[i] = bit
    pmf = base.pmf(b[: base.n_addr])
    const = np.zeros(base.n_memory, dtype=bool)
    value = np.zeros(base.n_memory)
    if base.memory_values is not None:
        const[:] = True
        value[:] = base.memory_values
    else:
        value[:] = b[base.n_addr:]
        for a in range(base.n_memory):
            idx = base.memory_index(a)
            if idx in forced:
                const[a] = True
    return base, pmf, const, value


def leaf_mean_stats(f, D: ProductDistribution, n_leaves=10_000, seed=0, band=None, chunk=1000):
    """Distribution of ``mu = sum_a Pr[z = a] c_a`` over leaves of the full memory-only tree.

    Free memory bits ``c_a`` are drawn from their marginals under ``D``;
    restricted or constant memory cells keep their value. Reports the
    probability that ``mu`` falls in ``band`` (default ``[delta/2,
    1 - delta/2]``) and the mean conditional error ``min(mu, 1 - mu)``, each
    with a 95% half-width.
    """
    base, pmf, const, value = _memory_layout(f, D)
    if band is None:
        if D.delta is None:
            raise InvalidSpecError("band is required for distributions without delta")
        band = (D.delta / 2.0, 1.0 - D.delta / 2.0)
    rng = np.random.default_rng(seed)
    free = ~const
    fixed_part = float(pmf[const] @ value[const])
    mus = np.empty(n_leaves)
    for start in range(0, n_leaves, chunk):
        m = min(chunk, n_leaves - start)
        draws = rng.random((m, int(free.sum()))) < value[free]
        mus[start:start + m] = fixed_part + draws @ pmf[free]
    inband = (mus >= band[0]) & (mus <= band[1])
    cond = np.minimum(mus, 1.0 - mus)
    n = float(n_leaves)
    q = float(inband.mean())
    return {
        "n_leaves": n_leaves,
        "band": list(band),
        "band_probability": q,
        "band_ci_halfwidth": float(Z95 * math.sqrt(max(q * (1 - q), 0.0) / n)),
        "conditional_error": float(cond.mean()),
        "conditional_error_ci_halfwidth": float(Z95 * cond.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf,
        "mu": _summary(mus),
    }


def memory_only_floor(f, D: ProductDistribution, method="auto", n_leaves=10_000, seed=0,
                      exact_cap=16):
    """Error of the full memory-only tree with optimal leaf labels.

    Any tree that only queries memory bits is coarsened by this tree, so its
    error is at least this value. Exact when at most ``exact_cap`` memory
    bits are free, leaf-conditional Monte Carlo otherwise.
    """
    base, pmf, const, value = _memory_layout(f, D)
    free = np.flatnonzero(~const)
    if method == "auto":
        method = "exact" if free.size <= exact_cap else "mc"
    if method == "exact":
        fixed_part = float(pmf[const] @ value[const])
        rows = 1 << free.size
        idx = np.arange(rows)[:, None]
        bits = ((idx >> np.arange(free.size - 1, -1, -1)) & 1).astype(bool)
        w = np.prod(np.where(bits, value[free], 1.0 - value[free]), axis=1)
        mus = fixed_part + bits @ pmf[free]
        err = float(w @ np.minimum(mus, 1.0 - mus))
        return ErrorReport(err, "exact-enumeration", 0.0, _summary(mus, w))
    stats = leaf_mean_stats(f, D, n_leaves=n_leaves, seed=seed,
                            band=(0.0, 1.0))
    return ErrorReport(stats["conditional_error"], "leaf-conditional-MC",
                       stats["conditional_error_ci_halfwidth"], stats["mu"])


# -- experiments -------------------------------------------------------------

def _make_distribution(kind, n, delta, seed):
    if isinstance(kind, ProductDistribution):
        if kind.n != n:
            raise ArityMismatchError("distribution does not match target arity")
        return kind
    if kind == "random":
        return ProductDistribution.random_balanced(n, delta, seed)
    if kind == "low":
        return ProductDistribution(np.full(n, delta), delta=delta)
    if kind == "high":
        return ProductDistribution(np.full(n, 1.0 - delta), delta=delta)
    if kind == "uniform":
        return ProductDistribution.uniform(n)
    raise InvalidSpecError(f"unknown distribution kind {kind!r}")


def build_hard_target(k, delta, layout="disjoint", seed=0, budget=100_000):
    """Addressing target whose address parities are ``(ln5/delta) k``-far apart.

    ``disjoint`` uses ``k`` disjoint blocks of ``c*k`` bits with
    ``c = ceil(ln5/delta)``; ``gv`` searches a family over ``c*k`` bits,
    doubling ``c`` until the distance is met.
    """
    c = math.ceil(math.log(5.0) / delta - 1e-9)
    if layout == "disjoint":
        return DisjointParityAddressing(c, k)
    if layout == "gv":
        fam = gv_search(k, c, separation_distance(k, delta), seed=seed, budget=budget, auto_scale=True)
        return CodedAddressing(fam.ground // k, k, fam)
    raise InvalidSpecError(f"unknown layout {layout!r}")


def _status(checks, in_hypothesis):
    if all(checks.values()):
        return "pass"
    return "fail" if in_hypothesis else "out-of-hypothesis"


def _margins(audits):
    return [a.row() for a in audits]


@dataclass
class ExperimentResult:
    verdict: dict
    tree: object = None
    audits: list = field(default_factory=list)
    curve: list = field(default_factory=list)

    @property
    def passed(self):
        return self.verdict.get("status") == "pass"


def memory_first_experiment(k, delta, impurity="gini", tie_rule="lexicographic", seed=0,
                        layout="disjoint", distribution="random", n_paths=200,
                        n_leaves=10_000, full_tree_max_k=4, depth_cap=64, check_learner=True):
    """Memory-first ordering plus the ``delta/6`` error floor on the hard target.

    For ``k <= full_tree_max_k`` the learner grows the full tree of depth
    ``2**k`` and its error is computed exactly; beyond that the learner is
    expanded along ``n_paths`` sampled paths (depth ``min(2**k, depth_cap)``)
    and the floor comes from leaf-conditional Monte Carlo over the full
    memory-only tree, required to clear ``delta/6`` by two half-widths.
    """
    G = get_impurity(impurity)
    consts = memory_first_thresholds(G, delta)
    target = build_hard_target(k, delta, layout, seed=derive_seed(seed, 1))
    D = _make_distribution(distribution, target.arity, delta, derive_seed(seed, 2))
    in_hyp = k >= consts["k0"]
    gated = not in_hyp and k < DESK_MIN_K
    floor = delta / 6.0
    checks = {}
    tree, audits, curve, summary = None, [], [], None
    full = k <= full_tree_max_k
    if check_learner:
        policy = GrowthPolicy(depth_budget=min(2**k, depth_cap),
                              expansion="full" if full else "sampled-paths",
                              n_paths=n_paths, path_seed=derive_seed(seed, 3),
                              tie_rule=tie_rule, tie_seed=derive_seed(seed, 4), record_gains=False)
        tree, audits = build_tree_exact(target, D, G, policy)
        summary = audit_query_order(audits)
        checks["no_addressing_splits"] = summary["n_addressing_splits"] == 0
        curve = depth_error_curve(tree, D)
    if full and tree is not None:
        report = tree_error(tree, target, D, method="exact")
        checks["error_floor"] = report.error >= floor
    else:
        report = memory_only_floor(target, D, method="mc", n_leaves=n_leaves, seed=derive_seed(seed, 5))
        checks["error_floor"] = report.error - 2.0 * report.ci_halfwidth >= floor
    verdict = {
        "experiment": "memory-first",
        "k": k, "delta": delta, "impurity": G.name, "tie_rule": tie_rule, "layout": layout,
        "c": getattr(target, "c", None), "n_addressing_bits": target.n_addr, "arity": target.arity,
        "thresholds": _jsonable(consts),
        "in_hypothesis": in_hyp, "soft_check": k < 8,
        "error_floor": floor, "error": report.to_dict(),
        "audit": summary, "checks": checks,
        "margins": _margins(audits),
        "status": "out-of-hypothesis" if gated else _status(checks, in_hyp),
    }
    return ExperimentResult(verdict, tree, audits, curve)


def agnostic_experiment(k, delta, epsilon, impurity="gini", seed=0, tie_rule="lexicographic",
                        layout="gv", distribution="random", n_paths=200, n_leaves=10_000,
                        exact_free_cap=16):
    """Agnostic construction: closeness to the junta plus the 1/8 error floor."""
    G = get_impurity(impurity)
    consts = memory_first_thresholds(G, delta)
    base = build_hard_target(k, delta, layout, seed=derive_seed(seed, 1))
    pi, part, g = make_agnostic_restriction(base, epsilon)
    if len(part.A1) < 2:
        raise InfeasibleEpsilonError(
            f"epsilon={epsilon} at k={k} leaves |A1|={len(part.A1)}; need at least 2 accepting addresses"
        )
    f_pi = RestrictedTarget(base, pi)
    D = _make_distribution(distribution, base.arity, delta, derive_seed(seed, 2))
    n_free = len(part.Afree)
    free_idx = {base.memory_index(a) for a in part.Afree}

    dist = junta_distance(f_pi, g, D)
    slack = 2.0 ** -k + 5.0 ** -k
    checks = {"junta_distance_below_epsilon": dist < epsilon}

    exact = n_free <= exact_free_cap
    policy = GrowthPolicy(depth_budget=n_free, expansion="full" if exact else "sampled-paths",
                          n_paths=n_paths, path_seed=derive_seed(seed, 3), tie_rule=tie_rule,
                          tie_seed=derive_seed(seed, 4), record_gains=False)
    tree, audits = build_tree_exact(f_pi, D, G, policy)
    checks["free_memory_first"] = all(a.chosen in free_idx for a in audits)

    lower = len(part.A1) * (2.0 ** -k - 5.0 ** -k)
    upper = 1.0 - len(part.A0) * (2.0 ** -k - 5.0 ** -k)
    leaf_mus = [tree.mean[v] for v in tree.leaves()]
    checks["leaf_mean_bounds"] = all(lower - 1e-12 <= mu <= upper + 1e-12 for mu in leaf_mus)
    if exact:
        report = tree_error(tree, f_pi, D, method="exact")
        checks["error_floor"] = report.error >= 1.0 / 8.0
    else:
        report = memory_only_floor(f_pi, D, method="mc", n_leaves=n_leaves, seed=derive_seed(seed, 5))
        checks["error_floor"] = report.error - 2.0 * report.ci_halfwidth >= 1.0 / 8.0
    in_hyp = k >= consts["k0"]
    verdict = {
        "experiment": "agnostic",
        "k": k, "delta": delta, "epsilon": epsilon, "impurity": G.name, "tie_rule": tie_rule,
        "layout": layout, "n_addressing_bits": base.n_addr, "arity": base.arity,
        "partition": {"A0": len(part.A0), "A1": len(part.A1), "Afree": n_free},
        "junta_distance": dist, "junta_distance_bound": n_free * slack,
        "leaf_mean_lower_bound": lower, "leaf_mean_upper_bound": upper,
        "thresholds": _jsonable(consts), "in_hypothesis": in_hyp,
        "error_floor": 1.0 / 8.0, "error": report.to_dict(),
        "audit": audit_query_order(audits), "checks": checks,
        "margins": _margins(audits),
        "status": _status(checks, in_hyp),
    }
    return ExperimentResult(verdict, tree, audits, depth_error_curve(tree, D))


def memory_first_frequency(k, delta, m, trials=50, impurity="gini", seed=0, depth_budget=2,
                           layout="disjoint"):
    """Fraction of sample-based builds that query no addressing bit.

    Each trial draws a fresh delta-balanced distribution and ``m`` labeled
    examples, and grows the empirical greedy tree to ``depth_budget``.
    """
    f = build_hard_target(k, delta, layout, seed=derive_seed(seed, 1))
    hits = 0
    for t in range(trials):
        D = ProductDistribution.random_balanced(f.arity, delta, derive_seed(seed, 2, m, t))
        _, audits = build_tree_sampled(f, D, impurity, GrowthPolicy(depth_budget=depth_budget,
                                                                     record_gains=False),
                                       m=m, seed=derive_seed(seed, 3, m, t))
        hits += audit_query_order(audits)["n_addressing_splits"] == 0
    return hits / trials


def _sanity_trial(t, j, n, sigma, delta, G, seed, target_kind, smoothed):
    s = derive_seed(seed, t)
    if target_kind == "parity":
        f = parity(n, (n - j + i for i in range(j)))
    else:
        f = random_junta(n, j, s)
    if smoothed:
        rng = np.random.default_rng(derive_seed(seed, t, 1))
        lo, hi = delta + sigma, 1.0 - delta - sigma
        base = rng.uniform(lo, hi, size=n)
        base = np.clip(base, np.nextafter(lo, 1.0), np.nextafter(hi, 0.0))
        D = sample_smoothed(SmoothedSpec(tuple(base), sigma, delta), derive_seed(seed, t, 2))
    else:
        D = ProductDistribution.uniform(n)
    tree, _ = build_tree_exact(f, D, G, GrowthPolicy(depth_budget=j))
    err = tree_error(tree, f, D, method="exact").error
    return bool(err <= 1e-12 and tree.depth <= j), err, tree.depth


def junta_sanity_experiment(j, n, sigma=0.05, delta=0.1, impurity="gini", trials=100, seed=0,
                            target_kind="random", smoothed=True, n_jobs=1):
    """Success rate of exact greedy builds on ``j``-juntas within depth ``j``."""
    if j > n or j < 1:
        raise InvalidSpecError("need 1 <= j <= n")
    G = get_impurity(impurity)
    args = [(t, j, n, sigma, delta, G, seed, target_kind, smoothed) for t in range(trials)]
    if n_jobs != 1:
        from joblib import Parallel, delayed

        results = Parallel(n_jobs=n_jobs)(delayed(_sanity_trial)(*a) for a in args)
    else:
        results = [_sanity_trial(*a) for a in args]
    successes = [r[0] for r in results]
    rate = sum(successes) / trials
    return {"experiment": "junta-sanity", "j": j, "n": n, "sigma": sigma, "delta": delta,
            "impurity": G.name, "trials": trials, "target_kind": target_kind,
            "smoothed": smoothed, "success_rate": rate,
            "errors": [r[1] for r in results], "depths": [r[2] for r in results]}


def parity_example(n=6, i=None, j=None, depth=2, tol=1e-12):
    """Two-bit parity under the uniform law: every variable has zero gain."""
    i = n - 2 if i is None else i
    j = n - 1 if j is None else j
    f = parity(n, (i, j))
    D = ProductDistribution.uniform(n)
    gains = {}
    for G in ("gini", "entropy", "km"):
        gains[G] = [purity_gain(f, D, G, v) for v in range(n)]
    all_zero = all(abs(g) <= tol for row in gains.values() for g in row)
    tree, _ = build_tree_exact(f, D, "gini", GrowthPolicy(depth_budget=depth))
    err = tree_error(tree, f, D, method="exact").error
    return {"experiment": "parity", "n": n, "vars": [i, j], "gains": gains,
            "all_gains_zero": all_zero, "depth": depth, "tree_error": err,
            "queried": tree.queried_variables(),
            "status": "pass" if all_zero else "fail"}


def _jsonable(d):
    return {key: (None if isinstance(v, float) and not math.isfinite(v) else v) for key, v in d.items()}


__all__ = [
    "ErrorReport", "ExperimentResult", "tree_error", "enumerate_tree_error", "depth_error_curve",
    "leaf_mean_stats", "memory_only_floor", "build_hard_target", "memory_first_experiment",
    "agnostic_experiment", "junta_sanity_experiment", "memory_first_frequency", "parity_example",
]
