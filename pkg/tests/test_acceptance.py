"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the summary lines
inline; they are also printed with output capture disabled.
"""

import math
import time

import numpy as np
import pytest

from conftest import brute_split, cube, cube_weights
from greedytree.codes import distance, gv_search, min_weight_gray, separation_distance
from greedytree.distributions import ProductDistribution, derive_seed
from greedytree.evaluation import (
    agnostic_experiment,
    junta_sanity_experiment,
    memory_first_experiment,
    memory_first_frequency,
    parity_example,
)
from greedytree.exceptions import SearchFailedError
from greedytree.impurity import GINI, builtin_impurities, gain_ratio_bounds, purity_gain
from greedytree.learner import GrowthPolicy, audit_query_order, build_tree_exact
from greedytree.targets import (
    AddressingTarget,
    CodedAddressing,
    DisjointParityAddressing,
    JuntaTable,
    address_pmf,
    enumerate_address_pmf,
    parity,
)

pytestmark = pytest.mark.slow


@pytest.fixture
def report(capsys):
    def emit(number, name, ok, detail, elapsed, limit):
        within = elapsed <= limit
        status = "PASS" if ok and within else "FAIL"
        line = f"CRITERION {number} [{name}]: {status} ({detail}; {elapsed:.1f}s of {limit}s)"
        with capsys.disabled():
            print("\n" + line)
        assert ok, line
        assert within, line

    return emit


def _balanced_variants(n, delta, seed):
    """A random delta-balanced law plus the extreme ones with every bias at delta or 1 - delta."""
    rng = np.random.default_rng(seed)
    yield ProductDistribution.random_balanced(n, delta, seed)
    yield ProductDistribution(np.full(n, delta), delta=delta)
    yield ProductDistribution(np.where(rng.random(n) < 0.5, delta, 1 - delta), delta=delta)


# 1 ---------------------------------------------------------------------------

def test_criterion_1_gain_ratio(report):
    start = time.perf_counter()
    rng = np.random.default_rng(1)
    checked = bad = 0
    worst_lo, worst_hi = math.inf, 0.0
    for t in range(1000):
        n = int(rng.integers(1, 9))
        delta = float(rng.uniform(0.05, 0.5))
        f = JuntaTable(n, tuple(range(n)), rng.integers(0, 2, size=1 << n))
        if t % 4 == 0:  # extreme biases
            b = np.where(rng.random(n) < 0.5, delta, 1 - delta)
        else:
            b = rng.uniform(delta, 1 - delta, size=n)
        D = ProductDistribution(b, delta=delta)
        kappa = max(2 / (8 * delta * (1 - delta)), 1.0)
        X = cube(n)
        w = cube_weights(X, D.biases)
        y = f.eval_batch(X).astype(float)
        for i in range(n):
            r = gain_ratio_bounds(f, D, GINI, i)
            # independent route: cube enumeration
            _, p, mu0, mu1 = brute_split(y, X, w, i)
            # parent mean as the mixture of the children, and
            # 4a(1-a) - 4b(1-b) = 4(a-b)(1-a-b) to avoid cancellation near mu0 = mu1
            mean = p * mu1 + (1 - p) * mu0
            gain = 4 * (p * (mean - mu1) * (1 - mean - mu1) + (1 - p) * (mean - mu0) * (1 - mean - mu0))
            sq = (mu0 - mu1) ** 2
            if sq > 1e-12:
                ok = 1 / kappa - 1e-9 <= gain / sq <= kappa + 1e-9
                worst_lo = min(worst_lo, gain / sq * kappa)
                worst_hi = max(worst_hi, gain / sq / kappa)
            else:
                ok = gain <= 1e-12
            ok = ok and r.ratio_ok and abs(r.gain - gain) <= 1e-12
            checked += 1
            bad += not ok
    elapsed = time.perf_counter() - start
    report(1, "gain ratio within [1/kappa, kappa]", bad == 0,
           f"{checked} variable checks on 1000 instances, {bad} violations, "
           f"min ratio*kappa={worst_lo:.3f}, max ratio/kappa={worst_hi:.3f}", elapsed, 60)


# 2 ---------------------------------------------------------------------------

def _group_parity_law(size, biases):
    """Pr[xor of the group = 1] by enumerating the group's 2**size settings."""
    g = AddressingTarget(np.ones((1, size), dtype=bool))
    pmf = enumerate_address_pmf(g, ProductDistribution._conditioned(np.concatenate([biases, [0.5, 0.5]])))
    return pmf[1]


def _fck_group_laws(f, b):
    return np.array([_group_parity_law(f.group, b[i * f.group:(i + 1) * f.group]) for i in range(f.k)])


def _pmf_from_group_laws(q):
    k = q.size
    bits = ((np.arange(1 << k)[:, None] >> np.arange(k - 1, -1, -1)) & 1).astype(bool)
    return np.prod(np.where(bits, q, 1 - q), axis=1)


def test_criterion_2_address_uniformity(report):
    start = time.perf_counter()
    deltas = (0.1, 0.25, 0.3, 0.4, 0.5)
    worst_ratio = 0.0
    worst_match = 0.0
    n_layouts = n_coded = n_cond = 0
    failures = []
    for delta in deltas:
        c0 = math.ceil(math.log(5) / delta - 1e-9)
        layouts = []
        for k in range(1, 21):
            for c in range(c0, 20 // k + 1):
                layouts.append(("fck", DisjointParityAddressing(c, k)))
        for k in range(1, 21):
            d = separation_distance(k, delta)
            c = 20 // k
            if c < 1 or d > c * k:
                continue
            try:
                fam = gv_search(k, c, d, seed=derive_seed(2, k), budget=20_000)
            except SearchFailedError:
                continue
            assert distance(fam) >= d
            layouts.append(("coded", CodedAddressing(c, k, fam)))
            n_coded += 1
        for kind, f in layouts:
            n_layouts += 1
            bound = 5.0 ** -f.k
            generic = AddressingTarget(f.sets)
            for s, D in enumerate(_balanced_variants(f.arity, delta, derive_seed(2, n_layouts))):
                b = D.biases
                transform = generic.pmf(b[: f.n_addr])
                if kind == "fck":
                    q = _fck_group_laws(f, b)
                    oracle = _pmf_from_group_laws(q)
                else:
                    oracle = enumerate_address_pmf(f, D)
                worst_match = max(worst_match, float(np.abs(transform - oracle).max()))
                worst_match = max(worst_match, float(np.abs(address_pmf(f, D) - oracle).max()))
                dev = float(np.abs(transform - 2.0 ** -f.k).max())
                worst_ratio = max(worst_ratio, dev / bound)
                for j in range(f.n_addr):
                    for bit in (0, 1):
                        pmf = address_pmf(f, D, [(j, bit)])
                        n_cond += 1
                        dev = float(np.abs(pmf - 2.0 ** -f.k).max())
                        worst_ratio = max(worst_ratio, dev / bound)
                        if dev > bound:
                            failures.append((kind, f.k, delta, j, bit, dev))
                # enumeration oracle for a conditioned law as well
                bb = b.copy()
                bb[0] = 1.0
                if kind == "fck":
                    # conditioning bit 0 only changes the law of group 0
                    q = q.copy()
                    q[0] = _group_parity_law(f.group, bb[: f.group])
                    cond = _pmf_from_group_laws(q)
                else:
                    cond = enumerate_address_pmf(f, ProductDistribution._conditioned(bb))
                worst_match = max(worst_match, float(np.abs(address_pmf(f, D, [(0, 1)]) - cond).max()))
    elapsed = time.perf_counter() - start
    ok = not failures and worst_ratio <= 1.0 and worst_match <= 1e-12
    report(2, "address law within 5^-k of uniform", ok,
           f"{n_layouts} layouts ({n_coded} coded), {n_cond} conditionings, "
           f"max deviation/5^-k={worst_ratio:.2e}, transform vs enumeration={worst_match:.1e}",
           elapsed, 120)


# 3 ---------------------------------------------------------------------------

def test_criterion_3_memory_first(report):
    start = time.perf_counter()
    finite = [G for G in builtin_impurities() if G.finite]
    min_margin = math.inf
    runs = 0
    failures = []
    for k in (4, 5, 6):
        for delta in (0.1, 0.25, 0.5):
            c = math.ceil(math.log(5) / delta - 1e-9)
            fam = gv_search(k, c, separation_distance(k, delta), seed=derive_seed(3, k), auto_scale=True)
            targets = [("fck", DisjointParityAddressing(c, k)),
                       ("fcks", CodedAddressing(fam.ground // k, k, fam))]
            for name, f in targets:
                D = ProductDistribution.random_balanced(f.arity, delta, derive_seed(3, k, int(delta * 100)))
                for G in finite:
                    for rule in ("lexicographic", "prefer-addressing"):
                        policy = GrowthPolicy(depth_budget=min(2**k, 64), expansion="sampled-paths",
                                              n_paths=200, path_seed=derive_seed(3, 1), tie_rule=rule,
                                              record_gains=False)
                        _, audits = build_tree_exact(f, D, G, policy)
                        s = audit_query_order(audits)
                        runs += 1
                        if s["n_addressing_splits"] or s["min_margin"] is None or s["min_margin"] <= 0:
                            failures.append((name, k, delta, G.name, rule, s))
                        else:
                            min_margin = min(min_margin, s["min_margin"])
    elapsed = time.perf_counter() - start
    report(3, "memory bits before addressing bits", not failures,
           f"{runs} builds, {len(failures)} failures, minimum margin {min_margin:.3e}", elapsed, 600)


# 4 ---------------------------------------------------------------------------

def test_criterion_4_error_floor(report):
    start = time.perf_counter()
    lines = []
    ok = True
    for k in (4, 6, 8):
        for delta in (0.1, 0.25):
            v = memory_first_experiment(k, delta, seed=4, n_leaves=10_000).verdict
            err = v["error"]
            margin = err["error"] - 2 * err["ci_halfwidth"] - delta / 6
            lines.append(f"k={k} d={delta}: {err['error']:.4f}+-{err['ci_halfwidth']:.4f} "
                         f"({err['method']}) vs {delta / 6:.4f}")
            ok = ok and v["checks"]["error_floor"] and margin >= 0
            ok = ok and (k > 4 or err["method"] == "exact-enumeration")
    elapsed = time.perf_counter() - start
    report(4, "error at least delta/6", ok, "; ".join(lines), elapsed, 600)


# 5 ---------------------------------------------------------------------------

def test_criterion_5_agnostic(report):
    start = time.perf_counter()
    lines = []
    ok = True
    for eps in (1 / 8, 1 / 4):
        v = agnostic_experiment(6, 0.25, eps, seed=5).verdict
        ok = ok and v["status"] == "pass" and v["junta_distance"] < eps
        ok = ok and v["error"]["error"] - 2 * v["error"]["ci_halfwidth"] >= 1 / 8
        lines.append(f"eps={eps}: dist={v['junta_distance']:.4f}, |Afree|={v['partition']['Afree']}, "
                     f"error={v['error']['error']:.4f} ({v['error']['method']}), checks={v['checks']}")
    elapsed = time.perf_counter() - start
    report(5, "agnostic construction", ok, "; ".join(lines), elapsed, 300)


# 6 ---------------------------------------------------------------------------

def test_criterion_6_parity(report):
    start = time.perf_counter()
    worst = 0.0
    n = 6
    D = ProductDistribution.uniform(n)
    for i in range(n):
        for j in range(i + 1, n):
            f = parity(n, (i, j))
            for G in builtin_impurities():
                for v in range(n):
                    worst = max(worst, abs(purity_gain(f, D, G, v)))
    out = parity_example(n)
    elapsed = time.perf_counter() - start
    report(6, "parity gains vanish under the uniform law", worst <= 1e-12 and out["all_gains_zero"],
           f"max |gain| = {worst:.1e} over all pairs and impurities", elapsed, 1)


# 7 ---------------------------------------------------------------------------

def test_criterion_7_junta_sanity(report):
    start = time.perf_counter()
    out = junta_sanity_experiment(3, 12, sigma=0.05, delta=0.1, trials=100, seed=7)
    wins = round(out["success_rate"] * 100)
    elapsed = time.perf_counter() - start
    report(7, "smoothed juntas learned exactly", wins >= 99,
           f"{wins}/100 trials reach zero error at depth <= 3", elapsed, 120)


# 8 ---------------------------------------------------------------------------

def test_criterion_8_finite_sample_trend(report):
    start = time.perf_counter()
    sizes = [2**10, 2**12, 2**14, 2**16]
    freq = [memory_first_frequency(4, 0.25, m, trials=50, seed=8) for m in sizes]
    inversions = [(a, b) for a, b in zip(freq, freq[1:]) if b < a]
    noise = 2 * math.sqrt(0.25 / 50)
    trend_ok = len(inversions) <= 1 and all(a - b <= noise for a, b in inversions)
    elapsed = time.perf_counter() - start
    report(8, "memory-first frequency grows with m", trend_ok and freq[-1] >= 0.95,
           "frequencies " + ", ".join(f"m=2^{int(math.log2(m))}: {p:.2f}" for m, p in zip(sizes, freq)),
           elapsed, 600)


# 9 ---------------------------------------------------------------------------

def test_criterion_9_gv(report):
    start = time.perf_counter()
    lines = []
    ok = True
    for k in (4, 6, 8):
        d = separation_distance(k, 0.5)
        fam = gv_search(k, math.ceil(math.log(5) / 0.5), d, seed=9, budget=100_000, auto_scale=True)
        d1, d2 = distance(fam), min_weight_gray(fam)
        ok = ok and d1 == d2 and d1 >= d
        lines.append(f"k={k}: d>={d}, ground {fam.ground}, distance {d1} (gray {d2})")
    elapsed = time.perf_counter() - start
    report(9, "GV search finds verified families", ok, "; ".join(lines), elapsed, 300)
