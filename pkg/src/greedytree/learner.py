"""Greedy top-down impurity-based tree induction.

Two learners share one control flow: every expanded node queries a variable
that maximizes the purity gain of the restricted target, children recurse on
the two restrictions, and recursion stops at the depth or node budget or at a
pure node.

* :func:`build_tree_exact` computes gains from exact expectation oracles of
  a target under a product distribution.
* :class:`GreedyTreeClassifier` is the finite-sample version, an sklearn
  estimator trained on 0/1 feature matrices with plug-in estimates.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .distributions import ProductDistribution, sample_input
from .exceptions import ArityMismatchError, InvalidSpecError
from .impurity import GAIN_TOL, gain_from_means, get_impurity
from .tree import DecisionTree

TIE_RULES = ("lexicographic", "prefer-addressing", "seeded-random")
EXPANSIONS = ("full", "sampled-paths")


@dataclass(frozen=True)
class GrowthPolicy:
    """Budgets, expansion strategy and tie-breaking for a build.

    ``depth_budget=None`` means "up to the number of variables" and
    ``node_budget=None`` leaves the number of internal nodes unbounded.
    With ``expansion="sampled-paths"`` only nodes on the root-to-leaf paths
    of ``n_paths`` inputs drawn from the distribution (seed ``path_seed``) are
    expanded; other children stay leaves.
    """

    depth_budget: int | None = None
    node_budget: int | None = None
    expansion: str = "full"
    n_paths: int = 200
    path_seed: int = 0
    tie_rule: str = "lexicographic"
    tie_seed: int = 0
    tol: float = GAIN_TOL
    record_gains: bool = True

    def __post_init__(self):
        if self.tie_rule not in TIE_RULES:
            raise InvalidSpecError(f"tie_rule must be one of {TIE_RULES}")
        if self.expansion not in EXPANSIONS:
            raise InvalidSpecError(f"expansion must be one of {EXPANSIONS}")
        for name in ("depth_budget", "node_budget"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise InvalidSpecError(f"{name} must be nonnegative")
        if self.n_paths < 1:
            raise InvalidSpecError("n_paths must be positive")


@dataclass
class SplitAudit:
    """Record of one split: what was available and what was chosen."""

    node_id: int
    depth: int
    restriction: tuple
    chosen: int
    kind: str
    gain: float
    runner_up_gain: float
    margin: float
    gains: np.ndarray | None = field(default=None, repr=False)

    def row(self):
        return {"node_id": self.node_id, "depth": self.depth, "chosen_var": self.chosen,
                "class": self.kind, "gain": self.gain, "runner_up_gain": self.runner_up_gain,
                "margin": self.margin}


def _choose(gains, available, kinds, rule, tol, rng):
    cand_gains = np.where(available, gains, -np.inf)
    best = cand_gains.max()
    ties = np.flatnonzero(cand_gains >= best - tol)
    if rule == "prefer-addressing":
        addr = ties[kinds[ties] == "addressing"]
        return int(addr[0] if addr.size else ties[0])
    if rule == "seeded-random":
        return int(rng.choice(ties))
    return int(ties[0])


def _audit(node, depth, path, chosen, gains, available, kinds, keep_gains):
    kind = str(kinds[chosen])
    others = available.copy()
    others[chosen] = False
    rival = others & (kinds != kind)
    pool = rival if rival.any() else others
    runner = float(gains[pool].max()) if pool.any() else float("nan")
    g = float(gains[chosen])
    return SplitAudit(node_id=node, depth=depth, restriction=tuple(path), chosen=chosen,
                      kind=kind, gain=g, runner_up_gain=runner, margin=g - runner,
                      gains=gains.copy() if keep_gains else None)


def _is_pure(mean, tol):
    return mean <= tol or mean >= 1.0 - tol


def build_tree_exact(f, D: ProductDistribution, G, policy: GrowthPolicy = GrowthPolicy()):
    """Grow a tree on ``f`` under ``D`` with exact purity gains.

    Returns ``(tree, audits)``. Budget exhaustion is reported in
    ``tree.meta["budget_exhausted"]``; it is not an error.
    """
    G = get_impurity(G)
    if D.n != f.arity:
        raise ArityMismatchError(f"distribution has {D.n} coordinates, target arity {f.arity}")
    n = f.arity
    p = D.biases
    kinds = np.asarray(f.variable_kinds(), dtype=object)
    depth_budget = n if policy.depth_budget is None else policy.depth_budget
    rng = np.random.default_rng(policy.tie_seed)

    paths_X = None
    if policy.expansion == "sampled-paths":
        paths_X = sample_input(D, policy.path_seed, size=policy.n_paths)

    tree = DecisionTree(n)
    root = tree.add_node(f.mean(p))
    audits = []
    internal = 0
    exhausted = False
    queue = deque([(root, (), None if paths_X is None else np.arange(policy.n_paths))])
    while queue:
        v, path, rows = queue.popleft()
        depth = len(path)
        if depth >= depth_budget or depth >= n or _is_pure(tree.mean[v], policy.tol):
            continue
        if rows is not None and rows.size == 0:
            continue
        if policy.node_budget is not None and internal >= policy.node_budget:
            exhausted = True
            continue
        b = p.copy()
        available = np.ones(n, dtype=bool)
        for i, bit in path:
            b[i] = bit
            available[i] = False
        mean, mu0, mu1 = f.split_means(b)
        gains = gain_from_means(G, p, mu0, mu1)
        i = _choose(gains, available, kinds, policy.tie_rule, policy.tol, rng)
        audits.append(_audit(v, depth, path, i, gains, available, kinds, policy.record_gains))
        tree.mean[v] = mean
        lo, hi = tree.split(v, i, mu0[i], mu1[i])
        internal += 1
        if rows is None:
            queue.append((lo, path + ((i, 0),), None))
            queue.append((hi, path + ((i, 1),), None))
        else:
            ones = paths_X[rows, i] == 1
            queue.append((lo, path + ((i, 0),), rows[~ones]))
            queue.append((hi, path + ((i, 1),), rows[ones]))
    tree.meta.update({"mode": "exact", "impurity": G.name, "tie_rule": policy.tie_rule,
                      "expansion": policy.expansion, "depth_budget": depth_budget,
                      "node_budget": policy.node_budget, "budget_exhausted": exhausted,
                      "internal_nodes": internal})
    return tree, audits


def empirical_gains(G, X, y):
    """Plug-in purity gains of every column of ``X`` for labels ``y``.

    Returns ``(mean, gains, mu0, mu1, counts1)``. Columns constant on the
    sample get zero gain; their empty side's mean is reported as the parent
    mean.
    """
    n = X.shape[0]
    mean = y.mean()
    counts1 = X.sum(axis=0, dtype=np.int64)
    ones1 = y.astype(np.int64) @ X.astype(np.int64)
    counts0 = n - counts1
    with np.errstate(invalid="ignore", divide="ignore"):
        mu1 = np.where(counts1 > 0, ones1 / np.maximum(counts1, 1), mean)
        mu0 = np.where(counts0 > 0, (y.sum() - ones1) / np.maximum(counts0, 1), mean)
    phat = counts1 / n
    gains = gain_from_means(G, phat, mu0, mu1)
    return float(mean), gains, mu0, mu1, counts1


def _grow_empirical(X, y, G, policy, kinds):
    n_rows, n = X.shape
    depth_budget = n if policy.depth_budget is None else policy.depth_budget
    rng = np.random.default_rng(policy.tie_seed)
    tree = DecisionTree(n)
    root = tree.add_node(y.mean() if n_rows else 0.0, n_samples=n_rows)
    audits = []
    internal = 0
    exhausted = False
    queue = deque([(root, (), np.arange(n_rows))])
    while queue:
        v, path, rows = queue.popleft()
        depth = len(path)
        if rows.size == 0 or depth >= depth_budget or depth >= n:
            continue
        if _is_pure(tree.mean[v], 0.0):
            continue
        if policy.node_budget is not None and internal >= policy.node_budget:
            exhausted = True
            continue
        available = np.ones(n, dtype=bool)
        for i, _ in path:
            available[i] = False
        Xr, yr = X[rows], y[rows]
        mean, gains, mu0, mu1, c1 = empirical_gains(G, Xr, yr)
        i = _choose(gains, available, kinds, policy.tie_rule, policy.tol, rng)
        audits.append(_audit(v, depth, path, i, gains, available, kinds, policy.record_gains))
        ones = Xr[:, i] == 1
        # an empty child inherits the parent mean, hence the parent majority label
        lo, hi = tree.split(v, i, mu0[i], mu1[i], int((~ones).sum()), int(ones.sum()))
        internal += 1
        queue.append((lo, path + ((i, 0),), rows[~ones]))
        queue.append((hi, path + ((i, 1),), rows[ones]))
    tree.meta.update({"mode": "sampled", "impurity": G.name, "tie_rule": policy.tie_rule,
                      "depth_budget": depth_budget, "node_budget": policy.node_budget,
                      "budget_exhausted": exhausted, "internal_nodes": internal,
                      "n_samples": int(n_rows)})
    return tree, audits


class GreedyTreeClassifier(ClassifierMixin, BaseEstimator):
    """Impurity-based greedy decision tree for binary features and labels.

    Parameters
    ----------
    impurity : {"gini", "entropy", "km"}, default="gini"
        Splitting criterion.
    max_depth : int, default=None
        Depth budget; ``None`` grows until nodes are pure or features run out.
    max_nodes : int, default=None
        Budget on the number of internal nodes, expanded breadth-first.
    tie_rule : {"lexicographic", "prefer-addressing", "seeded-random"}
        How to pick among gains within ``tol`` of the maximum.
    random_state : int, default=None
        Seed for the ``seeded-random`` tie rule.
    tol : float, default=1e-12
        Gain tolerance that defines a tie.

    Attributes
    ----------
    tree_ : DecisionTree
    audits_ : list of SplitAudit
    n_features_in_ : int
    classes_ : ndarray of shape (2,)
    """

    def __init__(self, impurity="gini", max_depth=None, max_nodes=None,
                 tie_rule="lexicographic", random_state=None, tol=GAIN_TOL):
        self.impurity = impurity
        self.max_depth = max_depth
        self.max_nodes = max_nodes
        self.tie_rule = tie_rule
        self.random_state = random_state
        self.tol = tol

    def fit(self, X, y, feature_kinds=None):
        """Grow the tree on a 0/1 design matrix.

        ``feature_kinds`` optionally tags columns (for example
        ``"addressing"`` or ``"memory"``) for audits and the
        ``prefer-addressing`` tie rule.
        """
        X, y = check_X_y(X, y, dtype=None)
        if not np.isin(X, (0, 1)).all() or not np.isin(y, (0, 1)).all():
            raise ValueError("GreedyTreeClassifier expects 0/1 features and labels")
        X = X.astype(np.uint8)
        y = y.astype(np.uint8)
        kinds = (np.full(X.shape[1], "input", dtype=object) if feature_kinds is None
                 else np.asarray(feature_kinds, dtype=object))
        if kinds.shape != (X.shape[1],):
            raise ValueError("feature_kinds must have one entry per column")
        policy = GrowthPolicy(depth_budget=self.max_depth, node_budget=self.max_nodes,
                              tie_rule=self.tie_rule,
                              tie_seed=0 if self.random_state is None else self.random_state,
                              tol=self.tol, record_gains=False)
        self.n_features_in_ = X.shape[1]
        self.classes_ = np.array([0, 1])
        self.tree_, self.audits_ = _grow_empirical(X, y, get_impurity(self.impurity), policy, kinds)
        return self

    def _validate(self, X):
        check_is_fitted(self, "tree_")
        X = check_array(X, dtype=None)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X

    def predict(self, X):
        X = self._validate(X)
        return self.tree_.predict(X)

    def predict_proba(self, X):
        X = self._validate(X)
        m = self.tree_.predict_mean(X)
        return np.column_stack([1.0 - m, m])


def build_tree_sampled(f, D: ProductDistribution, G, policy: GrowthPolicy = GrowthPolicy(),
                       m=1000, seed=0):
    """Draw ``m`` labeled examples ``(x, f(x))`` from ``D`` and grow on them."""
    if m < 1:
        raise InvalidSpecError("m must be at least 1")
    X = sample_input(D, seed, size=m)
    y = f.eval_batch(X)
    G = get_impurity(G)
    kinds = np.asarray(f.variable_kinds(), dtype=object)
    return _grow_empirical(X, y, G, policy, kinds)


def audit_query_order(audits):
    """Summarize whether a build queried memory bits before addressing bits.

    ``min_margin`` is the smallest gap between a chosen memory bit's gain
    and the best addressing-bit gain at that node (``None`` when no such
    pair exists).
    """
    first = None
    for a in audits:
        if a.kind == "addressing" and (first is None or a.depth < first):
            first = a.depth
    margins = [a.margin for a in audits if a.kind == "memory" and np.isfinite(a.margin)]
    max_depth = max((a.depth for a in audits), default=-1)
    return {
        "first_addressing_depth": first,
        "memory_prefix_length": first if first is not None else max_depth + 1,
        "min_margin": min(margins) if margins else None,
        "n_splits": len(audits),
        "n_addressing_splits": sum(a.kind == "addressing" for a in audits),
    }
