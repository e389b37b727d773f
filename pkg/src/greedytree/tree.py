"""Binary decision trees over {0,1}^n stored as flat node arrays."""

from __future__ import annotations

import json
import math

import numpy as np

from .targets import Restriction


class DecisionTree:
    """Binary query tree; node 0 is the root.

    ``feature[v] == -1`` marks a leaf. ``left`` follows ``x_i = 0`` and
    ``right`` follows ``x_i = 1``. ``mean[v]`` is the (exact or empirical)
    label mean of the node and leaves predict ``1[mean >= 1/2]``.
    """

    def __init__(self, n_features):
        self.n_features = int(n_features)
        self.feature = []
        self.left = []
        self.right = []
        self.parent = []
        self.branch = []
        self.mean = []
        self.depth_of = []
        self.n_samples = []
        self.meta = {}

    def add_node(self, mean, parent=-1, branch=-1, n_samples=None):
        v = len(self.feature)
        self.feature.append(-1)
        self.left.append(-1)
        self.right.append(-1)
        self.parent.append(parent)
        self.branch.append(branch)
        self.mean.append(float(mean))
        self.depth_of.append(0 if parent < 0 else self.depth_of[parent] + 1)
        self.n_samples.append(n_samples)
        return v

    def split(self, v, feature, mean0, mean1, n0=None, n1=None):
        """Turn leaf ``v`` into a query on ``feature``; returns the two children."""
        if self.feature[v] != -1:
            raise ValueError(f"node {v} is already internal")
        self.feature[v] = int(feature)
        lo = self.add_node(mean0, v, 0, n0)
        hi = self.add_node(mean1, v, 1, n1)
        self.left[v], self.right[v] = lo, hi
        return lo, hi

    # -- queries ---------------------------------------------------------
    @property
    def node_count(self):
        return len(self.feature)

    def is_leaf(self, v):
        return self.feature[v] == -1

    def leaves(self):
        return [v for v, f in enumerate(self.feature) if f == -1]

    def internal_nodes(self):
        return [v for v, f in enumerate(self.feature) if f != -1]

    @property
    def depth(self):
        return max(self.depth_of) if self.depth_of else 0

    def label(self, v):
        return int(self.mean[v] >= 0.5)

    def _path_pairs(self, v):
        pairs = []
        while self.parent[v] >= 0:
            p = self.parent[v]
            pairs.append((self.feature[p], self.branch[v]))
            v = p
        return tuple(reversed(pairs))

    def path(self, v):
        """Restriction describing the root-to-``v`` path, root first."""
        return Restriction(self._path_pairs(v))

    def queried_variables(self):
        return sorted({f for f in self.feature if f >= 0})

    def apply(self, X):
        """Leaf index reached by every row of ``X``."""
        X = np.asarray(X)
        if X.ndim == 1:
            X = X[None, :]
        feature = np.asarray(self.feature)
        left = np.asarray(self.left)
        right = np.asarray(self.right)
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        active = feature[node] >= 0
        while active.any():
            idx = rows[active]
            f = feature[node[idx]]
            go_right = X[idx, f] == 1
            node[idx] = np.where(go_right, right[node[idx]], left[node[idx]])
            active = feature[node] >= 0
        return node

    def predict(self, X):
        leaves = self.apply(X)
        return (np.asarray(self.mean)[leaves] >= 0.5).astype(np.uint8)

    def predict_mean(self, X):
        return np.asarray(self.mean)[self.apply(X)]

    def check_paths(self):
        """True when no variable is queried twice on a root-to-leaf path."""
        for v in self.leaves():
            idx = [i for i, _ in self._path_pairs(v)]
            if len(set(idx)) != len(idx):
                return False
        return True

    # -- serialization ---------------------------------------------------
    def _node_dict(self, v):
        d = {"id": v, "depth": self.depth_of[v], "mean": _finite_or_none(self.mean[v])}
        if self.n_samples[v] is not None:
            d["n_samples"] = int(self.n_samples[v])
        if self.feature[v] == -1:
            d["label"] = self.label(v)
        else:
            d["feature"] = self.feature[v]
            d["children"] = [self._node_dict(self.left[v]), self._node_dict(self.right[v])]
        return d

    def to_dict(self):
        return {"n_features": self.n_features, "depth": self.depth,
                "node_count": self.node_count, "root": self._node_dict(0),
                "meta": self.meta}

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, data):
        # node ids are kept; parents always carry smaller ids than their children
        flat = []
        stack = [(data["root"], -1, -1)]
        while stack:
            node, parent, branch = stack.pop()
            flat.append((node["id"], node, parent, branch))
            if "feature" in node:
                lo, hi = node["children"]
                stack.append((lo, node["id"], 0))
                stack.append((hi, node["id"], 1))
        flat.sort(key=lambda item: item[0])
        tree = cls(data["n_features"])
        for vid, node, parent, branch in flat:
            mean = node.get("mean")
            v = tree.add_node(math.nan if mean is None else mean, parent, branch, node.get("n_samples"))
            if v != vid:
                raise ValueError("tree node ids must be 0..N-1 with parents before children")
            if "feature" in node:
                tree.feature[v] = int(node["feature"])
            if parent >= 0:
                if branch == 0:
                    tree.left[parent] = v
                else:
                    tree.right[parent] = v
        tree.meta = dict(data.get("meta", {}))
        return tree

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _finite_or_none(x):
    return float(x) if math.isfinite(x) else None


def reference_tree(target):
    """Depth ``n_addr + 1`` tree computing an addressing target exactly.

    It queries every addressing bit in index order, then the addressed
    memory bit (constant-memory targets end at the address).
    """
    n_addr = target.n_addr
    if n_addr > 16:
        raise ValueError("reference tree is only built for at most 16 addressing bits")
    tree = DecisionTree(target.arity)
    root = tree.add_node(math.nan)
    frontier = [root]
    for j in range(n_addr):
        nxt = []
        for v in frontier:
            nxt.extend(tree.split(v, j, math.nan, math.nan))
        frontier = nxt
    for v in frontier:
        x = np.zeros(target.arity, dtype=np.uint8)
        for j, b in tree.path(v):
            x[j] = b
        a = int(target.addresses(x)[0])
        if target.memory_values is not None:
            tree.mean[v] = float(target.memory_values[a])
        else:
            tree.split(v, target.memory_index(a), 0.0, 1.0)
    return tree
