"""Experiment configuration, dispatch and result persistence.

All randomness in a run derives from ``config.seed`` through
:func:`~greedytree.distributions.derive_seed`; the random distribution of a
``learn`` run uses path ``(seed, 0)`` and sampled datasets use ``(seed, 1)``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .codes import gv_search, separation_distance
from .distributions import ProductDistribution, SmoothedSpec, derive_seed, sample_input, sample_smoothed
from .evaluation import (
    agnostic_experiment,
    depth_error_curve,
    junta_sanity_experiment,
    memory_first_experiment,
    parity_example,
    tree_error,
)
from .exceptions import GreedyTreeError, InvalidSpecError, SearchFailedError
from .impurity import _BUILTIN, purity_gain
from .learner import EXPANSIONS, TIE_RULES, GrowthPolicy, audit_query_order, build_tree_exact, build_tree_sampled
from .targets import address_pmf, as_restriction, expectation, target_from_spec

KINDS = ("learn", "gains", "verify-thm4", "verify-thm5", "junta-sanity", "parity-example",
         "gv-search", "export-dataset", "address-pmf")
AUDIT_COLUMNS = ("node_id", "depth", "chosen_var", "class", "gain", "runner_up_gain", "margin")

EXIT_PASS, EXIT_CLAIM_FAILED, EXIT_INVALID, EXIT_INTERNAL = 0, 1, 2, 3


class InvalidConfigError(InvalidSpecError):
    """Config validation failure; ``errors`` maps field paths to messages."""

    def __init__(self, errors):
        self.errors = dict(errors)
        super().__init__("; ".join(f"{k}: {v}" for k, v in self.errors.items()))


def _version():
    from . import __version__

    return __version__


# -- config -----------------------------------------------------------------

_PARAM_RULES = {
    # name: (type, check, message)
    "k": (int, lambda v: 1 <= v <= 12, "must be an integer in [1, 12]"),
    "delta": (float, lambda v: 0.0 < v <= 0.5, "must lie in (0, 1/2]"),
    "epsilon": (float, lambda v: 0.0 < v <= 1.0, "must lie in (0, 1]"),
    "sigma": (float, lambda v: v >= 0.0, "must be nonnegative"),
    "j": (int, lambda v: 1 <= v <= 4, "must be an integer in [1, 4]"),
    "n": (int, lambda v: 1 <= v <= 24, "must be an integer in [1, 24]"),
    "trials": (int, lambda v: v >= 1, "must be a positive integer"),
    "m": (int, lambda v: v >= 1, "must be a positive integer"),
    "c": (int, lambda v: v >= 1, "must be a positive integer"),
    "d": (int, lambda v: v >= 0, "must be a nonnegative integer"),
    "budget": (int, lambda v: v >= 1, "must be a positive integer"),
    "n_paths": (int, lambda v: v >= 1, "must be a positive integer"),
    "n_leaves": (int, lambda v: v >= 2, "must be an integer >= 2"),
    "depth": (int, lambda v: v >= 0, "must be a nonnegative integer"),
    "min_rate": (float, lambda v: 0.0 <= v <= 1.0, "must lie in [0, 1]"),
    "tie_rule": (str, lambda v: v in TIE_RULES, f"must be one of {TIE_RULES}"),
    "layout": (str, lambda v: v in ("disjoint", "gv"), "must be 'disjoint' or 'gv'"),
    "dist": (str, lambda v: v in ("random", "low", "high", "uniform"),
             "must be one of random, low, high, uniform"),
    "target_kind": (str, lambda v: v in ("random", "parity"), "must be 'random' or 'parity'"),
    "smoothed": (bool, lambda v: True, ""),
    "mode": (str, lambda v: v in ("exact", "sampled"), "must be 'exact' or 'sampled'"),
}

_REQUIRED = {
    "learn": ("target", "distribution"),
    "gains": ("target", "distribution"),
    "verify-thm4": ("k", "delta"),
    "verify-thm5": ("k", "delta", "epsilon"),
    "junta-sanity": ("j", "n"),
    "parity-example": (),
    "gv-search": ("k",),
    "export-dataset": ("target", "distribution", "m"),
    "address-pmf": ("target", "distribution"),
}


def _coerce(name, value, errors):
    typ, check, msg = _PARAM_RULES[name]
    try:
        if typ is int:
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise TypeError
            value = int(value)
        elif typ is float:
            if isinstance(value, bool):
                raise TypeError
            value = float(value)
        elif typ is bool:
            if not isinstance(value, bool):
                raise TypeError
        elif not isinstance(value, str):
            raise TypeError
    except (TypeError, ValueError):
        errors[f"params.{name}"] = f"expected {typ.__name__}, got {value!r}"
        return None
    if not check(value):
        errors[f"params.{name}"] = f"{msg} (got {value!r})"
        return None
    return value


def _check_distribution(spec, errors, where="distribution"):
    if not isinstance(spec, dict):
        errors[where] = "must be an object"
        return
    kind = spec.get("kind")
    if kind not in ("uniform", "fixed", "balanced", "smoothed"):
        errors[f"{where}.kind"] = "must be one of uniform, fixed, balanced, smoothed"
        return
    if "delta" in spec and spec["delta"] is not None:
        d = spec["delta"]
        if isinstance(d, bool) or not isinstance(d, (int, float)) or not 0.0 < d <= 0.5:
            errors[f"{where}.delta"] = f"must lie in (0, 1/2] (got {d!r})"
    if kind == "fixed" and not isinstance(spec.get("biases"), list):
        errors[f"{where}.biases"] = "fixed distributions need a list of biases"
    if kind == "balanced" and "delta" not in spec:
        errors[f"{where}.delta"] = "balanced distributions need delta"
    if kind == "smoothed":
        for key in ("base", "sigma", "delta"):
            if key not in spec:
                errors[f"{where}.{key}"] = "required for smoothed distributions"


@dataclass
class ExperimentConfig:
    """A validated experiment request.

    ``params`` carries the kind-specific scalars (``k``, ``delta``,
    ``epsilon``, ...); ``target`` and ``distribution`` are JSON specs.
    """

    kind: str
    params: dict = field(default_factory=dict)
    target: dict | None = None
    distribution: dict | None = None
    impurity: str = "gini"
    policy: dict = field(default_factory=dict)
    seed: int = 0
    out: str | None = None
    jobs: int = 1

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise InvalidConfigError({"config": "must be a JSON object"})
        errors = {}
        known = {"kind", "params", "target", "distribution", "impurity", "policy", "seed", "out", "jobs"}
        for key in sorted(set(data) - known):
            errors[key] = "unknown field"
        kind = data.get("kind")
        if kind not in KINDS:
            errors["kind"] = f"must be one of {KINDS}"
        params = data.get("params", {}) or {}
        clean = {}
        if not isinstance(params, dict):
            errors["params"] = "must be an object"
            params = {}
        for name, value in params.items():
            if name not in _PARAM_RULES:
                errors[f"params.{name}"] = "unknown parameter"
                continue
            v = _coerce(name, value, errors)
            if v is not None:
                clean[name] = v
        impurity = data.get("impurity", "gini")
        if impurity not in _BUILTIN:
            errors["impurity"] = f"must be one of {sorted(_BUILTIN)}"
        seed = data.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            errors["seed"] = "must be a nonnegative integer"
        jobs = data.get("jobs", 1)
        if isinstance(jobs, bool) or not isinstance(jobs, int) or jobs == 0:
            errors["jobs"] = "must be a nonzero integer"
        target = data.get("target")
        if target is not None and not isinstance(target, dict):
            errors["target"] = "must be an object"
        dist = data.get("distribution")
        if dist is not None:
            _check_distribution(dist, errors)
        policy = data.get("policy", {}) or {}
        if not isinstance(policy, dict):
            errors["policy"] = "must be an object"
        else:
            _check_policy(policy, errors)
        if kind in _REQUIRED:
            for name in _REQUIRED[kind]:
                present = data.get(name) is not None if name in ("target", "distribution") else name in params
                if not present and name not in errors and f"params.{name}" not in errors:
                    errors[name if name in ("target", "distribution") else f"params.{name}"] = "required"
        if errors:
            raise InvalidConfigError(errors)
        cfg = cls(kind, clean, target, dist, impurity, dict(policy), seed, data.get("out"), jobs)
        # build the target and distribution once so their own validators run before compute
        if target is not None:
            try:
                f = target_from_spec(target)
            except (GreedyTreeError, ValueError, TypeError, KeyError) as exc:
                raise InvalidConfigError({"target": str(exc)}) from None
            if dist is not None:
                try:
                    D = distribution_from_spec(dist, f.arity, seed)
                except (GreedyTreeError, ValueError, TypeError) as exc:
                    raise InvalidConfigError({"distribution": str(exc)}) from None
                if D.n != f.arity:
                    raise InvalidConfigError({"distribution": f"has {D.n} biases, target arity is {f.arity}"})
        return cfg

    def to_dict(self):
        d = asdict(self)
        d.pop("out")
        d.pop("jobs")
        return d

    def config_hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _check_policy(policy, errors):
    for key, value in policy.items():
        if key in ("depth_budget", "node_budget"):
            if value is not None and (isinstance(value, bool) or not isinstance(value, int) or value < 0):
                errors[f"policy.{key}"] = "must be a nonnegative integer or null"
        elif key == "expansion":
            if value not in EXPANSIONS:
                errors[f"policy.{key}"] = f"must be one of {EXPANSIONS}"
        elif key == "tie_rule":
            if value not in TIE_RULES:
                errors[f"policy.{key}"] = f"must be one of {TIE_RULES}"
        elif key in ("n_paths", "path_seed", "tie_seed"):
            if isinstance(value, bool) or not isinstance(value, int) or value < 0:
                errors[f"policy.{key}"] = "must be a nonnegative integer"
        else:
            errors[f"policy.{key}"] = "unknown policy field"


def distribution_from_spec(spec, n, seed=0):
    """Build a product distribution on ``n`` bits from its JSON spec."""
    kind = spec.get("kind")
    delta = spec.get("delta")
    if kind == "uniform":
        return ProductDistribution.uniform(n)
    if kind == "fixed":
        return ProductDistribution(np.asarray(spec["biases"], dtype=float), delta=delta)
    if kind == "balanced":
        return ProductDistribution.random_balanced(n, float(delta), derive_seed(seed, 0))
    if kind == "smoothed":
        base = spec["base"]
        if not isinstance(base, list):
            base = [float(base)] * n
        sm = SmoothedSpec(tuple(base), float(spec["sigma"]), float(delta))
        return sample_smoothed(sm, derive_seed(seed, 0))
    raise InvalidSpecError(f"unknown distribution kind {kind!r}")


# -- persistence --------------------------------------------------------------

def atomic_write(path, text):
    """Write ``text`` to ``path`` via a temporary file in the same directory and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _clean(obj):
    """JSON-safe copy: numpy scalars become Python numbers, non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def dumps(obj):
    return json.dumps(_clean(obj), sort_keys=True, indent=1) + "\n"


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        values = [r[h] for h in header] if isinstance(r, dict) else r
        w.writerow([_fmt(v) for v in values])
    return buf.getvalue()


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ""
    return v


def audits_csv(audits):
    return _csv_text(AUDIT_COLUMNS, [a.row() for a in audits])


def read_audits_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        out.append({
            "node_id": int(r["node_id"]), "depth": int(r["depth"]), "chosen_var": int(r["chosen_var"]),
            "class": r["class"], "gain": float(r["gain"]),
            "runner_up_gain": float(r["runner_up_gain"]) if r["runner_up_gain"] else None,
            "margin": float(r["margin"]) if r["margin"] else None,
        })
    return out


@dataclass
class RunRecord:
    config_hash: str
    version: str
    wall_time: float
    status: str
    verdict: dict
    manifest: list
    error: dict | None = None

    @property
    def exit_code(self):
        if self.error is not None:
            return EXIT_INVALID if self.error.get("invalid_input") else EXIT_INTERNAL
        return EXIT_CLAIM_FAILED if self.status == "fail" else EXIT_PASS

    def to_dict(self):
        return asdict(self)


# -- dispatch -------------------------------------------------------------------

def _policy(cfg, **defaults):
    kw = dict(defaults)
    kw.update(cfg.policy)
    return GrowthPolicy(**kw)


def _target_and_dist(cfg):
    f = target_from_spec(cfg.target)
    D = distribution_from_spec(cfg.distribution, f.arity, cfg.seed)
    return f, D


def _run_learn(cfg):
    f, D = _target_and_dist(cfg)
    p = cfg.params
    policy = _policy(cfg, tie_seed=derive_seed(cfg.seed, 2), path_seed=derive_seed(cfg.seed, 3))
    if p.get("mode", "exact") == "sampled":
        tree, audits = build_tree_sampled(f, D, cfg.impurity, policy, m=p.get("m", 1000),
                                          seed=derive_seed(cfg.seed, 1))
    else:
        tree, audits = build_tree_exact(f, D, cfg.impurity, policy)
    report = tree_error(tree, f, D, seed=derive_seed(cfg.seed, 4))
    verdict = {"experiment": "learn", "depth": tree.depth, "node_count": tree.node_count,
               "error": report.to_dict(), "audit": audit_query_order(audits),
               "margins": [a.row() for a in audits], "status": "pass"}
    files = {"tree.json": tree.to_json(sort_keys=True) + "\n", "audits.csv": audits_csv(audits)}
    if p.get("mode", "exact") == "exact":
        files["curve.csv"] = _csv_text(("depth", "error"), depth_error_curve(tree, D))
    return verdict, files


def _run_gains(cfg):
    f, D = _target_and_dist(cfg)
    restriction = as_restriction(cfg.target.get("condition", ()))
    rows = []
    for i in range(f.arity):
        rows.append({"var": i, "kind": f.variable_kinds()[i],
                     "gain": purity_gain(f, D, cfg.impurity, i, restriction)})
    verdict = {"experiment": "gains", "impurity": cfg.impurity, "gains": [r["gain"] for r in rows],
               "status": "pass"}
    return verdict, {"gains.csv": _csv_text(("var", "kind", "gain"), rows)}


def _experiment_files(res):
    files = {}
    if res.tree is not None:
        files["tree.json"] = res.tree.to_json(sort_keys=True) + "\n"
        files["audits.csv"] = audits_csv(res.audits)
    if res.curve:
        files["curve.csv"] = _csv_text(("depth", "error"), res.curve)
    return files


def _run_thm4(cfg):
    p = cfg.params
    kw = {k: p[k] for k in ("tie_rule", "layout", "n_paths", "n_leaves") if k in p}
    res = memory_first_experiment(p["k"], p["delta"], cfg.impurity, seed=cfg.seed,
                                  distribution=p.get("dist", "random"), **kw)
    return res.verdict, _experiment_files(res)


def _run_thm5(cfg):
    p = cfg.params
    kw = {k: p[k] for k in ("tie_rule", "layout", "n_paths", "n_leaves") if k in p}
    res = agnostic_experiment(p["k"], p["delta"], p["epsilon"], cfg.impurity, seed=cfg.seed,
                              distribution=p.get("dist", "random"), **kw)
    return res.verdict, _experiment_files(res)


def _run_junta(cfg):
    p = cfg.params
    if p["j"] > p["n"]:
        raise InvalidConfigError({"params.j": "must not exceed n"})
    out = junta_sanity_experiment(p["j"], p["n"], p.get("sigma", 0.05), p.get("delta", 0.1),
                                  cfg.impurity, p.get("trials", 100), cfg.seed,
                                  target_kind=p.get("target_kind", "random"),
                                  smoothed=p.get("smoothed", True), n_jobs=cfg.jobs)
    out["min_rate"] = p.get("min_rate", 0.99)
    out["status"] = "pass" if out["success_rate"] >= out["min_rate"] else "fail"
    rows = [{"trial": t, "error": e, "depth": d} for t, (e, d) in enumerate(zip(out["errors"], out["depths"]))]
    return out, {"trials.csv": _csv_text(("trial", "error", "depth"), rows)}


def _run_parity(cfg):
    p = cfg.params
    n = p.get("n", 6)
    return parity_example(n, depth=p.get("depth", 2)), {}


def _run_gv(cfg):
    p = cfg.params
    k = p["k"]
    if "d" in p:
        d = p["d"]
        c = p.get("c", max(1, math.ceil(d / k)))
    elif "delta" in p:
        d = separation_distance(k, p["delta"])
        c = p.get("c", math.ceil(math.log(5.0) / p["delta"] - 1e-9))
    else:
        raise InvalidConfigError({"params.d": "gv-search needs d or delta"})
    try:
        fam = gv_search(k, c, d, seed=cfg.seed, budget=p.get("budget", 100_000), auto_scale=True)
    except SearchFailedError as exc:
        return {"experiment": "gv-search", "k": k, "d": d, "trials": exc.trials,
                "message": str(exc), "status": "fail"}, {}
    from .codes import distance, min_weight_gray

    verdict = {"experiment": "gv-search", "k": k, "d": d, "ground": fam.ground,
               "distance": distance(fam), "distance_gray": min_weight_gray(fam),
               "family": fam.to_dict()}
    verdict["status"] = "pass" if min(verdict["distance"], verdict["distance_gray"]) >= d else "fail"
    return verdict, {"family.json": dumps(fam.to_dict())}


def _run_export(cfg):
    f, D = _target_and_dist(cfg)
    text = dataset_csv(f, D, cfg.params["m"], derive_seed(cfg.seed, 1))
    verdict = {"experiment": "export-dataset", "m": cfg.params["m"], "arity": f.arity,
               "expectation": expectation(f, D), "status": "pass"}
    return verdict, {"dataset.csv": text}


def _run_pmf(cfg):
    f, D = _target_and_dist(cfg)
    restriction = cfg.target.get("condition")
    pmf = address_pmf(f, D, restriction)
    k = int(round(math.log2(pmf.size)))
    dev = float(np.max(np.abs(pmf - 2.0 ** -k)))
    verdict = {"experiment": "address-pmf", "k": k, "pmf": pmf.tolist(), "max_deviation": dev,
               "bound": 5.0 ** -k, "status": "pass" if dev <= 5.0 ** -k else "fail"}
    rows = [{"address": a, "probability": float(q)} for a, q in enumerate(pmf)]
    return verdict, {"pmf.csv": _csv_text(("address", "probability"), rows)}


_DISPATCH = {
    "learn": _run_learn, "gains": _run_gains, "verify-thm4": _run_thm4, "verify-thm5": _run_thm5,
    "junta-sanity": _run_junta, "parity-example": _run_parity, "gv-search": _run_gv,
    "export-dataset": _run_export, "address-pmf": _run_pmf,
}


def run(config, out=None) -> RunRecord:
    """Validate ``config``, run it and write its artifacts into ``out``.

    Component errors are caught and recorded in the returned record (and in
    ``run.json``); config validation errors are raised before any compute.
    """
    cfg = config if isinstance(config, ExperimentConfig) else ExperimentConfig.from_dict(config)
    out = out if out is not None else cfg.out
    start = time.perf_counter()
    error = None
    try:
        verdict, files = _DISPATCH[cfg.kind](cfg)
    except (GreedyTreeError, ValueError) as exc:
        verdict, files = {"status": "error"}, {}
        error = {"type": type(exc).__name__, "message": str(exc),
                 "invalid_input": isinstance(exc, (InvalidSpecError, ValueError))}
    except Exception as exc:  # recorded, never masked as a result
        verdict, files = {"status": "error"}, {}
        error = {"type": type(exc).__name__, "message": str(exc), "invalid_input": False}
    wall = time.perf_counter() - start
    verdict = _clean(verdict)
    files["verdict.json"] = dumps(verdict)
    record = RunRecord(cfg.config_hash(), _version(), wall, verdict.get("status", "error"),
                       verdict, sorted(files) + ["run.json"], error)
    if out is not None:
        out = Path(out)
        for name, text in files.items():
            atomic_write(out / name, text)
        run_doc = record.to_dict()
        run_doc["config"] = cfg.to_dict()
        run_doc.pop("verdict")
        atomic_write(out / "run.json", dumps(run_doc))
    return record


def dataset_csv(f, D, m, seed):
    if m < 1:
        raise InvalidSpecError("m must be at least 1")
    X = sample_input(D, seed, size=m)
    y = f.eval_batch(X)
    buf = io.StringIO()
    header = ",".join([f"x_{i + 1}" for i in range(f.arity)] + ["label"])
    buf.write(header + "\n")
    np.savetxt(buf, np.column_stack([X, y]).astype(np.uint8), fmt="%d", delimiter=",")
    return buf.getvalue()


def export_dataset(target, distribution, m, seed, path):
    """Write ``m`` labeled draws as CSV with header ``x_1,...,x_n,label``."""
    return atomic_write(path, dataset_csv(target, distribution, m, seed))


def read_dataset(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.uint8, ndmin=2)
    return data[:, :-1], data[:, -1]
