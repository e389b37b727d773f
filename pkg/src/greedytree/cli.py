"""Command line entry point: ``greedytree <subcommand> [options]``.

Exit codes: 0 pass, 1 claim failed, 2 invalid input, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback

from .harness import EXIT_INTERNAL, EXIT_INVALID, ExperimentConfig, InvalidConfigError, run

# subcommand -> [(flag, param name, type, help)]
_PARAMS = {
    "learn": [("--mode", "mode", str, "exact (population oracle) or sampled"),
              ("--m", "m", int, "sample size for --mode sampled")],
    "gains": [],
    "verify-thm4": [("--k", "k", int, "number of address bits"),
                    ("--delta", "delta", float, "balance parameter in (0, 1/2]"),
                    ("--tie-rule", "tie_rule", str, "lexicographic, prefer-addressing or seeded-random"),
                    ("--layout", "layout", str, "disjoint or gv"),
                    ("--dist", "dist", str, "random, low, high or uniform biases"),
                    ("--n-paths", "n_paths", int, "sampled paths for k above 4"),
                    ("--n-leaves", "n_leaves", int, "Monte Carlo leaves for k above 4")],
    "verify-thm5": [("--k", "k", int, "number of address bits"),
                    ("--delta", "delta", float, "balance parameter in (0, 1/2]"),
                    ("--epsilon", "epsilon", float, "closeness to the junta"),
                    ("--tie-rule", "tie_rule", str, "tie rule"),
                    ("--layout", "layout", str, "disjoint or gv"),
                    ("--dist", "dist", str, "random, low, high or uniform biases"),
                    ("--n-leaves", "n_leaves", int, "Monte Carlo leaves when many addresses are free")],
    "junta-sanity": [("--j", "j", int, "junta size"), ("--n", "n", int, "number of variables"),
                     ("--sigma", "sigma", float, "smoothing radius"),
                     ("--delta", "delta", float, "balance parameter"),
                     ("--trials", "trials", int, "number of trials"),
                     ("--target-kind", "target_kind", str, "random or parity"),
                     ("--min-rate", "min_rate", float, "success rate required to pass")],
    "parity-example": [("--n", "n", int, "number of variables"),
                       ("--depth", "depth", int, "depth budget of the demonstration tree")],
    "gv-search": [("--k", "k", int, "number of sets"), ("--c", "c", int, "initial ground multiplier"),
                  ("--d", "d", int, "target distance"),
                  ("--delta", "delta", float, "derive d = ceil(ln5/delta * k)"),
                  ("--budget", "budget", int, "trial budget")],
    "export-dataset": [("--m", "m", int, "number of examples")],
    "address-pmf": [],
}

_WITH_TARGET = ("learn", "gains", "export-dataset", "address-pmf")


def _global_flags(default):
    common = argparse.ArgumentParser(add_help=False, argument_default=default)
    common.add_argument("--config", help="JSON config file; flags override its fields")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--jobs", type=int, help="parallel workers")
    common.add_argument("--impurity", help="gini, entropy or km")
    return common


def build_parser():
    # suppressed defaults on the subcommands keep flags given before the subcommand
    common = _global_flags(argparse.SUPPRESS)
    parser = argparse.ArgumentParser(prog="greedytree", parents=[_global_flags(None)],
                                     description="Greedy impurity-based decision tree experiments.")
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind, params in _PARAMS.items():
        p = sub.add_parser(kind, parents=[common])
        for flag, dest, typ, help_ in params:
            p.add_argument(flag, dest=f"param_{dest}", type=typ, help=help_)
        if kind in _WITH_TARGET:
            p.add_argument("--target", help="target spec as inline JSON")
            p.add_argument("--distribution", help="distribution spec as inline JSON")
        if kind == "junta-sanity":
            p.add_argument("--no-smoothing", dest="param_smoothed", action="store_const", const=False,
                           help="use the exactly uniform distribution")
        if kind == "learn":
            p.add_argument("--depth-budget", type=int, help="maximum tree depth")
    return parser


def _load_json(text, what):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidConfigError({what: f"invalid JSON ({exc.msg})"}) from None


def config_from_args(args):
    data = {}
    if args.config:
        try:
            with open(args.config) as fh:
                data = _load_json(fh.read(), "config")
        except OSError as exc:
            raise InvalidConfigError({"config": str(exc)}) from None
        if not isinstance(data, dict):
            raise InvalidConfigError({"config": "must be a JSON object"})
    data["kind"] = args.kind
    params = dict(data.get("params", {}) or {})
    for key, value in vars(args).items():
        if key.startswith("param_") and value is not None:
            params[key[len("param_"):]] = value
    data["params"] = params
    for key in ("seed", "jobs", "impurity", "out"):
        if getattr(args, key, None) is not None:
            data[key] = getattr(args, key)
    for key in ("target", "distribution"):
        if getattr(args, key, None):
            data[key] = _load_json(getattr(args, key), key)
    if getattr(args, "depth_budget", None) is not None:
        data["policy"] = dict(data.get("policy", {}) or {}, depth_budget=args.depth_budget)
    return ExperimentConfig.from_dict(data)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except InvalidConfigError as exc:
        print(json.dumps({"status": "invalid-config", "errors": exc.errors}, indent=1), file=sys.stderr)
        return EXIT_INVALID
    try:
        record = run(cfg)
    except Exception:  # pragma: no cover - defensive
        traceback.print_exc()
        return EXIT_INTERNAL
    summary = {"status": record.status, "config_hash": record.config_hash,
               "wall_time": round(record.wall_time, 3), "files": record.manifest if cfg.out else []}
    if record.error is not None:
        summary["error"] = record.error
    checks = record.verdict.get("checks")
    if checks:
        summary["checks"] = checks
    print(json.dumps(summary, indent=1, sort_keys=True))
    return record.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
