"""Command-line interface: ``nnbounds <subcommand> [options]``.

Exit status: 0 on success (or a passing verification), 1 when ``lip-verify``
finds a violation, 2 on invalid input.  Options can also come from a
``key = value`` file given with ``--config``; flags on the command line win.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import bounds, entropy, experiments, lipschitz, network
from .network import Architecture, Grid, InputError

OUTPUT_DIR_ENV = "NNBOUNDS_OUTPUT_DIR"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


_BUILTIN_TARGETS = {
    "abs": lambda x: abs(2 * x - 1),
    "zero": lambda x: 0.0,
    "sin": lambda x: math.sin(2 * math.pi * x),
    "square": lambda x: x * x,
}


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.replace(",", " ").split()]


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


def _add_arch(p, d=True):
    if d:
        p.add_argument("--d", type=int, default=1, help="input dimension")
    p.add_argument("--W", type=int, default=2, help="width")
    p.add_argument("--l", type=int, default=1, help="depth (number of hidden layers)")


def _add_act(p):
    p.add_argument("--act", default="relu", help="relu, clip, leaky_relu, tanh, or a mixture like relu+clip")
    p.add_argument("--lip", type=float, default=None, help="override the activation's Lipschitz constant")
    p.add_argument("--at-zero", type=float, default=None, help="override the activation's value at 0")


def _add_weights(p):
    p.add_argument("--w", type=float, default=1.0, help="weight bound (scale of w(n) = w * n^delta)")
    p.add_argument("--delta", type=float, default=0.0, help="growth exponent of the weight bound")


def _add_rate(p):
    p.add_argument("--rate", choices=["polylog", "logonly"], default="polylog")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=0.0)


def _add_output(p):
    p.add_argument("--format", choices=["csv", "json"], default="json")
    p.add_argument("--out", default=None, help=f"output file (relative paths resolve against ${OUTPUT_DIR_ENV})")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nnbounds", description="Bounds for feed-forward network approximation.")
    parser.add_argument("--config", default=None, help="key = value file supplying option defaults")
    parser.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("count", help="number of network parameters")
    _add_arch(p)
    _add_output(p)
    p.set_defaults(format="text")

    p = sub.add_parser("lip-bound", help="certified Lipschitz constants of the parameter map")
    _add_arch(p)
    _add_act(p)
    p.add_argument("--w", type=float, default=1.0)
    p.add_argument("--c", type=float, default=1.0, help="constant in phi(n) = c l log2(W(w+1))")
    _add_output(p)

    p = sub.add_parser("lip-verify", help="check the certified constant on random parameter pairs")
    _add_arch(p)
    _add_act(p)
    p.add_argument("--w", type=float, default=1.0)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--pairs", type=int, default=10_000)
    p.add_argument("--grid", type=int, default=None, help="grid points per axis")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scale-certificate", type=float, default=1.0, help="multiply C_l before checking (harness test)")
    _add_output(p)

    p = sub.add_parser("entropy", help="entropy numbers of a point cloud or an interval")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--cloud", help="CSV file, one point per row")
    src.add_argument("--interval", nargs=2, type=float, metavar=("A", "B"))
    src.add_argument("--lip-ball", nargs=4, type=float, metavar=("M", "B", "m", "q"),
                     help="quantized Lipschitz functions on m grid points")
    p.add_argument("--metric", choices=["sup", "euclidean"], default="sup")
    p.add_argument("--n-max", type=int, default=3)
    p.add_argument("--mode", choices=["curve", "exact", "greedy"], default="curve")
    _add_output(p)

    p = sub.add_parser("bound", help="lower rate for the approximation error at given n")
    _add_arch(p)
    _add_act(p)
    _add_weights(p)
    _add_rate(p)
    p.add_argument("--n", type=_float_list, default=None, help="parameter counts (default: exact count)")
    _add_output(p)

    p = sub.add_parser("tradeoff", help="depth/width tradeoff at a fixed parameter budget")
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--n-budget", type=int, default=2**16)
    p.add_argument("--l-list", type=_int_list, default=[1, 2, 4, 8, 16])
    _add_act(p)
    _add_weights(p)
    _add_rate(p)
    _add_output(p)

    p = sub.add_parser("super", help="classify the gap between approximation and entropy rates")
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--regime", choices=["shallow", "fixed-depth", "deep"], default="deep")
    p.add_argument("--depth", type=int, default=2, help="depth for the fixed-depth regime")
    p.add_argument("--W0", type=int, default=4, help="width for the deep regime")
    p.add_argument("--n-exp", type=_int_list, default=list(range(8, 25)), help="log2 of the n values")
    p.add_argument("--threshold", type=float, default=bounds.DEFAULT_SLOPE_THRESHOLD)
    p.add_argument("--general", action="store_true", help="use the general formula even when w is constant")
    _add_act(p)
    _add_weights(p)
    _add_rate(p)
    _add_output(p)

    p = sub.add_parser("approx", help="empirical approximation error by derivative-free search")
    _add_arch(p)
    _add_act(p)
    p.add_argument("--w", type=float, default=2.0)
    tgt = p.add_mutually_exclusive_group(required=True)
    tgt.add_argument("--target", help="CSV of grid samples: x_1..x_d, f")
    tgt.add_argument("--target-fn", choices=sorted(_BUILTIN_TARGETS), help="built-in 1-D target")
    p.add_argument("--grid", type=int, default=1024, help="grid points per axis for built-in targets")
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--refine", type=int, default=16_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--widths", type=_int_list, default=None, help="warm-started widening over these widths")
    _add_output(p)
    return parser


# -- config -----------------------------------------------------------------


def read_config(path: str) -> dict[str, str]:
    cfg = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        cfg[key.replace("-", "_")] = value
    return cfg


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config is None:
        return parser.parse_args(argv)
    cfg = read_config(known.config)
    # parse once to learn the subcommand, then re-parse with config defaults
    ns = parser.parse_args(argv)
    subparser = parser._subparsers._group_actions[0].choices[ns.command]
    actions = {a.dest: a for a in subparser._actions}
    defaults = {}
    for key, value in cfg.items():
        if key in ("command", "config"):
            continue
        if key not in actions:
            raise UsageError(f"unknown config key {key!r} for {ns.command}")
        action = actions[key]
        if action.nargs in ("+", "*") or isinstance(action.nargs, int):
            defaults[key] = [action.type(v) if action.type else v for v in value.split()]
        elif action.const is True and action.nargs == 0:
            defaults[key] = value.lower() in ("1", "true", "yes", "on")
        else:
            defaults[key] = action.type(value) if action.type else value
    subparser.set_defaults(**defaults)
    return parser.parse_args(argv)


# -- output -----------------------------------------------------------------


def _clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, (np.floating, np.integer)):
        return _clean(obj.item())
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def _json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _emit(args, text: str) -> None:
    if args.out is None:
        sys.stdout.write(text)
        return
    path = Path(args.out)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not path.is_absolute():
        path = Path(base) / path
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


# -- commands ---------------------------------------------------------------


def _arch(args) -> Architecture:
    return Architecture(args.d, args.W, args.l)


def _act(args):
    return network.get_activation(args.act, args.lip, args.at_zero)


def _rate(args):
    return bounds.PolyLog(args.alpha, args.beta) if args.rate == "polylog" else bounds.LogOnly(args.alpha)


def _w_rule(args):
    return bounds.WeightRule(args.w, args.delta)


def cmd_count(args):
    n = network.param_count(_arch(args))
    if args.format == "json":
        _emit(args, _json({"d": args.d, "W": args.W, "l": args.l, "n": n}))
    elif args.format == "csv":
        _emit(args, _csv(("d", "W", "l", "n"), [(args.d, args.W, args.l, n)]))
    else:
        _emit(args, f"{n}\n")
    return 0


def cmd_lip_bound(args):
    report = lipschitz.lipschitz_report(_arch(args), _act(args), args.w, args.c)
    if args.format == "json":
        _emit(args, _json(report.to_dict()))
    else:
        rows = []
        for j, (c, lg) in enumerate(zip(report.C, report.log2_C)):
            bound = report.layer_bounds[j] if j < len(report.layer_bounds) else ""
            rows.append((j, c, lg, bound))
        _emit(args, _csv(("j", "C", "log2_C", "layer_bound"), rows))
    return 0


def cmd_lip_verify(args):
    arch = _arch(args)
    report = lipschitz.lipschitz_report(arch, _act(args), args.w, args.c)
    if args.scale_certificate != 1.0:
        scaled = [c * args.scale_certificate for c in report.C]
        report = dataclasses.replace(report, C=scaled)
    grid = Grid(arch.d, args.grid) if args.grid else Grid.default(arch.d)
    result = lipschitz.verify_lipschitz(report, grid, args.pairs, args.seed, args.threads)
    payload = {**result.to_dict(), "arch": {"d": arch.d, "W": arch.W, "l": arch.l}, "w": args.w,
               "act": report.act.name, "pairs": args.pairs, "seed": args.seed, "grid_points": grid.size}
    if args.format == "json":
        _emit(args, _json(payload))
    else:
        _emit(args, _csv(("passed", "certified", "max_ratio", "margin", "pairs", "seed"),
                         [(result.passed, result.certified, result.max_ratio, result.margin, args.pairs, args.seed)]))
    return 0 if result.passed else 1


def cmd_entropy(args):
    if args.interval:
        a, b = args.interval
        rows = [(n, entropy.interval_entropy(a, b, n), "analytic", "") for n in range(args.n_max + 1)]
        results = [{"n": n, "radius": r, "mode": m, "centers": []} for n, r, m, _ in rows]
    else:
        if args.cloud:
            cloud = entropy.PointCloud.from_csv(args.cloud, args.metric)
        else:
            M, B, m, q = args.lip_ball
            if m != int(m):
                raise InputError("m must be an integer")
            cloud = entropy.discretize_lipschitz_ball(entropy.FunctionClassSpec(M, B, int(m), q))
            if args.metric != "sup":
                cloud = entropy.PointCloud(cloud.points, args.metric)
        if args.mode == "curve":
            covers = entropy.entropy_curve(cloud, args.n_max)
        elif args.mode == "exact":
            covers = [entropy.exact_entropy(cloud, n) for n in range(args.n_max + 1)]
        else:
            covers = [entropy.greedy_entropy(cloud, n) for n in range(args.n_max + 1)]
        results = [c.to_dict() for c in covers]
    if args.format == "json":
        _emit(args, _json({"results": results}))
    else:
        _emit(args, _csv(("n", "radius", "mode", "centers"),
                         [(r["n"], float(r["radius"]), r["mode"], " ".join(map(str, r["centers"]))) for r in results]))
    return 0


def _rows_out(args, rows, extra=None):
    if args.format == "json":
        payload = {"rows": [dict(zip(bounds.CSV_HEADER, r.as_tuple())) for r in rows],
                   "constants": bounds.CONSTANT_LABEL}
        if extra:
            payload.update(extra)
        _emit(args, _json(payload))
    else:
        _emit(args, _csv(bounds.CSV_HEADER, [r.as_tuple() for r in rows]))


def cmd_bound(args):
    arch = _arch(args)
    act = _act(args)
    rule = _w_rule(args)
    rate = _rate(args)
    n_values = args.n or [float(network.param_count(arch))]
    rows = []
    for n in n_values:
        value = bounds.approx_error_lower_bound(arch.W, arch.l, act, rule, rate, n, arch.d)
        n_out = int(n) if float(n).is_integer() else n
        rows.append(bounds.BoundRow(n_out, arch.l, arch.W, rule(n), value, "l=1" if arch.l == 1 else "l>1",
                                    bounds._formula_id(rate, arch.l)))
    _rows_out(args, rows)
    return 0


def cmd_tradeoff(args):
    rows = bounds.tradeoff_table(args.n_budget, _w_rule(args), _rate(args), _act(args), args.l_list, args.d)
    _rows_out(args, rows)
    return 0


def cmd_super(args):
    if args.regime == "shallow":
        W_rule, l_rule = bounds.shallow_regime(args.d)
    elif args.regime == "fixed-depth":
        W_rule, l_rule = bounds.fixed_depth_regime(args.depth)
    else:
        W_rule, l_rule = bounds.deep_regime(args.W0, args.d)
    n_list = [2.0**k for k in args.n_exp]
    res = bounds.superconvergence_gap(W_rule, l_rule, _w_rule(args), _rate(args), n_list, _act(args), args.d,
                                      args.threshold, not args.general)
    if args.format == "json":
        _emit(args, _json({"rows": list(res.rows()), "slope": res.slope, "log_coefficient": res.log_coefficient,
                           "plain_slope": res.plain_slope, "classification": res.classification,
                           "constants": bounds.CONSTANT_LABEL}))
    else:
        header = ("n", "W", "l", "w", "bound", "entropy_rate", "ratio", "formula_id")
        text = _csv(header, [tuple(r[h] for h in header) for r in res.rows()])
        text += f"# slope={res.slope!r} log_coefficient={res.log_coefficient!r} classification={res.classification}\n"
        _emit(args, text)
    return 0


def cmd_approx(args):
    arch = _arch(args)
    act = _act(args)
    if args.target:
        target = experiments.TargetFunction.from_csv(args.target)
    else:
        if arch.d != 1:
            raise InputError("built-in targets are one-dimensional")
        target = experiments.TargetFunction.from_function(_BUILTIN_TARGETS[args.target_fn], Grid(1, args.grid),
                                                          args.target_fn)
    budget = experiments.SearchBudget(args.samples, args.refine, args.seed)
    if args.widths:
        results = experiments.widen_monotone_experiment(target, arch, args.widths, act, args.w, budget)
        widths = args.widths
    else:
        results = [experiments.estimate_error(target, arch, act, args.w, budget)]
        widths = [arch.W]
    rows = [
        {"W": W, "l": arch.l, "n": network.param_count(Architecture(arch.d, W, arch.l)), "error": r.error,
         "sample_error": r.sample_error, "evaluations": r.evaluations, "params": r.params.values.tolist()}
        for W, r in zip(widths, results)
    ]
    if args.format == "json":
        _emit(args, _json({"target": target.label, "w": args.w, "seed": args.seed, "rows": rows}))
    else:
        header = ("W", "l", "n", "error", "sample_error", "evaluations")
        _emit(args, _csv(header, [tuple(r[h] for h in header) for r in rows]))
    return 0


COMMANDS = {
    "count": cmd_count,
    "lip-bound": cmd_lip_bound,
    "lip-verify": cmd_lip_verify,
    "entropy": cmd_entropy,
    "bound": cmd_bound,
    "tradeoff": cmd_tradeoff,
    "super": cmd_super,
    "approx": cmd_approx,
}


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _apply_config(parser, argv)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return COMMANDS[args.command](args)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else 2
    except (InputError, UsageError, ValueError, OSError) as exc:
        print(f"nnbounds: error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())
