"""Command-line front end.

Exit codes: 0 success, 1 verification failure, 2 configuration error.
The scalar mode defaults to ``$FLOWBERG_MODE`` (``exact`` or ``float``).
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import os
import sys
from dataclasses import asdict
from fractions import Fraction
from pathlib import Path

from .errors import FlowbergError
from .harmonic import HarmonicFunction, make_harmonic, random_harmonic
from .kernel import KernelEvaluator
from .measure import AmbientChain, FlowMeasure, LevelWeight, canonical_flow, random_flow
from .scalars import EXACT, normalize_mode, to_json_scalar
from .toeplitz import (ToeplitzParams, condition_report, corollary_check, norm_probe)
from .tree import TreeGenSpec, TruncatedTree, build_tree, homogeneous, stratified_sample
from .verify import SUITES, SuiteOptions, run_suite

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


class UsageError(FlowbergError):
    pass


def _write(text: str, out: str | None) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _dump(obj, out):
    _write(json.dumps(obj, indent=2, sort_keys=False, default=_json_default) + "\n", out)


def _json_default(o):
    if isinstance(o, Fraction):
        return str(o)
    if hasattr(o, "item"):
        return o.item()
    if isinstance(o, float) and not math.isfinite(o):
        return str(o)
    raise TypeError(f"not serialisable: {type(o).__name__}")


def _clean(obj):
    """Replace non-finite floats so the output stays valid JSON."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    if hasattr(obj, "item"):
        return _clean(obj.item())
    return obj


def _load_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc


def _load_tree(path: str) -> TruncatedTree:
    return TruncatedTree.from_dict(_load_json(path))


def _load_measure(tree_path: str, measure_path: str, mode: str | None):
    tree = _load_tree(tree_path)
    data = _load_json(measure_path)
    # an explicit flag or $FLOWBERG_MODE beats the mode stored in the file
    m = FlowMeasure.from_dict(data, tree, mode or os.environ.get("FLOWBERG_MODE"))
    if "sigma" not in data:
        raise UsageError("measure file lacks a sigma entry")
    sigma = LevelWeight.from_dict(data["sigma"], m.mode)
    return tree, m, sigma


def _depths(spec: str) -> list[int]:
    spec = spec.strip()
    if not spec:
        return []
    if ":" in spec:
        a, b = spec.split(":")
        return list(range(int(a), int(b) + 1))
    return [int(v) for v in spec.split(",") if v.strip()]


# ---------------------------------------------------------------------------


def cmd_gen(args) -> int:
    top = args.top
    bot = top - args.depth if args.bot is None else args.bot
    branching = tuple(int(v) for v in args.branching.split(",")) if args.branching else None
    spec = TreeGenSpec(args.kind, top, bot, q=args.q, branching=branching, below_q=args.below_q,
                       min_deg=args.min, max_deg=args.max, seed=args.seed, mode=args.mode)
    tree = build_tree(spec)
    data = tree.to_dict()
    data["generator"] = {k: v for k, v in asdict(spec).items() if v is not None}
    _dump(data, args.output)
    return 0


def cmd_measure(args) -> int:
    tree = _load_tree(args.tree)
    mode = normalize_mode(args.mode)
    if args.random_seed is not None:
        m = random_flow(tree, args.random_seed, (args.lo, args.hi), mode,
                        apex_mass=args.apex_mass, chain_ratio=args.chain_ratio,
                        below_branching=args.below_q)
    else:
        m = canonical_flow(tree, mode, chain_ratio=args.chain_ratio, below_branching=args.below_q)
    if args.sigma_table:
        sigma = LevelWeight.from_dict(_load_json(args.sigma_table), mode)
    else:
        sigma = LevelWeight.exponential(args.sigma_exp, mode)
    data = m.to_dict(sigma)
    data["generator"] = {"random_seed": args.random_seed, "lo": args.lo, "hi": args.hi}
    _dump(data, args.output)
    return 0


def cmd_harmonic(args) -> int:
    _, m, _ = _load_measure(args.tree, args.measure, args.mode)
    if args.leaves:
        raw = _load_json(args.leaves)
        leaves = {int(k): v for k, v in raw.items()}
        f = make_harmonic(m, leaves)
    else:
        f = random_harmonic(m, args.seed)
    data = f.to_dict()
    data["seed"] = None if args.leaves else args.seed
    _dump(data, args.output)
    return 0


def cmd_kernel(args) -> int:
    tree, m, sigma = _load_measure(args.tree, args.measure, args.mode)
    ev = KernelEvaluator(m, sigma)
    if args.pairs:
        pairs = [tuple(map(int, p)) for p in _load_json(args.pairs)]
    else:
        pairs = [(x, y) for x in range(tree.n) for y in range(x, tree.n)]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    exact = m.mode == EXACT
    w.writerow(["x", "y", "confluent", "value_num", "value_den", "certified_err"] if exact
               else ["x", "y", "confluent", "value", "certified_err"])
    err = to_json_scalar(ev.certified_error)
    for x, y in pairs:
        if not (0 <= x < tree.n and 0 <= y < tree.n):
            raise UsageError(f"pair ({x}, {y}) is outside the window")
        v = ev.kernel(x, y)
        c = tree.confluent(x, y)
        if exact:
            w.writerow([x, y, c, v.numerator, v.denominator, err])
        else:
            w.writerow([x, y, c, repr(float(v)), err])
    _write(buf.getvalue(), args.output)
    return 0


def _verify_inputs(args):
    if args.tree:
        if not args.measure:
            raise UsageError("--tree needs --measure")
        tree, m, sigma = _load_measure(args.tree, args.measure, args.mode)
        config = {"tree": args.tree, "measure": args.measure}
    else:
        mode = normalize_mode(args.mode)
        tree = homogeneous(args.q, args.top, args.depth)
        m = canonical_flow(tree, mode)
        sigma = LevelWeight.exponential(args.k, mode)
        config = {"q": args.q, "k": str(args.k), "top": args.top, "depth": args.depth}
    config["mode"] = m.mode
    return m, sigma, config


def cmd_verify(args) -> int:
    m, sigma, config = _verify_inputs(args)
    opts = SuiteOptions(functions=args.functions, seed=args.seed, chain_length=args.chain_length,
                        sample_threshold=args.sample_threshold, per_level=args.per_level)
    suites = sorted(SUITES) if args.suite == "all" else [args.suite]
    reports = [run_suite(s, m, sigma, opts, config) for s in suites]
    out = [_clean(r.to_dict()) for r in reports]
    _dump(out[0] if len(out) == 1 else out, args.output)
    return 1 if any(r.failures for r in reports) else 0


def _parse_params(text: str, q: int | None, p) -> ToeplitzParams:
    vals = {}
    for item in text.split(","):
        if not item.strip():
            continue
        key, _, val = item.partition("=")
        vals[key.strip()] = Fraction(val.strip())
    if set(vals) >= {"a", "b", "c", "d"}:
        if q is None:
            raise UsageError("exponent parameters need --q")
        return ToeplitzParams.from_exponents(q, *(vals[k] for k in "abcd"), p)
    if set(vals) >= {"ka", "kb", "kc", "kd"}:
        return ToeplitzParams(*(float(vals[k]) for k in ("ka", "kb", "kc", "kd")), p=float(p), q=q)
    raise UsageError("--params needs a,b,c,d or ka,kb,kc,kd")


def _probe_record(params: ToeplitzParams, q: int, p, depths, operator: str, tau: float, eps) -> dict:
    tree = homogeneous(q, 0, 1)
    m = canonical_flow(tree, "float")
    rep = condition_report(params, m)
    probe = norm_probe(params, depths, operator, q=q, tau=tau, eps=eps)
    out = {"conditions": rep.to_dict(), "probe": probe.to_dict()}
    if params.exponents is not None:
        out["corollary"] = asdict(corollary_check(q, *params.exponents, p))
    return out


def cmd_probe(args) -> int:
    if args.tree_family != "homogeneous":
        raise UsageError("only the homogeneous family is supported by the probe")
    p = Fraction(args.p)
    params = _parse_params(args.params, args.q, p)
    depths = _depths(args.depths)
    out = _probe_record(params, args.q, p, depths, args.probe, args.tau, args.eps)
    out["config"] = {"q": args.q, "params": args.params, "p": args.p, "depths": depths,
                     "operator": args.probe, "tau": args.tau, "eps": args.eps}
    _dump(_clean(out), args.output)
    return 0


SWEEP_COLUMNS = ["a", "b", "c", "d", "p", "nec_i", "nec_ii", "suf_1", "suf_2", "interval_lo",
                 "interval_hi", "probe_slope", "verdict", "probe_class", "corollary_bounded",
                 "stated_reading_bounded", "discrepancy"]


def sweep_rows(grid: dict):
    q = int(grid.get("q", 2))
    ps = [Fraction(str(v)) for v in grid.get("p", [2])]
    depths = grid.get("depths", "3:10")
    depths = _depths(depths) if isinstance(depths, str) else [int(d) for d in depths]
    operator = grid.get("operator", "U")
    tau = float(grid.get("tau", 2.0))
    eps = grid.get("eps")
    tree = homogeneous(q, 0, 1)
    m = canonical_flow(tree, "float")
    for p, a, b, c, d in itertools.product(ps, grid["a"], grid["b"], grid["c"], grid["d"]):
        params = ToeplitzParams.from_exponents(q, a, b, c, d, p)
        rep = condition_report(params, m)
        probe = norm_probe(params, depths, operator, q=q, tau=tau, eps=eps)
        cor = corollary_check(q, a, b, c, d, p)
        iv = rep.schur_interval
        yield {
            "a": a, "b": b, "c": c, "d": d, "p": str(p),
            "nec_i": rep.necessary_i.holds, "nec_ii": rep.necessary_ii.holds,
            "suf_1": rep.sufficient_1.holds, "suf_2": rep.sufficient_2.holds,
            "interval_lo": "" if iv is None else repr(iv[0]),
            "interval_hi": "" if iv is None else repr(iv[1]),
            "probe_slope": repr(probe.slope), "verdict": rep.verdict,
            "probe_class": probe.classification, "corollary_bounded": cor.bounded,
            "stated_reading_bounded": cor.stated_equality and cor.inequality,
            "discrepancy": cor.discrepancy,
        }


def cmd_sweep(args) -> int:
    try:
        grid = tomllib.loads(Path(args.grid).read_text())
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise UsageError(f"cannot read grid: {exc}") from exc
    for key in ("a", "b", "c", "d"):
        if key not in grid:
            raise UsageError(f"grid lacks {key!r}")
    buf = io.StringIO()
    w = csv.DictWriter(buf, SWEEP_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in sweep_rows(grid):
        w.writerow(row)
    _write(buf.getvalue(), args.output)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="flowberg", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a truncated tree")
    g.add_argument("--kind", choices=["homogeneous", "radial", "random"], default="homogeneous")
    g.add_argument("--q", type=int)
    g.add_argument("--branching", help="radial: comma-separated branching numbers from the top level down")
    g.add_argument("--min", type=int)
    g.add_argument("--max", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--top", type=int, default=0)
    g.add_argument("--depth", type=int, default=4)
    g.add_argument("--bot", type=int)
    g.add_argument("--below-q", type=int)
    g.add_argument("--mode", choices=["section3", "general"], default="section3")
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_gen)

    ms = sub.add_parser("measure", help="build a flow measure and level weight")
    ms.add_argument("--tree", required=True)
    kind = ms.add_mutually_exclusive_group()
    kind.add_argument("--canonical", action="store_true", default=True)
    kind.add_argument("--random-seed", type=int)
    ms.add_argument("--lo", default="1/4")
    ms.add_argument("--hi", default="3/4")
    ms.add_argument("--apex-mass", default="1")
    ms.add_argument("--chain-ratio")
    ms.add_argument("--below-q", type=int)
    ms.add_argument("--sigma-exp", default="2")
    ms.add_argument("--sigma-table", help="JSON file with a tabulated level weight")
    ms.add_argument("--mode")
    ms.add_argument("-o", "--output")
    ms.set_defaults(func=cmd_measure)

    h = sub.add_parser("harmonic", help="harmonic function from leaf data")
    h.add_argument("--tree", required=True)
    h.add_argument("--measure", required=True)
    h.add_argument("--leaves")
    h.add_argument("--seed", type=int, default=0)
    h.add_argument("--mode")
    h.add_argument("-o", "--output")
    h.set_defaults(func=cmd_harmonic)

    k = sub.add_parser("kernel", help="dump kernel values as CSV")
    k.add_argument("--tree", required=True)
    k.add_argument("--measure", required=True)
    k.add_argument("--pairs")
    k.add_argument("--mode")
    k.add_argument("-o", "--output")
    k.set_defaults(func=cmd_kernel)

    v = sub.add_parser("verify", help="run a verification suite")
    v.add_argument("--suite", required=True, choices=sorted(SUITES) + ["all"])
    v.add_argument("--tree")
    v.add_argument("--measure")
    v.add_argument("--q", type=int, default=2)
    v.add_argument("--k", default="2")
    v.add_argument("--top", type=int, default=0)
    v.add_argument("--depth", type=int, default=6)
    v.add_argument("--functions", type=int, default=10)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--chain-length", type=int, default=12)
    v.add_argument("--sample-threshold", type=int, default=2000)
    v.add_argument("--per-level", type=int, default=8)
    v.add_argument("--mode")
    v.add_argument("-o", "--output")
    v.set_defaults(func=cmd_verify)

    for name in ("probe", "toeplitz"):
        pr = sub.add_parser(name, help="Toeplitz condition report and norm-growth probe")
        pr.add_argument("--tree-family", default="homogeneous")
        pr.add_argument("--q", type=int, default=2)
        pr.add_argument("--params", required=True, help="a=1,b=2,c=3,d=1 or ka=..,kb=..,kc=..,kd=..")
        pr.add_argument("--p", default="2")
        pr.add_argument("--depths", default="3:10")
        pr.add_argument("--probe", default="U", choices=["U", "V", "P"])
        pr.add_argument("--tau", type=float, default=2.0)
        pr.add_argument("--eps", type=float)
        pr.add_argument("-o", "--output")
        pr.set_defaults(func=cmd_probe)

    sw = sub.add_parser("sweep", help="condition/probe sweep over a TOML parameter grid")
    sw.add_argument("--grid", required=True)
    sw.add_argument("-o", "--output")
    sw.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        return args.func(args)
    except FlowbergError as exc:
        print(f"flowberg: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
