"""Command-line front end.

Exit codes: 0 success / ordered / decreasing, 10 supermodular violation found,
11 w-curve violation suspected, 2 bad input, 3 chain not irreducible,
4 unstable queue without override.
"""

from __future__ import annotations

import argparse
import json
import math
import secrets
import sys
from pathlib import Path

import numpy as np

from .chainio import load_chain_file
from .ctmc import GridDistribution, TimeGrid, time_reverse
from .errors import ChainSpecError, NotIrreducible, Unstable
from .order import (
    VIOLATED,
    SearchConfig,
    check_ccp_structure,
    check_doubly_monotone,
    counterexample_search,
    sm_check,
    sm_decrease_scan,
)
from .policy import DEFAULT_POLICY
from .queue import QueueSpec, rolski_bounds, stability_check, w_curve

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_IRREDUCIBLE = 3
EXIT_UNSTABLE = 4
EXIT_SM_VIOLATION = 10
EXIT_CURVE_VIOLATION = 11

DEFAULT_SM_C_LIST = "0.5,1,2,4"
DEFAULT_SWEEP_C_LIST = "0.05,0.25,1,4,20"
DEFAULT_GRIDS = ["0,1", "0,1,2"]


class UsageError(Exception):
    pass


def _floats(text, what):
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"{what}: cannot parse {text!r}") from None
    if not vals or not all(math.isfinite(v) for v in vals):
        raise UsageError(f"{what}: need finite numbers, got {text!r}")
    return vals


def _c_list(text, min_len=1):
    cs = _floats(text, "--c-list")
    if any(c <= 0 for c in cs) or any(b <= a for a, b in zip(cs, cs[1:])):
        raise UsageError("--c-list must be positive and strictly ascending")
    if len(cs) < min_len:
        raise UsageError(f"--c-list needs at least {min_len} values")
    return cs


def _grids(texts, cap):
    grids = []
    for text in texts or DEFAULT_GRIDS:
        try:
            grids.append(TimeGrid(tuple(_floats(text, "--grid")), cap=cap))
        except ValueError as exc:
            raise UsageError(f"--grid {text}: {exc}") from None
    return grids


def _policy(args):
    return DEFAULT_POLICY.with_overrides(
        epsilon=getattr(args, "epsilon", None), dim_cap=getattr(args, "dim_cap", None))


def _seed(args):
    if args.seed is None:
        args.seed = secrets.randbelow(2 ** 32)
        print(f"seed: {args.seed}", file=sys.stderr)
    return args.seed


def _emit(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _json(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _load(args, policy=DEFAULT_POLICY):
    return load_chain_file(args.chain, policy)


# --------------------------------------------------------------------------
# subcommands


def cmd_analyze(args):
    loaded = _load(args)
    ch = loaded.chain
    mono_q, mono_r = check_doubly_monotone(ch)
    ccp = check_ccp_structure(ch)
    report = {
        "states": [{"label": s, "lambda": float(v)} for s, v in zip(ch.labels, ch.lam)],
        "Q": ch.Q.tolist(),
        "pi": ch.pi.tolist(),
        "Q_reversed": time_reverse(ch).tolist(),
        "reversible": ch.is_reversible(),
        "monotone": mono_q.to_dict(),
        "reversed_monotone": mono_r.to_dict(),
        "doubly_monotone": mono_q.monotone and mono_r.monotone,
        "ccp": ccp.to_dict(),
        "permutation": loaded.permutation,
        "notes": loaded.notes,
        "seed": None,
        "policy": DEFAULT_POLICY.as_dict(),
    }
    _emit(_json(report), args.out)
    return EXIT_OK


def _pmf_pair(path):
    try:
        doc = json.loads(Path(path).read_text())
        levels = tuple(doc["levels"])
        return GridDistribution(levels, np.array(doc["x"])), GridDistribution(levels, np.array(doc["y"]))
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise ChainSpecError(str(exc), "pmf-pair") from exc


def cmd_sm_check(args):
    policy = _policy(args)
    if args.pmf_pair:
        X, Y = _pmf_pair(args.pmf_pair)
        v = sm_check(X, Y, policy=policy)
        report = {"mode": "pmf-pair", "seed": None, "policy": policy.as_dict()}
        report.update(v.to_dict())
        _emit(_json(report), args.out)
        return EXIT_SM_VIOLATION if v.status == VIOLATED else EXIT_OK
    if not args.chain:
        raise UsageError("sm-check needs a chain file or --pmf-pair")
    cs = _c_list(args.c_list, min_len=2)
    grids = _grids(args.grid, policy.dim_cap)
    chain = _load(args, policy).chain
    scan = sm_decrease_scan(chain, cs, grids, policy.epsilon, threads=args.threads)
    report = {"mode": "scan", "c_list": cs, "seed": None, "policy": policy.as_dict()}
    report.update(scan.to_dict())
    _emit(_json(report), args.out)
    return EXIT_OK if scan.all_ordered else EXIT_SM_VIOLATION


def cmd_sweep(args):
    cs = _c_list(args.c_list)
    seed = _seed(args)
    loaded = _load(args)
    if loaded.service is None:
        raise ChainSpecError("sweep needs a service block", "service")
    spec = QueueSpec(loaded.chain, 1.0, loaded.service)
    st = stability_check(spec)
    if not st.stable and not args.allow_unstable:
        raise Unstable(f"traffic intensity {st.rho:.4g} >= 1")
    sim = {"arrivals": args.arrivals, "batches": args.batches, "warmup": args.warmup,
           "allow_unstable": args.allow_unstable}
    curve = w_curve(loaded.chain, loaded.service, cs, args.method, sim, seed, args.threads)
    _emit(curve.to_csv(), args.out)
    meta = {
        "seed": seed,
        "spec_hash": spec.spec_hash(),
        "policy": DEFAULT_POLICY.as_dict(),
        "method": curve.estimates[0].method,
        "verdict": curve.verdict,
        "offending_pairs": [[cs[k], cs[k + 1]] for k in curve.offending_pairs],
        "bounds": {k: _num(v) for k, v in curve.bounds.to_dict().items()},
        "rho": st.rho,
    }
    if args.out:
        Path(str(args.out) + ".meta.json").write_text(_json(meta))
    print(json.dumps(meta, sort_keys=True), file=sys.stderr)
    return EXIT_OK if curve.verdict == "Decreasing" else EXIT_CURVE_VIOLATION


def _num(v):
    return "inf" if isinstance(v, float) and math.isinf(v) else v


def cmd_bounds(args):
    loaded = _load(args)
    if loaded.service is None:
        raise ChainSpecError("bounds needs a service block", "service")
    b = rolski_bounds(QueueSpec(loaded.chain, 1.0, loaded.service))
    lines = [f"{k}: {_num(v)}" for k, v in b.to_dict().items()]
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_search(args):
    policy = _policy(args)
    seed = _seed(args)
    if args.budget < 1 or args.m < 2:
        raise UsageError("--budget must be >= 1 and --m >= 2")
    plant = {}
    if args.plant:
        planted = load_chain_file(args.plant, policy).chain
        if planted.m != args.m:
            raise UsageError(f"planted chain has {planted.m} states, --m is {args.m}")
        plant[args.plant_index] = planted
    cfg = SearchConfig(
        m=args.m,
        c_list=tuple(_c_list(args.c_list, min_len=2)),
        grids=tuple(g.t for g in _grids(args.grid, policy.dim_cap)),
        rate_family=args.rate_family,
        rate_scale=args.rate_scale,
        rate_values=tuple(_floats(args.rate_values, "--rate-values")),
        p_high=args.p_high,
        lambda_max=args.lambda_max,
        budget=args.budget,
        seed=seed,
        epsilon=policy.epsilon,
        plant=plant,
    )
    result = counterexample_search(cfg, threads=args.threads, policy=policy)
    doc = result.to_dict()
    doc["policy"] = policy.as_dict()
    _emit(_json(doc), args.out)
    s = result.summary()
    print(f"samples tried: {s['samples_tried']}, candidates found: {s['candidates_found']}, "
          f"violations found: {s['violations_found']}", file=sys.stderr)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def build_parser():
    fmt = argparse.ArgumentDefaultsHelpFormatter
    p = argparse.ArgumentParser(prog="rosslab", formatter_class=fmt,
                                description="Modulated Cox/G/1 workload and supermodular-order lab.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, chain_required=True):
        if chain_required:
            sp.add_argument("chain", help="chain specification file (JSON)")
        sp.add_argument("--out", default=None, help="output path (default: stdout)")
        sp.add_argument("--threads", type=int, default=1, help="worker cap; output does not depend on it")

    a = sub.add_parser("analyze", formatter_class=fmt, help="structural report for a chain")
    common(a)
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("sm-check", formatter_class=fmt,
                       help="scan supermodular decrease along --c-list")
    s.add_argument("chain", nargs="?", help="chain specification file (JSON)")
    common(s, chain_required=False)
    s.add_argument("--c-list", default=DEFAULT_SM_C_LIST, help="ascending modulation rates")
    s.add_argument("--grid", action="append", help=f"comma-separated times, repeatable (default: {DEFAULT_GRIDS})")
    s.add_argument("--dim-cap", type=int, default=DEFAULT_POLICY.dim_cap, help="max grid points")
    s.add_argument("--epsilon", type=float, default=DEFAULT_POLICY.epsilon, help="LP/marginal tolerance")
    s.add_argument("--pmf-pair", default=None,
                   help="debug: JSON {levels, x, y}; checks x <=_sm y directly")
    s.set_defaults(func=cmd_sm_check)

    w = sub.add_parser("sweep", formatter_class=fmt, help="w(c) curve as CSV")
    common(w)
    w.add_argument("--c-list", default=DEFAULT_SWEEP_C_LIST, help="ascending modulation rates")
    w.add_argument("--method", choices=["auto", "qbd", "sim"], default="auto",
                   help="auto: QBD for exponential service, simulation otherwise")
    w.add_argument("--arrivals", type=int, default=10 ** 6, help="simulated arrivals per point")
    w.add_argument("--batches", type=int, default=32, help="batch-means batches")
    w.add_argument("--warmup", type=float, default=0.1, help="warm-up fraction discarded")
    w.add_argument("--seed", type=int, default=None, help="RNG seed (sampled and printed if absent)")
    w.add_argument("--allow-unstable", action="store_true", help="simulate even if rho >= 1")
    w.set_defaults(func=cmd_sweep)

    b = sub.add_parser("bounds", formatter_class=fmt, help="averaged/frozen environment bounds")
    common(b)
    b.set_defaults(func=cmd_bounds)

    r = sub.add_parser("search", formatter_class=fmt, help="random search for order/structure mismatches")
    common(r, chain_required=False)
    r.add_argument("--m", type=int, default=3, help="state count")
    r.add_argument("--budget", type=int, default=100, help="number of sampled chains")
    r.add_argument("--c-list", default=DEFAULT_SM_C_LIST, help="ascending modulation rates")
    r.add_argument("--grid", action="append", help=f"comma-separated times, repeatable (default: {DEFAULT_GRIDS})")
    r.add_argument("--dim-cap", type=int, default=DEFAULT_POLICY.dim_cap, help="max grid points")
    r.add_argument("--epsilon", type=float, default=DEFAULT_POLICY.epsilon, help="LP/marginal tolerance")
    r.add_argument("--rate-family", choices=["exponential", "two-point"], default="exponential",
                   help="law of off-diagonal rates")
    r.add_argument("--rate-scale", type=float, default=1.0, help="mean of exponential rates")
    r.add_argument("--rate-values", default="0,1", help="two-point rates low,high")
    r.add_argument("--p-high", type=float, default=0.5, help="two-point probability of the high rate")
    r.add_argument("--lambda-max", type=float, default=1.0, help="intensities ~ sorted uniform(0, max)")
    r.add_argument("--seed", type=int, default=None, help="RNG seed (sampled and printed if absent)")
    r.add_argument("--plant", default=None, help="debug: chain file injected into the sample stream")
    r.add_argument("--plant-index", type=int, default=0, help="sample index replaced by --plant")
    r.set_defaults(func=cmd_search)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_PARSE
    try:
        return args.func(args)
    except (ChainSpecError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except NotIrreducible as exc:
        print(f"error: chain not irreducible: {exc}", file=sys.stderr)
        return EXIT_IRREDUCIBLE
    except Unstable as exc:
        print(f"error: unstable queue: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
