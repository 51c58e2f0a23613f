"""Command-line interface.

Exit codes: 0 pass, 1 statistical failure, 2 usage or validation error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import warnings
from collections import Counter

import numpy as np

from . import __version__
from .continuum import DegenerateThetaWarning, continuum_dtree, sample_icrt
from .discrete import (
    build_pure_rooted,
    count_dtuples,
    enumerate_dtrees,
    sample_dtree,
    sample_ptree,
)
from .errors import InvalidConfig, SbtreesError
from .experiments import EXPERIMENTS, ExperimentConfig, clean_json, eval_assumptions
from .params import parse_params, validate_degree_sequence, validate_pparams, validate_theta
from .rng import resolve_seed, resolve_workers, stream
from .stattests import chisquare_counts

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _json_arg(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"cannot parse JSON argument {text!r}: {exc}") from None


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x.strip())


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _provenance(resolved: dict) -> dict:
    blob = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    return {
        "tool": "sbtrees",
        "version": __version__,
        "seed": resolved.get("seed"),
        "config_hash": hashlib.sha256(blob.encode()).hexdigest()[:16],
    }


def _emit(args, payload: dict) -> None:
    text = json.dumps(clean_json(payload), sort_keys=True, indent=2) + "\n"
    if getattr(args, "output", None):
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _resolved(args, skip=("func", "output", "workers", "timing")) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _degrees(args):
    if args.degrees is None:
        raise InvalidConfig("--degrees is required")
    return validate_degree_sequence(_json_arg(args.degrees), canonicalize=args.canonicalize,
                                    allow_unsorted=getattr(args, "allow_unsorted", False))


# ---------------------------------------------------------------------------
# sample


def cmd_sample(args) -> int:
    args.seed = resolve_seed(args.seed)
    if args.count < 1:
        raise InvalidConfig("--count must be >= 1")
    records = []
    model = args.model
    if model in ("dtree", "pure", "continuum-dtree"):
        d = _degrees(args)
    for i in range(args.count):
        rng = stream(args.seed, f"sample/{model}", i)
        if model == "dtree":
            tree, trace = sample_dtree(d, rng)
            rec = {"tree": tree.to_json(), "trace": trace.to_json()}
            if args.format == "csv":
                rec = {"edges_csv": tree.to_csv()}
        elif model == "pure":
            root = args.root - 1
            tree, trace = build_pure_rooted(d, root, rng)
            rec = {"tree": tree.to_json(), "trace": trace.to_json()}
        elif model == "ptree":
            p = validate_pparams(_json_arg(args.p), args.p_inf)
            tree, trace = sample_ptree(p, args.steps, rng)
            rec = {"tree": tree.to_json(), "trace": trace.to_json()}
        elif model == "icrt":
            theta = validate_theta(_json_arg(args.theta))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", DegenerateThetaWarning)
                smp = sample_icrt(theta, args.truncate, rng, atom_eps=args.atom_eps)
            rec = smp.to_json()
        else:
            rec = {"trace": continuum_dtree(d, rng).to_json()}
        records.append(rec)
    _emit(args, {"model": model, "records": records, "provenance": _provenance(_resolved(args))})
    return EXIT_PASS


# ---------------------------------------------------------------------------
# check


def all_degree_sequences(s: int):
    """Every non-increasing child-count sequence of length s summing to s - 1."""

    def parts(total, maxpart, slots):
        if total == 0:
            yield (0,) * slots
            return
        if slots == 0:
            return
        for first in range(min(total, maxpart), 0, -1):
            for rest in parts(total - first, first, slots - 1):
                yield (first,) + rest

    yield from parts(s - 1, s - 1, s)


def check_bijection(max_s: int) -> dict:
    rows = []
    ok = True
    for s in range(1, max_s + 1):
        for raw in all_degree_sequences(s):
            d = validate_degree_sequence(raw)
            trees = enumerate_dtrees(d)
            expected = count_dtuples(d)
            realizes = all(np.array_equal(t.child_count(), d.array) for t in trees)
            alt = math.factorial(s)
            for x in raw:
                alt //= math.factorial(x)
            good = len(trees) == expected and realizes
            ok &= good
            rows.append({"degrees": list(raw), "trees": len(trees), "formula_s_minus_1": expected,
                         "formula_s": alt, "realizes_degrees": realizes, "passed": good})
    return {"passed": ok, "sequences": len(rows), "rows": rows,
            "formula_s_matches": sum(r["trees"] == r["formula_s"] for r in rows)}


def check_uniform(d, n: int, seed: int) -> dict:
    trees = sorted(enumerate_dtrees(d), key=lambda t: (t.root, t.parent.tobytes()))
    index = {t: i for i, t in enumerate(trees)}
    counts = Counter()
    for b in range(0, n, 1000):
        rng = stream(seed, "check/uniform", b // 1000)
        for _ in range(min(1000, n - b)):
            counts[index[sample_dtree(d, rng)[0]]] += 1
    obs = [counts[i] for i in range(len(trees))]
    if len(trees) == 1:
        return {"trees": 1, "counts": obs, "statistic": 0.0, "pvalue": 1.0, "passed": True}
    res = chisquare_counts(obs, np.ones(len(trees)))
    return {"trees": len(trees), "counts": obs, "statistic": res.statistic, "pvalue": res.pvalue,
            "passed": res.pvalue > 1e-3}


def cmd_check(args) -> int:
    args.seed = resolve_seed(args.seed)
    workers = resolve_workers(args.workers)
    what = args.what
    if what == "bijection":
        out = check_bijection(args.max_s)
    elif what == "uniform":
        if args.n < 1:
            raise InvalidConfig("--n must be >= 1")
        out = check_uniform(_degrees(args), args.n, args.seed)
    else:
        name = "coupling" if what == "coupling" else "concentration"
        kw = {}
        if args.degrees is not None:
            kw["degrees"] = tuple(_degrees(args).degrees)
        cfg = ExperimentConfig(experiment=name, replicates=args.n, seed=args.seed, **kw)
        out = EXPERIMENTS[name](cfg, workers=workers).finish()
    out["check"] = what
    out["provenance"] = _provenance(_resolved(args))
    _emit(args, out)
    return EXIT_PASS if out["passed"] else EXIT_FAIL


# ---------------------------------------------------------------------------
# experiment / assumptions


def cmd_experiment(args) -> int:
    args.seed = resolve_seed(args.seed)
    workers = resolve_workers(args.workers)
    kw = dict(experiment=args.name, replicates=args.replicates, seed=args.seed, alpha=args.alpha, k=args.k)
    if args.family:
        kw["family"] = args.family
    if args.sizes:
        kw["sizes"] = _int_list(args.sizes)
    if args.degrees is not None:
        kw["degrees"] = tuple(_degrees(args).degrees)
    if args.theta is not None:
        kw["theta"] = tuple(validate_theta(_json_arg(args.theta)).theta)
    if args.roots:
        kw["roots"] = tuple(r - 1 for r in _int_list(args.roots))
    if args.grid:
        kw["grid"] = _float_list(args.grid)
    if args.name in ("sb", "gp", "height") and "family" not in kw and "degrees" not in kw:
        kw["family"] = "binary"
    cfg = ExperimentConfig(**kw)
    report = EXPERIMENTS[args.name](cfg, workers=workers).finish(timing=args.timing)
    _emit(args, report)
    return EXIT_PASS if report["passed"] else EXIT_FAIL


def cmd_assumptions(args) -> int:
    sizes = _int_list(args.sizes) if args.sizes else (100, 1000, 10000)
    out = eval_assumptions(args.family, sizes=sizes)
    out["provenance"] = _provenance(_resolved(args))
    _emit(args, out)
    return EXIT_PASS if out["regime_ok"] else EXIT_FAIL


def cmd_validate(args) -> int:
    obj = _json_arg(args.params)
    params = parse_params(obj, canonicalize=args.canonicalize)
    _emit(args, {"params": params.to_json()})
    return EXIT_PASS


# ---------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="master seed (env SBTREES_SEED, default 20240101)")
    p.add_argument("--workers", type=int, default=None, help="worker processes (env SBTREES_WORKERS)")
    p.add_argument("--output", "-o", default=None, help="write JSON here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sbtrees", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"sbtrees {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("sample", help="draw trees, traces or ICRT samples")
    sp.add_argument("model", choices=["dtree", "ptree", "icrt", "continuum-dtree", "pure"])
    sp.add_argument("--degrees", help="JSON list of child counts")
    sp.add_argument("--canonicalize", action="store_true", help="sort unsorted degrees (records the permutation)")
    sp.add_argument("--allow-unsorted", action="store_true", help="keep an unsorted labelling as given")
    sp.add_argument("--p", help="JSON list of P-tree probabilities")
    sp.add_argument("--p-inf", type=float, default=None)
    sp.add_argument("--theta", help="JSON list of theta_1, theta_2, ... (theta_0 is implied)")
    sp.add_argument("--truncate", type=float, default=5.0, help="ICRT construction length")
    sp.add_argument("--atom-eps", type=float, default=1e-8)
    sp.add_argument("--steps", type=int, default=100, help="P-tree steps")
    sp.add_argument("--root", type=int, default=1, help="1-based root V_k for pure trees")
    sp.add_argument("--count", type=int, default=1)
    sp.add_argument("--format", choices=["json", "csv"], default="json")
    _common(sp)
    sp.set_defaults(func=cmd_sample)

    cp = sub.add_parser("check", help="oracle and Monte Carlo checks")
    cp.add_argument("what", choices=["bijection", "uniform", "coupling", "concentration"])
    cp.add_argument("--max-s", type=int, default=7)
    cp.add_argument("--degrees")
    cp.add_argument("--canonicalize", action="store_true")
    cp.add_argument("--n", type=int, default=100_000, help="samples / replicates")
    _common(cp)
    cp.set_defaults(func=cmd_check)

    ep = sub.add_parser("experiment", help="run a statistical experiment and write its report")
    ep.add_argument("name", choices=sorted(EXPERIMENTS))
    ep.add_argument("--family", choices=["binary", "ternary", "hub"])
    ep.add_argument("--sizes", help="comma-separated family sizes, e.g. 1000,10000")
    ep.add_argument("--degrees")
    ep.add_argument("--canonicalize", action="store_true")
    ep.add_argument("--theta")
    ep.add_argument("--roots", help="comma-separated 1-based roots, e.g. 1,6")
    ep.add_argument("--grid", help="comma-separated grid of x / l / c values")
    ep.add_argument("--k", type=int, default=4)
    ep.add_argument("--replicates", type=int, default=10_000)
    ep.add_argument("--alpha", type=float, default=1e-3)
    ep.add_argument("--timing", action="store_true", help="include wall-clock runtime (breaks byte-identity)")
    _common(ep)
    ep.set_defaults(func=cmd_experiment)

    asp = sub.add_parser("assumptions", help="evaluate regime quantities along a family")
    asp.add_argument("--family", choices=["binary", "ternary", "hub", "uniform-p"], default="binary")
    asp.add_argument("--sizes")
    _common(asp)
    asp.set_defaults(func=cmd_assumptions)

    vp = sub.add_parser("validate", help="validate and re-serialize a parameter JSON object")
    vp.add_argument("params")
    vp.add_argument("--canonicalize", action="store_true")
    _common(vp)
    vp.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SbtreesError as exc:
        sys.stderr.write(json.dumps(exc.to_record(), sort_keys=True) + "\n")
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
