"""Command-line interface: ``dpbounds {bound,calibrate,simulate,compare,protect}``.

Every command prints one JSON document (or CSV for ``compare``) to stdout.
Floats carry 9 significant digits and JSON documents carry ``"schema": "v1"``.
Output files go to ``--out`` or, when that is not given, to the directory
named by ``DPBOUNDS_OUTPUT_DIR``; they are written only after the command
has succeeded.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from .bounds import (APPROX_MC, APPROX_ONERUN, BASELINE_NARCISSUS, BASELINE_RERO, PURE, PrivacyParams,
                     baseline_narcissus, baseline_rero, beta, bound_approx_mc, bound_approx_onerun,
                     bound_approx_onerun_from_success, bound_pure, eps_protect, optimal_prior_success)
from .config import composition_from_args, load_experiment, parse_metric_arg, parse_prior_arg
from .dist import InvalidInputError, pb_survival
from .game import GameError, replay_experiment
from .mechanisms import CalibrationError, calibrate_sigma
from .metrics import LossMetric
from .priors import ProductPrior

SCHEMA = "v1"
OUTPUT_DIR_ENV = "DPBOUNDS_OUTPUT_DIR"


def fmt(x) -> str:
    return f"{x:.9g}"


def _round(obj):
    if isinstance(obj, float):
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        if math.isnan(obj):
            return "nan"
        return float(fmt(obj))
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, np.generic):
        return _round(obj.item())
    return obj


def dump_json(doc: dict) -> str:
    return json.dumps(_round({"schema": SCHEMA, **doc}), indent=2, sort_keys=False) + "\n"


def _output_dir(args) -> str | None:
    return getattr(args, "out", None) or os.environ.get(OUTPUT_DIR_ENV) or None


def _write_outputs(out_dir: str | None, files: dict[str, str]) -> None:
    if not out_dir or not files:
        return
    os.makedirs(out_dir, exist_ok=True)
    for name, text in files.items():
        with open(os.path.join(out_dir, name), "w", newline="") as fh:
            fh.write(text)


def _tail_csv(betas: np.ndarray, shift: float = 0.0) -> str:
    surv = pb_survival(betas)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t", "bound_tail"])
    for t in range(betas.size + 1):
        writer.writerow([t, fmt(min(1.0, surv[t] + shift))])
    return buf.getvalue()


def _best_success(prior, metric: LossMetric, k: int) -> float:
    if isinstance(prior, float):
        return prior
    return float(optimal_prior_success(ProductPrior((prior,)), metric, k)[0])


def cmd_bound(args) -> tuple[str, dict]:
    params = PrivacyParams(args.eps, args.delta)
    metric = parse_metric_arg(args.metric)
    if args.kind == APPROX_MC:
        if not args.runs:
            raise InvalidInputError("--kind approx-mc needs --runs")
        rows = np.loadtxt(args.runs, delimiter=",", ndmin=2)
        profiles = [beta(args.eps, row) for row in rows]
        res = bound_approx_mc(params, profiles, args.v, conf=args.conf)
        return dump_json({"command": "bound", **res.to_dict(), "n": int(rows.shape[1])}), {}
    if args.prior is None:
        raise InvalidInputError("--prior is required")
    prior = parse_prior_arg(args.prior)
    p = _best_success(prior, metric, args.k)
    if args.kind == BASELINE_RERO:
        return dump_json({"command": "bound", "kind": args.kind, "value": baseline_rero(args.eps, p)}), {}
    if args.kind == BASELINE_NARCISSUS:
        value = baseline_narcissus(args.eps, args.delta, p)
        return dump_json({"command": "bound", "kind": args.kind, "value": value}), {}
    if args.kind == PURE:
        res = bound_pure(params, [p] * args.n, args.v)
        shift = 0.0
    elif isinstance(prior, float):
        res = bound_approx_onerun_from_success(params, [p] * args.n, args.v)
        shift = args.n * args.delta
    else:
        res = bound_approx_onerun(params, ProductPrior.iid(prior, args.n), metric, args.v, args.k)
        shift = args.n * args.delta
    doc = {"command": "bound", **res.to_dict(), "n": args.n, "prior_success": p, "beta": float(beta(args.eps, p))}
    files = {"bound_tail.csv": _tail_csv(np.asarray(res.betas), shift)} if args.csv else {}
    return dump_json(doc), files


def cmd_calibrate(args) -> tuple[str, dict]:
    m = composition_from_args(args.m, args.d, args.k, args.unknown)
    res = calibrate_sigma(args.eps, args.delta, m)
    return dump_json({"command": "calibrate", "eps": args.eps, "delta": args.delta, **res.to_dict()}), {}


def cmd_simulate(args) -> tuple[str, dict]:
    exp = load_experiment(args.config)
    game = exp.game if args.seed is None else exp.game.with_seed(args.seed)
    replays = exp.replays if args.replays is None else args.replays
    summary = replay_experiment(game, replays, exp.eps, exp.delta, exp.alphas, workers=args.workers or exp.workers)
    doc = {"command": "simulate", "seed": game.seed, "attack": game.attack.kind,
           "metric": game.metric.to_dict(), **summary.to_dict()}
    text = dump_json(doc)
    return text, {"summary.json": text, "tails.csv": summary.table_csv()}


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise InvalidInputError(f"expected comma-separated numbers, got {text!r}") from None


def cmd_compare(args) -> tuple[str, dict]:
    if not 0.0 < args.pmin <= args.pmax <= 1.0:
        raise InvalidInputError("need 0 < --pmin <= --pmax <= 1")
    if args.points < 1:
        raise InvalidInputError("--points must be >= 1")
    grid = np.geomspace(args.pmin, args.pmax, args.points)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["p", "eps", "ours", "rero", "narcissus"])
    for eps in _parse_floats(args.eps):
        for p in grid:
            ours = bound_pure(PrivacyParams(eps), [p], 1).value
            writer.writerow([fmt(p), fmt(eps), fmt(ours), fmt(baseline_rero(eps, p)),
                             fmt(baseline_narcissus(eps, args.delta, p))])
    text = buf.getvalue()
    return text, {"compare.csv": text}


def cmd_protect(args) -> tuple[str, dict]:
    prior = parse_prior_arg(args.prior)
    p = _best_success(prior, parse_metric_arg(args.metric), 1)
    eps = eps_protect(p, args.threshold, args.delta, tol=args.tol)
    doc = {"command": "protect", "prior_success": p, "threshold": args.threshold, "delta": args.delta,
           "eps_protect": eps}
    return dump_json(doc), {}


COMPARE_EPILOG = "CSV columns: p (prior success), eps, ours (pure-DP bound at n = v = 1), " \
                 "rero (min(1, e^eps p)), narcissus (min(1, e^eps p + delta))."
SIMULATE_EPILOG = "Writes summary.json and tails.csv (columns t, empirical_tail, bound_tail) to the " \
                  f"output directory (--out, else ${OUTPUT_DIR_ENV}) when one is set."


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dpbounds", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bound", help="upper bound on Pr[success >= v]",
                       epilog="With --csv, bound_tail.csv has columns t, bound_tail.")
    b.add_argument("--kind", default=PURE, choices=[PURE, APPROX_ONERUN, APPROX_MC, BASELINE_RERO,
                                                    BASELINE_NARCISSUS])
    b.add_argument("--eps", type=float, required=True)
    b.add_argument("--delta", type=float, default=0.0)
    b.add_argument("--prior", help="uniform:N, zipf:N:s, a probability, or a prior JSON file")
    b.add_argument("--metric", default="exact", help="exact, membership, l1:E, l2:tau (append ,pooled) or JSON")
    b.add_argument("--v", type=float, default=1.0, help="success threshold")
    b.add_argument("--n", type=int, default=1, help="number of targets")
    b.add_argument("--k", type=int, default=1, help="guesses for pooled metrics")
    b.add_argument("--runs", help="approx-mc: CSV with one row of per-target prior successes per run")
    b.add_argument("--conf", type=float, default=0.95, help="approx-mc: confidence of the interval")
    b.add_argument("--csv", action="store_true", help="also write the full tail table")
    b.add_argument("--out", help="output directory")
    b.set_defaults(func=cmd_bound)

    c = sub.add_parser("calibrate", help="Gaussian noise scale for composed k-way marginals")
    c.add_argument("--eps", type=float, required=True)
    c.add_argument("--delta", type=float, required=True)
    c.add_argument("--m", type=int, help="number of composed releases")
    c.add_argument("--d", type=int, help="number of attributes")
    c.add_argument("--k", type=int, help="marginal width")
    c.add_argument("--unknown", type=int, help="number of unknown attributes")
    c.set_defaults(func=cmd_calibrate)

    s = sub.add_parser("simulate", help="replay the attack game from an experiment JSON", epilog=SIMULATE_EPILOG)
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int, help="override the master seed")
    s.add_argument("--replays", type=int, help="override the replay count")
    s.add_argument("--workers", type=int, default=0, help="threads; results do not depend on it")
    s.add_argument("--out", help="output directory")
    s.set_defaults(func=cmd_simulate)

    cp = sub.add_parser("compare", help="our bound against the ReRo and Narcissus baselines", epilog=COMPARE_EPILOG)
    cp.add_argument("--eps", default="1,2,4", help="comma-separated eps values")
    cp.add_argument("--delta", type=float, default=1e-5)
    cp.add_argument("--pmin", type=float, default=1e-6)
    cp.add_argument("--pmax", type=float, default=0.5)
    cp.add_argument("--points", type=int, default=50)
    cp.add_argument("--out", help="output directory")
    cp.set_defaults(func=cmd_compare)

    pr = sub.add_parser("protect", help="largest eps keeping the advantage bound under a threshold")
    pr.add_argument("--prior", required=True, help="a probability, uniform:N, zipf:N:s, or a prior JSON file")
    pr.add_argument("--metric", default="exact")
    pr.add_argument("--threshold", type=float, default=0.05)
    pr.add_argument("--delta", type=float, default=0.0)
    pr.add_argument("--tol", type=float, default=1e-4)
    pr.set_defaults(func=cmd_protect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        text, files = args.func(args)
        out_dir = _output_dir(args)
    except (InvalidInputError, CalibrationError, GameError, LookupError, OSError, ValueError) as exc:
        print(f"dpbounds {args.command}: error: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(text)
    try:
        _write_outputs(out_dir, files)
    except OSError as exc:
        print(f"dpbounds {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
