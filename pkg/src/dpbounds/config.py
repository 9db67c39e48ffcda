"""Loading experiment configs, datasets and command-line prior shorthands."""
from __future__ import annotations

import csv
import dataclasses
import json
import os
from collections.abc import Mapping

import numpy as np

from .attacks import AttackConfig
from .dist import InvalidInputError
from .game import GameConfig, MarginalSpec, RRSpec
from .mechanisms import MarginalWorkload, calibrate_sigma, composition_count
from .metrics import EXACT, L1_BALL, L2_MIN, MEMBERSHIP, LossMetric
from .priors import ConditionalPriorTable, ProductPrior, load_prior, prior_from_dict, uniform_prior, zipf_prior

EXPERIMENT_FIELDS = {"schema", "prior", "mechanism", "attack", "metric", "n", "k", "seed", "replays", "alphas",
                     "fixed_records", "workers"}
RR_FIELDS = {"kind", "eps", "m"}
MARGINAL_FIELDS = {"kind", "domain_sizes", "k", "vsets", "sigma", "eps", "delta", "known_columns",
                   "unknown_columns", "known_data"}


@dataclasses.dataclass(frozen=True)
class Experiment:
    """A parsed experiment: the game plus the replay and bound settings."""

    game: GameConfig
    replays: int
    alphas: tuple
    eps: float
    delta: float
    workers: int = 1


def load_dataset_csv(path) -> np.ndarray:
    """Reads a CSV of integer attribute codes; a non-numeric first row is a header."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if rows:
        try:
            [int(x) for x in rows[0]]
        except ValueError:
            rows = rows[1:]
    if not rows:
        raise InvalidInputError(f"{path}: no data rows")
    try:
        data = np.array([[int(x) for x in r] for r in rows], dtype=np.int64)
    except ValueError as exc:
        raise InvalidInputError(f"{path}: {exc}") from None
    return data


def _require(d: Mapping, key: str, where: str):
    if key not in d:
        raise InvalidInputError(f"{where} is missing field {key!r}")
    return d[key]


def _check_fields(d: Mapping, allowed: set, where: str):
    if not isinstance(d, Mapping):
        raise InvalidInputError(f"{where} must be a JSON object")
    extra = set(d) - allowed
    if extra:
        raise InvalidInputError(f"unknown fields in {where}: {sorted(extra)}")


def _marginal_mechanism(d: Mapping, base_dir: str) -> tuple[MarginalSpec, float, float]:
    _check_fields(d, MARGINAL_FIELDS, "mechanism")
    sizes = [int(s) for s in _require(d, "domain_sizes", "mechanism")]
    if "vsets" in d:
        workload = MarginalWorkload(tuple(sizes), tuple(tuple(v) for v in d["vsets"]))
    else:
        workload = MarginalWorkload.all_k(sizes, int(_require(d, "k", "mechanism")))
    known_cols = [int(a) for a in _require(d, "known_columns", "mechanism")]
    unknown_cols = [int(a) for a in _require(d, "unknown_columns", "mechanism")]
    raw = _require(d, "known_data", "mechanism")
    known = load_dataset_csv(os.path.join(base_dir, raw)) if isinstance(raw, str) else np.asarray(raw, np.int64)
    eps = float(_require(d, "eps", "mechanism"))
    delta = float(_require(d, "delta", "mechanism"))
    if "sigma" in d:
        sigma = float(d["sigma"])
    else:
        # only releases touching an unknown attribute count against the budget
        touching = sum(1 for v in workload.vsets if set(v) & set(unknown_cols))
        sigma = calibrate_sigma(eps, delta, touching).sigma
    spec = MarginalSpec(workload=workload, sigma=sigma, known=known, known_columns=tuple(known_cols),
                        unknown_columns=tuple(unknown_cols))
    return spec, eps, delta


def experiment_from_dict(d: Mapping, base_dir: str = ".") -> Experiment:
    """Parses an experiment document; relative file paths resolve against ``base_dir``."""
    _check_fields(d, EXPERIMENT_FIELDS, "experiment")
    if d.get("schema", "v1") != "v1":
        raise InvalidInputError(f"unsupported schema {d['schema']!r}")
    mech = _require(d, "mechanism", "experiment")
    kind = _require(mech, "kind", "mechanism")
    if kind == "rr":
        _check_fields(mech, RR_FIELDS, "mechanism")
        spec = RRSpec(eps=float(_require(mech, "eps", "mechanism")), m=int(_require(mech, "m", "mechanism")))
        eps, delta = spec.eps, 0.0
    elif kind == "marginals":
        spec, eps, delta = _marginal_mechanism(mech, base_dir)
    else:
        raise InvalidInputError(f"mechanism kind must be 'rr' or 'marginals', got {kind!r}")

    prior_spec = _require(d, "prior", "experiment")
    if isinstance(prior_spec, str):
        prior = load_prior(os.path.join(base_dir, prior_spec))
    else:
        prior = prior_from_dict(prior_spec)
    if isinstance(spec, MarginalSpec):
        n = spec.known.shape[0]
        if not isinstance(prior, ConditionalPriorTable):
            raise InvalidInputError("a marginal experiment needs a conditional prior")
        if "n" in d and int(d["n"]) != n:
            raise InvalidInputError(f"n = {d['n']} disagrees with {n} rows of known data")
    else:
        n = int(_require(d, "n", "experiment"))
        if isinstance(prior, ConditionalPriorTable):
            raise InvalidInputError("a conditional prior needs a marginal mechanism")
        prior = ProductPrior.iid(prior, n)

    game = GameConfig(prior=prior, mechanism=spec, attack=AttackConfig.from_dict(d.get("attack", {})),
                      metric=LossMetric.from_dict(d.get("metric", {"kind": EXACT})), n=n,
                      k=int(d.get("k", 1)), seed=int(d.get("seed", 0)),
                      fixed_records=tuple(tuple(r) if isinstance(r, list) else r for r in d.get("fixed_records", ())))
    replays = int(d.get("replays", 1))
    alphas = tuple(float(a) for a in d.get("alphas", [0.05]))
    return Experiment(game=game, replays=replays, alphas=alphas, eps=eps, delta=delta,
                      workers=int(d.get("workers", 1)))


def load_experiment(path) -> Experiment:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"{path}: invalid JSON: {exc}") from None
    return experiment_from_dict(doc, os.path.dirname(os.path.abspath(path)))


def parse_prior_arg(text: str):
    """Prior from a command-line value.

    Accepts ``uniform:N``, ``zipf:N:s``, a path to a prior JSON file, or a
    bare probability, which is returned as a float and read as the prior
    success of the best guess.
    """
    if text.startswith("uniform:"):
        return uniform_prior(int(float(text.split(":", 1)[1])))
    if text.startswith("zipf:"):
        parts = text.split(":")
        if len(parts) != 3:
            raise InvalidInputError(f"zipf prior shorthand is zipf:N:s, got {text!r}")
        return zipf_prior(int(float(parts[1])), float(parts[2]))
    try:
        p = float(text)
    except ValueError:
        return load_prior(text)
    if not 0.0 <= p <= 1.0:
        raise InvalidInputError(f"prior probability must lie in [0, 1], got {p}")
    return p


def parse_metric_arg(text: str) -> LossMetric:
    """Metric from ``exact``, ``membership``, ``l1:E``, ``l2:tau`` (optionally ``,pooled``) or a JSON file."""
    addressing = "aligned"
    if text.endswith(",pooled"):
        text, addressing = text[: -len(",pooled")], "pooled"
    if text == "exact":
        return LossMetric(EXACT, addressing=addressing)
    if text == "membership":
        return LossMetric(MEMBERSHIP, addressing=addressing)
    if text.startswith("l1:"):
        return LossMetric(L1_BALL, E=int(text[3:]), addressing=addressing)
    if text.startswith("l2:"):
        return LossMetric(L2_MIN, tau=float(text[3:]), addressing=addressing)
    with open(text) as fh:
        return LossMetric.from_dict(json.load(fh))


def composition_from_args(m: int | None, d: int | None, k: int | None, unknown: int | None) -> int:
    if m is not None:
        return m
    if None in (d, k, unknown):
        raise InvalidInputError("give either --m or all of --d, --k and --unknown")
    return composition_count(d, k, unknown)
