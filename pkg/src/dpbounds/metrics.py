"""Decomposable success metrics.

The total success of an attack is the number of target records it hits,
``sum_i loss_i(record_i, guesses)``, with every per-record loss in {0, 1}.
"""
from __future__ import annotations

import dataclasses
from collections.abc import Sequence

import numpy as np

from .dist import InvalidInputError

EXACT = "exact-match"
L1_BALL = "l1-ball"
L2_MIN = "l2-min"
MEMBERSHIP = "membership-bit"
KINDS = (EXACT, L1_BALL, L2_MIN, MEMBERSHIP)

ALIGNED = "aligned"
POOLED = "pooled"


@dataclasses.dataclass(frozen=True)
class LossMetric:
    """A per-record success predicate.

    Attributes:
      kind: One of ``exact-match``, ``l1-ball``, ``l2-min``, ``membership-bit``.
      E: L1 radius for ``l1-ball``.
      tau: L2 radius for ``l2-min``.
      addressing: ``aligned`` means guess ``i`` targets record ``i``;
        ``pooled`` means any guess may hit any record.
    """

    kind: str = EXACT
    E: int = 0
    tau: float = 0.0
    addressing: str = ALIGNED

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown metric kind {self.kind!r}; expected one of {KINDS}")
        if self.addressing not in (ALIGNED, POOLED):
            raise InvalidInputError(f"addressing must be 'aligned' or 'pooled', got {self.addressing!r}")
        if int(self.E) != self.E or self.E < 0:
            raise InvalidInputError(f"E must be a nonnegative integer, got {self.E}")
        if not self.tau >= 0:
            raise InvalidInputError(f"tau must be nonnegative, got {self.tau}")

    @property
    def numeric(self) -> bool:
        return self.kind in (L1_BALL, L2_MIN)

    @classmethod
    def from_dict(cls, d: dict) -> "LossMetric":
        allowed = {"kind", "E", "tau", "addressing"}
        extra = set(d) - allowed
        if extra:
            raise InvalidInputError(f"unknown metric fields: {sorted(extra)}")
        if "kind" not in d:
            raise InvalidInputError("metric spec is missing 'kind'")
        kind = d["kind"]
        if kind == "l2-min-over-guesses":
            kind = L2_MIN
        return cls(kind=kind, E=int(d.get("E", 0)), tau=float(d.get("tau", 0.0)),
                   addressing=d.get("addressing", ALIGNED))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _canon(value):
    if isinstance(value, np.ndarray):
        return tuple(value.tolist())
    if isinstance(value, list):
        return tuple(value)
    if isinstance(value, np.generic):
        return value.item()
    return value


def _as_vector(value) -> np.ndarray:
    value = _canon(value)
    if isinstance(value, bool) or not isinstance(value, (int, float, tuple)):
        raise InvalidInputError(f"numeric metric applied to non-numeric value {value!r}")
    vec = np.atleast_1d(np.asarray(value, dtype=object))
    try:
        return vec.astype(np.float64)
    except (TypeError, ValueError):
        raise InvalidInputError(f"numeric metric applied to non-numeric value {value!r}") from None


def _relevant_guesses(metric: LossMetric, guesses: Sequence, record_index: int) -> Sequence:
    if len(guesses) == 0:
        raise InvalidInputError("guesses must be non-empty")
    if metric.addressing == ALIGNED:
        if not 0 <= record_index < len(guesses):
            raise InvalidInputError(f"aligned metric has no guess for record {record_index}")
        return [guesses[record_index]]
    return guesses


def _hit(metric: LossMetric, record, guess) -> bool:
    if metric.kind == EXACT:
        return _canon(record) == _canon(guess)
    if metric.kind == MEMBERSHIP:
        r = _canon(record)
        if r not in (0, 1):
            raise InvalidInputError(f"membership bit must be 0 or 1, got {r!r}")
        return r == _canon(guess)
    r = _as_vector(record)
    g = _as_vector(guess)
    if r.shape != g.shape:
        raise InvalidInputError(f"record and guess dimensions differ: {r.shape} vs {g.shape}")
    if metric.kind == L1_BALL:
        return float(np.abs(r - g).sum()) <= metric.E
    return float(np.sqrt(((r - g) ** 2).sum())) <= metric.tau


def eval_loss(metric: LossMetric, record, guesses: Sequence, record_index: int) -> int:
    """Returns 1 if ``guesses`` successfully attack ``record``, else 0."""
    return int(any(_hit(metric, record, g) for g in _relevant_guesses(metric, guesses, record_index)))


def metric_total(metric: LossMetric, records: Sequence, guesses: Sequence) -> int:
    """Number of records hit; each record counts at most once."""
    if metric.addressing == ALIGNED and len(guesses) != len(records):
        raise InvalidInputError(
            f"aligned metric needs one guess per record, got {len(guesses)} guesses for {len(records)} records")
    return sum(eval_loss(metric, rec, guesses, i) for i, rec in enumerate(records))


def accepted_mask(metric: LossMetric, values: Sequence, guesses: Sequence, record_index: int) -> np.ndarray:
    """Vectorised ``eval_loss`` over a list of candidate record values."""
    rel = _relevant_guesses(metric, guesses, record_index)
    if metric.numeric:
        pts = np.stack([_as_vector(v) for v in values])
        gs = np.stack([_as_vector(g) for g in rel])
        if pts.shape[1] != gs.shape[1]:
            raise InvalidInputError("record and guess dimensions differ")
        diff = pts[:, None, :] - gs[None, :, :]
        if metric.kind == L1_BALL:
            return (np.abs(diff).sum(axis=2) <= metric.E).any(axis=1)
        return (np.sqrt((diff ** 2).sum(axis=2)) <= metric.tau).any(axis=1)
    targets = {_canon(g) for g in rel}
    if metric.kind == MEMBERSHIP:
        bad = [v for v in values if _canon(v) not in (0, 1)]
        if bad:
            raise InvalidInputError(f"membership-bit metric needs a {{0, 1}} domain, got {bad[:3]}")
    return np.array([_canon(v) in targets for v in values], dtype=bool)
