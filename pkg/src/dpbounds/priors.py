"""Finite prior distributions over a single record.

Every prior exposes the same three operations the bounds need: the prior
success probability of a set of guesses under a metric, the single guess that
maximises it, and sampling. Small domains are stored explicitly as
:class:`Categorical`; very large uniform and Zipf domains are kept implicit
so that, for example, a uniform prior over 10**9 nine-digit canaries never
materialises its domain.
"""
from __future__ import annotations

import dataclasses
import json
import math
from collections.abc import Mapping, Sequence

import numpy as np

from .dist import InvalidInputError
from .metrics import ALIGNED, EXACT, L1_BALL, L2_MIN, MEMBERSHIP, LossMetric, accepted_mask

# Domains at or below this size are materialised as explicit categoricals.
MATERIALIZE_LIMIT = 1_000_000
# Zipf normaliser: direct summation up to this size, integral tail beyond.
ZIPF_DIRECT_LIMIT = 10_000_000


def _canon(value):
    if isinstance(value, list):
        return tuple(_canon(v) for v in value)
    if isinstance(value, np.generic):
        return value.item()
    return value


def _is_number(v) -> bool:
    if isinstance(v, tuple):
        return all(_is_number(x) for x in v)
    return isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool)


def _relevant(metric: LossMetric, guesses: Sequence, record_index: int) -> list:
    if len(guesses) == 0:
        raise InvalidInputError("guesses must be non-empty")
    if metric.addressing == ALIGNED:
        if not 0 <= record_index < len(guesses):
            raise InvalidInputError(f"aligned metric has no guess for record {record_index}")
        return [_canon(guesses[record_index])]
    return [_canon(g) for g in guesses]


class Categorical:
    """Explicit finite distribution.

    Args:
      domain: Distinct values (numbers, strings, or tuples of those).
      probs: Probabilities aligned with ``domain``; must sum to 1.
      ordinal: Declares a non-numeric domain as ordered, so numeric metrics
        act on the position of each value in ``domain``.
    """

    def __init__(self, domain: Sequence, probs: Sequence[float], ordinal: bool = False):
        domain = tuple(_canon(v) for v in domain)
        probs = np.asarray(probs, dtype=np.float64)
        if len(domain) == 0:
            raise InvalidInputError("domain must be non-empty")
        if probs.shape != (len(domain),):
            raise InvalidInputError(f"got {probs.size} probabilities for {len(domain)} domain values")
        if not np.all(np.isfinite(probs)) or probs.min() < 0.0 or probs.max() > 1.0:
            raise InvalidInputError("probabilities must lie in [0, 1]")
        if abs(probs.sum() - 1.0) > 1e-9:
            raise InvalidInputError(f"probabilities sum to {probs.sum():.12g}, not 1")
        if len(set(domain)) != len(domain):
            raise InvalidInputError("domain entries must be distinct")
        self.domain = domain
        self.probs = probs
        self.ordinal = bool(ordinal)
        self._index = {v: i for i, v in enumerate(domain)}
        self._cdf = None

    def __repr__(self):
        head = ", ".join(f"{v!r}: {p:.4g}" for v, p in zip(self.domain[:4], self.probs[:4]))
        more = ", ..." if self.size > 4 else ""
        return f"Categorical({{{head}{more}}})"

    def __eq__(self, other):
        return (isinstance(other, Categorical) and self.domain == other.domain
                and np.array_equal(self.probs, other.probs) and self.ordinal == other.ordinal)

    @property
    def size(self) -> int:
        return len(self.domain)

    def index_of(self, value) -> int:
        try:
            return self._index[_canon(value)]
        except KeyError:
            raise InvalidInputError(f"value {value!r} is not in the prior's domain") from None

    def numeric_view(self, metric: LossMetric, guesses: list):
        """Domain and guesses in the encoding the metric compares."""
        if not metric.numeric or all(_is_number(v) for v in self.domain):
            return list(self.domain), guesses
        if not self.ordinal:
            raise InvalidInputError(f"{metric.kind} needs a numeric or ordinal domain")
        return list(range(self.size)), [self.index_of(g) for g in guesses]

    def success(self, metric: LossMetric, guesses: Sequence, record_index: int = 0) -> float:
        rel = _relevant(metric, guesses, record_index)
        values, rel = self.numeric_view(metric, rel)
        mask = accepted_mask(dataclasses.replace(metric, addressing="pooled"), values, rel, 0)
        return float(min(1.0, self.probs[mask].sum()))

    def best_guess(self, metric: LossMetric):
        if metric.kind in (EXACT, MEMBERSHIP):
            if metric.kind == MEMBERSHIP:
                self.success(metric, [self.domain[0]])  # validates the domain
            return self.domain[int(np.argmax(self.probs))]
        values, _ = self.numeric_view(metric, [])
        pts = np.stack([np.atleast_1d(np.asarray(v, dtype=np.float64)) for v in values])
        diff = pts[:, None, :] - pts[None, :, :]
        if metric.kind == L1_BALL:
            hit = np.abs(diff).sum(axis=2) <= metric.E
        else:
            hit = np.sqrt((diff ** 2).sum(axis=2)) <= metric.tau
        # row g: which domain values guess g accepts
        mass = hit.astype(np.float64) @ self.probs
        return self.domain[int(np.argmax(mass))]

    def sample_index(self, rng: np.random.Generator, size=None):
        """Draws domain indices by inverse CDF from ``rng.random()``."""
        if self._cdf is None:
            self._cdf = np.cumsum(self.probs)
            self._cdf[-1] = 1.0
        idx = np.searchsorted(self._cdf, rng.random(size), side="right")
        return np.minimum(idx, self.size - 1)

    def sample(self, rng: np.random.Generator, size: int | None = None):
        idx = self.sample_index(rng, size)
        if size is None:
            return self.domain[int(idx)]
        return [self.domain[int(i)] for i in idx]

    def to_dict(self) -> dict:
        out = {"kind": "categorical", "domain": [list(v) if isinstance(v, tuple) else v for v in self.domain],
               "probs": self.probs.tolist()}
        if self.ordinal:
            out["ordinal"] = True
        return out


def _interval_union(centers: Sequence[int], radius: int, lo: int, hi: int) -> list[tuple[int, int]]:
    """Merged integer intervals ``[c - radius, c + radius]`` clipped to [lo, hi]."""
    spans = sorted((max(lo, c - radius), min(hi, c + radius)) for c in centers)
    merged: list[list[int]] = []
    for a, b in spans:
        if a > b:
            continue
        if merged and a <= merged[-1][1] + 1:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    return [(a, b) for a, b in merged]


def _integer_guesses(rel: list) -> list[int]:
    out = []
    for g in rel:
        if not _is_number(g) or isinstance(g, tuple) or g != int(g):
            raise InvalidInputError(f"guess {g!r} is not an integer in an integer domain")
        out.append(int(g))
    return out


def _radius(metric: LossMetric) -> int:
    if metric.kind == L1_BALL:
        return int(metric.E)
    if metric.kind == L2_MIN:
        return int(math.floor(metric.tau))
    return 0


@dataclasses.dataclass(frozen=True)
class UniformPrior:
    """Implicit uniform distribution over the integers ``0..size-1``."""

    size: int

    def __post_init__(self):
        if self.size < 1:
            raise InvalidInputError(f"domain size must be >= 1, got {self.size}")

    def success(self, metric: LossMetric, guesses: Sequence, record_index: int = 0) -> float:
        rel = _integer_guesses(_relevant(metric, guesses, record_index))
        if metric.kind == MEMBERSHIP and self.size != 2:
            raise InvalidInputError("membership-bit metric needs a {0, 1} domain")
        spans = _interval_union(rel, _radius(metric), 0, self.size - 1)
        return sum(b - a + 1 for a, b in spans) / self.size

    def best_guess(self, metric: LossMetric) -> int:
        r = _radius(metric)
        return min(r, max(0, self.size - 1 - r))

    def sample(self, rng: np.random.Generator, size=None):
        return rng.integers(self.size, size=size)

    def to_dict(self) -> dict:
        return {"kind": "uniform", "size": self.size}


def zipf_normalizer(size: int, s: float) -> float:
    """Partial zeta sum ``H(N, s) = sum_{j=1..N} j**-s``.

    Summed directly up to ``ZIPF_DIRECT_LIMIT`` terms; beyond that the
    remainder is taken from the Euler-Maclaurin expansion, whose relative
    error is far below 1e-9 at that cut-off.
    """
    if size < 1:
        raise InvalidInputError(f"domain size must be >= 1, got {size}")
    if s <= 0:
        raise InvalidInputError(f"Zipf exponent must be > 0, got {s}")
    direct = min(size, ZIPF_DIRECT_LIMIT)
    # sum smallest terms first
    head = float(np.sum(np.arange(direct, 0, -1, dtype=np.float64) ** -s))
    if size == direct:
        return head
    m, n = float(direct), float(size)
    f = lambda x: x ** -s
    d1 = lambda x: -s * x ** (-s - 1)
    d3 = lambda x: -s * (s + 1) * (s + 2) * x ** (-s - 3)
    if s == 1.0:
        integral = math.log(n / m)
    else:
        integral = (n ** (1 - s) - m ** (1 - s)) / (1 - s)
    # sum_{j=m}^{n} f(j) ~ integral + (f(m)+f(n))/2 + (f'(n)-f'(m))/12 - (f'''(n)-f'''(m))/720
    tail = integral + (f(m) + f(n)) / 2 + (d1(n) - d1(m)) / 12 - (d3(n) - d3(m)) / 720
    return head + tail - f(m)


@dataclasses.dataclass(frozen=True)
class ZipfPrior:
    """Implicit Zipf distribution over ranks ``1..size``: ``Pr[k] ~ k**-s``."""

    size: int
    s: float

    def __post_init__(self):
        if self.size < 1:
            raise InvalidInputError(f"domain size must be >= 1, got {self.size}")
        if not self.s > 0:
            raise InvalidInputError(f"Zipf exponent must be > 0, got {self.s}")
        object.__setattr__(self, "norm", zipf_normalizer(self.size, self.s))

    def prob(self, rank: int) -> float:
        if not 1 <= rank <= self.size:
            return 0.0
        return rank ** -self.s / self.norm

    def _mass(self, a: int, b: int) -> float:
        if b - a < 1_000_000:
            return float(np.sum(np.arange(b, a - 1, -1, dtype=np.float64) ** -self.s)) / self.norm
        return (zipf_normalizer(b, self.s) - (zipf_normalizer(a - 1, self.s) if a > 1 else 0.0)) / self.norm

    def success(self, metric: LossMetric, guesses: Sequence, record_index: int = 0) -> float:
        if metric.kind == MEMBERSHIP:
            raise InvalidInputError("membership-bit metric needs a {0, 1} domain")
        rel = _integer_guesses(_relevant(metric, guesses, record_index))
        spans = _interval_union(rel, _radius(metric), 1, self.size)
        return min(1.0, sum(self._mass(a, b) for a, b in spans))

    def best_guess(self, metric: LossMetric) -> int:
        r = _radius(metric)
        return min(1 + r, max(1, self.size - r))

    def sample(self, rng: np.random.Generator, size=None):
        if self.size <= MATERIALIZE_LIMIT:
            return self.to_categorical().sample(rng, size)
        if self.s <= 1.0:
            raise InvalidInputError("sampling a huge Zipf domain needs s > 1")
        count = 1 if size is None else int(size)
        out = np.empty(count, dtype=np.int64)
        filled = 0
        while filled < count:
            draw = rng.zipf(self.s, size=count - filled)
            draw = draw[draw <= self.size]
            out[filled:filled + draw.size] = draw
            filled += draw.size
        return int(out[0]) if size is None else out

    def to_categorical(self) -> Categorical:
        ranks = np.arange(1, self.size + 1, dtype=np.float64)
        probs = ranks ** -self.s
        probs /= probs.sum()
        return Categorical(list(range(1, self.size + 1)), probs)

    def to_dict(self) -> dict:
        return {"kind": "zipf", "size": self.size, "s": self.s}


def uniform_prior(domain_size: int):
    """Uniform prior over ``0..domain_size-1``; implicit for huge domains."""
    if domain_size < 1:
        raise InvalidInputError(f"domain size must be >= 1, got {domain_size}")
    if domain_size <= MATERIALIZE_LIMIT:
        return Categorical(list(range(domain_size)), np.full(domain_size, 1.0 / domain_size))
    return UniformPrior(domain_size)


def zipf_prior(domain_size: int, s: float):
    """Zipf prior over ranks ``1..domain_size`` with exponent ``s``."""
    prior = ZipfPrior(domain_size, s)
    if domain_size <= MATERIALIZE_LIMIT:
        ranks = np.arange(1, domain_size + 1, dtype=np.float64)
        return Categorical(list(range(1, domain_size + 1)), ranks ** -s / prior.norm)
    return prior


def prior_success(prior, metric: LossMetric, guesses: Sequence, record_index: int = 0) -> float:
    """Probability that a fresh draw from ``prior`` is hit by ``guesses``."""
    return prior.success(metric, guesses, record_index)


def bayes_optimal_prior_guess(prior, metric: LossMetric):
    """Single guess maximising prior success; ties go to the lowest domain index."""
    return prior.best_guess(metric)


def _candidate_guesses(prior, metric: LossMetric, k: int) -> list:
    if isinstance(prior, Categorical):
        return list(prior.domain)
    first = 0 if isinstance(prior, UniformPrior) else 1
    width = 2 * _radius(metric) + 1
    return list(range(first, min(prior.size, k * width + width) + first))


def greedy_pooled_guesses(priors: Sequence, metric: LossMetric, k: int) -> list:
    """Picks ``k`` shared guesses greedily by total prior success over ``priors``.

    Optimal for exact match; a heuristic for ball metrics.
    """
    if k < 1:
        raise InvalidInputError(f"guess count must be >= 1, got {k}")
    pooled = dataclasses.replace(metric, addressing="pooled")
    seen, candidates = set(), []
    for prior in priors:
        for c in _candidate_guesses(prior, pooled, k):
            if c not in seen:
                seen.add(c)
                candidates.append(c)
    chosen: list = []
    for _ in range(min(k, len(candidates))):
        best, best_gain = None, -1.0
        for c in candidates:
            if c in chosen:
                continue
            gain = sum(d.success(pooled, chosen + [c]) for d in priors)
            if gain > best_gain:
                best, best_gain = c, gain
        chosen.append(best)
    return chosen


@dataclasses.dataclass(frozen=True)
class ProductPrior:
    """Independent per-record priors."""

    factors: tuple

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        if len(self.factors) < 1:
            raise InvalidInputError("a product prior needs at least one factor")

    @classmethod
    def iid(cls, prior, n: int) -> "ProductPrior":
        return cls((prior,) * n)

    @property
    def n(self) -> int:
        return len(self.factors)

    def __getitem__(self, i):
        return self.factors[i]

    def __len__(self):
        return len(self.factors)


def _key(known) -> tuple:
    if isinstance(known, (list, tuple, np.ndarray)):
        return tuple(_canon(v) for v in (known.tolist() if isinstance(known, np.ndarray) else known))
    return (_canon(known),)


def _parse_key(text: str) -> tuple:
    out = []
    for part in text.split(","):
        part = part.strip()
        try:
            out.append(int(part))
        except ValueError:
            try:
                out.append(float(part))
            except ValueError:
                out.append(part)
    return tuple(out)


class ConditionalPriorTable:
    """Known-attribute tuple -> distribution over the unknown attributes."""

    def __init__(self, table: Mapping):
        self.table = {_key(k): v for k, v in table.items()}
        for k, v in self.table.items():
            if not isinstance(v, Categorical):
                raise InvalidInputError(f"entry for {k} is not a Categorical")

    def __len__(self):
        return len(self.table)

    def __contains__(self, known):
        return _key(known) in self.table

    def condition(self, known) -> Categorical:
        key = _key(known)
        try:
            return self.table[key]
        except KeyError:
            raise LookupError(f"no conditional prior for known tuple {key}") from None

    @classmethod
    def from_joint(cls, joint: np.ndarray, unknown_domain: Sequence, known_domains: Sequence[Sequence]):
        """Builds a table from a joint array indexed ``[unknown, known_1, ...]``."""
        joint = np.asarray(joint, dtype=np.float64)
        table = {}
        for idx in np.ndindex(*joint.shape[1:]):
            col = joint[(slice(None),) + idx]
            total = col.sum()
            if total <= 0:
                continue
            key = tuple(known_domains[a][i] for a, i in enumerate(idx))
            table[key] = Categorical(unknown_domain, col / total)
        return cls(table)

    def to_dict(self) -> dict:
        return {"kind": "conditional",
                "table": {",".join(str(x) for x in k): {kk: vv for kk, vv in v.to_dict().items() if kk != "kind"}
                          for k, v in self.table.items()}}


def condition(table: ConditionalPriorTable, known) -> Categorical:
    """Conditional distribution of the unknown attributes given ``known``."""
    return table.condition(known)


_PRIOR_FIELDS = {
    "uniform": {"kind", "size"},
    "zipf": {"kind", "size", "s"},
    "categorical": {"kind", "domain", "probs", "ordinal"},
    "conditional": {"kind", "table", "ordinal"},
}


def prior_from_dict(d: Mapping):
    """Parses the JSON prior format; unknown fields are rejected."""
    kind = d.get("kind")
    if kind not in _PRIOR_FIELDS:
        raise InvalidInputError(f"prior 'kind' must be one of {sorted(_PRIOR_FIELDS)}, got {kind!r}")
    extra = set(d) - _PRIOR_FIELDS[kind]
    if extra:
        raise InvalidInputError(f"unknown fields for {kind} prior: {sorted(extra)}")
    try:
        if kind == "uniform":
            return uniform_prior(int(d["size"]))
        if kind == "zipf":
            return zipf_prior(int(d["size"]), float(d["s"]))
        if kind == "categorical":
            return Categorical(d["domain"], d["probs"], ordinal=d.get("ordinal", False))
        table = {}
        for key, entry in d["table"].items():
            bad = set(entry) - {"domain", "probs"}
            if bad:
                raise InvalidInputError(f"unknown fields in table entry {key!r}: {sorted(bad)}")
            table[_parse_key(key)] = Categorical(entry["domain"], entry["probs"], ordinal=d.get("ordinal", False))
        return ConditionalPriorTable(table)
    except KeyError as exc:
        raise InvalidInputError(f"{kind} prior is missing field {exc.args[0]!r}") from None


def load_prior(path):
    with open(path) as fh:
        return prior_from_dict(json.load(fh))
