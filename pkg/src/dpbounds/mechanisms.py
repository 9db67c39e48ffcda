"""Randomized response, noisy k-way marginals, and Gaussian-DP calibration."""
from __future__ import annotations

import dataclasses
import itertools
import math
from collections.abc import Sequence

import numpy as np
from scipy import optimize, special

from .dist import InvalidInputError


class CalibrationError(RuntimeError):
    """No noise level in the search bracket achieves the requested delta."""


def rr_keep_probability(eps: float, m: int) -> float:
    """Probability that m-ary randomized response reports the true value."""
    if m < 2:
        raise InvalidInputError(f"randomized response needs m >= 2, got {m}")
    if not eps >= 0:
        raise InvalidInputError(f"eps must be >= 0, got {eps}")
    # e^eps / (e^eps - 1 + m), rewritten to survive eps = inf
    return 1.0 / (1.0 + (m - 1) * math.exp(-eps))


def rr_channel(eps: float, m: int) -> np.ndarray:
    """Transition matrix ``P[output, input]`` of m-ary randomized response."""
    keep = rr_keep_probability(eps, m)
    other = (1.0 - keep) / (m - 1)
    return np.full((m, m), other) + np.eye(m) * (keep - other)


def rr_mechanism(record, eps: float, m: int, rng: np.random.Generator):
    """Applies m-ary randomized response to one record or an array of records.

    Keeps the true value with probability ``e^eps / (e^eps - 1 + m)`` and
    otherwise reports one of the other ``m - 1`` values uniformly.
    """
    keep = rr_keep_probability(eps, m)
    x = np.asarray(record)
    if np.any((x < 0) | (x >= m)):
        raise InvalidInputError(f"records must lie in 0..{m - 1}")
    size = None if x.ndim == 0 else x.shape
    stay = rng.random(size) < keep
    other = rng.integers(m - 1, size=size)
    other = other + (other >= x)
    out = np.where(stay, x, other)
    return int(out) if x.ndim == 0 else out


@dataclasses.dataclass(frozen=True)
class MarginalWorkload:
    """A set of k-way marginal queries.

    Attributes:
      domain_sizes: Number of values of each of the ``d`` attributes; values
        are encoded as ``0..size-1``.
      vsets: Attribute subsets, each sorted and of size ``k``.
    """

    domain_sizes: tuple
    vsets: tuple

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.domain_sizes)
        vsets = tuple(tuple(sorted(int(a) for a in v)) for v in self.vsets)
        object.__setattr__(self, "domain_sizes", sizes)
        object.__setattr__(self, "vsets", vsets)
        if any(s < 1 for s in sizes):
            raise InvalidInputError("attribute domains must be non-empty")
        if not vsets:
            raise InvalidInputError("workload needs at least one attribute subset")
        ks = {len(v) for v in vsets}
        if len(ks) != 1:
            raise InvalidInputError(f"all attribute subsets must share one size k, got {sorted(ks)}")
        if len(set(vsets)) != len(vsets):
            raise InvalidInputError("attribute subsets must be distinct")
        for v in vsets:
            if len(set(v)) != len(v) or v[0] < 0 or v[-1] >= len(sizes):
                raise InvalidInputError(f"invalid attribute subset {v} for d = {len(sizes)}")

    @classmethod
    def all_k(cls, domain_sizes: Sequence[int], k: int) -> "MarginalWorkload":
        d = len(domain_sizes)
        if not 1 <= k <= d:
            raise InvalidInputError(f"need 1 <= k <= d, got k = {k}, d = {d}")
        return cls(tuple(domain_sizes), tuple(itertools.combinations(range(d), k)))

    @property
    def d(self) -> int:
        return len(self.domain_sizes)

    @property
    def k(self) -> int:
        return len(self.vsets[0])

    def shape(self, vset) -> tuple:
        return tuple(self.domain_sizes[a] for a in vset)

    def slices(self) -> list[slice]:
        """Position of each attribute subset's block in the released vector."""
        out, start = [], 0
        for v in self.vsets:
            size = math.prod(self.shape(v))
            out.append(slice(start, start + size))
            start += size
        return out

    @property
    def length(self) -> int:
        return sum(math.prod(self.shape(v)) for v in self.vsets)


def _as_dataset(dataset) -> np.ndarray:
    data = np.asarray(dataset)
    if data.ndim != 2:
        raise InvalidInputError(f"dataset must be a 2-D array of records, got shape {data.shape}")
    if data.shape[0] == 0:
        raise InvalidInputError("dataset must contain at least one record")
    return data


def marginal_query(dataset, vset: Sequence[int], values: Sequence) -> float:
    """Fraction of records agreeing with ``values`` on the attributes ``vset``."""
    data = _as_dataset(dataset)
    vset = list(vset)
    if len(values) != len(vset):
        raise InvalidInputError("need one value per attribute in the subset")
    match = np.all(data[:, vset] == np.asarray(values), axis=1)
    return float(match.mean())


def marginal_vector(dataset, workload: MarginalWorkload) -> np.ndarray:
    """Exact full marginal tables, flattened in C order and concatenated."""
    data = _as_dataset(dataset).astype(np.int64)
    if data.shape[1] != workload.d:
        raise InvalidInputError(f"dataset has {data.shape[1]} attributes, workload expects {workload.d}")
    sizes = np.asarray(workload.domain_sizes)
    if np.any(data < 0) or np.any(data >= sizes):
        raise InvalidInputError("dataset values fall outside the declared attribute domains")
    blocks = []
    for v in workload.vsets:
        shape = workload.shape(v)
        flat = np.ravel_multi_index(tuple(data[:, a] for a in v), shape)
        blocks.append(np.bincount(flat, minlength=math.prod(shape)) / data.shape[0])
    return np.concatenate(blocks)


def noisy_marginals(dataset, workload: MarginalWorkload, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Full marginal vectors plus independent ``N(0, 2 sigma^2)`` noise per entry."""
    if not sigma >= 0:
        raise InvalidInputError(f"sigma must be >= 0, got {sigma}")
    exact = marginal_vector(dataset, workload)
    if sigma == 0:
        return exact
    return exact + rng.normal(0.0, math.sqrt(2.0) * sigma, size=exact.shape)


def gdp_delta(eps: float, mu: float) -> float:
    """delta(eps) of a mu-GDP mechanism.

    ``Phi(-eps/mu + mu/2) - e^eps Phi(-eps/mu - mu/2)``; the second term is
    formed in log space so large ``eps`` neither overflows nor cancels.
    """
    if not mu > 0:
        raise InvalidInputError(f"mu must be > 0, got {mu}")
    if not eps >= 0:
        raise InvalidInputError(f"eps must be >= 0, got {eps}")
    first = special.ndtr(-eps / mu + mu / 2.0)
    second = math.exp(eps + special.log_ndtr(-eps / mu - mu / 2.0))
    return float(min(1.0, max(0.0, first - second)))


def composition_count(d: int, k: int, d_unknown: int) -> int:
    """Number of k-subsets of d attributes that touch at least one unknown attribute."""
    if not 1 <= k <= d:
        raise InvalidInputError(f"need 1 <= k <= d, got k = {k}, d = {d}")
    if not 0 <= d_unknown <= d:
        raise InvalidInputError(f"need 0 <= d_unknown <= d, got {d_unknown}")
    return math.comb(d, k) - math.comb(d - d_unknown, k)


@dataclasses.dataclass(frozen=True)
class CalibrationResult:
    sigma: float
    mu: float
    m: int

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


MU_BRACKET = (1e-6, 100.0)


def calibrate_sigma(eps: float, delta: float, m: int) -> CalibrationResult:
    """Noise scale for ``m`` composed releases to satisfy (eps, delta)-DP.

    Each release has L2 sensitivity sqrt(2) and noise std sqrt(2) sigma, so
    it is (1/sigma)-GDP; ``m`` of them compose to ``sqrt(m)/sigma``-GDP. The
    total GDP parameter is solved from ``gdp_delta(eps, mu) = delta``.
    """
    if not eps > 0:
        raise InvalidInputError(f"eps must be > 0, got {eps}")
    if not 0.0 < delta < 1.0:
        raise InvalidInputError(f"delta must lie in (0, 1), got {delta}")
    if m < 1:
        raise InvalidInputError(f"composition count must be >= 1, got {m}")
    lo, hi = MU_BRACKET
    f = lambda mu: gdp_delta(eps, mu) - delta
    if f(lo) > 0 or f(hi) < 0:
        raise CalibrationError(f"no mu in {MU_BRACKET} gives delta = {delta} at eps = {eps}")
    mu = optimize.brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    if abs(f(mu)) > 1e-10:
        raise CalibrationError(f"root finding stalled: delta error {f(mu):.3g}")
    return CalibrationResult(sigma=math.sqrt(m) / mu, mu=mu, m=int(m))
