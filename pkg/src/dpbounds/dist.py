"""Exact Poisson-binomial machinery and binomial confidence intervals.

A Bernoulli profile is a 1-D array of flipping probabilities; the sum of the
corresponding independent Bernoulli variables is Poisson-binomial. All
probabilities here are computed exactly by convolution, never approximated.
"""
from __future__ import annotations

import math
from collections.abc import Sequence

import numpy as np
from scipy import stats

from . import kernels


class InvalidInputError(ValueError):
    """Raised when an argument violates a documented precondition."""


def as_profile(betas: Sequence[float] | np.ndarray) -> np.ndarray:
    """Validates a Bernoulli profile and returns it as a float64 array."""
    arr = np.ascontiguousarray(betas, dtype=np.float64)
    if arr.ndim != 1:
        raise InvalidInputError(f"profile must be one-dimensional, got shape {arr.shape}")
    if arr.size and (not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0):
        bad = arr[~((arr >= 0.0) & (arr <= 1.0))]
        raise InvalidInputError(f"flipping probabilities must lie in [0, 1], got {bad[:3].tolist()}")
    return arr


def pb_pmf(betas) -> np.ndarray:
    """Probability mass function of a Poisson-binomial sum.

    Args:
      betas: Flipping probabilities, each in [0, 1].

    Returns:
      Array ``pmf`` of length ``n + 1`` with ``pmf[j] = Pr[S = j]``.
    """
    return kernels.poibin_pmf(as_profile(betas))


def pb_survival(betas) -> np.ndarray:
    """Tail table ``surv[t] = Pr[S >= t]`` for ``t = 0..n+1``."""
    return kernels.survival_from_pmf(pb_pmf(betas))


def tail_from_survival(surv: np.ndarray, v) -> float:
    """Looks up ``Pr[S >= v]`` in a tail table; real ``v`` is rounded up."""
    t = math.ceil(v)
    n = surv.shape[0] - 2
    if t <= 0:
        return 1.0
    if t > n:
        return 0.0
    return float(surv[t])


def pb_tail(betas, v) -> float:
    """Returns ``Pr[S >= v]`` for the Poisson-binomial sum of ``betas``."""
    return tail_from_survival(pb_survival(betas), v)


def pb_quantile(betas, alpha: float) -> int:
    """Smallest ``v`` with ``Pr[S >= v + 1] <= alpha``.

    With probability at least ``1 - alpha`` the sum is at most the returned
    value.
    """
    if not 0.0 < alpha < 1.0:
        raise InvalidInputError(f"alpha must lie in (0, 1), got {alpha}")
    surv = pb_survival(betas)
    return int(kernels.inflated_quantile(surv, 0.0, float(alpha)))


def dominance_report(samples, betas) -> np.ndarray:
    """Empirical tail minus dominating tail at every threshold.

    Entry ``t`` (for ``t = 0..n``) is the fraction of samples that are
    ``>= t`` minus ``Pr[S >= t]``. Positive entries are candidate dominance
    violations; whether they exceed Monte Carlo noise is for the caller to
    decide.
    """
    surv = pb_survival(betas)
    n = surv.shape[0] - 2
    w = np.asarray(samples)
    if w.size == 0:
        raise InvalidInputError("samples must be non-empty")
    if not np.issubdtype(w.dtype, np.integer):
        if not np.all(w == np.round(w)):
            raise InvalidInputError("samples must be integers")
        w = w.astype(np.int64)
    if w.min() < 0 or w.max() > n:
        raise InvalidInputError(f"samples must lie in 0..{n}")
    counts = np.bincount(w, minlength=n + 1)
    empirical = counts[::-1].cumsum()[::-1] / w.size
    return empirical - surv[: n + 1]


def binomial_ci(successes: int, trials: int, conf: float = 0.95) -> tuple[float, float]:
    """Exact two-sided Clopper-Pearson interval for a binomial proportion."""
    if trials < 1 or not 0 <= successes <= trials:
        raise InvalidInputError(f"need 0 <= successes <= trials and trials >= 1, got {successes}/{trials}")
    if not 0.0 < conf < 1.0:
        raise InvalidInputError(f"conf must lie in (0, 1), got {conf}")
    tail = (1.0 - conf) / 2.0
    lo = 0.0 if successes == 0 else float(stats.beta.ppf(tail, successes, trials - successes + 1))
    hi = 1.0 if successes == trials else float(stats.beta.ppf(1.0 - tail, successes + 1, trials - successes))
    return lo, hi
