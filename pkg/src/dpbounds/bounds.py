"""Upper bounds on attack success against DP mechanisms.

Every bound here compares the attack with a sum of independent Bernoulli
variables whose flipping probabilities depend only on the privacy parameters
and on how likely each guess would be to succeed without seeing the
mechanism output.
"""
from __future__ import annotations

import dataclasses
import math
from collections.abc import Sequence

import numpy as np
from scipy import special

from . import kernels
from .dist import InvalidInputError, as_profile, pb_survival, tail_from_survival
from .metrics import ALIGNED, LossMetric
from .priors import ProductPrior, greedy_pooled_guesses

PURE = "pure"
APPROX_ONERUN = "approx-onerun"
APPROX_MC = "approx-mc"
BASELINE_RERO = "baseline-rero"
BASELINE_NARCISSUS = "baseline-narcissus"

EPS_PROTECT_MAX = 50.0


@dataclasses.dataclass(frozen=True)
class PrivacyParams:
    eps: float
    delta: float = 0.0

    def __post_init__(self):
        if not self.eps >= 0:
            raise InvalidInputError(f"eps must be >= 0, got {self.eps}")
        if not 0.0 <= self.delta <= 1.0:
            raise InvalidInputError(f"delta must lie in [0, 1], got {self.delta}")


@dataclasses.dataclass(frozen=True)
class BoundResult:
    """Outcome of a bound computation.

    ``value`` upper-bounds ``Pr[success >= v]``. ``alpha_multiplier`` is only
    set by the one-run approximate-DP bound, ``ci`` only by the Monte Carlo
    bound.
    """

    value: float
    kind: str
    v: float | None = None
    alpha_multiplier: float | None = None
    ci: tuple[float, float] | None = None
    betas: tuple[float, ...] | None = None

    def to_dict(self) -> dict:
        out = {"value": self.value, "kind": self.kind, "v": self.v}
        if self.alpha_multiplier is not None:
            out["alpha_multiplier"] = self.alpha_multiplier
        if self.ci is not None:
            out["ci"] = list(self.ci)
        return out


def _clip01(x: float) -> float:
    return float(min(1.0, max(0.0, x)))


def beta(eps, p):
    """Flipping probability ``e^eps / (e^eps - 1 + 1/p)``.

    Evaluated as ``p / (p + (1 - p) e^-eps)``, which is algebraically equal,
    handles ``p = 0`` and ``p = 1`` without special cases and does not
    overflow for large ``eps``. Accepts scalars or arrays.
    """
    eps_a = np.asarray(eps, dtype=np.float64)
    p_a = np.asarray(p, dtype=np.float64)
    if np.any(~(eps_a >= 0)):
        raise InvalidInputError(f"eps must be >= 0, got {eps}")
    if np.any(~((p_a >= 0) & (p_a <= 1))):
        raise InvalidInputError(f"prior probability must lie in [0, 1], got {p}")
    with np.errstate(invalid="ignore", divide="ignore"):
        out = p_a / (p_a + (1.0 - p_a) * np.exp(-eps_a))
    out = np.where(p_a == 0, 0.0, out)
    if out.ndim == 0:
        return float(out)
    return out


def bound_pure(params: PrivacyParams, priors_at_guesses: Sequence[float], v) -> BoundResult:
    """Tail bound for pure eps-DP: ``Pr[success >= v]`` given a fixed output.

    Args:
      params: Privacy parameters; ``delta`` must be 0.
      priors_at_guesses: For each target, the prior probability that the
        attack's guesses hit a fresh draw of that target.
      v: Success threshold.
    """
    if params.delta != 0:
        raise InvalidInputError("bound_pure needs delta = 0; use bound_approx_onerun or bound_approx_mc")
    betas = np.atleast_1d(beta(params.eps, as_profile(priors_at_guesses)))
    value = tail_from_survival(pb_survival(betas), v)
    return BoundResult(value=_clip01(value), kind=PURE, v=v, betas=tuple(betas.tolist()))


def lp_alpha(betas, v) -> float:
    """Multiplier on ``n * delta`` from the dual of the worst-case-F linear program.

    ``max_{j=1..n} (Pr[S >= v - j] - Pr[S >= v]) / j``, floored at 0.
    """
    surv = pb_survival(betas)
    return float(kernels.lp_alpha(surv, math.ceil(v)))


def optimal_prior_success(prior: ProductPrior, metric: LossMetric, k: int = 1) -> np.ndarray:
    """Per-target prior success of the a priori Bayes-optimal attempt.

    For aligned metrics this is each target's best single guess. For pooled
    metrics each target is credited with the best ``k`` guesses for its own
    prior, which upper-bounds what any shared set of ``k`` guesses achieves.
    """
    out = np.empty(prior.n)
    for i, d in enumerate(prior.factors):
        if metric.addressing == ALIGNED:
            z = d.best_guess(metric)
            out[i] = d.success(metric, [z])
        else:
            out[i] = d.success(metric, greedy_pooled_guesses([d], metric, k))
    return out


def bound_approx_onerun(params: PrivacyParams, prior: ProductPrior, metric: LossMetric, v,
                        k: int = 1) -> BoundResult:
    """One-run (eps, delta)-DP bound built on the a priori optimal attempt.

    Returns ``Pr[S* >= v] + alpha * n * delta``, where the flipping
    probabilities of ``S*`` come from the Bayes-optimal prior guesses and
    ``alpha`` is :func:`lp_alpha`.
    """
    return bound_approx_onerun_from_success(params, optimal_prior_success(prior, metric, k), v)


def bound_approx_onerun_from_success(params: PrivacyParams, p_star: Sequence[float], v) -> BoundResult:
    """:func:`bound_approx_onerun` given the optimal prior successes directly."""
    betas = np.atleast_1d(beta(params.eps, as_profile(p_star)))
    surv = pb_survival(betas)
    tail = tail_from_survival(surv, v)
    alpha = float(kernels.lp_alpha(surv, math.ceil(v))) if params.delta > 0 else 0.0
    value = tail + alpha * betas.size * params.delta
    return BoundResult(value=_clip01(value), kind=APPROX_ONERUN, v=v, alpha_multiplier=alpha,
                       betas=tuple(betas.tolist()))


def bound_approx_mc(params: PrivacyParams, profiles: Sequence[Sequence[float]], v,
                    conf: float = 0.95) -> BoundResult:
    """Monte Carlo (eps, delta)-DP bound over repeated runs of the mechanism.

    Args:
      params: Privacy parameters.
      profiles: One Bernoulli profile per independent run of the game, i.e.
        ``beta(eps, p_i)`` for the prior success ``p_i`` of that run's guesses.
      v: Success threshold.
      conf: Confidence level of the reported interval on the Monte Carlo mean.

    Returns:
      The mean of the per-run Poisson-binomial tails plus ``n * delta``.
      Tails are exact per run, so ``ci`` is a normal interval from the sample
      standard error, shifted by ``n * delta`` and clipped to [0, 1].
    """
    if len(profiles) == 0:
        raise InvalidInputError("need at least one run")
    n = len(profiles[0])
    tails = np.empty(len(profiles))
    for r, run in enumerate(profiles):
        if len(run) != n:
            raise InvalidInputError("every run must have the same number of targets")
        tails[r] = tail_from_survival(pb_survival(run), v)
    mean = float(tails.mean())
    shift = n * params.delta
    se = float(tails.std(ddof=1) / math.sqrt(tails.size)) if tails.size > 1 else 0.0
    z = float(special.ndtri(0.5 + conf / 2.0))
    ci = (_clip01(mean - z * se + shift), _clip01(mean + z * se + shift))
    return BoundResult(value=_clip01(mean + shift), kind=APPROX_MC, v=v, ci=ci)


def bits_leaked(eps: float, alpha: float) -> float:
    """Bits about one uniform target leaked with probability at most ``alpha``.

    ``log2(e^eps (1/alpha - 1) + 1)``.
    """
    if not eps >= 0:
        raise InvalidInputError(f"eps must be >= 0, got {eps}")
    if not 0.0 < alpha < 1.0:
        raise InvalidInputError(f"alpha must lie in (0, 1), got {alpha}")
    return float(np.logaddexp(eps + math.log(1.0 / alpha - 1.0), 0.0) / math.log(2.0))


def advantage(posterior: float, prior: float) -> float:
    """Generalised advantage ``(posterior - prior) / (1 - prior)``."""
    if not 0.0 <= prior < 1.0:
        raise InvalidInputError(f"prior must lie in [0, 1), got {prior}")
    if not 0.0 <= posterior <= 1.0:
        raise InvalidInputError(f"posterior must lie in [0, 1], got {posterior}")
    return (posterior - prior) / (1.0 - prior)


def eps_protect(p: float, threshold: float = 0.05, delta: float = 0.0, tol: float = 1e-4,
                eps_max: float = EPS_PROTECT_MAX) -> float:
    """Largest eps whose single-target advantage bound stays within ``threshold``.

    The posterior bound is ``beta(eps, p) + delta``. Returns 0 when the
    threshold is already exceeded at eps = 0 and ``inf`` when it still holds
    at ``eps_max``.
    """
    if not 0.0 < p < 1.0:
        raise InvalidInputError(f"p must lie in (0, 1), got {p}")
    if not 0.0 < threshold < 1.0:
        raise InvalidInputError(f"threshold must lie in (0, 1), got {threshold}")
    if not 0.0 <= delta <= 1.0:
        raise InvalidInputError(f"delta must lie in [0, 1], got {delta}")

    def adv(eps):
        return advantage(min(1.0, beta(eps, p) + delta), p)

    if adv(0.0) > threshold:
        return 0.0
    if adv(eps_max) <= threshold:
        return math.inf
    lo, hi = 0.0, eps_max
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if adv(mid) <= threshold:
            lo = mid
        else:
            hi = mid
    return lo


def baseline_rero(eps: float, kappa: float) -> float:
    """ReRo pure-DP bound ``min(1, e^eps * kappa)``; ``kappa`` is the heaviest prior mass."""
    if kappa == 0:
        return 0.0
    return float(min(1.0, math.exp(min(eps, 700.0)) * kappa))


def baseline_narcissus(eps: float, delta: float, p: float) -> float:
    """Narcissus-resiliency bound for (eps, delta)-DP: ``min(1, e^eps * p + delta)``."""
    if p == 0:
        return float(min(1.0, delta))
    return float(min(1.0, math.exp(min(eps, 700.0)) * p + delta))
