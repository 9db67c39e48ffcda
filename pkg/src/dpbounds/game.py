"""The generic attack game, its one-run estimator, and replay experiments.

A game samples target records from a product prior, runs a mechanism, lets an
attack guess from the output alone, and scores the guesses with a
decomposable metric. Randomness is split into per-stage streams derived from
``(master seed, replay index, stage name)``, so a replay is reproducible no
matter how replays are scheduled.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import math
import zlib
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import kernels
from .attacks import MAI_GRADIENT, PRIOR_ONLY, RR_BAYES, AttackConfig, mai_gradient_attack, \
    prior_only_attack, rr_bayes_attack, rr_bayes_attack_batch
from .bounds import beta, optimal_prior_success
from .dist import InvalidInputError, pb_survival
from .mechanisms import MarginalWorkload, noisy_marginals, rr_channel, rr_mechanism
from .metrics import ALIGNED, LossMetric, accepted_mask
from .priors import Categorical, ConditionalPriorTable, ProductPrior

SAMPLING = "sampling"
MECHANISM = "mechanism"
ATTACK = "attack"
SCORING = "scoring"


class GameError(RuntimeError):
    """A component failed inside one stage of the game."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage} stage failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclasses.dataclass(frozen=True)
class RRSpec:
    """m-ary randomized response applied to every record independently."""

    eps: float
    m: int

    def __post_init__(self):
        if self.m < 2:
            raise InvalidInputError(f"randomized response needs m >= 2, got {self.m}")
        if not self.eps >= 0:
            raise InvalidInputError(f"eps must be >= 0, got {self.eps}")


@dataclasses.dataclass(frozen=True)
class MarginalSpec:
    """Gaussian noisy k-way marginals over a table with public known columns.

    Each target is the tuple of unknown attributes of one row (a scalar when
    there is a single unknown column); ``known`` holds the public columns of
    the target rows, in target order.
    """

    workload: MarginalWorkload
    sigma: float
    known: np.ndarray
    known_columns: tuple
    unknown_columns: tuple

    def __post_init__(self):
        known = np.asarray(self.known, dtype=np.int64)
        if known.ndim != 2 or known.shape[1] != len(self.known_columns):
            raise InvalidInputError(f"known data must have one column per known attribute, got shape {known.shape}")
        object.__setattr__(self, "known", known)
        object.__setattr__(self, "known_columns", tuple(int(a) for a in self.known_columns))
        object.__setattr__(self, "unknown_columns", tuple(int(a) for a in self.unknown_columns))
        cols = set(self.known_columns) | set(self.unknown_columns)
        if cols != set(range(self.workload.d)) or len(cols) != len(self.known_columns) + len(self.unknown_columns):
            raise InvalidInputError("known and unknown columns must partition the attributes")
        if not self.sigma >= 0:
            raise InvalidInputError(f"sigma must be >= 0, got {self.sigma}")

    def rows(self, targets: Sequence, fixed: Sequence = ()) -> np.ndarray:
        """Full dataset: target rows in order, then fixed non-target rows."""
        n = self.known.shape[0]
        data = np.empty((n, self.workload.d), dtype=np.int64)
        data[:, list(self.known_columns)] = self.known
        unknown = np.asarray(targets, dtype=np.int64).reshape(n, len(self.unknown_columns))
        data[:, list(self.unknown_columns)] = unknown
        if len(fixed):
            data = np.vstack([data, np.asarray(fixed, dtype=np.int64).reshape(-1, self.workload.d)])
        return data


@dataclasses.dataclass(frozen=True)
class GameConfig:
    """Everything needed to play the game once per seed.

    Attributes:
      prior: Per-target prior, or a conditional table for marginal games
        (each target's prior is then the table conditioned on its known
        columns).
      mechanism: :class:`RRSpec` or :class:`MarginalSpec`.
      attack: Attack choice and hyperparameters.
      metric: Per-record success predicate.
      n: Number of targets.
      k: Number of guesses for pooled metrics.
      seed: Master seed.
      fixed_records: Non-target records passed to the mechanism but never
        scored (RR values, or full rows for marginal games).
    """

    prior: ProductPrior | ConditionalPriorTable
    mechanism: RRSpec | MarginalSpec
    attack: AttackConfig
    metric: LossMetric
    n: int
    k: int = 1
    seed: int = 0
    fixed_records: tuple = ()

    def __post_init__(self):
        if self.n < 1:
            raise InvalidInputError(f"n must be >= 1, got {self.n}")
        if self.k < 1:
            raise InvalidInputError(f"k must be >= 1, got {self.k}")
        object.__setattr__(self, "fixed_records", tuple(self.fixed_records))
        priors = self.target_priors()
        if priors.n != self.n:
            raise InvalidInputError(f"prior covers {priors.n} targets, config says n = {self.n}")
        if isinstance(self.mechanism, RRSpec):
            if self.attack.kind == MAI_GRADIENT:
                raise InvalidInputError("mai-gradient attack needs a marginal mechanism")
            for d in priors.factors:
                if not isinstance(d, Categorical) or d.size != self.mechanism.m:
                    raise InvalidInputError(f"randomized response needs explicit priors over {self.mechanism.m} values")
            if self.attack.kind == RR_BAYES and self.metric.addressing != ALIGNED:
                raise InvalidInputError("the rr-bayes attack produces aligned guesses")
        else:
            if self.attack.kind == RR_BAYES:
                raise InvalidInputError("rr-bayes attack needs a randomized-response mechanism")
            if self.attack.kind == MAI_GRADIENT and self.metric.addressing != ALIGNED:
                raise InvalidInputError("the mai-gradient attack produces aligned guesses")

    def target_priors(self) -> ProductPrior:
        if isinstance(self.prior, ConditionalPriorTable):
            if not isinstance(self.mechanism, MarginalSpec):
                raise InvalidInputError("a conditional prior needs a marginal mechanism with known columns")
            return ProductPrior(tuple(self.prior.condition(tuple(row.tolist())) for row in self.mechanism.known))
        return self.prior

    def with_seed(self, seed: int) -> "GameConfig":
        return dataclasses.replace(self, seed=seed)


@dataclasses.dataclass
class AttackTranscript:
    """One play of the game.

    ``prior_success`` holds the prior success of the guesses actually made
    (this feeds the pure-DP profile); ``prior_success_star`` holds that of
    the a priori Bayes-optimal guesses (this feeds the approximate-DP
    one-run bound). Both depend on the prior only, never on ``records``.
    """

    records: list
    output: object
    guesses: list
    success: np.ndarray
    W: int
    prior_success: np.ndarray
    prior_success_star: np.ndarray
    seed: tuple

    @property
    def n(self) -> int:
        return len(self.records)


@dataclasses.dataclass(frozen=True)
class EstimatorResult:
    alphas: tuple
    vub: tuple
    betas: np.ndarray

    def to_dict(self) -> dict:
        return {"alphas": list(self.alphas), "v_ub": list(self.vub)}


def stage_rng(seed: int, replay: int, stage: str) -> np.random.Generator:
    """Independent generator for one stage of one replay."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(replay), zlib.crc32(stage.encode())]))


def _staged(stage: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except GameError:
        raise
    except Exception as exc:  # noqa: BLE001 - relabelled and re-raised
        raise GameError(stage, exc) from exc


def _iid_factor(priors: ProductPrior):
    first = priors.factors[0]
    if all(d is first for d in priors.factors):
        return first
    return None


def _sample_targets(priors: ProductPrior, rng: np.random.Generator) -> list:
    shared = _iid_factor(priors)
    if isinstance(shared, Categorical):
        return [shared.domain[int(i)] for i in shared.sample_index(rng, priors.n)]
    return [d.sample(rng) for d in priors.factors]


def _run_mechanism(cfg: GameConfig, priors: ProductPrior, records: list, rng: np.random.Generator):
    mech = cfg.mechanism
    if isinstance(mech, RRSpec):
        idx = np.array([d.index_of(r) for d, r in zip(priors.factors, records)], dtype=np.int64)
        fixed = np.asarray(cfg.fixed_records, dtype=np.int64)
        return rr_mechanism(np.concatenate([idx, fixed]), mech.eps, mech.m, rng)
    data = mech.rows(records, cfg.fixed_records)
    return noisy_marginals(data, mech.workload, mech.sigma, rng)


def _run_attack(cfg: GameConfig, priors: ProductPrior, output) -> list:
    """Guesses from the mechanism output and public information only."""
    kind = cfg.attack.kind
    if kind == PRIOR_ONLY:
        return prior_only_attack(priors, cfg.metric, cfg.k)
    mech = cfg.mechanism
    if kind == RR_BAYES:
        reports = np.asarray(output)[: cfg.n]
        shared = _iid_factor(priors)
        if shared is not None:
            picked = rr_bayes_attack_batch(reports, shared, mech.eps, mech.m)
            return [shared.domain[int(i)] for i in picked]
        return [d.domain[rr_bayes_attack(int(a), d, mech.eps, mech.m)] for d, a in zip(priors.factors, reports)]
    fixed = np.asarray(cfg.fixed_records, dtype=np.int64).reshape(-1, mech.workload.d)
    recon = mai_gradient_attack(output, mech.workload, mech.known, mech.known_columns, mech.unknown_columns,
                                cfg.prior, cfg.attack, fixed_rows=fixed)
    if recon.shape[1] == 1:
        return [int(x) for x in recon[:, 0]]
    return [tuple(int(x) for x in row) for row in recon]


def _hit(d, metric: LossMetric, record, guesses: list, i: int) -> bool:
    if metric.numeric and isinstance(d, Categorical):
        # ordinal categorical domains are compared by position
        _, mapped = d.numeric_view(metric, [record] + list(guesses))
        record, guesses = mapped[0], mapped[1:]
    return bool(accepted_mask(metric, [record], guesses, i)[0])


def _score(cfg: GameConfig, priors: ProductPrior, records: list, guesses: list) -> tuple[np.ndarray, np.ndarray]:
    metric = cfg.metric
    if metric.addressing == ALIGNED and len(guesses) != cfg.n:
        raise InvalidInputError(f"aligned metric needs {cfg.n} guesses, attack made {len(guesses)}")
    bits = np.array([_hit(d, metric, r, guesses, i) for i, (d, r) in enumerate(zip(priors.factors, records))],
                    dtype=np.int64)
    p = np.array([d.success(metric, guesses, i) for i, d in enumerate(priors.factors)])
    return bits, p


def _star_success(cfg: GameConfig, priors: ProductPrior) -> np.ndarray:
    return optimal_prior_success(priors, cfg.metric, cfg.k)


def run_game(cfg: GameConfig, replay: int = 0, _cache: dict | None = None) -> AttackTranscript:
    """Plays the game once with the streams of ``(cfg.seed, replay)``."""
    cache = {} if _cache is None else _cache
    if "priors" not in cache:
        cache["priors"] = cfg.target_priors()
    priors = cache["priors"]
    records = _staged(SAMPLING, _sample_targets, priors, stage_rng(cfg.seed, replay, SAMPLING))
    output = _staged(MECHANISM, _run_mechanism, cfg, priors, records, stage_rng(cfg.seed, replay, MECHANISM))
    guesses = _staged(ATTACK, _run_attack, cfg, priors, output)
    bits, p = _staged(SCORING, _score, cfg, priors, records, guesses)
    if "star" not in cache:
        cache["star"] = _staged(SCORING, _star_success, cfg, priors)
    return AttackTranscript(records=records, output=output, guesses=list(guesses), success=bits,
                            W=int(bits.sum()), prior_success=p, prior_success_star=cache["star"].copy(),
                            seed=(cfg.seed, replay))


def rescore_transcript(cfg: GameConfig, transcript: AttackTranscript) -> AttackTranscript:
    """Scores an existing transcript's guesses under ``cfg.metric``.

    Only meaningful when the attack's guesses do not depend on the metric,
    as for the rr-bayes and mai-gradient attacks; the prior-only attack
    picks its guesses per metric.
    """
    priors = cfg.target_priors()
    bits, p = _staged(SCORING, _score, cfg, priors, transcript.records, transcript.guesses)
    star = _staged(SCORING, _star_success, cfg, priors)
    return dataclasses.replace(transcript, success=bits, W=int(bits.sum()), prior_success=p,
                               prior_success_star=star)


def _check_alphas(alphas: Sequence[float]) -> tuple:
    alphas = tuple(float(a) for a in alphas)
    if not alphas:
        raise InvalidInputError("need at least one confidence level")
    for a in alphas:
        if not 0.0 < a < 1.0:
            raise InvalidInputError(f"alpha must lie in (0, 1), got {a}")
    return alphas


def estimate_vub(transcript: AttackTranscript, eps: float, delta: float = 0.0,
                 alphas: Sequence[float] = (0.05,)) -> EstimatorResult:
    """One-run upper bound on the success count at each confidence level.

    With ``delta = 0`` the profile comes from the prior success of the
    guesses actually made and ``v_UB`` is the plain Poisson-binomial
    quantile. With ``delta > 0`` the profile comes from the a priori optimal
    guesses and ``v_UB`` is the smallest ``v`` with
    ``tail(v + 1) + lp_alpha(v + 1) * n * delta <= alpha``.
    """
    alphas = _check_alphas(alphas)
    if not 0.0 <= delta <= 1.0:
        raise InvalidInputError(f"delta must lie in [0, 1], got {delta}")
    p = transcript.prior_success if delta == 0 else transcript.prior_success_star
    betas = np.atleast_1d(beta(eps, p))
    surv = pb_survival(betas)
    n_delta = betas.size * delta
    vub = tuple(int(kernels.inflated_quantile(surv, n_delta, a)) for a in alphas)
    return EstimatorResult(alphas=alphas, vub=vub, betas=betas)


@dataclasses.dataclass
class ReplaySummary:
    """Aggregates of a replay experiment.

    Attributes:
      W: Success count of every replay, in replay order.
      empirical_tail: Fraction of replays with ``W >= t``, for ``t = 0..n``.
      bound_tail: Mean over replays of each replay's dominating tail, plus
        ``n * delta``, clipped to 1.
      tail_se: Standard error of the paired per-replay difference
        ``1{W_r >= t} - tail_r(t)``, floored at ``sqrt(q (1 - q) / R)`` with
        ``q`` the mean dominating tail.
      violations: Thresholds where the empirical tail exceeds the bound by
        more than ``slack_se`` standard errors.
      coverage: Fraction of replays with ``W <= v_UB(alpha)`` per alpha.
      coverage_se: Binomial standard error of each coverage fraction.
      vub: Per-replay ``v_UB`` per alpha.
    """

    n: int
    replays: int
    eps: float
    delta: float
    W: np.ndarray
    empirical_tail: np.ndarray
    bound_tail: np.ndarray
    tail_se: np.ndarray
    violations: list
    alphas: tuple
    coverage: tuple
    coverage_se: tuple
    vub: np.ndarray
    slack_se: float = 3.0

    @property
    def w_distribution(self) -> np.ndarray:
        return np.bincount(self.W, minlength=self.n + 1)

    def to_dict(self) -> dict:
        return {
            "n": self.n, "replays": self.replays, "eps": self.eps, "delta": self.delta,
            "w_distribution": self.w_distribution.tolist(),
            "mean_w": float(self.W.mean()),
            "dominance": {"empirical_tail": self.empirical_tail.tolist(), "bound_tail": self.bound_tail.tolist(),
                          "se": self.tail_se.tolist(), "slack_se": self.slack_se,
                          "violations": list(self.violations)},
            "coverage": [{"alpha": a, "fraction": c, "se": s}
                         for a, c, s in zip(self.alphas, self.coverage, self.coverage_se)],
        }

    def table_csv(self) -> str:
        """Plot-ready ``t,empirical_tail,bound_tail`` table."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", "empirical_tail", "bound_tail"])
        for t in range(self.n + 1):
            writer.writerow([t, f"{self.empirical_tail[t]:.9g}", f"{self.bound_tail[t]:.9g}"])
        return buf.getvalue()


def replay_experiment(cfg: GameConfig, replays: int, eps: float, delta: float = 0.0,
                      alphas: Sequence[float] = (0.05,), slack_se: float = 3.0,
                      workers: int = 1) -> ReplaySummary:
    """Plays ``replays`` independent games and checks the bounds against them.

    Dominance compares the empirical tail of ``W`` with the mean of the
    per-replay dominating tails plus ``n * delta``; a threshold is a
    violation when the paired difference exceeds ``slack_se`` standard errors.
    Results do not depend on ``workers``.
    """
    if replays < 1:
        raise InvalidInputError(f"replays must be >= 1, got {replays}")
    alphas = _check_alphas(alphas)
    cache = {"priors": cfg.target_priors()}
    run_game(cfg, 0, cache)  # fills the cache before any worker starts

    def one(r):
        tr = run_game(cfg, r, cache)
        surv = pb_survival(np.atleast_1d(beta(eps, tr.prior_success)))
        est = estimate_vub(tr, eps, delta, alphas)
        return tr.W, surv[: cfg.n + 1], est.vub

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one, range(replays)))
    else:
        results = [one(r) for r in range(replays)]

    n = cfg.n
    W = np.array([w for w, _, _ in results], dtype=np.int64)
    tails = np.stack([s for _, s, _ in results])
    vub = np.array([v for _, _, v in results], dtype=np.int64)
    hits = (W[:, None] >= np.arange(n + 1)[None, :]).astype(np.float64)
    diff = hits - tails
    shift = n * delta
    empirical = hits.mean(axis=0)
    bound = np.minimum(1.0, tails.mean(axis=0) + shift)
    # The paired sample SE collapses to 0 when every replay lands on one side
    # of t, so it is floored by the binomial SE the bound itself implies.
    q = tails.mean(axis=0)
    null_se = np.sqrt(np.clip(q * (1.0 - q), 0.0, None) / replays)
    sample_se = diff.std(axis=0, ddof=1) / math.sqrt(replays) if replays > 1 else np.zeros(n + 1)
    se = np.maximum(sample_se, null_se)
    excess = diff.mean(axis=0) - shift - slack_se * se
    violations = [int(t) for t in np.nonzero((excess > 1e-12) & (empirical > bound))[0]]
    covered = (W[:, None] <= vub).mean(axis=0)
    cov_se = np.sqrt(covered * (1.0 - covered) / replays)
    return ReplaySummary(n=n, replays=replays, eps=eps, delta=delta, W=W, empirical_tail=empirical,
                         bound_tail=bound, tail_se=se, violations=violations, alphas=alphas,
                         coverage=tuple(float(c) for c in covered), coverage_se=tuple(float(s) for s in cov_se),
                         vub=vub, slack_se=slack_se)


def rr_output_conditional_check(prior: Categorical, eps: float) -> list[dict]:
    """Exact per-output success of the Bayes RR attacker against the pure-DP bound.

    For one target and every possible report ``a``, computes the posterior
    probability that the attacker's guess is right given ``a`` and the bound
    ``beta(eps, p)`` at that guess's prior mass. Feasible for small domains
    only, where conditioning on the output can be done by enumeration.
    """
    m = prior.size
    channel = rr_channel(eps, m)
    rows = []
    for a in range(m):
        joint = channel[a] * prior.probs
        total = joint.sum()
        if total <= 0:
            continue
        z = rr_bayes_attack(a, prior, eps, m)
        rows.append({"output": a, "guess": z, "posterior": float(joint[z] / total),
                     "bound": float(beta(eps, prior.probs[z]))})
    return rows
