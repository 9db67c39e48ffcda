"""Concrete adversaries for the attack game.

None of these functions ever sees the sampled target records: they receive
the mechanism output, the prior, and public side information only.
"""
from __future__ import annotations

import dataclasses
import math
import string
from collections.abc import Sequence

import numpy as np

from .dist import InvalidInputError
from .mechanisms import MarginalWorkload
from .metrics import ALIGNED, LossMetric
from .priors import Categorical, ConditionalPriorTable, ProductPrior, greedy_pooled_guesses

RR_BAYES = "rr-bayes"
PRIOR_ONLY = "prior-only"
MAI_GRADIENT = "mai-gradient"


class NumericFailure(ArithmeticError):
    """The relaxed objective or its gradient stopped being finite."""

    def __init__(self, iteration: int, what: str):
        super().__init__(f"non-finite {what} at iteration {iteration}")
        self.iteration = iteration


@dataclasses.dataclass(frozen=True)
class MAIResult:
    """Reconstruction plus optimizer state.

    ``trace[t]`` is the objective after step ``t``; ``relaxed`` holds the
    final relaxed cells of every attribute, targets first.
    """

    reconstruction: np.ndarray
    trace: np.ndarray
    relaxed: list


@dataclasses.dataclass(frozen=True)
class AttackConfig:
    """Attack choice and gradient-descent settings.

    ``iters = 0`` is allowed and returns the rounded initialisation.
    """

    kind: str = RR_BAYES
    step: float = 0.05
    iters: int = 2000

    def __post_init__(self):
        if self.kind not in (RR_BAYES, PRIOR_ONLY, MAI_GRADIENT):
            raise InvalidInputError(f"unknown attack kind {self.kind!r}")
        if not self.step > 0:
            raise InvalidInputError(f"step size must be > 0, got {self.step}")
        if self.iters < 0:
            raise InvalidInputError(f"iteration count must be >= 0, got {self.iters}")

    @classmethod
    def from_dict(cls, d: dict) -> "AttackConfig":
        extra = set(d) - {"kind", "step", "iters"}
        if extra:
            raise InvalidInputError(f"unknown attack fields: {sorted(extra)}")
        return cls(kind=d.get("kind", RR_BAYES), step=float(d.get("step", 0.05)), iters=int(d.get("iters", 2000)))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def rr_bayes_attack(output: int, prior: Categorical, eps: float, m: int) -> int:
    """Bayes-optimal reconstruction of one randomized-response report.

    Trusts the report when ``D(a) e^eps >= D(b)`` for every other ``b``;
    otherwise falls back to the prior mode (lowest index on ties). The prior
    domain is taken to be ``0..m-1`` in order.
    """
    probs = prior.probs
    if probs.size != m:
        raise InvalidInputError(f"prior has {probs.size} values, mechanism domain has {m}")
    a = int(output)
    others = np.delete(probs, a)
    rival = float(others.max()) if others.size else 0.0
    own = probs[a]
    trusted = own * math.exp(eps) >= rival if own > 0 else rival <= 0
    return a if trusted else int(np.argmax(probs))


def rr_bayes_attack_batch(outputs: np.ndarray, prior: Categorical, eps: float, m: int) -> np.ndarray:
    """Vectorised :func:`rr_bayes_attack` for records sharing one prior."""
    probs = prior.probs
    if probs.size != m:
        raise InvalidInputError(f"prior has {probs.size} values, mechanism domain has {m}")
    order = np.argsort(-probs, kind="stable")
    top, second = probs[order[0]], (probs[order[1]] if m > 1 else 0.0)
    outputs = np.asarray(outputs)
    own = probs[outputs]
    rival = np.where(outputs == order[0], second, top)
    with np.errstate(invalid="ignore", over="ignore"):
        trusted = np.where(own > 0, own * math.exp(min(eps, 700.0)) >= rival, rival <= 0)
    return np.where(trusted, outputs, int(np.argmax(probs)))


def prior_only_attack(prior: ProductPrior, metric: LossMetric, k: int = 1) -> list:
    """Guesses from the prior alone, without looking at any mechanism output."""
    if k < 1:
        raise InvalidInputError(f"guess count must be >= 1, got {k}")
    if metric.addressing == ALIGNED:
        return [d.best_guess(metric) for d in prior.factors]
    return greedy_pooled_guesses(prior.factors, metric, k)


# relaxed k-way marginals


def _subscripts(k: int) -> str:
    return string.ascii_lowercase[:k]


def relaxed_marginals(relaxed: Sequence[np.ndarray], workload: MarginalWorkload) -> np.ndarray:
    """Marginal vector of a relaxed dataset.

    ``relaxed[a]`` has shape ``(N, |X_a|)`` and holds each record's
    probability vector for attribute ``a``. A marginal entry is the mean over
    records of the product of the cell probabilities of its values; on
    one-hot inputs this is exactly the discrete marginal.
    """
    n_rec = relaxed[0].shape[0]
    sub = _subscripts(workload.k)
    spec = ",".join("z" + c for c in sub) + "->" + sub
    blocks = [np.einsum(spec, *(relaxed[a] for a in v), optimize=False).ravel() / n_rec
              for v in workload.vsets]
    return np.concatenate(blocks)


def relaxed_objective(relaxed: Sequence[np.ndarray], workload: MarginalWorkload, target: np.ndarray) -> float:
    """Squared L2 gap to ``target`` in count units, divided by the record count.

    Equals ``N * ||Q(relaxed) - target||^2``; the scale only fixes how the
    step size relates to the data size and does not move the minimiser.
    """
    n_rec = relaxed[0].shape[0]
    resid = relaxed_marginals(relaxed, workload) - target
    return float(n_rec * resid @ resid)


def relaxed_gradient(relaxed: Sequence[np.ndarray], workload: MarginalWorkload, target: np.ndarray,
                     attributes: Sequence[int]) -> tuple[float, dict]:
    """Objective value and its gradient with respect to the given attributes."""
    n_rec = relaxed[0].shape[0]
    resid = relaxed_marginals(relaxed, workload) - target
    value = float(n_rec * resid @ resid)
    grads = {a: np.zeros_like(relaxed[a]) for a in attributes}
    sub = _subscripts(workload.k)
    for v, sl in zip(workload.vsets, workload.slices()):
        touched = [a for a in v if a in grads]
        if not touched:
            continue
        r = resid[sl].reshape(workload.shape(v))
        for pos, a in enumerate(v):
            if a not in grads:
                continue
            others = [(c, b) for c, b in zip(sub, v) if b != a]
            spec = sub + "," + ",".join("z" + c for c, _ in others) + "->z" + sub[pos]
            # d/dP = 2 N * (1/N) * contraction of the residual with the other attributes
            grads[a] += 2.0 * np.einsum(spec, r, *(relaxed[b] for _, b in others), optimize=False)
    return value, grads


def project_simplex(x: np.ndarray) -> np.ndarray:
    """Euclidean projection of each row onto the probability simplex."""
    n, m = x.shape
    u = -np.sort(-x, axis=1)
    css = np.cumsum(u, axis=1) - 1.0
    ind = np.arange(1, m + 1)
    cond = u - css / ind > 0
    rho = m - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(n), rho] / (rho + 1)
    return np.maximum(x - theta[:, None], 0.0)


def _prior_cell(dist: Categorical, size: int) -> np.ndarray:
    vec = np.zeros(size)
    for value, p in zip(dist.domain, dist.probs):
        if not isinstance(value, (int, np.integer)) or not 0 <= value < size:
            raise InvalidInputError(f"conditional prior value {value!r} is not a code in 0..{size - 1}")
        vec[value] = p
    return vec


def _one_hot(codes: np.ndarray, size: int) -> np.ndarray:
    if codes.size and (codes.min() < 0 or codes.max() >= size):
        raise InvalidInputError(f"attribute codes must lie in 0..{size - 1}")
    cell = np.zeros((codes.shape[0], size))
    cell[np.arange(codes.shape[0]), codes] = 1.0
    return cell


def init_relaxed(known: np.ndarray, known_columns: Sequence[int], unknown_columns: Sequence[int],
                 workload: MarginalWorkload, cond_prior: ConditionalPriorTable,
                 fixed_rows: np.ndarray | None = None) -> list[np.ndarray]:
    """Relaxed dataset with one-hot known cells and prior-initialised unknown cells.

    With several unknown attributes each cell starts at the corresponding
    marginal of the joint conditional prior. ``fixed_rows`` are complete
    records appended after the targets as one-hot rows.
    """
    known = np.asarray(known, dtype=np.int64)
    n_rec = known.shape[0]
    fixed = np.zeros((0, workload.d), dtype=np.int64) if fixed_rows is None else np.asarray(fixed_rows, np.int64)
    if fixed.ndim != 2 or (fixed.size and fixed.shape[1] != workload.d):
        raise InvalidInputError(f"fixed rows must have {workload.d} attributes")
    relaxed: list[np.ndarray | None] = [None] * workload.d
    for j, a in enumerate(known_columns):
        codes = np.concatenate([known[:, j], fixed[:, a]])
        relaxed[a] = _one_hot(codes, workload.domain_sizes[a])
    for a in unknown_columns:
        relaxed[a] = np.zeros((n_rec + fixed.shape[0], workload.domain_sizes[a]))
        relaxed[a][n_rec:] = _one_hot(fixed[:, a], workload.domain_sizes[a])
    for i in range(n_rec):
        dist = cond_prior.condition(tuple(known[i].tolist()))
        if len(unknown_columns) == 1:
            a = unknown_columns[0]
            relaxed[a][i] = _prior_cell(dist, workload.domain_sizes[a])
            continue
        for value, p in zip(dist.domain, dist.probs):
            if not isinstance(value, tuple) or len(value) != len(unknown_columns):
                raise InvalidInputError(f"joint prior value {value!r} does not cover {len(unknown_columns)} columns")
            for code, a in zip(value, unknown_columns):
                relaxed[a][i, code] += p
    missing = [a for a, cell in enumerate(relaxed) if cell is None]
    if missing:
        raise InvalidInputError(f"attributes {missing} are neither known nor unknown")
    return relaxed


def _row_outer(cells: Sequence[np.ndarray], n_rec: int) -> np.ndarray:
    """Row-wise outer product of ``(N, m_j)`` arrays, flattened to ``(N, prod m_j)``."""
    out = np.ones((n_rec, 1))
    for c in cells:
        out = (out[:, :, None] * c[:, None, :]).reshape(out.shape[0], -1)
    return out


class _FrozenKnownProblem:
    """Relaxed objective with the known-attribute products precomputed.

    For each attribute subset ``V`` the marginal factorises as
    ``K_V^T U_V / N``, where ``K_V`` is the fixed row-wise outer product of the
    known one-hot cells and ``U_V`` that of the unknown cells. Agrees with
    :func:`relaxed_marginals` and :func:`relaxed_gradient`.
    """

    def __init__(self, relaxed: Sequence[np.ndarray], workload: MarginalWorkload, unknown_columns: Sequence[int],
                 target: np.ndarray):
        self.workload = workload
        self.unknown = list(unknown_columns)
        self.n_rec = relaxed[0].shape[0]
        self.target = target
        self.parts = []
        for v, sl in zip(workload.vsets, workload.slices()):
            kv = [a for a in v if a not in self.unknown]
            uv = [a for a in v if a in self.unknown]
            order = kv + uv
            to_v = [order.index(a) for a in v]
            to_order = [v.index(a) for a in order]
            shape_order = tuple(workload.domain_sizes[a] for a in order)
            K = _row_outer([relaxed[a] for a in kv], self.n_rec)
            const = None
            if not uv:
                const = (K.sum(axis=0) / self.n_rec).reshape(shape_order).transpose(to_v).ravel()
            self.parts.append((sl, v, kv, uv, K, to_v, to_order, shape_order, const))

    def _blocks(self, relaxed):
        out = np.empty(self.workload.length)
        for sl, v, kv, uv, K, to_v, to_order, shape_order, const in self.parts:
            if const is not None:
                out[sl] = const
                continue
            U = _row_outer([relaxed[a] for a in uv], self.n_rec)
            out[sl] = ((K.T @ U) / self.n_rec).reshape(shape_order).transpose(to_v).ravel()
        return out

    def value_and_grad(self, relaxed):
        resid = self._blocks(relaxed) - self.target
        value = float(self.n_rec * resid @ resid)
        grads = {a: np.zeros_like(relaxed[a]) for a in self.unknown}
        for sl, v, kv, uv, K, to_v, to_order, shape_order, const in self.parts:
            if const is not None:
                continue
            kdim = K.shape[1]
            R = resid[sl].reshape(self.workload.shape(v)).transpose(to_order).reshape(kdim, -1)
            GU = 2.0 * (K @ R)
            if len(uv) == 1:
                grads[uv[0]] += GU
                continue
            GU = GU.reshape((self.n_rec,) + tuple(self.workload.domain_sizes[a] for a in uv))
            sub = _subscripts(len(uv))
            for pos, a in enumerate(uv):
                others = [(c, b) for c, b in zip(sub, uv) if b != a]
                spec = "z" + sub + "," + ",".join("z" + c for c, _ in others) + "->z" + sub[pos]
                grads[a] += np.einsum(spec, GU, *(relaxed[b] for _, b in others), optimize=False)
        return value, grads

    def value(self, relaxed) -> float:
        resid = self._blocks(relaxed) - self.target
        return float(self.n_rec * resid @ resid)


def mai_gradient_attack(noisy: np.ndarray, workload: MarginalWorkload, known: np.ndarray,
                        known_columns: Sequence[int], unknown_columns: Sequence[int],
                        cond_prior: ConditionalPriorTable, cfg: AttackConfig = AttackConfig(MAI_GRADIENT),
                        full_output: bool = False, fixed_rows: np.ndarray | None = None):
    """Multi-attribute inference from noisy marginals by relaxed projected descent.

    Args:
      noisy: Released marginal vector, laid out as in
        :func:`~dpbounds.mechanisms.marginal_vector`.
      workload: The released queries.
      known: ``(N, len(known_columns))`` integer codes known for every record.
      known_columns: Attribute indices of ``known``.
      unknown_columns: Attribute indices to reconstruct.
      cond_prior: Prior over the unknown attributes given the known tuple;
        used to initialise the relaxed cells.
      cfg: Step size and iteration count.
      full_output: Return an :class:`MAIResult` with the objective trace and
        the final relaxed dataset instead of the bare reconstruction.
      fixed_rows: Complete non-target records known to the attacker; they
        enter the relaxed marginals as one-hot rows and are never updated.

    Returns:
      ``(N, len(unknown_columns))`` reconstructed codes, row ``i`` aligned with
      record ``i``.
    """
    noisy = np.asarray(noisy, dtype=np.float64)
    if noisy.shape != (workload.length,):
        raise InvalidInputError(f"released vector has length {noisy.size}, workload expects {workload.length}")
    unknown_columns = list(unknown_columns)
    relaxed = init_relaxed(known, known_columns, unknown_columns, workload, cond_prior, fixed_rows)
    n_rec = np.asarray(known).shape[0]
    problem = _FrozenKnownProblem(relaxed, workload, unknown_columns, noisy)
    trace = []
    for it in range(cfg.iters):
        value, grads = problem.value_and_grad(relaxed)
        if not math.isfinite(value):
            raise NumericFailure(it, "objective")
        for a in unknown_columns:
            g = grads[a]
            if not np.all(np.isfinite(g)):
                raise NumericFailure(it, "gradient")
            relaxed[a][:n_rec] = project_simplex(relaxed[a][:n_rec] - cfg.step * g[:n_rec])
        if full_output:
            trace.append(problem.value(relaxed))
    recon = np.stack([np.argmax(relaxed[a][:n_rec], axis=1) for a in unknown_columns], axis=1)
    if full_output:
        return MAIResult(recon, np.asarray(trace), relaxed)
    return recon
