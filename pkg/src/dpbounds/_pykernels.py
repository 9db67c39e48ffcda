"""numpy implementations of the Poisson-binomial kernels.

Used when the compiled ``_speedups`` module is unavailable, and as the
reference the compiled kernels are tested against.
"""
import numpy as np


def poibin_pmf(betas):
    betas = np.ascontiguousarray(betas, dtype=np.float64)
    n = betas.shape[0]
    pmf = np.zeros(n + 1, dtype=np.float64)
    pmf[0] = 1.0
    for i, b in enumerate(betas):
        q = 1.0 - b
        head = pmf[: i + 1].copy()
        pmf[i + 1] = head[i] * b
        pmf[1 : i + 1] = head[1:] * q + head[:-1] * b
        pmf[0] = head[0] * q
    np.maximum(pmf, 0.0, out=pmf)
    return pmf


def survival_from_pmf(pmf):
    pmf = np.asarray(pmf, dtype=np.float64)
    n = pmf.shape[0] - 1
    surv = np.zeros(n + 2, dtype=np.float64)
    # sequential reverse accumulation, same order as the compiled kernel
    acc = 0.0
    for t in range(n, -1, -1):
        acc += float(pmf[t])
        surv[t] = min(acc, 1.0)
    surv[0] = 1.0
    return surv


def _tails_at(surv, ts):
    n = surv.shape[0] - 2
    ts = np.asarray(ts)
    out = np.where(ts <= 0, 1.0, 0.0)
    inside = (ts > 0) & (ts <= n)
    out[inside] = surv[ts[inside]]
    return out


def lp_alpha(surv, v):
    n = surv.shape[0] - 2
    if n == 0:
        return 0.0
    j = np.arange(1, n + 1)
    base = _tails_at(surv, np.array([v]))[0]
    cands = (_tails_at(surv, v - j) - base) / j
    return max(0.0, float(cands.max()))


def inflated_quantile(surv, n_delta, alpha):
    n = surv.shape[0] - 2
    for v in range(n + 1):
        total = float(_tails_at(surv, np.array([v + 1]))[0])
        if n_delta > 0.0:
            total = total + lp_alpha(surv, v + 1) * n_delta
        if total <= alpha:
            return v
    return n
