import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpbounds.bounds import (PrivacyParams, advantage, baseline_narcissus, baseline_rero, beta, bits_leaked,
                             bound_approx_mc, bound_approx_onerun, bound_pure, eps_protect, lp_alpha)
from dpbounds.dist import InvalidInputError, pb_tail
from dpbounds.metrics import EXACT, L1_BALL, LossMetric
from dpbounds.priors import ProductPrior, uniform_prior

# Frozen oracle values (mpmath, 40 digits).
BETA_17_1E9 = 0.0235852521
BETA_1_HALF = 0.7310585786
BETA_2_01 = 0.45085306
BETA_2_02 = 0.64878564
BITS_1_005 = 5.7182891399
EPS_PROTECT_1E9 = 17.7786163
EPS_PROTECT_HALF = 0.1000834586
EPS_PROTECT_TENTH = 0.42285685082


def test_beta_examples():
    assert beta(0, 0.37) == pytest.approx(0.37, abs=1e-15)
    assert beta(1, 0.5) == pytest.approx(BETA_1_HALF, abs=1e-10)
    assert beta(17, 1e-9) == pytest.approx(BETA_17_1E9, abs=1e-10)
    assert beta(3, 0.0) == 0.0 and beta(3, 1.0) == 1.0
    assert beta(math.inf, 0.2) == 1.0


@pytest.mark.parametrize("args", [(-1, 0.5), (1, -0.1), (1, 1.1)])
def test_beta_rejects(args):
    with pytest.raises(InvalidInputError):
        beta(*args)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 20), st.floats(0, 20), st.floats(1e-6, 1 - 1e-6), st.floats(1e-6, 1 - 1e-6))
def test_beta_monotone(e1, e2, p1, p2):
    lo_e, hi_e = sorted((e1, e2))
    lo_p, hi_p = sorted((p1, p2))
    assert beta(lo_e, lo_p) <= beta(hi_e, lo_p) + 1e-15
    assert beta(lo_e, lo_p) <= beta(lo_e, hi_p) + 1e-15
    assert lo_p - 1e-15 <= beta(lo_e, lo_p) <= 1.0


def test_beta_strictly_increasing_in_eps():
    vals = beta(np.linspace(0, 5, 20), 0.3)
    assert np.all(np.diff(vals) > 0)


def test_bound_pure_examples():
    assert bound_pure(PrivacyParams(0), [0.3] * 4, 4).value == pytest.approx(0.3 ** 4, rel=1e-12)
    assert bound_pure(PrivacyParams(1), [0.1], 1).value == pytest.approx(0.231969316684, abs=1e-11)
    assert bound_pure(PrivacyParams(2), [0.1, 0.2], 2).value == pytest.approx(BETA_2_01 * BETA_2_02, abs=1e-8)
    with pytest.raises(InvalidInputError):
        bound_pure(PrivacyParams(1, 1e-5), [0.1], 1)


def test_lp_alpha_examples():
    assert lp_alpha([0.3, 0.9], 0) == 0.0
    assert lp_alpha([0.3], 1) == pytest.approx(0.7, abs=1e-15)
    assert lp_alpha([0.5, 0.5], 2) == pytest.approx(0.5, abs=1e-15)


def test_onerun_examples():
    params = PrivacyParams(1, 1e-5)
    prior = ProductPrior.iid(uniform_prior(10), 1)
    res = bound_approx_onerun(params, prior, LossMetric(EXACT), 1)
    b = 0.231969316684
    assert res.alpha_multiplier == pytest.approx(1 - b, abs=1e-11)
    assert res.value == pytest.approx(b + (1 - b) * 1e-5, abs=1e-12)
    two = bound_approx_onerun(PrivacyParams(0, 0.1), ProductPrior.iid(uniform_prior(10), 2), LossMetric(EXACT), 2)
    assert two.alpha_multiplier == pytest.approx(0.495, abs=1e-12)
    assert two.value == pytest.approx(0.109, abs=1e-12)


def test_onerun_reduces_to_pure_at_zero_delta():
    prior = ProductPrior.iid(uniform_prior(10), 3)
    metric = LossMetric(L1_BALL, E=1)
    res = bound_approx_onerun(PrivacyParams(1.5), prior, metric, 2)
    assert res.value == bound_pure(PrivacyParams(1.5), [0.3] * 3, 2).value


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 5), st.floats(0, 5), st.floats(0, 1e-2), st.floats(0, 1e-2), st.integers(0, 6))
def test_onerun_monotone(e1, e2, d1, d2, v):
    prior = ProductPrior.iid(uniform_prior(7), 5)
    metric = LossMetric(EXACT)
    (le, he), (ld, hd) = sorted((e1, e2)), sorted((d1, d2))
    base = bound_approx_onerun(PrivacyParams(le, ld), prior, metric, v).value
    assert bound_approx_onerun(PrivacyParams(he, ld), prior, metric, v).value >= base - 1e-12
    assert bound_approx_onerun(PrivacyParams(le, hd), prior, metric, v).value >= base - 1e-12
    assert bound_approx_onerun(PrivacyParams(le, ld), prior, metric, v + 1).value <= base + 1e-12


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=15), st.integers(-2, 17))
def test_lp_alpha_range(betas, v):
    assert 0.0 <= lp_alpha(betas, v) <= 1.0


def test_mc_examples():
    params = PrivacyParams(1, 1e-5)
    single = bound_approx_mc(params, [[0.3, 0.6]], 1)
    assert single.value == pytest.approx(pb_tail([0.3, 0.6], 1) + 2e-5, abs=1e-15)
    same = bound_approx_mc(params, [[0.3, 0.6]] * 4, 2)
    assert same.value == pytest.approx(pb_tail([0.3, 0.6], 2) + 2e-5, abs=1e-15)
    two = bound_approx_mc(params, [[0.2], [0.4]], 1)
    assert two.value == pytest.approx(0.30001, abs=1e-12)
    assert two.ci[0] <= two.value <= two.ci[1]
    with pytest.raises(InvalidInputError):
        bound_approx_mc(params, [], 1)


def test_bits_leaked():
    assert bits_leaked(0, 0.5) == pytest.approx(1.0, abs=1e-15)
    assert bits_leaked(1, 0.05) == pytest.approx(BITS_1_005, abs=1e-9)
    for alpha in (0.0, 1.0):
        with pytest.raises(InvalidInputError):
            bits_leaked(1, alpha)


def test_advantage():
    assert advantage(0.3, 0.3) == 0.0
    assert advantage(1.0, 0.3) == 1.0
    assert advantage(0.24, 0.05) == pytest.approx(0.2, abs=1e-15)
    with pytest.raises(InvalidInputError):
        advantage(0.5, 1.0)


def test_eps_protect():
    assert eps_protect(1e-9, 0.05, 1e-5) == pytest.approx(EPS_PROTECT_1E9, abs=2e-4)
    assert eps_protect(0.5, 0.05, 0.0) == pytest.approx(EPS_PROTECT_HALF, abs=2e-4)
    assert eps_protect(0.1, 0.05, 0.0) == pytest.approx(EPS_PROTECT_TENTH, abs=2e-4)
    assert eps_protect(0.5, 0.05, 0.2) == 0.0
    assert eps_protect(1e-30, 0.5, 0.0) == math.inf


def test_eps_protect_non_increasing_in_p():
    grid = np.geomspace(1e-9, 0.5, 40)
    values = [eps_protect(p, 0.05, 1e-5) for p in grid]
    assert all(a >= b - 1e-4 for a, b in zip(values, values[1:]))


def test_baselines():
    assert baseline_rero(0, 0.1) == pytest.approx(0.1)
    assert baseline_rero(1, 0.1) == pytest.approx(0.27183, abs=1e-5)
    assert baseline_rero(1, 0.5) == 1.0
    assert baseline_narcissus(0, 0, 0.3) == pytest.approx(0.3)
    assert baseline_narcissus(1, 1e-5, 0.1) == pytest.approx(0.27184, abs=1e-5)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 10), st.floats(1e-9, 1.0), st.floats(0, 0.1))
def test_bound_below_baselines(eps, p, delta):
    ours = bound_pure(PrivacyParams(eps), [p], 1).value
    assert ours <= baseline_rero(eps, p) + 1e-12
    assert min(1.0, ours + delta) <= baseline_narcissus(eps, delta, p) + 1e-12


def test_results_clipped():
    res = bound_approx_onerun(PrivacyParams(1, 0.5), ProductPrior.iid(uniform_prior(2), 3), LossMetric(EXACT), 1)
    assert 0.0 <= res.value <= 1.0
