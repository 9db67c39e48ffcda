import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpbounds.dist import InvalidInputError
from dpbounds.metrics import EXACT, L1_BALL, L2_MIN, LossMetric
from dpbounds.priors import (Categorical, ConditionalPriorTable, ProductPrior, UniformPrior, ZipfPrior,
                             bayes_optimal_prior_guess, condition, greedy_pooled_guesses, load_prior,
                             prior_from_dict, prior_success, uniform_prior, zipf_normalizer, zipf_prior)

EXACT_M = LossMetric(EXACT)
L1 = LossMetric(L1_BALL, E=1)

# H(N, s) = zeta(s) - zeta(s, N + 1), evaluated with mpmath at 40 digits
ZIPF_H_1E9_1P1 = 9.3255230532


def test_uniform_small():
    prior = uniform_prior(10)
    assert isinstance(prior, Categorical)
    np.testing.assert_array_equal(prior.probs, np.full(10, 0.1))
    one = uniform_prior(1)
    assert one.domain == (0,) and one.probs[0] == 1.0


def test_uniform_huge_is_implicit():
    prior = uniform_prior(10**9)
    assert isinstance(prior, UniformPrior)
    assert prior_success(prior, EXACT_M, [123]) == pytest.approx(1e-9, rel=1e-12)
    assert prior_success(prior, L1, [5]) == pytest.approx(3e-9, rel=1e-12)
    assert prior_success(prior, L1, [0]) == pytest.approx(2e-9, rel=1e-12)
    assert bayes_optimal_prior_guess(prior, L1) == 1


def test_uniform_rejects_empty():
    with pytest.raises(InvalidInputError):
        uniform_prior(0)


def test_zipf_small():
    prior = zipf_prior(3, 1.0)
    np.testing.assert_allclose(prior.probs, [6 / 11, 3 / 11, 2 / 11], rtol=1e-14)
    assert zipf_prior(1, 2.5).probs.tolist() == [1.0]


@pytest.mark.parametrize("s", [0.0, -1.0])
def test_zipf_rejects_exponent(s):
    with pytest.raises(InvalidInputError):
        zipf_prior(10, s)


def test_zipf_normalizer_huge():
    assert zipf_normalizer(10**9, 1.1) == pytest.approx(ZIPF_H_1E9_1P1, rel=1e-9)
    prior = zipf_prior(10**9, 1.1)
    assert isinstance(prior, ZipfPrior)
    assert prior.prob(1) == pytest.approx(1 / ZIPF_H_1E9_1P1, rel=1e-9)
    assert prior_success(prior, EXACT_M, [1]) == pytest.approx(1 / ZIPF_H_1E9_1P1, rel=1e-9)


def test_zipf_normalizer_tail_matches_direct_sum():
    # just above the direct-summation limit the two paths must agree
    s = 1.3
    direct = float(np.sum(np.arange(12_000_000, 0, -1, dtype=np.float64) ** -s))
    assert zipf_normalizer(12_000_000, s) == pytest.approx(direct, rel=1e-11)


def test_zipf_decreasing():
    probs = zipf_prior(1000, 0.7).probs
    assert np.all(np.diff(probs) < 0)


def test_zipf_implicit_sampling(rng):
    prior = ZipfPrior(10**9, 2.0)
    draws = prior.sample(rng, 20000)
    assert draws.min() >= 1
    assert np.mean(draws == 1) == pytest.approx(prior.prob(1), abs=0.015)


def test_prior_success_examples():
    prior = uniform_prior(10)
    assert prior_success(prior, EXACT_M, [5]) == pytest.approx(0.1)
    assert prior_success(prior, L1, [5]) == pytest.approx(0.3)
    assert prior_success(prior, L1, [0]) == pytest.approx(0.2)


def test_prior_success_rejects_l1_on_nominal():
    prior = Categorical(["a", "b"], [0.5, 0.5])
    with pytest.raises(InvalidInputError):
        prior_success(prior, L1, ["a"])
    ordinal = Categorical(["a", "b", "c"], [0.2, 0.3, 0.5], ordinal=True)
    assert prior_success(ordinal, L1, ["b"]) == pytest.approx(1.0)


def test_best_guess_examples():
    assert bayes_optimal_prior_guess(uniform_prior(10), EXACT_M) == 0
    assert bayes_optimal_prior_guess(Categorical([4, 5, 6], [0.1, 0.7, 0.2]), EXACT_M) == 5
    assert bayes_optimal_prior_guess(uniform_prior(10), L1) == 1


def test_exact_success_no_double_counting():
    prior = Categorical(range(4), [0.1, 0.2, 0.3, 0.4])
    pooled = LossMetric(EXACT, addressing="pooled")
    assert prior_success(prior, pooled, [3, 3, 1]) == pytest.approx(0.6)


def test_success_is_one_when_everything_accepted():
    prior = uniform_prior(5)
    assert prior_success(prior, LossMetric(L1_BALL, E=10), [2]) == 1.0


small_probs = st.lists(st.floats(0.01, 1.0), min_size=1, max_size=12).map(lambda w: np.array(w) / np.sum(w))
metrics = st.sampled_from([EXACT_M, L1, LossMetric(L1_BALL, E=2), LossMetric(L2_MIN, tau=1.5)])


@settings(max_examples=150, deadline=None)
@given(small_probs, metrics)
def test_best_guess_beats_every_single_guess(probs, metric):
    prior = Categorical(range(len(probs)), probs)
    z = bayes_optimal_prior_guess(prior, metric)
    best = prior_success(prior, metric, [z])
    for g in prior.domain:
        s = prior_success(prior, metric, [g])
        assert 0.0 <= s <= 1.0
        assert best >= s - 1e-12


def test_implicit_uniform_matches_explicit():
    implicit, explicit = UniformPrior(50), uniform_prior(50)
    for metric in (EXACT_M, L1, LossMetric(L2_MIN, tau=2.7)):
        for guesses in ([0], [49], [10, 12], [3, 30, 31]):
            pooled = LossMetric(metric.kind, metric.E, metric.tau, "pooled")
            assert implicit.success(pooled, guesses) == pytest.approx(explicit.success(pooled, guesses))
        assert implicit.best_guess(metric) == explicit.best_guess(metric)


def test_implicit_zipf_matches_explicit():
    implicit = ZipfPrior(200, 1.1)
    explicit = implicit.to_categorical()
    for guesses in ([1], [5, 9], [200]):
        pooled = LossMetric(L1_BALL, E=2, addressing="pooled")
        assert implicit.success(pooled, guesses) == pytest.approx(explicit.success(pooled, guesses), rel=1e-12)


def test_greedy_pooled():
    prior = Categorical(range(5), [0.1, 0.3, 0.05, 0.4, 0.15])
    pooled = LossMetric(EXACT, addressing="pooled")
    assert sorted(greedy_pooled_guesses([prior], pooled, 2)) == [1, 3]
    assert greedy_pooled_guesses([uniform_prior(10)], LossMetric(L1_BALL, E=1, addressing="pooled"), 1) == [1]


def test_categorical_validation():
    with pytest.raises(InvalidInputError):
        Categorical([], [])
    with pytest.raises(InvalidInputError):
        Categorical([1, 2], [0.5, 0.6])
    with pytest.raises(InvalidInputError):
        Categorical([1, 1], [0.5, 0.5])
    with pytest.raises(InvalidInputError):
        Categorical([1, 2], [1.2, -0.2])


def test_sampling_frequencies(rng):
    prior = Categorical(["x", "y", "z"], [0.2, 0.5, 0.3])
    draws = prior.sample(rng, 50_000)
    for v, p in zip(prior.domain, prior.probs):
        assert np.mean([d == v for d in draws]) == pytest.approx(p, abs=0.01)


def test_conditional_table():
    single = ConditionalPriorTable({(1,): Categorical([0, 1], [0.3, 0.7])})
    assert condition(single, (1,)).probs.tolist() == [0.3, 0.7]
    with pytest.raises(LookupError, match=r"\(2,\)"):
        condition(single, (2,))


def test_conditional_from_joint():
    joint = np.array([[0.1, 0.3], [0.2, 0.4]])  # [u, k]
    table = ConditionalPriorTable.from_joint(joint, [0, 1], [["a", "b"]])
    np.testing.assert_allclose(condition(table, ("a",)).probs, [1 / 3, 2 / 3])
    np.testing.assert_allclose(condition(table, ("b",)).probs, [3 / 7, 4 / 7])


def test_conditional_independence():
    marginal = np.array([0.2, 0.8])
    joint = np.outer(marginal, [0.25, 0.75])
    table = ConditionalPriorTable.from_joint(joint, [0, 1], [[0, 1]])
    np.testing.assert_allclose(condition(table, (0,)).probs, condition(table, (1,)).probs)


def test_prior_json_roundtrip(tmp_path):
    for prior in (uniform_prior(4), zipf_prior(5, 1.1), Categorical(["a", "b"], [0.4, 0.6], ordinal=True)):
        again = prior_from_dict(json.loads(json.dumps(prior.to_dict())))
        assert again == prior
    table = ConditionalPriorTable({(0, 1): Categorical([0, 1], [0.3, 0.7])})
    path = tmp_path / "cond.json"
    path.write_text(json.dumps(table.to_dict()))
    loaded = load_prior(path)
    assert condition(loaded, (0, 1)).probs.tolist() == [0.3, 0.7]


@pytest.mark.parametrize("doc", [
    {"kind": "uniform", "size": 3, "extra": 1},
    {"kind": "gaussian"},
    {"kind": "zipf", "size": 3},
])
def test_prior_json_rejects(doc):
    with pytest.raises(InvalidInputError):
        prior_from_dict(doc)


def test_product_prior():
    prior = ProductPrior.iid(uniform_prior(3), 4)
    assert prior.n == 4 and prior[2] is prior[0]
    with pytest.raises(InvalidInputError):
        ProductPrior(())
