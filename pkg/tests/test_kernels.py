"""The compiled and numpy kernels must agree bit for bit."""
import numpy as np
import pytest

from dpbounds import _pykernels, kernels

speedups = pytest.importorskip("dpbounds._speedups")


def test_backend_selected():
    assert kernels.BACKEND in ("cython", "python")


@pytest.mark.parametrize("n", [0, 1, 2, 7, 50, 400])
def test_backends_identical(n, rng):
    for _ in range(5):
        betas = rng.random(n)
        betas[: n // 4] = rng.choice([0.0, 1.0], size=n // 4)
        pmf_py = _pykernels.poibin_pmf(betas)
        pmf_cy = np.asarray(speedups.poibin_pmf(betas))
        assert np.array_equal(pmf_py, pmf_cy)
        surv_py = _pykernels.survival_from_pmf(pmf_py)
        surv_cy = np.asarray(speedups.survival_from_pmf(pmf_cy))
        assert np.array_equal(surv_py, surv_cy)
        for v in range(-1, n + 3):
            assert _pykernels.lp_alpha(surv_py, v) == speedups.lp_alpha(surv_cy, v)
        for nd in (0.0, 1e-5 * n, 0.3):
            for a in (0.01, 0.05, 0.5):
                assert _pykernels.inflated_quantile(surv_py, nd, a) == speedups.inflated_quantile(surv_cy, nd, a)
