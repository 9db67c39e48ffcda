"""Backend selection for the Poisson-binomial kernels.

The compiled extension is preferred. Set ``DPBOUNDS_PURE_PYTHON=1`` to force
the numpy fallback (useful for benchmarking and for checking that both
backends agree).
"""
import os

from . import _pykernels

BACKEND = "python"

if not os.environ.get("DPBOUNDS_PURE_PYTHON"):
    try:
        from . import _speedups as _impl
    except ImportError:  # extension not built
        _impl = _pykernels
    else:
        BACKEND = "cython"
else:
    _impl = _pykernels

poibin_pmf = _impl.poibin_pmf
survival_from_pmf = _impl.survival_from_pmf
lp_alpha = _impl.lp_alpha
inflated_quantile = _impl.inflated_quantile

__all__ = [
    "BACKEND",
    "poibin_pmf",
    "survival_from_pmf",
    "lp_alpha",
    "inflated_quantile",
]
