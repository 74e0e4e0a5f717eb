"""Pick the compiled kernels when they were built, else the numpy fallback.

Set ``MIXBAYES_PURE_PYTHON=1`` to force the fallback (used by the benchmark
and by the tests that compare both backends).
"""
import os

from . import _kernels_py

try:
    if os.environ.get("MIXBAYES_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-Python kernels requested")
    from . import _kernels as _impl

    BACKEND = "compiled"
except ImportError:
    _impl = _kernels_py
    BACKEND = "python"

lasso_cd = _impl.lasso_cd
weighted_l2_prox = _impl.weighted_l2_prox

__all__ = ["BACKEND", "lasso_cd", "weighted_l2_prox"]
