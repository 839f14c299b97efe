"""Kernel backend selection.

The compiled extension is used when it imports; set
``TRANSCOUNT_PURE_PYTHON=1`` to force the numpy fallback.
"""

from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

try:
    from ._kernels import suff_stats as _compiled
except ImportError:  # extension not built
    _compiled = None


def _wrap(impl):
    def suff_stats(y, X, coef, link: int, want_derivs: bool = True):
        return impl(
            np.ascontiguousarray(y, dtype=np.int64),
            np.ascontiguousarray(X, dtype=float),
            np.ascontiguousarray(coef, dtype=float),
            int(link),
            bool(want_derivs),
        )

    suff_stats.__doc__ = impl.__doc__
    return suff_stats


python_suff_stats = _wrap(_kernels_py.suff_stats)
compiled_suff_stats = None if _compiled is None else _wrap(_compiled)

if compiled_suff_stats is not None and not os.environ.get("TRANSCOUNT_PURE_PYTHON"):
    suff_stats = compiled_suff_stats
    BACKEND = "cython"
else:
    suff_stats = python_suff_stats
    BACKEND = "python"

__all__ = ["suff_stats", "python_suff_stats", "compiled_suff_stats", "BACKEND"]
