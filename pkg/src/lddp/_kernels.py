"""Backend selection for the hot kernels.

The compiled ``_core`` extension is used when it imports; otherwise the
pure-numpy ``_fallback`` module is used. Setting ``LDDP_PURE_PYTHON=1``
forces the fallback.

The two exp-and-reduce kernels stay on numpy even when ``_core`` loads:
numpy's vectorised exp beats the scalar libm loop there
(see benchmarks/bench_kernels.py).
"""
import os

if os.environ.get("LDDP_PURE_PYTHON", "").strip() not in ("", "0"):
    from ._fallback import (contingency, exp_over_xi_sums, mahalanobis_sq,
                            mixing_normalizer, nearest_centroid, softmax_rows,
                            sq_exp_cross)
    BACKEND = "python"
else:
    try:
        from ._core import (contingency, mahalanobis_sq, nearest_centroid,
                            softmax_rows, sq_exp_cross)
        from ._fallback import exp_over_xi_sums, mixing_normalizer
        BACKEND = "cython"
    except ImportError:
        from ._fallback import (contingency, exp_over_xi_sums, mahalanobis_sq,
                                mixing_normalizer, nearest_centroid,
                                softmax_rows, sq_exp_cross)
        BACKEND = "python"

__all__ = [
    "BACKEND", "contingency", "exp_over_xi_sums", "mahalanobis_sq",
    "mixing_normalizer", "nearest_centroid", "softmax_rows", "sq_exp_cross",
]
