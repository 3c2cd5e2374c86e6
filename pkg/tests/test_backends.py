"""The compiled kernels and the numpy fallback must agree."""
import os
import subprocess
import sys

import numpy as np
import pytest

from lddp import _fallback, _kernels

core = pytest.importorskip("lddp._core")


def test_backend_reported():
    assert _kernels.BACKEND in ("cython", "python")


def test_env_forces_fallback():
    env = dict(os.environ, LDDP_PURE_PYTHON="1")
    res = subprocess.run([sys.executable, "-c", "import lddp; print(lddp.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert res.stdout.strip() == "python"


def test_sq_exp_cross(rng):
    a, b = rng.random((37, 2)), rng.random((11, 2))
    np.testing.assert_allclose(core.sq_exp_cross(a, b, 1.3, 0.2),
                               _fallback.sq_exp_cross(a, b, 1.3, 0.2), rtol=1e-13)


def test_softmax_rows(rng):
    logits = rng.normal(0, 40, (50, 6))
    p1, l1 = core.softmax_rows(logits)
    p2, l2 = _fallback.softmax_rows(logits)
    np.testing.assert_allclose(p1, p2, rtol=1e-12, atol=1e-300)
    np.testing.assert_allclose(l1, l2, rtol=1e-13)


def test_mixing_and_exp_sums(rng):
    ez = rng.uniform(0.1, 3, 4)
    f = rng.normal(0, 2, (4, 25))
    xi = rng.uniform(0.5, 2, 25)
    np.testing.assert_allclose(core.mixing_normalizer(ez, f),
                               _fallback.mixing_normalizer(ez, f), rtol=1e-13)
    np.testing.assert_allclose(core.exp_over_xi_sums(f, xi),
                               _fallback.exp_over_xi_sums(f, xi), rtol=1e-13)


def test_mahalanobis(rng):
    x = rng.standard_normal((30, 3))
    m = rng.standard_normal((4, 3))
    a = rng.standard_normal((4, 3, 3))
    w = a @ np.swapaxes(a, 1, 2) + np.eye(3)
    np.testing.assert_allclose(core.mahalanobis_sq(x, m, w),
                               _fallback.mahalanobis_sq(x, m, w), rtol=1e-12)


def test_nearest_centroid_and_contingency(rng):
    x = rng.standard_normal((200, 3))
    c = np.vstack([x[:5], x[:1]])  # duplicate centre exercises tie breaking
    l1, d1 = core.nearest_centroid(x, c)
    l2, d2 = _fallback.nearest_centroid(x, c)
    np.testing.assert_array_equal(l1, l2)
    np.testing.assert_allclose(d1, d2, rtol=1e-12, atol=1e-14)
    a, b = rng.integers(0, 4, 100), rng.integers(0, 3, 100)
    np.testing.assert_array_equal(core.contingency(a, b, 4, 3),
                                  _fallback.contingency(a, b, 4, 3))
