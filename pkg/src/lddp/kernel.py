"""Squared-exponential kernel and its Nystrom low-rank approximation.

Two kernel operators share one interface (``n``, ``jitter``, ``apply``,
``quad_form_inv``):

* :class:`NystromFactor` -- ``K_hat = Kc^T Ks^{-1} Kc + jitter * I`` built
  from a landmark set, never materialising an N x N matrix.
* :class:`DenseKernel` -- the exact ``K + jitter * I``; only sensible for
  small N and used as the reference path in tests.
"""
from dataclasses import dataclass
import math

import numpy as np
from scipy import linalg

from . import _kernels

DENSE_MAX_N = 2048


class NumericalFailure(ArithmeticError):
    """A factorisation or update produced a non-finite or non-PD result."""


@dataclass(frozen=True)
class KernelParams:
    sigma_f: float = 1.0
    sigma_l: float = 0.1

    def __post_init__(self):
        if not (self.sigma_f > 0 and self.sigma_l > 0):
            raise ValueError("sigma_f and sigma_l must be positive")

    def default_jitter(self):
        return 1e-6 * self.sigma_f ** 2


def _as_points(points, name="locations"):
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ValueError(f"{name} must be a non-empty N x p array")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return np.ascontiguousarray(arr)


def rbf(l1, l2, params):
    """sigma_f^2 * exp(-||l1 - l2||^2 / sigma_l^2)."""
    a = np.atleast_1d(np.asarray(l1, dtype=np.float64))
    b = np.atleast_1d(np.asarray(l2, dtype=np.float64))
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    d2 = float(np.dot(a - b, a - b))
    return params.sigma_f ** 2 * math.exp(-d2 / params.sigma_l ** 2)


def kernel_matrix(a, b, params):
    """Kernel between two point sets, shape (len(a), len(b))."""
    a = _as_points(a, "a")
    b = _as_points(b, "b")
    if a.shape[1] != b.shape[1]:
        raise ValueError("point sets have different dimensions")
    return _kernels.sq_exp_cross(a, b, params.sigma_f, params.sigma_l)


def normalize_locations(points):
    """Min-max scale each column to [0, 1]; constant columns map to 0.

    Returns the scaled array and the indices of constant columns.
    """
    arr = _as_points(points)
    lo = arr.min(axis=0)
    span = arr.max(axis=0) - lo
    constant = np.flatnonzero(span == 0)
    safe = np.where(span == 0, 1.0, span)
    out = (arr - lo) / safe
    out[:, constant] = 0.0
    return out, constant


def grid_landmarks(locations, fraction=0.05):
    """Evenly spaced axis-aligned grid over the bounding box of ``locations``.

    The per-axis count is ``round(ceil(fraction * N) ** (1 / p))`` (at least
    one), so the total is the grid size nearest to ``fraction * N``. A single
    point on an axis sits at the box centre.
    """
    locs = _as_points(locations)
    n, p = locs.shape
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    target = math.ceil(fraction * n)
    per_axis = max(1, int(round(target ** (1.0 / p))))
    lo, hi = locs.min(axis=0), locs.max(axis=0)
    axes = []
    for dim in range(p):
        if per_axis == 1 or lo[dim] == hi[dim]:
            axes.append(np.array([(lo[dim] + hi[dim]) / 2]))
        else:
            axes.append(np.linspace(lo[dim], hi[dim], per_axis))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


class NystromFactor:
    """Landmark factorisation of the N x N kernel over ``locations``.

    Attributes
    ----------
    landmarks : (N2, p) array
    k_star : (N2, N2) landmark kernel plus ``jitter`` on the diagonal
    k_cross : (N2, N) kernel between landmarks and locations
    factor : lower Cholesky factor of ``k_star``
    jitter : float
    """

    def __init__(self, locations, landmarks, params, jitter=None):
        locs = _as_points(locations)
        marks = _as_points(landmarks, "landmarks")
        if marks.shape[1] != locs.shape[1]:
            raise ValueError("landmarks and locations differ in dimension")
        if jitter is None:
            jitter = params.default_jitter()
        if jitter < 0:
            raise ValueError("jitter must be non-negative")
        self.params = params
        self.jitter = float(jitter)
        self.landmarks = marks
        self.k_cross = kernel_matrix(marks, locs, params)
        k_star = kernel_matrix(marks, marks, params)
        k_star = 0.5 * (k_star + k_star.T)
        k_star[np.diag_indices_from(k_star)] += self.jitter
        self.k_star = k_star
        try:
            self.factor = linalg.cholesky(k_star, lower=True)
        except linalg.LinAlgError as exc:
            raise NumericalFailure(
                f"landmark kernel is not positive definite with jitter="
                f"{self.jitter:g}; raise the jitter") from exc
        for arr in (self.k_star, self.k_cross, self.factor):
            arr.flags.writeable = False
        self._basis = None

    @property
    def n(self):
        return self.k_cross.shape[1]

    @property
    def n_landmarks(self):
        return self.k_star.shape[0]

    def _whitened(self, v):
        # Ks^{-1/2} Kc v through the triangular factor
        return linalg.solve_triangular(self.factor, self.k_cross @ v,
                                       lower=True, check_finite=False)

    def apply(self, v):
        """K_hat @ v for a vector or an (N, m) block of columns."""
        v = np.asarray(v, dtype=np.float64)
        if v.shape[0] != self.n:
            raise ValueError(f"expected leading length {self.n}, got {v.shape[0]}")
        w = self._whitened(v)
        w = linalg.solve_triangular(self.factor, w, lower=True, trans="T",
                                    check_finite=False)
        return self.k_cross.T @ w + self.jitter * v

    def _eigenbasis(self):
        # K_hat = E diag(lam) E^T + jitter * I with orthonormal E (N x N2)
        if self._basis is None:
            b = linalg.solve_triangular(self.factor, self.k_cross, lower=True,
                                        check_finite=False)
            _, s, vt = linalg.svd(b, full_matrices=False, check_finite=False)
            self._basis = (np.ascontiguousarray(vt.T), s * s)
        return self._basis

    def quad_form_inv(self, v):
        """v^T K_hat^{-1} v; columnwise for an (N, m) block.

        Uses the spectral split K_hat^{-1} = E (lam + jitter)^{-1} E^T
        + (I - E E^T) / jitter, which keeps the small-jitter residual free of
        cancellation.
        """
        if self.jitter <= 0:
            raise ValueError("quad_form_inv needs a positive jitter")
        v = np.asarray(v, dtype=np.float64)
        if v.shape[0] != self.n:
            raise ValueError(f"expected leading length {self.n}, got {v.shape[0]}")
        basis, lam = self._eigenbasis()
        coef = basis.T @ v
        resid = v - basis @ coef
        inv = 1.0 / (lam + self.jitter)
        if v.ndim == 1:
            return float(inv @ coef ** 2 + resid @ resid / self.jitter)
        return inv @ coef ** 2 + np.einsum("ij,ij->j", resid, resid) / self.jitter

    def implied_matrix(self):
        """Dense K_hat; for checks at small N only."""
        return self.apply(np.eye(self.n))


class DenseKernel:
    """Exact ``K + jitter * I`` with the NystromFactor interface."""

    def __init__(self, locations, params, jitter=None):
        locs = _as_points(locations)
        if locs.shape[0] > DENSE_MAX_N:
            raise ValueError(f"dense kernel limited to N <= {DENSE_MAX_N}")
        if jitter is None:
            jitter = params.default_jitter()
        if jitter < 0:
            raise ValueError("jitter must be non-negative")
        self.params = params
        self.jitter = float(jitter)
        k = kernel_matrix(locs, locs, params)
        k = 0.5 * (k + k.T)
        k[np.diag_indices_from(k)] += self.jitter
        self.matrix = k
        self.matrix.flags.writeable = False
        self._cho = None

    @property
    def n(self):
        return self.matrix.shape[0]

    def _factor(self):
        if self._cho is None:
            try:
                self._cho = linalg.cho_factor(self.matrix, lower=True)
            except linalg.LinAlgError as exc:
                raise NumericalFailure(
                    f"kernel matrix is not positive definite with jitter="
                    f"{self.jitter:g}; raise the jitter") from exc
        return self._cho

    def apply(self, v):
        v = np.asarray(v, dtype=np.float64)
        if v.shape[0] != self.n:
            raise ValueError(f"expected leading length {self.n}, got {v.shape[0]}")
        return self.matrix @ v

    def inverse_apply(self, v):
        v = np.asarray(v, dtype=np.float64)
        if v.shape[0] != self.n:
            raise ValueError(f"expected leading length {self.n}, got {v.shape[0]}")
        return linalg.cho_solve(self._factor(), v)

    def quad_form_inv(self, v):
        v = np.asarray(v, dtype=np.float64)
        sol = self.inverse_apply(v)
        if v.ndim == 1:
            return float(v @ sol)
        return np.einsum("ij,ij->j", v, sol)


def build_nystrom(locations, landmarks, params, jitter=None):
    """Precompute the landmark factorisation used by every GP step."""
    return NystromFactor(locations, landmarks, params, jitter)


def kernel_apply(factor, v):
    """K_hat @ v without forming K_hat."""
    return factor.apply(v)


def quad_form_inv(factor, v):
    """v^T K_hat^{-1} v; requires positive jitter."""
    return factor.quad_form_inv(v)
