"""Pure-numpy versions of the hot kernels.

Every function here has a twin of the same name and signature in the
compiled ``_core`` extension. Results agree to rounding.
"""
import numpy as np


def sq_exp_cross(a, b, sigma_f, sigma_l):
    """Squared-exponential kernel between the rows of ``a`` and ``b``."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    out = np.empty((a.shape[0], b.shape[0]))
    scale = sigma_f * sigma_f
    inv_l2 = 1.0 / (sigma_l * sigma_l)
    # chunked so memory stays O(chunk * len(b) * p)
    step = max(1, 2 ** 22 // max(1, b.shape[0] * max(1, a.shape[1])))
    for start in range(0, a.shape[0], step):
        diff = a[start:start + step, None, :] - b[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        out[start:start + step] = scale * np.exp(-d2 * inv_l2)
    return out


def softmax_rows(logits):
    """Row-normalise ``exp(logits)``; returns (probabilities, log normalisers)."""
    logits = np.asarray(logits, dtype=np.float64)
    top = logits.max(axis=1, keepdims=True)
    # an all -inf row yields NaN here; callers check the normaliser
    with np.errstate(invalid="ignore"):
        e = np.exp(logits - top)
        s = e.sum(axis=1, keepdims=True)
        return e / s, (top + np.log(s))[:, 0]


def mixing_normalizer(ez, f):
    """xi[n] = sum_k ez[k] * exp(f[k, n])."""
    return np.asarray(ez, dtype=np.float64) @ np.exp(f)


def exp_over_xi_sums(f, xi):
    """out[k] = sum_n exp(f[k, n]) / xi[n]."""
    return np.exp(f) @ (1.0 / np.asarray(xi, dtype=np.float64))


def mahalanobis_sq(x, m, w):
    """out[n, k] = (x[n] - m[k])^T w[k] (x[n] - m[k])."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty((x.shape[0], m.shape[0]))
    for k in range(m.shape[0]):
        diff = x - m[k]
        out[:, k] = np.einsum("ni,ij,nj->n", diff, w[k], diff)
    return out


def nearest_centroid(x, c):
    """Index of and squared distance to the nearest row of ``c`` (lowest index on ties)."""
    x = np.asarray(x, dtype=np.float64)
    labels = np.zeros(x.shape[0], dtype=np.int64)
    best = np.full(x.shape[0], np.inf)
    for j in range(c.shape[0]):
        diff = x - c[j]
        d2 = np.einsum("ni,ni->n", diff, diff)
        better = d2 < best
        labels[better] = j
        best[better] = d2[better]
    return labels, best


def contingency(a, b, na, nb):
    """Count table of label pairs; ``a`` in [0, na), ``b`` in [0, nb)."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    flat = np.bincount(a * nb + b, minlength=na * nb)
    return flat.reshape(na, nb).astype(np.int64)
