"""Gamma-weighted Gaussian mixture coordinate ascent, written out point by point.

This is the LDDP with every GP field pinned at zero. It shares no code with
``lddp.vi`` or ``lddp.emission`` so it can serve as an oracle for them.
"""
import math

import numpy as np
from scipy.special import digamma


def _e_logdet(w, nu):
    d = w.shape[0]
    sign, logdet = np.linalg.slogdet(w)
    assert sign > 0
    return sum(digamma((nu + 1 - i) / 2) for i in range(1, d + 1)) + d * math.log(2) + logdet


def _loglik_row(x, m, s, w, nu):
    d = len(x)
    diff = x - m
    return (0.5 * _e_logdet(w, nu) - 0.5 * d * math.log(2 * math.pi)
            - 0.5 * nu * (diff @ w @ diff + np.trace(w @ s)))


def _responsibilities(x, m, s, w, nu, a, b):
    n, k = len(x), len(m)
    phi = np.empty((n, k))
    for i in range(n):
        logits = np.array([_loglik_row(x[i], m[j], s[j], w[j], nu[j])
                           + digamma(a[j]) - math.log(b[j]) for j in range(k)])
        logits -= logits.max()
        e = np.exp(logits)
        phi[i] = e / e.sum()
    return phi


def run(x, init_means, mu0, r0, w0, nu0, alpha0, iters):
    """Yield (phi, m, s, w, nu, a, b) after every sweep."""
    x = np.asarray(x, dtype=float)
    k = len(init_means)
    d = x.shape[1]
    m = np.array(init_means, dtype=float)
    s = np.array([np.linalg.inv(r0)] * k)
    w = np.array([w0] * k, dtype=float)
    nu = np.full(k, float(nu0))
    a = np.ones(k)
    b = np.ones(k)
    phi = _responsibilities(x, m, s, w, nu, a, b)
    xi = np.full(len(x), a @ (1 / b))  # sum_j E[z_j] e^0
    for _ in range(iters):
        for j in range(k):
            nj = phi[:, j].sum()
            if nj == 0:
                m[j], s[j], w[j], nu[j] = mu0, np.linalg.inv(r0), w0, nu0
                continue
            xs = (phi[:, j:j + 1] * x).sum(axis=0)
            prec = r0 + nu[j] * w[j] * nj
            s[j] = np.linalg.inv(prec)
            m[j] = s[j] @ (r0 @ mu0 + nu[j] * w[j] @ xs)
            scatter = np.zeros((d, d))
            for i in range(len(x)):
                diff = x[i] - m[j]
                scatter += phi[i, j] * (np.outer(diff, diff) + s[j])
            w[j] = np.linalg.inv(np.linalg.inv(w0) + scatter)
            nu[j] = nu0 + nj
        phi = _responsibilities(x, m, s, w, nu, a, b)
        a = alpha0 / k + phi.sum(axis=0)
        b = 1 + np.sum(1 / xi) * np.ones(k)
        xi = np.full(len(x), np.sum(a / b))
        yield phi.copy(), m.copy(), s.copy(), w.copy(), nu.copy(), a.copy(), b.copy()
