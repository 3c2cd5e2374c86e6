"""Gaussian emissions with independent Normal (mean) and Wishart (precision)
priors, under the factorised posterior q(mu_k) q(R_k).

Any emission model plugged into :func:`lddp.vi.fit` needs three methods:
``expected_loglik(post)``, ``update(phi, post)`` and ``elbo_terms(post)``.
:class:`GaussianEmission` is the one shipped here.
"""
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.special import digamma, multigammaln

from . import _kernels
from .kernel import NumericalFailure

LOG_2PI = np.log(2 * np.pi)


def _check_spd(mat, name):
    try:
        return linalg.cholesky(mat, lower=True)
    except linalg.LinAlgError as exc:
        raise ValueError(f"{name} is not symmetric positive definite") from exc


def _logdet_spd(mat, name="matrix"):
    chol = _check_spd(mat, name)
    return 2.0 * np.sum(np.log(np.diag(chol)))


def _sym(mat):
    return 0.5 * (mat + np.swapaxes(mat, -1, -2))


@dataclass(frozen=True)
class NwPrior:
    mu0: np.ndarray
    r0: np.ndarray
    w0: np.ndarray
    nu0: float

    def __post_init__(self):
        d = len(self.mu0)
        if self.r0.shape != (d, d) or self.w0.shape != (d, d):
            raise ValueError("prior matrices must be d x d")
        _check_spd(self.r0, "r0")
        _check_spd(self.w0, "w0")
        if self.nu0 < d:
            raise ValueError("nu0 must be at least the dimension")

    @property
    def d(self):
        return len(self.mu0)


def empirical_prior(features, ridge=1e-8):
    """Prior centred on the data: mu0 = mean, R0 = inverse covariance,
    nu0 = d and W0 = R0 / d so the Wishart mean equals R0.

    The covariance gets ``ridge * trace / d`` on its diagonal first, which
    keeps flat colour channels invertible.
    """
    x = np.asarray(features, dtype=np.float64)
    n, d = x.shape
    mu0 = x.mean(axis=0)
    if n > 1:
        cov = np.atleast_2d(np.cov(x, rowvar=False, bias=True))
    else:
        cov = np.zeros((d, d))
    tr = np.trace(cov)
    cov = cov + (ridge * tr / d if tr > 0 else ridge) * np.eye(d)
    r0 = _sym(linalg.inv(cov))
    return NwPrior(mu0=mu0, r0=r0, w0=r0 / d, nu0=float(d))


@dataclass
class NwPosterior:
    """Per-cluster variational parameters, stacked along axis 0."""
    m: np.ndarray   # (K, d) mean of q(mu_k)
    s: np.ndarray   # (K, d, d) covariance of q(mu_k)
    w: np.ndarray   # (K, d, d) Wishart scale of q(R_k)
    nu: np.ndarray  # (K,) Wishart degrees of freedom

    @property
    def k(self):
        return self.m.shape[0]

    @property
    def d(self):
        return self.m.shape[1]

    def copy(self):
        return NwPosterior(self.m.copy(), self.s.copy(), self.w.copy(),
                           self.nu.copy())

    @classmethod
    def from_prior(cls, prior, k):
        d = prior.d
        return cls(
            m=np.tile(prior.mu0, (k, 1)),
            s=np.tile(linalg.inv(prior.r0), (k, 1, 1)),
            w=np.tile(prior.w0, (k, 1, 1)),
            nu=np.full(k, float(prior.nu0)),
        )


def expected_log_det(post):
    """E[ln |R_k|] under each Wishart factor."""
    d = post.d
    i = np.arange(1, d + 1)
    psi = digamma((post.nu[:, None] + 1 - i[None, :]) / 2).sum(axis=1)
    logdet = np.array([_logdet_spd(w, "w") for w in post.w])
    return psi + d * np.log(2.0) + logdet


def expected_loglik(data, post):
    """(N, K) matrix of E_q[ln N(x_n; mu_k, R_k^{-1})]."""
    x = np.ascontiguousarray(data, dtype=np.float64)
    d = post.d
    elogdet = expected_log_det(post)
    maha = _kernels.mahalanobis_sq(x, post.m, post.w)
    trace = np.einsum("kij,kji->k", post.w, post.s)
    return (0.5 * elogdet[None, :] - 0.5 * d * LOG_2PI
            - 0.5 * post.nu[None, :] * (maha + trace[None, :]))


def update_nw(data, phi, prior, post):
    """One sweep of the conditionally conjugate updates, mean first.

    q(mu_k): precision R0 + nu_k W_k N_k, mean from R0 mu0 + nu_k W_k xsum_k.
    q(R_k):  nu0 + N_k dof, scale inverse W0^{-1} + sum_n phi_nk E[(x_n - mu_k)(...)^T].
    """
    x = np.asarray(data, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    k, d = post.k, post.d
    nk = phi.sum(axis=0)
    xsum = phi.T @ x
    w0_inv = linalg.inv(prior.w0)
    r0_mu0 = prior.r0 @ prior.mu0
    m = np.empty((k, d))
    s = np.empty((k, d, d))
    w = np.empty((k, d, d))
    s0 = linalg.inv(prior.r0)
    for j in range(k):
        if not phi[:, j].any():
            m[j], s[j], w[j] = prior.mu0, s0, prior.w0
            continue
        exp_prec = post.nu[j] * post.w[j]
        lam = _sym(prior.r0 + exp_prec * nk[j])
        try:
            cho = linalg.cho_factor(lam, lower=True)
        except linalg.LinAlgError as exc:
            raise NumericalFailure(f"mean precision of cluster {j} is singular") from exc
        s[j] = _sym(linalg.cho_solve(cho, np.eye(d)))
        m[j] = linalg.cho_solve(cho, r0_mu0 + exp_prec @ xsum[j])
        diff = x - m[j]
        scatter = (phi[:, j, None] * diff).T @ diff
        w[j] = _sym(linalg.inv(_sym(w0_inv + scatter + nk[j] * s[j])))
    return NwPosterior(m=m, s=s, w=w, nu=prior.nu0 + nk)


def _log_wishart_norm(logdet_w, nu, d):
    return 0.5 * nu * logdet_w + 0.5 * nu * d * np.log(2.0) + multigammaln(0.5 * nu, d)


def emission_elbo_terms(prior, post):
    """sum_k E[ln p(mu_k) + ln p(R_k)] + H[q(mu_k)] + H[q(R_k)].

    Equals minus the KL divergence from q to the prior, so it is zero when
    every factor equals its prior.
    """
    d = post.d
    r0 = prior.r0
    logdet_r0 = _logdet_spd(r0, "r0")
    w0_inv = linalg.inv(prior.w0)
    logdet_w0 = _logdet_spd(prior.w0, "w0")
    elogdet = expected_log_det(post)
    total = 0.0
    for j in range(post.k):
        dm = post.m[j] - prior.mu0
        logdet_s = _logdet_spd(post.s[j], "s")
        e_log_pmu = 0.5 * (logdet_r0 - d * LOG_2PI
                           - dm @ r0 @ dm - np.trace(r0 @ post.s[j]))
        h_mu = 0.5 * logdet_s + 0.5 * d * (1 + LOG_2PI)
        nu = post.nu[j]
        e_log_pr = (-_log_wishart_norm(logdet_w0, prior.nu0, d)
                    + 0.5 * (prior.nu0 - d - 1) * elogdet[j]
                    - 0.5 * nu * np.trace(w0_inv @ post.w[j]))
        logdet_w = _logdet_spd(post.w[j], "w")
        h_r = (_log_wishart_norm(logdet_w, nu, d)
               - 0.5 * (nu - d - 1) * elogdet[j] + 0.5 * nu * d)
        total += e_log_pmu + h_mu + e_log_pr + h_r
    return float(total)


def init_from_kmeans(data, labels, prior, k0):
    """Prior everywhere except q(mu_k)'s mean, set to the cluster centroid
    (mu0 for clusters without points)."""
    post = NwPosterior.from_prior(prior, k0)
    x = np.asarray(data, dtype=np.float64).reshape(-1, prior.d)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= k0):
        raise ValueError("labels must lie in [0, k0)")
    for j in range(k0):
        members = labels == j
        if members.any():
            post.m[j] = x[members].mean(axis=0)
    return post


class GaussianEmission:
    """Binds data and prior to the emission contract used by the fitter."""

    def __init__(self, data, prior):
        self.data = np.ascontiguousarray(data, dtype=np.float64)
        self.prior = prior

    def expected_loglik(self, post):
        return expected_loglik(self.data, post)

    def update(self, phi, post):
        return update_nw(self.data, phi, self.prior, post)

    def elbo_terms(self, post):
        return emission_elbo_terms(self.prior, post)
