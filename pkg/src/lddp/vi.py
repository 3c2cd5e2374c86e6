"""Mean-field coordinate ascent for the location dependent DP mixture.

Variational family: q(z_k) = Gamma(a_k, b_k), q(c_n) = Categorical(phi_n),
q(f_k) a point mass. The log normaliser ``-ln sum_j z_j exp(f_j(l_n))`` is
replaced by its first-order lower bound around ``xi_n``, giving the bounded
objective evaluated by :func:`elbo`.

Array conventions: ``phi`` is (N, K), ``f`` is (K, N), ``xi`` is (N,).
"""
from dataclasses import dataclass, field
import logging
import math

import numpy as np
from scipy.special import digamma, entr, gammaln

from . import _kernels
from .kernel import NumericalFailure

log = logging.getLogger(__name__)


@dataclass
class LddpConfig:
    k0: int = 5
    alpha0: float = 1.0
    step_rho: float = 0.1
    gp_steps_per_iter: int = 1
    max_iters: int = 1000
    elbo_rel_tol: float = 1e-6
    backtracking: bool = True
    f_clamp: float = 30.0
    max_halvings: int = 20
    track_updates: bool = False

    def __post_init__(self):
        if self.k0 < 1:
            raise ValueError("k0 must be at least 1")
        if not self.alpha0 > 0:
            raise ValueError("alpha0 must be positive")
        if not self.step_rho > 0:
            raise ValueError("step_rho must be positive")
        if self.gp_steps_per_iter < 0 or self.max_iters < 0:
            raise ValueError("iteration counts must be non-negative")

    @property
    def gmm_mode(self):
        return self.gp_steps_per_iter == 0


@dataclass
class GammaPosterior:
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        if np.any(self.a <= 0) or np.any(self.b <= 0):
            raise ValueError("gamma parameters must be positive")

    @property
    def mean(self):
        return self.a / self.b

    @property
    def expected_log(self):
        return digamma(self.a) - np.log(self.b)


@dataclass
class LddpState:
    gamma: GammaPosterior
    phi: np.ndarray
    f: np.ndarray
    xi: np.ndarray
    emission: object

    def copy(self):
        return LddpState(
            gamma=GammaPosterior(self.gamma.a.copy(), self.gamma.b.copy()),
            phi=self.phi.copy(), f=self.f.copy(), xi=self.xi.copy(),
            emission=self.emission.copy() if hasattr(self.emission, "copy")
            else self.emission,
        )


@dataclass
class ElboTrace:
    values: list = field(default_factory=list)
    per_update_deltas: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    converged: bool = False


def update_xi(gamma, f):
    """Tightest expansion point: xi_n = sum_j E[z_j] exp(f_j(l_n))."""
    xi = _kernels.mixing_normalizer(gamma.mean, np.ascontiguousarray(f))
    if not np.all(np.isfinite(xi)):
        raise NumericalFailure("xi overflowed; clamp f before exponentiating")
    return xi


def bound_log_norm(xi_n, s):
    """-ln(xi) - (s - xi) / xi, a lower bound on -ln(s) that is tight at s = xi."""
    xi_n = np.asarray(xi_n, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    if np.any(xi_n <= 0) or np.any(s <= 0):
        raise ValueError("bound_log_norm needs positive arguments")
    out = -np.log(xi_n) - (s - xi_n) / xi_n
    return float(out) if out.ndim == 0 else out


def update_assignments(exp_loglik, gamma, f):
    logits = np.asarray(exp_loglik, dtype=np.float64) + gamma.expected_log[None, :] + f.T
    phi, lognorm = _kernels.softmax_rows(logits)
    if not np.all(np.isfinite(lognorm)):
        bad = int(np.flatnonzero(~np.isfinite(lognorm))[0])
        raise NumericalFailure(f"assignment logits of row {bad} are not finite")
    return phi


def update_gamma(cfg, phi, f, xi):
    """a_k = alpha0/K0 + sum_n phi_nk ;  b_k = 1 + sum_n exp(f_kn) / xi_n."""
    k0 = cfg.k0
    phi = np.asarray(phi, dtype=np.float64).reshape(-1, k0)
    a = cfg.alpha0 / k0 + phi.sum(axis=0)
    if phi.shape[0] == 0:
        b = np.ones(k0)
    else:
        b = 1.0 + _kernels.exp_over_xi_sums(np.ascontiguousarray(f), xi)
    return GammaPosterior(a, b)


def gp_gradient(k_index, phi, gamma, f, xi, kernel_inverse_apply):
    """Gradient of the bounded objective with respect to f_k (xi held fixed)."""
    fk = f[k_index]
    data_part = phi[:, k_index] - gamma.mean[k_index] * np.exp(fk) / xi
    return data_part - kernel_inverse_apply(fk)


def _residuals(phi, ez, f, xi):
    # u[k, n] = phi_nk - E[z_k] exp(f_kn) / xi_n
    return phi.T - ez[:, None] * np.exp(f) / xi[None, :]


def field_quad(f, kernel):
    """f_k^T K_hat^{-1} f_k for every cluster."""
    return np.atleast_1d(kernel.quad_form_inv(np.ascontiguousarray(f.T)))


def field_objective(phi, ez, f, xi, kernel, quad=None):
    """Per-cluster part of the bounded objective that depends on f_k."""
    lin = np.einsum("nk,kn->k", phi, f)
    expo = ez * _kernels.exp_over_xi_sums(np.ascontiguousarray(f), xi)
    if quad is None:
        quad = field_quad(f, kernel)
    return lin - expo - 0.5 * quad


@dataclass
class StepInfo:
    stalled: list
    clamped: int
    rho: np.ndarray
    quad: np.ndarray = None  # field_quad of the returned fields, when known


def gp_step_all(phi, gamma, f, xi, kernel, rho, backtracking=True,
                clamp=30.0, max_halvings=20, quad0=None):
    """Preconditioned ascent step f_k <- f_k + rho (K_hat u_k - f_k) for every k.

    With ``backtracking`` the step for each cluster is halved until that
    cluster's share of the objective does not decrease; clusters still
    failing after ``max_halvings`` keep their old field and are reported as
    stalled. The per-cluster objectives are separable, so this is the same
    as stepping each cluster in turn. ``quad0`` may carry the already known
    ``field_quad(f)``.
    """
    ez = gamma.mean
    u = _residuals(phi, ez, f, xi)
    direction = kernel.apply(np.ascontiguousarray(u.T)).T - f
    k0 = f.shape[0]
    if not backtracking:
        raw = f + rho * direction
        new = np.clip(raw, -clamp, clamp)
        return new, StepInfo([], int(np.count_nonzero(raw != new)), np.full(k0, rho))

    if quad0 is None:
        quad0 = field_quad(f, kernel)
    obj0 = field_objective(phi, ez, f, xi, kernel, quad0)
    new = f.copy()
    quad = np.array(quad0, dtype=np.float64)
    step = np.full(k0, float(rho))
    pending = np.arange(k0)
    clamped = 0
    for _ in range(max_halvings + 1):
        raw = f[pending] + step[pending, None] * direction[pending]
        cand = np.clip(raw, -clamp, clamp)
        cand_quad = field_quad(cand, kernel)
        obj = field_objective(phi[:, pending], ez[pending], cand, xi, kernel, cand_quad)
        slack = 1e-12 * np.maximum(1.0, np.abs(obj0[pending]))
        ok = obj >= obj0[pending] - slack
        new[pending[ok]] = cand[ok]
        quad[pending[ok]] = cand_quad[ok]
        clamped += int(np.count_nonzero(raw[ok] != cand[ok]))
        pending = pending[~ok]
        if pending.size == 0:
            break
        step[pending] *= 0.5
    step[pending] = 0.0
    return new, StepInfo([int(k) for k in pending], clamped, step, quad)


def gp_step(k_index, phi, gamma, f, xi, factor, rho, backtracking=False,
            clamp=30.0, max_halvings=20):
    """Step a single field; returns the full (K, N) field array."""
    sub_gamma = GammaPosterior(gamma.a[[k_index]], gamma.b[[k_index]])
    row, info = gp_step_all(phi[:, [k_index]], sub_gamma, f[[k_index]], xi,
                            factor, rho, backtracking, clamp, max_halvings)
    out = f.copy()
    out[k_index] = row[0]
    if info.stalled:
        log.warning("GP step for cluster %d stalled after backtracking", k_index)
    return out


def elbo_terms(state, exp_loglik, prior_terms, kernel, cfg, gp_quad=None):
    """Named pieces of the bounded objective; ``gp_quad`` may carry a cached
    ``field_quad(state.f)``."""
    gamma = state.gamma
    phi, f, xi = state.phi, state.f, state.xi
    ez, elnz = gamma.mean, gamma.expected_log
    c = cfg.alpha0 / cfg.k0
    s = _kernels.mixing_normalizer(ez, np.ascontiguousarray(f))
    if gp_quad is not None:
        gp = -0.5 * math.fsum(gp_quad)
    elif np.any(f != 0):
        if kernel is None:
            raise ValueError("non-zero fields need a kernel for the GP prior term")
        gp = -0.5 * math.fsum(field_quad(f, kernel))
    else:
        gp = 0.0
    a, b = gamma.a, gamma.b
    return {
        "assignment": float(np.sum(phi * (exp_loglik + elnz[None, :] + f.T))),
        "bound": float(np.sum(bound_log_norm(xi, s))),
        "gamma_prior": float(np.sum((c - 1) * elnz - ez - gammaln(c))),
        "gamma_entropy": float(np.sum(a - np.log(b) + gammaln(a) + (1 - a) * digamma(a))),
        "assignment_entropy": float(np.sum(entr(phi))),
        "gp_prior": gp,
        "emission": float(prior_terms),
    }


def elbo(state, exp_loglik, prior_terms, kernel, cfg, gp_quad=None):
    """Bounded variational objective at the current state."""
    return math.fsum(elbo_terms(state, exp_loglik, prior_terms, kernel, cfg,
                                gp_quad).values())


def initial_state(emission, post, cfg, n):
    """f = 0, a = b = 1, emission posterior as given; phi and xi follow."""
    gamma = GammaPosterior(np.ones(cfg.k0), np.ones(cfg.k0))
    f = np.zeros((cfg.k0, n))
    phi = update_assignments(emission.expected_loglik(post), gamma, f)
    return LddpState(gamma=gamma, phi=phi, f=f, xi=update_xi(gamma, f),
                     emission=post)


def _check_finite(name, iteration, *arrays):
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise NumericalFailure(
                f"non-finite values after the {name} update (iteration {iteration})")


def fit(emission, cfg, kernel, state, callback=None):
    """Coordinate ascent until ``max_iters`` or a relative ELBO change below
    ``elbo_rel_tol``.

    Sweep order: emission, assignments, gamma, GP steps, xi. Returns the final
    state and an :class:`ElboTrace` whose first value is the initial ELBO.
    """
    state = state.copy()
    trace = ElboTrace()
    if kernel is None and not cfg.gmm_mode:
        raise ValueError("a kernel is required unless gp_steps_per_iter == 0")
    ell = emission.expected_loglik(state.emission)
    prior_terms = emission.elbo_terms(state.emission)
    # fields only change in the GP step, so their prior term is cached
    quad = field_quad(state.f, kernel) if np.any(state.f != 0) else None
    current = elbo(state, ell, prior_terms, kernel, cfg, quad)
    trace.values.append(current)
    clamps = 0
    stalled_total = 0
    for it in range(cfg.max_iters):
        deltas = {}

        def track(name, prev):
            value = elbo(state, ell, prior_terms, kernel, cfg, quad)
            deltas[name] = value - prev
            return value

        state.emission = emission.update(state.phi, state.emission)
        ell = emission.expected_loglik(state.emission)
        _check_finite("emission", it, ell)
        prior_terms = emission.elbo_terms(state.emission)
        if cfg.track_updates:
            current = track("emission", current)

        state.phi = update_assignments(ell, state.gamma, state.f)
        _check_finite("assignment", it, state.phi)
        if cfg.track_updates:
            current = track("assignments", current)

        state.gamma = update_gamma(cfg, state.phi, state.f, state.xi)
        _check_finite("gamma", it, state.gamma.a, state.gamma.b)
        if cfg.track_updates:
            current = track("gamma", current)

        for _ in range(cfg.gp_steps_per_iter):
            state.f, info = gp_step_all(
                state.phi, state.gamma, state.f, state.xi, kernel,
                cfg.step_rho, cfg.backtracking, cfg.f_clamp, cfg.max_halvings,
                quad0=quad)
            quad = info.quad
            clamps += info.clamped
            stalled_total += len(info.stalled)
        _check_finite("GP field", it, state.f)
        if cfg.track_updates and cfg.gp_steps_per_iter:
            current = track("gp", current)

        state.xi = update_xi(state.gamma, state.f)
        _check_finite("xi", it, state.xi)
        value = elbo(state, ell, prior_terms, kernel, cfg, quad)
        if cfg.track_updates:
            deltas["xi"] = value - current
            trace.per_update_deltas.append(deltas)
        if not math.isfinite(value):
            raise NumericalFailure(f"ELBO is not finite at iteration {it}")
        previous = trace.values[-1]
        trace.values.append(value)
        current = value
        if callback is not None:
            callback(it, state, value)
        if abs(value - previous) <= cfg.elbo_rel_tol * max(abs(previous), 1e-300):
            trace.converged = True
            break

    if clamps:
        trace.warnings.append(f"GP field values clamped to +/-{cfg.f_clamp:g} {clamps} times")
    if stalled_total:
        trace.warnings.append(f"{stalled_total} GP steps stalled after backtracking")
    return state, trace
