"""Adaptive control barrier functions, gain bound and the safety filter.

The barrier condition is the strict one, ``dh/dx (f + F lambda + g u) >= 0``,
with no ``alpha(h)`` relaxation; see ``scenarios.counterexample`` for what
goes wrong when it is relaxed.  The non-adaptive filter in
:func:`plain_cbf_filter` keeps the usual ``+ alpha(h)`` term.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigurationError, InfeasibleError, UnsafeInitialConditionError
from .linalg import check_gain, min_eig
from .qp import QPProblem, solve_qp

FEASIBILITY_TOL = 1e-12


@dataclass(frozen=True)
class AdaptiveBarrier:
    """Parameter-dependent barrier ``h(x, theta)`` with its gradients.

    ``dh_dtheta=None`` declares that ``h`` does not depend on ``theta``; the
    gain then drops out of the barrier condition.
    """

    h: Callable
    dh_dx: Callable
    dh_dtheta: Callable | None
    Gamma: np.ndarray
    c: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "Gamma", check_gain(self.Gamma))
        if self.c < 0:
            raise ConfigurationError("initial error bound c must be nonnegative")

    def contains(self, x, theta) -> bool:
        """Membership in the 0-superlevel set ``S_theta``."""
        return float(self.h(x, theta)) >= 0.0


@dataclass(frozen=True)
class PlainBarrier:
    h: Callable
    dh_dx: Callable
    alpha: Callable


def linear_alpha(k: float):
    """Extended class-K-infinity function ``alpha(r) = k r``."""
    if k <= 0:
        raise ConfigurationError("alpha slope must be positive")

    def alpha(r):
        return k * r

    return alpha


def lambda_cbf(B: AdaptiveBarrier, x, theta) -> np.ndarray:
    """``theta - Gamma dh/dtheta^T`` (minus, where the Lyapunov version has plus)."""
    theta = np.asarray(theta, dtype=float)
    if B.dh_dtheta is None:
        return theta
    grad = np.asarray(B.dh_dtheta(x, theta), dtype=float).reshape(-1)
    if grad.shape != theta.shape:
        raise ConfigurationError(f"dh_dtheta has shape {grad.shape}, expected {theta.shape}")
    return theta - B.Gamma @ grad


def ftilde_cbf(sys, B: AdaptiveBarrier, x, theta) -> np.ndarray:
    return sys.f(x) + sys.F(x) @ lambda_cbf(B, x, theta)


def psi_terms(sys, B: AdaptiveBarrier, x, theta):
    """``(psi0, psi1)`` with the barrier condition written as ``psi0 + psi1 @ u >= 0``."""
    dh = np.asarray(B.dh_dx(x, theta)).ravel()
    return float(dh @ ftilde_cbf(sys, B, x, theta)), dh @ sys.g(x)


def acbf_condition_margin(sys, B: AdaptiveBarrier, x, theta, u) -> float:
    psi0, psi1 = psi_terms(sys, B, x, theta)
    return psi0 + float(psi1 @ np.asarray(u, dtype=float).reshape(-1))


def gamma_lower_bound(B: AdaptiveBarrier, x0, theta0) -> float:
    """Smallest admissible ``lambda_min(Gamma)``: ``c**2 / (2 h(x0, theta0))``."""
    h0 = float(B.h(x0, theta0))
    if not h0 > 0:
        raise UnsafeInitialConditionError(
            f"h(x0, theta0) = {h0:.6g}; the initial state must be strictly inside the safe set")
    return B.c ** 2 / (2.0 * h0)


def gain_satisfies_bound(B: AdaptiveBarrier, x0, theta0) -> bool:
    return min_eig(B.Gamma) >= gamma_lower_bound(B, x0, theta0)


def composite_h(B: AdaptiveBarrier, x, theta_hat, theta_star, Gamma_inv=None) -> float:
    """``h(x, theta_hat) - 1/2 err^T Gamma^-1 err`` with ``err = theta_star - theta_hat``.

    Uses the true parameters, so only analysis code and tests may call it.
    """
    err = np.asarray(theta_star, dtype=float) - np.asarray(theta_hat, dtype=float)
    if Gamma_inv is None:
        Gamma_inv = np.linalg.inv(B.Gamma)
    return float(B.h(x, theta_hat)) - 0.5 * float(err @ Gamma_inv @ err)


def tau_cbf(sys, B: AdaptiveBarrier, x, theta) -> np.ndarray:
    """Update direction ``-(dh/dx F)^T``."""
    return -(np.asarray(B.dh_dx(x, theta)).ravel() @ sys.F(x))


def filter_from_psi(psi0: float, psi1, u_des) -> np.ndarray:
    """Closed-form ``argmin |u - u_des|^2 s.t. psi0 + psi1 @ u >= 0``."""
    psi1 = np.asarray(psi1).ravel()
    u_des = np.asarray(u_des, dtype=float).ravel()
    deficit = -psi0 - float(psi1 @ u_des)
    if deficit <= 0.0:
        return u_des
    nrm2 = float(psi1 @ psi1)
    if nrm2 < FEASIBILITY_TOL ** 2:
        raise InfeasibleError(
            f"barrier condition violated (psi0={psi0:.3g}) with no input authority")
    return u_des + (deficit / nrm2) * psi1


def _filter_with_bounds(psi0, psi1, u_des, input_bounds):
    lo, hi = (np.broadcast_to(np.asarray(v, dtype=float), u_des.shape) for v in input_bounds)
    m = u_des.size
    eye = np.eye(m)
    A = np.vstack((-psi1[None, :], eye, -eye))
    b = np.concatenate(([psi0], hi, -lo))
    sol = solve_qp(QPProblem(eye, -u_des, A, b))
    if sol.status != "optimal":
        raise InfeasibleError(f"bounded safety filter: {sol.status} {sol.message}".strip())
    return sol.z


def acbf_qp_filter(sys, B: AdaptiveBarrier, x, theta_hat, u_des, input_bounds=None) -> np.ndarray:
    """Closest input to ``u_des`` satisfying the adaptive barrier condition.

    ``input_bounds`` is an optional ``(lower, upper)`` box; with it the
    problem goes through the active-set solver.
    """
    psi0, psi1 = psi_terms(sys, B, x, theta_hat)
    u_des = np.asarray(u_des, dtype=float).reshape(-1)
    if input_bounds is None:
        return filter_from_psi(psi0, psi1, u_des)
    return _filter_with_bounds(psi0, np.asarray(psi1, dtype=float), u_des, input_bounds)


def plain_cbf_terms(model, theta_assumed, PB: PlainBarrier, x):
    """``(L_f h + alpha(h), L_g h)`` using ``f + F theta_assumed`` as the drift."""
    dh = np.asarray(PB.dh_dx(x), dtype=float).reshape(-1)
    drift = model.f(x) + model.F(x) @ np.asarray(theta_assumed, dtype=float)
    return float(dh @ drift) + float(PB.alpha(float(PB.h(x)))), dh @ model.g(x)


def plain_cbf_filter(model, theta_assumed, PB: PlainBarrier, x, u_des, input_bounds=None):
    """Non-adaptive filter ``L_f h + L_g h u + alpha(h) >= 0`` under an assumed parameter."""
    psi0, psi1 = plain_cbf_terms(model, theta_assumed, PB, x)
    u_des = np.asarray(u_des, dtype=float).reshape(-1)
    if input_bounds is None:
        return filter_from_psi(psi0, psi1, u_des)
    return _filter_with_bounds(psi0, np.asarray(psi1, dtype=float), u_des, input_bounds)
