"""Adaptive control Lyapunov functions and the min-norm controller."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigurationError, InfeasibleError
from .linalg import check_gain

FEASIBILITY_TOL = 1e-12


def _identity(x):
    return x


@dataclass(frozen=True)
class AdaptiveLyapunov:
    """Parameter-dependent Lyapunov candidate ``V(x, theta)``.

    ``dV_dtheta=None`` declares that ``V`` does not depend on ``theta``.
    ``alpha3(r, theta)`` is the required decrease rate as a function of
    ``r = ||error(x)||``.  ``error`` defaults to the identity; tracking
    problems pass the regulated output instead (``v - v_d`` for cruise
    control).
    """

    V: Callable
    dV_dx: Callable
    dV_dtheta: Callable | None
    alpha3: Callable
    Gamma: np.ndarray
    error: Callable = _identity

    def __post_init__(self):
        object.__setattr__(self, "Gamma", check_gain(self.Gamma))

    def rate(self, x, theta) -> float:
        return float(self.alpha3(float(np.linalg.norm(self.error(x))), theta))


def quadratic_rate(eps: float):
    """``alpha3(r) = eps * r**2``."""
    if eps <= 0:
        raise ConfigurationError("decrease rate must be positive")

    def alpha3(r, _theta=None):
        return eps * r * r

    return alpha3


def lambda_clf(L: AdaptiveLyapunov, x, theta) -> np.ndarray:
    """``theta + Gamma dV/dtheta^T``."""
    theta = np.asarray(theta, dtype=float)
    if L.dV_dtheta is None:
        return theta
    grad = np.asarray(L.dV_dtheta(x, theta), dtype=float).reshape(-1)
    if grad.shape != theta.shape:
        raise ConfigurationError(f"dV_dtheta has shape {grad.shape}, expected {theta.shape}")
    return theta + L.Gamma @ grad


def ftilde_clf(sys, L: AdaptiveLyapunov, x, theta) -> np.ndarray:
    return sys.f(x) + sys.F(x) @ lambda_clf(L, x, theta)


def phi_terms(sys, L: AdaptiveLyapunov, x, theta):
    """``(phi0, phi1)`` with the decrease condition written as ``phi0 + phi1 @ u <= 0``."""
    dV = np.asarray(L.dV_dx(x, theta)).ravel()
    phi0 = float(dV @ ftilde_clf(sys, L, x, theta)) + L.rate(x, theta)
    phi1 = dV @ sys.g(x)
    return phi0, phi1


def aclf_condition_margin(sys, L: AdaptiveLyapunov, x, theta, u) -> float:
    """``-alpha3 - dV/dx (f_tilde + g u)``; nonnegative iff ``u`` meets the decrease condition."""
    phi0, phi1 = phi_terms(sys, L, x, theta)
    return -(phi0 + float(phi1 @ np.asarray(u, dtype=float).reshape(-1)))


def tau_clf(sys, L: AdaptiveLyapunov, x, theta) -> np.ndarray:
    """Update direction ``(dV/dx F)^T``; the estimate moves as ``Gamma @ tau``."""
    return np.asarray(L.dV_dx(x, theta)).ravel() @ sys.F(x)


def minnorm_from_phi(phi0: float, phi1) -> np.ndarray:
    """Closed-form solution of ``min |u|^2 s.t. phi0 + phi1 @ u <= 0``."""
    phi1 = np.asarray(phi1, dtype=float).reshape(-1)
    if phi0 <= 0.0:
        return np.zeros_like(phi1)
    nrm2 = float(phi1 @ phi1)
    if nrm2 < FEASIBILITY_TOL ** 2:
        raise InfeasibleError(
            f"decrease condition violated (phi0={phi0:.3g}) with no input authority")
    return -(phi0 / nrm2) * phi1


def minnorm_controller(sys, L: AdaptiveLyapunov, x, theta) -> np.ndarray:
    phi0, phi1 = phi_terms(sys, L, x, theta)
    return minnorm_from_phi(phi0, phi1)


def composite_V(L: AdaptiveLyapunov, x, theta_hat, theta_star, Gamma_inv=None) -> float:
    """``V_a(x, theta_hat) + 1/2 err^T Gamma^-1 err`` with ``err = theta_star - theta_hat``.

    Needs the true parameters, so it is for analysis and tests only.
    """
    err = np.asarray(theta_star, dtype=float) - np.asarray(theta_hat, dtype=float)
    if Gamma_inv is None:
        Gamma_inv = np.linalg.inv(L.Gamma)
    return float(L.V(x, theta_hat)) + 0.5 * float(err @ Gamma_inv @ err)
