"""Scalar system ``x_dot = theta + u`` with safe set ``|x| <= 1``.

Two closed loops share the plant and the update law ``theta_hat_dot = 2 gamma x``:

* ``strict-acbf``: the adaptive barrier filter applied to ``u_des = -theta_hat``.
  The composite barrier is conserved and the state stays in the set when
  the gain meets the bound.
* ``relaxed-alpha``: ``u = -theta_hat + x alpha(h(x)) / 2``.  This honors the
  relaxed condition ``h_dot >= -alpha(h)`` everywhere, yet the closed loop
  in ``(x, theta_err)`` is a Lienard system whose stable limit cycle leaves
  the safe set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..acbf import (AdaptiveBarrier, acbf_condition_margin, composite_h, filter_from_psi,
                    gamma_lower_bound, linear_alpha, psi_terms, tau_cbf)
from ..dynamics import CompositeState, UncertainAffineSystem, simulate
from ..errors import ConfigurationError

MODES = ("strict-acbf", "relaxed-alpha")


@dataclass(frozen=True)
class CounterexampleConfig:
    x0: float = 0.2
    theta_tilde0: float = 1.0
    theta_star: float = 1.0
    c: float = 5.0
    gamma: float = 26.0
    k_alpha: float = 10.0
    mode: str = "relaxed-alpha"
    dt: float = 1e-3
    horizon: float = 30.0
    sample_and_hold: bool = False
    override_gain_check: bool = False

    def validate(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if abs(self.theta_tilde0) > self.c:
            raise ConfigurationError("|theta_tilde0| must not exceed c")
        if not abs(self.x0) < 1:
            raise ConfigurationError("x0 must lie strictly inside |x| < 1")
        if self.gamma <= 0 or self.k_alpha <= 0 or self.c < 0:
            raise ConfigurationError("gamma and k_alpha must be positive, c nonnegative")
        if not (self.dt > 0 and self.horizon >= self.dt):
            raise ConfigurationError("need dt > 0 and horizon >= dt")
        if self.mode == "strict-acbf" and not self.override_gain_check:
            bound = self.gain_bound
            if self.gamma < bound:
                raise ConfigurationError(
                    f"gamma={self.gamma:g} is below the safety bound {bound:.6g}; "
                    "set override_gain_check to run anyway")
        return self

    @property
    def theta_hat0(self):
        return self.theta_star - self.theta_tilde0

    @property
    def gain_bound(self):
        return gamma_lower_bound(counterexample_barrier(self), np.array([self.x0]),
                                 np.array([self.theta_hat0]))


@dataclass
class EscapeReport:
    escaped: bool
    t_escape: float
    max_abs_x: float
    min_h_a: float
    min_composite_h: float

    def as_dict(self):
        return {k: (float(v) if not isinstance(v, bool) else v) for k, v in vars(self).items()}


def counterexample_system(theta_star=1.0) -> UncertainAffineSystem:
    zero = np.zeros(1)
    one = np.ones((1, 1))
    # F = 1 everywhere, so F(0) = 0 is deliberately not assumed here
    return UncertainAffineSystem(1, 1, 1, lambda x: zero, lambda x: one, lambda x: one,
                                 np.array([theta_star]), check_origin=False)


def safety_function(x, theta=None):
    return 1.0 - float(x[0]) ** 2


def safety_gradient(x, theta=None):
    return np.array([-2.0 * x[0]])


def counterexample_barrier(cfg: CounterexampleConfig) -> AdaptiveBarrier:
    return AdaptiveBarrier(safety_function, safety_gradient, None, np.array([[cfg.gamma]]), cfg.c)


def lienard_functions(cfg: CounterexampleConfig):
    """``(F, g)`` of the relaxed closed loop in Lienard form

    ``x_dot = err - F(x)``, ``err_dot = -g(x)``.
    """
    alpha = linear_alpha(cfg.k_alpha)

    def F(x):
        return -0.5 * x * alpha(1.0 - x * x)

    def g(x):
        return 2.0 * cfg.gamma * x

    return F, g


def _controllers(cfg: CounterexampleConfig, sys, B):
    alpha = linear_alpha(cfg.k_alpha)
    model = sys.model
    gamma = B.Gamma

    def relaxed(s):
        x, th = s.x, s.theta_hat_cbf
        h = safety_function(x)
        u = -th + 0.5 * x * alpha(h)
        margin = acbf_condition_margin(model, B, x, th, u)
        return u, {"h_a": h, "acbf_margin": margin, "relaxed_margin": margin + alpha(h)}

    def strict(s):
        x, th = s.x, s.theta_hat_cbf
        u_des = -th
        psi0, psi1 = psi_terms(model, B, x, th)
        u = filter_from_psi(psi0, psi1, u_des)
        return u, {"h_a": safety_function(x),
                   "acbf_margin": psi0 + float(psi1 @ u),
                   "filter_correction": float(abs(u[0] - u_des[0]))}

    zero = np.zeros(1)

    def updates(s):
        return zero, gamma @ tau_cbf(model, B, s.x, s.theta_hat_cbf)

    return (relaxed if cfg.mode == "relaxed-alpha" else strict), updates


def composite_observer(sys, B, alpha=None):
    """Observer recording the composite barrier and its time derivative.

    ``alpha`` adds ``hdot_plus_alpha = h_dot + alpha(h_a)`` for checking the
    relaxed condition.  Reads ``sys.theta_star``; analysis only.
    """
    theta_star = sys.theta_star
    Ginv = np.linalg.inv(B.Gamma)

    def observe(s, u, theta_dot):
        x, th = s.x, s.theta_hat_cbf
        err = theta_star - th
        xdot = sys.f(x) + sys.F(x) @ theta_star + sys.g(x) @ u
        hdot = float(np.asarray(B.dh_dx(x, th)).ravel() @ xdot) + float(err @ Ginv @ theta_dot)
        if B.dh_dtheta is not None:
            hdot += float(np.asarray(B.dh_dtheta(x, th)).ravel() @ theta_dot)
        out = {"composite_h": composite_h(B, x, th, theta_star, Ginv), "hdot": hdot}
        if alpha is not None:
            out["hdot_plus_alpha"] = hdot + alpha(float(B.h(x, th)))
        return out

    return observe


def run_counterexample(cfg: CounterexampleConfig):
    """Simulate the configured mode; returns ``(Trajectory, EscapeReport)``."""
    cfg.validate()
    sys = counterexample_system(cfg.theta_star)
    B = counterexample_barrier(cfg)
    controller, updates = _controllers(cfg, sys, B)
    observe = composite_observer(
        sys, B, linear_alpha(cfg.k_alpha) if cfg.mode == "relaxed-alpha" else None)

    def observer(s, u, rates):
        return observe(s, u, rates[1])

    s0 = CompositeState.create([cfg.x0], [cfg.theta_hat0], [cfg.theta_hat0])
    traj = simulate(sys, controller, updates, s0, cfg.dt, cfg.horizon,
                    sample_and_hold=cfg.sample_and_hold, observers=(observer,))
    return traj, escape_report(traj)


def escape_report(traj) -> EscapeReport:
    x = traj.x[:, 0]
    ax = np.abs(x)
    outside = np.flatnonzero(ax > 1.0)
    if outside.size:
        k = int(outside[0])
        t_escape = _crossing_time(traj.t, ax, k, 1.0)
    else:
        t_escape = float("nan")
    diag = traj.diagnostics
    return EscapeReport(bool(outside.size), t_escape, float(ax.max()),
                        float(np.min(diag["h_a"])), float(np.min(diag["composite_h"])))


def _crossing_time(t, values, k, level):
    """Linear interpolation of the first upward crossing of ``level`` before sample ``k``."""
    if k == 0:
        return float(t[0])
    v0, v1 = values[k - 1], values[k]
    return float(t[k - 1] + (level - v0) / (v1 - v0) * (t[k] - t[k - 1]))
