"""Adaptive cruise control with unknown rolling-resistance coefficients.

State ``x = (v, D)``: ego speed and gap to a lead vehicle driving at the
constant speed ``v0``.  The friction force ``f0 + f1 v + f2 v**2`` has
unknown coefficients ``theta = (f0, f1, f2)``::

    v_dot = (u - f0 - f1 v - f2 v**2) / m
    D_dot = v0 - v

Safety is ``D >= 1.8 v``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..acbf import (AdaptiveBarrier, PlainBarrier, composite_h, filter_from_psi,
                    gamma_lower_bound, linear_alpha, plain_cbf_terms, psi_terms, tau_cbf)
from ..aclf import AdaptiveLyapunov, composite_V, phi_terms, quadratic_rate, tau_clf
from ..dynamics import CompositeState, UncertainAffineSystem, simulate
from ..errors import ConfigurationError, InfeasibleError
from ..linalg import min_eig
from ..qp import QPSolver
from ..unified import split_solution, unified_qp_from_rows

HEADWAY = 1.8
GRAVITY = 9.81
CONTROLLERS = ("proportional", "acbf-qp-over-proportional", "clf-cbf", "clf-acbf", "aclf-acbf")
ADAPTIVE_BARRIER = ("acbf-qp-over-proportional", "clf-acbf", "aclf-acbf")


@dataclass(frozen=True)
class ACCConfig:
    m: float = 1650.0
    v0: float = 14.0
    v_d: float = 24.0
    f_star: tuple = (0.1, 5.0, 0.25)
    f_hat0: tuple = (1.0, 50.0, 2.5)
    alpha_plateau: float = 10.0
    c: float = 46.0
    Gamma_clf: tuple = (5.0, 5.0, 5.0)
    Gamma_cbf: tuple = (12.0, 12.0, 12.0)
    u_max: float | None = None  # None: 0.3 m g
    controller: str = "aclf-acbf"
    kp: float = 0.1
    clf_rate: float = 0.5
    c_V: float = 1e2
    c_p: float = 1e4
    J_weights: tuple | None = None  # None: 1/m**2, i.e. cost on acceleration
    cbf_alpha: float = 1.0
    dt: float = 1e-2
    horizon: float = 60.0
    x0: tuple = (18.0, 150.0)
    sample_and_hold: bool = False
    override_gain_check: bool = False

    @property
    def input_limit(self):
        return 0.3 * self.m * GRAVITY if self.u_max is None else float(self.u_max)

    @property
    def weights(self):
        return (1.0 / self.m ** 2,) if self.J_weights is None else tuple(self.J_weights)

    def validate(self):
        if self.controller not in CONTROLLERS:
            raise ConfigurationError(f"controller must be one of {CONTROLLERS}")
        if self.m <= 0:
            raise ConfigurationError("mass must be positive")
        if self.alpha_plateau <= 0:
            raise ConfigurationError("alpha_plateau must be positive")
        for name in ("f_star", "f_hat0", "Gamma_clf", "Gamma_cbf"):
            if np.shape(getattr(self, name)) != (3,):
                raise ConfigurationError(f"{name} needs three entries")
        if len(self.x0) != 2:
            raise ConfigurationError("x0 is (v, D)")
        v, D = self.x0
        if not D - HEADWAY * v > 0:
            raise ConfigurationError("initial state must satisfy D - 1.8 v > 0")
        if not (self.dt > 0 and self.horizon >= self.dt):
            raise ConfigurationError("need dt > 0 and horizon >= dt")
        if self.input_limit <= 0 or self.kp < 0 or self.clf_rate <= 0 or self.cbf_alpha <= 0:
            raise ConfigurationError("u_max, clf_rate and cbf_alpha must be positive, kp nonnegative")
        if len(self.weights) != 1 or self.weights[0] <= 0:
            raise ConfigurationError("J_weights is a single positive weight")
        if self.controller in ADAPTIVE_BARRIER:
            err = np.linalg.norm(np.subtract(self.f_star, self.f_hat0))
            if err > self.c and not self.override_gain_check:
                raise ConfigurationError(
                    f"initial parameter error {err:.6g} exceeds c={self.c:g}")
            bound = self.gain_bound
            if min_eig(np.diag(self.Gamma_cbf)) < bound and not self.override_gain_check:
                raise ConfigurationError(
                    f"lambda_min(Gamma_cbf)={min_eig(np.diag(self.Gamma_cbf)):g} is below "
                    f"the safety bound {bound:.6g}; set override_gain_check to run anyway")
        return self

    @property
    def gain_bound(self):
        return gamma_lower_bound(acc_barrier(self), np.array(self.x0, dtype=float),
                                 np.array(self.f_hat0, dtype=float))


@dataclass
class ACCMetrics:
    min_safety_margin: float
    t_unsafe: float
    steady_state_error: float
    peak_abs_u: float
    delta_V_integral: float
    delta_p_integral: float
    min_h_a: float
    min_composite_h: float
    composite_h_drop: float

    @property
    def safe(self):
        return self.min_safety_margin >= 0.0

    def as_dict(self):
        d = {k: float(v) for k, v in vars(self).items()}
        d["safe"] = self.safe
        return d


def acc_system(cfg: ACCConfig) -> UncertainAffineSystem:
    m, v0 = cfg.m, cfg.v0
    g_col = np.array([[1.0 / m], [0.0]])

    def f(x):
        return np.array([0.0, v0 - x[0]])

    def F(x):
        v = x[0]
        return np.array([[-1.0 / m, -v / m, -v * v / m], [0.0, 0.0, 0.0]])

    def g(x):
        return g_col

    # the lead keeps moving, so the origin is not an equilibrium
    return UncertainAffineSystem(2, 1, 3, f, F, g, np.array(cfg.f_star, dtype=float),
                                 check_origin=False)


def headway_margin(x):
    return x[1] - HEADWAY * x[0]


def acc_barrier(cfg: ACCConfig) -> AdaptiveBarrier:
    """Plateau barrier: ``a**2`` when the headway margin is at least ``a``, else
    ``a**2 - (margin - a)**2``.  Continuously differentiable; flat on the plateau."""
    a = cfg.alpha_plateau
    a2 = a * a
    zero = np.zeros(2)
    direction = np.array([-HEADWAY, 1.0])

    def h(x, theta=None):
        s = headway_margin(x)
        return a2 if s >= a else a2 - (s - a) ** 2

    def dh_dx(x, theta=None):
        s = headway_margin(x)
        return zero if s >= a else (-2.0 * (s - a)) * direction

    return AdaptiveBarrier(h, dh_dx, None, np.diag(np.asarray(cfg.Gamma_cbf, dtype=float)), cfg.c)


def headway_barrier(cfg: ACCConfig) -> PlainBarrier:
    """Non-adaptive ``h = D - 1.8 v`` with ``alpha(h) = cbf_alpha * h``."""
    grad = np.array([-HEADWAY, 1.0])
    return PlainBarrier(headway_margin, lambda x: grad, linear_alpha(cfg.cbf_alpha))


def speed_lyapunov(cfg: ACCConfig) -> AdaptiveLyapunov:
    """``V = (v - v_d)**2`` with decrease rate ``clf_rate * (v - v_d)**2``."""
    v_d = cfg.v_d

    def V(x, theta=None):
        return (x[0] - v_d) ** 2

    def dV_dx(x, theta=None):
        return np.array([2.0 * (x[0] - v_d), 0.0])

    def error(x):
        return x[:1] - v_d

    return AdaptiveLyapunov(V, dV_dx, None, quadratic_rate(cfg.clf_rate),
                            np.diag(np.asarray(cfg.Gamma_clf, dtype=float)), error)


def _proportional(cfg):
    gain = cfg.kp * cfg.m
    v_d = cfg.v_d

    def k_d(x):
        return np.array([-gain * (x[0] - v_d)])

    return k_d


def build_controller(cfg: ACCConfig, model):
    """Controller and update law for ``cfg.controller``.

    Only ``model`` (``f``, ``F``, ``g``) is used; true friction never enters.
    """
    kind = cfg.controller
    k_d = _proportional(cfg)
    B = acc_barrier(cfg)
    L = speed_lyapunov(cfg)
    plain = headway_barrier(cfg)
    Gc, Gb = L.Gamma, B.Gamma
    f_hat0 = np.asarray(cfg.f_hat0, dtype=float)
    zero = np.zeros(3)
    solver = QPSolver()
    adapt_clf = kind == "aclf-acbf"
    adapt_cbf = kind in ADAPTIVE_BARRIER

    def updates(s):
        dclf = Gc @ tau_clf(model, L, s.x, s.theta_hat_clf) if adapt_clf else zero
        dcbf = Gb @ tau_cbf(model, B, s.x, s.theta_hat_cbf) if adapt_cbf else zero
        return dclf, dcbf

    def base_diag(x, u):
        return {"h_a": B.h(x), "headway": headway_margin(x)}

    if kind == "proportional":
        def controller(s):
            u = k_d(s.x)
            return u, {**base_diag(s.x, u), "delta_V": 0.0, "delta_p": 0.0, "barrier_margin": 0.0}

    elif kind == "acbf-qp-over-proportional":
        def controller(s):
            x = s.x
            psi0, psi1 = psi_terms(model, B, x, s.theta_hat_cbf)
            u = filter_from_psi(psi0, psi1, k_d(x))
            return u, {**base_diag(x, u), "delta_V": 0.0, "delta_p": 0.0,
                       "barrier_margin": psi0 + float(psi1 @ u)}

    else:
        def controller(s):
            x = s.x
            phi0, phi1 = phi_terms(model, L, x, s.theta_hat_clf)
            if adapt_cbf:
                psi0, psi1 = psi_terms(model, B, x, s.theta_hat_cbf)
            else:
                psi0, psi1 = plain_cbf_terms(model, f_hat0, plain, x)
            problem = unified_qp_from_rows(phi0, phi1, psi0, psi1, cfg.input_limit, cfg.c_V, cfg.c_p,
                                           cfg.weights)
            sol = solver.solve(problem)
            if sol.status != "optimal":
                raise InfeasibleError(f"unified QP {sol.status}: {sol.message}")
            u, dV, dp = split_solution(sol.z, 1)
            margin = psi0 + float(psi1 @ u)
            return u.copy(), {**base_diag(x, u), "delta_V": dV, "delta_p": dp,
                              "barrier_margin": margin}

    return controller, updates


def run_acc(cfg: ACCConfig):
    """Simulate the configured controller; returns ``(Trajectory, ACCMetrics)``."""
    cfg.validate()
    sys = acc_system(cfg)
    controller, updates = build_controller(cfg, sys.model)
    B = acc_barrier(cfg)
    L = speed_lyapunov(cfg)
    theta_star = sys.theta_star
    Gb_inv = np.linalg.inv(B.Gamma)
    Gc_inv = np.linalg.inv(L.Gamma)

    def observer(s, u, rates):
        return {"composite_h": composite_h(B, s.x, s.theta_hat_cbf, theta_star, Gb_inv),
                "composite_V": composite_V(L, s.x, s.theta_hat_clf, theta_star, Gc_inv)}

    f_hat0 = np.asarray(cfg.f_hat0, dtype=float)
    s0 = CompositeState.create(cfg.x0, f_hat0, f_hat0)
    traj = simulate(sys, controller, updates, s0, cfg.dt, cfg.horizon,
                    sample_and_hold=cfg.sample_and_hold, observers=(observer,))
    return traj, acc_metrics(traj, cfg)


def acc_metrics(traj, cfg: ACCConfig) -> ACCMetrics:
    margin = traj.x[:, 1] - HEADWAY * traj.x[:, 0]
    unsafe = np.flatnonzero(margin < 0)
    if unsafe.size:
        k = int(unsafe[0])
        t_unsafe = float(traj.t[k]) if k == 0 else float(
            traj.t[k - 1] + margin[k - 1] / (margin[k - 1] - margin[k]) * traj.dt)
    else:
        t_unsafe = float("nan")
    tail = traj.t >= traj.t[-1] - 0.1 * (traj.t[-1] - traj.t[0])
    diag = traj.diagnostics
    return ACCMetrics(
        min_safety_margin=float(margin.min()),
        t_unsafe=t_unsafe,
        steady_state_error=float(np.mean(np.abs(traj.x[tail, 0] - cfg.v_d))),
        peak_abs_u=float(np.max(np.abs(traj.u))),
        delta_V_integral=float(np.trapezoid(diag["delta_V"], traj.t)),
        delta_p_integral=float(np.trapezoid(diag["delta_p"], traj.t)),
        min_h_a=float(diag["h_a"].min()),
        min_composite_h=float(diag["composite_h"].min()),
        composite_h_drop=float(diag["composite_h"][0] - diag["composite_h"].min()),
    )
