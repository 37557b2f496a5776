"""Offline invariant checks recomputed from a trajectory and its config.

Nothing here reads the simulator's diagnostic columns; barrier values,
composite barriers and condition margins are rebuilt from the recorded
states, estimates and inputs.  Time derivatives are forward differences
between consecutive samples, compared against ``slope_tolerance(dt)``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .acbf import linear_alpha, psi_terms
from .scenarios import acc, counterexample

MARGIN_RTOL = 1e-8


@dataclass
class InvariantResult:
    name: str
    passed: bool
    worst_violation: float
    row: int | None

    def as_dict(self):
        return asdict(self)


def slope_tolerance(dt: float) -> float:
    return max(1e-4, 10.0 * dt * dt)


def _result(name, violation, tol):
    """``violation[k] > tol`` fails; reports the worst row."""
    violation = np.asarray(violation, dtype=float)
    if violation.size == 0:
        return InvariantResult(name, True, 0.0, None)
    k = int(np.argmax(violation))
    worst = float(violation[k])
    return InvariantResult(name, bool(worst <= tol), max(worst, 0.0), k if worst > tol else None)


def nonnegative(name, values, tol=0.0):
    return _result(name, -np.asarray(values, dtype=float), tol)


def nondecreasing(name, values, dt, tol=None):
    """Forward-difference slope ``>= -tol``; the violating row is the later sample."""
    tol = slope_tolerance(dt) if tol is None else tol
    slope = np.diff(np.asarray(values, dtype=float)) / dt
    res = _result(name, -slope, tol)
    if res.row is not None:
        res.row += 1
    return res


def composite_barrier_series(B, traj, theta_star):
    Ginv = np.linalg.inv(B.Gamma)
    h = np.array([float(B.h(x)) for x in traj.x])
    err = theta_star[None, :] - traj.theta_cbf
    return h, h - 0.5 * np.einsum("ki,ij,kj->k", err, Ginv, err)


def margin_series(model, B, traj):
    """Adaptive barrier margins ``psi0 + psi1 u`` and their rounding scale."""
    out = np.empty(len(traj))
    scale = np.empty(len(traj))
    for k in range(len(traj)):
        psi0, psi1 = psi_terms(model, B, traj.x[k], traj.theta_cbf[k])
        lin = float(psi1 @ traj.u[k])
        out[k] = psi0 + lin
        scale[k] = 1.0 + abs(psi0) + abs(lin)
    return out, scale


def check_counterexample(cfg, traj):
    sys = counterexample.counterexample_system(cfg.theta_star)
    B = counterexample.counterexample_barrier(cfg)
    h_a, h = composite_barrier_series(B, traj, sys.theta_star)
    tol = slope_tolerance(traj.dt)
    if cfg.mode == "relaxed-alpha":
        alpha = linear_alpha(cfg.k_alpha)
        a = alpha(h_a)
        # interval-averaged form of h_dot >= -alpha(h_a)
        slack = np.diff(h) / traj.dt + 0.5 * (a[1:] + a[:-1])
        res = _result("relaxed_condition", -slack, tol)
        if res.row is not None:
            res.row += 1
        return [res]
    margins, scale = margin_series(sys.model, B, traj)
    return [
        nondecreasing("composite_h_nondecreasing", h, traj.dt),
        nonnegative("h_a_nonnegative", h_a),
        _result("acbf_margin", -margins / scale, MARGIN_RTOL),
    ]


def check_acc(cfg, traj):
    results = []
    if cfg.controller == "proportional":
        return results
    headway = traj.x[:, 1] - acc.HEADWAY * traj.x[:, 0]
    results.append(nonnegative("headway_safe", headway))
    if cfg.controller in acc.ADAPTIVE_BARRIER:
        sys = acc.acc_system(cfg)
        B = acc.acc_barrier(cfg)
        h_a, _ = composite_barrier_series(B, traj, sys.theta_star)
        margins, scale = margin_series(sys.model, B, traj)
        # The filtered input jumps where the plateau meets the quadratic
        # piece, so RK4 drops to first order there and the composite barrier
        # drifts by O(dt); it is reported as a metric, not checked here.
        results.append(nonnegative("h_a_nonnegative", h_a))
        results.append(_result("acbf_margin", -margins / scale, MARGIN_RTOL))
    return results


def check(spec, traj):
    """Invariant results for a trajectory of ``spec`` (a loaded ScenarioSpec)."""
    if spec.scenario == "counterexample":
        return check_counterexample(spec.config, traj)
    return check_acc(spec.config, traj)


def expected_layout(spec):
    """Column counts ``(n, p_clf, p_cbf, m)`` a trajectory of ``spec`` must have."""
    return (1, 1, 1, 1) if spec.scenario == "counterexample" else (2, 3, 3, 1)
