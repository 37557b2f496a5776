"""Uncertain control-affine systems, composite closed-loop state and RK4 simulation.

The plant is

    x_dot = f(x) + F(x) theta_star + g(x) u

where ``theta_star`` is known only to the integrator.  Controllers are built
from :class:`AffineModel`, which carries ``f``, ``F`` and ``g`` but no true
parameter vector.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import ConfigurationError, SimulationError

CSV_FLOAT = "%.17g"


@dataclass(frozen=True)
class AffineModel:
    """Controller-side view of the dynamics: ``f``, ``F``, ``g`` and sizes only."""

    n: int
    m: int
    p: int
    f: Callable[[np.ndarray], np.ndarray]
    F: Callable[[np.ndarray], np.ndarray]
    g: Callable[[np.ndarray], np.ndarray]

    def drift(self, x, theta):
        """``f(x) + F(x) theta``."""
        return self.f(x) + self.F(x) @ theta


@dataclass(frozen=True)
class UncertainAffineSystem:
    n: int
    m: int
    p: int
    f: Callable[[np.ndarray], np.ndarray]
    F: Callable[[np.ndarray], np.ndarray]
    g: Callable[[np.ndarray], np.ndarray]
    theta_star: np.ndarray = field(repr=False)
    # set False for plants whose origin is not an equilibrium of the drift
    check_origin: bool = True

    def __post_init__(self):
        theta = np.asarray(self.theta_star, dtype=float).reshape(-1)
        if theta.shape != (self.p,):
            raise ConfigurationError(
                f"theta_star has {theta.size} entries, expected p={self.p}")
        object.__setattr__(self, "theta_star", theta)
        probe = np.zeros(self.n)
        f0, F0, g0 = self._evaluate(probe)
        if self.check_origin:
            if not np.allclose(f0, 0.0, atol=1e-12):
                raise ConfigurationError("f(0) must vanish")
            if not np.allclose(F0, 0.0, atol=1e-12):
                raise ConfigurationError("F(0) must vanish")

    def _evaluate(self, x):
        fx = np.asarray(self.f(x), dtype=float)
        Fx = np.asarray(self.F(x), dtype=float)
        gx = np.asarray(self.g(x), dtype=float)
        if fx.shape != (self.n,):
            raise ConfigurationError(f"f returned shape {fx.shape}, expected ({self.n},)")
        if Fx.shape != (self.n, self.p):
            raise ConfigurationError(
                f"F returned shape {Fx.shape}, expected ({self.n}, {self.p})")
        if gx.shape != (self.n, self.m):
            raise ConfigurationError(
                f"g returned shape {gx.shape}, expected ({self.n}, {self.m})")
        return fx, Fx, gx

    @property
    def model(self) -> AffineModel:
        return AffineModel(self.n, self.m, self.p, self.f, self.F, self.g)


def eval_true_dynamics(sys: UncertainAffineSystem, x, u) -> np.ndarray:
    """Plant vector field ``f(x) + F(x) theta_star + g(x) u``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    u = np.asarray(u, dtype=float).reshape(-1)
    if x.shape != (sys.n,):
        raise ConfigurationError(f"state has {x.size} entries, expected n={sys.n}")
    if u.shape != (sys.m,):
        raise ConfigurationError(f"input has {u.size} entries, expected m={sys.m}")
    fx, Fx, gx = sys._evaluate(x)
    return fx + Fx @ sys.theta_star + gx @ u


@dataclass(frozen=True)
class CompositeState:
    x: np.ndarray
    theta_hat_clf: np.ndarray
    theta_hat_cbf: np.ndarray
    t: float = 0.0

    @classmethod
    def create(cls, x, theta_hat_clf, theta_hat_cbf, t=0.0):
        return cls(np.asarray(x, dtype=float).reshape(-1),
                   np.asarray(theta_hat_clf, dtype=float).reshape(-1),
                   np.asarray(theta_hat_cbf, dtype=float).reshape(-1),
                   float(t))

    @property
    def sizes(self):
        return self.x.size, self.theta_hat_clf.size, self.theta_hat_cbf.size

    def stack(self) -> np.ndarray:
        return np.concatenate((self.x, self.theta_hat_clf, self.theta_hat_cbf))

    @classmethod
    def unstack(cls, z, sizes, t):
        n, p1, _ = sizes
        return cls(z[:n], z[n:n + p1], z[n + p1:], t)


class Trajectory:
    """Fixed-step record of a closed-loop run.

    Arrays are indexed by sample: ``t[k]``, ``x[k]``, ``theta_clf[k]``,
    ``theta_cbf[k]``, ``u[k]`` and ``diagnostics[name][k]``.
    """

    def __init__(self, t, x, theta_clf, theta_cbf, u, diagnostics, dt):
        self.t = np.asarray(t, dtype=float)
        self.x = np.atleast_2d(np.asarray(x, dtype=float))
        self.theta_clf = np.asarray(theta_clf, dtype=float).reshape(len(self.t), -1)
        self.theta_cbf = np.asarray(theta_cbf, dtype=float).reshape(len(self.t), -1)
        self.u = np.asarray(u, dtype=float).reshape(len(self.t), -1)
        self.diagnostics = {k: np.asarray(v, dtype=float) for k, v in diagnostics.items()}
        self.dt = float(dt)

    def __len__(self):
        return len(self.t)

    def state(self, k) -> CompositeState:
        return CompositeState(self.x[k], self.theta_clf[k], self.theta_cbf[k], self.t[k])

    @property
    def samples(self):
        """``(CompositeState, u, diagnostics)`` tuples in time order."""
        for k in range(len(self)):
            diag = {name: float(v[k]) for name, v in self.diagnostics.items()}
            yield self.state(k), self.u[k], diag

    def header(self):
        n, p1, p2, m = self.x.shape[1], self.theta_clf.shape[1], self.theta_cbf.shape[1], self.u.shape[1]
        return (["t"] + [f"x{i}" for i in range(n)]
                + [f"theta_clf_{i}" for i in range(p1)]
                + [f"theta_cbf_{i}" for i in range(p2)]
                + [f"u{i}" for i in range(m)]
                + [f"diag:{name}" for name in self.diagnostics])

    def to_array(self):
        cols = [self.t[:, None], self.x, self.theta_clf, self.theta_cbf, self.u]
        cols += [v[:, None] for v in self.diagnostics.values()]
        return np.hstack(cols)

    def to_csv(self, path):
        np.savetxt(path, self.to_array(), delimiter=",", fmt=CSV_FLOAT,
                   header=",".join(self.header()), comments="")

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            header = next(csv.reader(fh))
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if not header or header[0] != "t" or data.shape[1] != len(header):
            raise ValueError(f"{path}: not a trajectory CSV")

        def columns(prefix):
            idx = [i for i, name in enumerate(header) if _matches(name, prefix)]
            return data[:, idx]

        diag = {name[5:]: data[:, i] for i, name in enumerate(header) if name.startswith("diag:")}
        expected = (["t"] + _names(header, "x") + _names(header, "theta_clf_")
                    + _names(header, "theta_cbf_") + _names(header, "u")
                    + [f"diag:{k}" for k in diag])
        if expected != header:
            raise ValueError(f"{path}: unexpected column layout")
        t = data[:, 0]
        dt = float(t[1] - t[0]) if len(t) > 1 else 0.0
        return cls(t, columns("x"), columns("theta_clf_"), columns("theta_cbf_"),
                   columns("u"), diag, dt)


def _matches(name, prefix):
    return name.startswith(prefix) and name[len(prefix):].isdigit()


def _names(header, prefix):
    found = [name for name in header if _matches(name, prefix)]
    return [f"{prefix}{i}" for i in range(len(found))]


def integrate_step(deriv, s: CompositeState, dt: float) -> CompositeState:
    """Advance ``s`` by one classical Runge-Kutta step.

    ``deriv(t, state)`` returns the stacked derivative of
    ``(x, theta_hat_clf, theta_hat_cbf)`` as a flat array.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    z = _rk4(_checked(deriv, s.sizes), s.t, s.stack(), dt)
    return CompositeState.unstack(z, s.sizes, s.t + dt)


def _checked(deriv, sizes):
    def stage(tau, zz):
        d = np.asarray(deriv(tau, CompositeState.unstack(zz, sizes, tau)), dtype=float)
        if not np.isfinite(d).all():
            raise SimulationError(f"non-finite derivative at t={tau:.6g}: {d}")
        return d
    return stage


def _rk4(stage, t, z, dt, k1=None):
    if k1 is None:
        k1 = stage(t, z)
    k2 = stage(t + 0.5 * dt, z + 0.5 * dt * k1)
    k3 = stage(t + 0.5 * dt, z + 0.5 * dt * k2)
    k4 = stage(t + dt, z + dt * k3)
    return z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def simulate(sys: UncertainAffineSystem, controller, updates, s0: CompositeState,
             dt: float, horizon: float, sample_and_hold: bool = False,
             observers=()) -> Trajectory:
    """Integrate the composite closed loop with fixed-step RK4.

    ``controller(state) -> (u, diagnostics)`` and
    ``updates(state) -> (theta_clf_dot, theta_cbf_dot)`` only ever see the
    composite state; ``sys.theta_star`` is read here and nowhere else.
    ``observers`` are called at each sample as
    ``observer(state, u, (theta_clf_dot, theta_cbf_dot)) -> dict`` and their
    entries are merged into the diagnostics; analysis code uses them for
    quantities that need the true parameters.

    By default the controller and update laws are re-evaluated at every
    Runge-Kutta stage.  With ``sample_and_hold`` they are evaluated once per
    step and held across the stages.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not horizon >= dt:
        raise ValueError("horizon must be at least one step")
    steps = int(math.floor(horizon / dt + 1e-9))
    m = sys.m
    sizes = s0.sizes
    n, p1, _ = sizes
    theta_star = sys.theta_star
    f, F, g = sys.f, sys.F, sys.g
    held = [None]

    def stacked(x, u, dclf, dcbf):
        return np.concatenate((f(x) + F(x) @ theta_star + g(x) @ u, dclf, dcbf))

    def closed_loop(t, s):
        if sample_and_hold:
            u, dclf, dcbf = held[0]
        else:
            u, _ = controller(s)
            dclf, dcbf = updates(s)
        return stacked(s.x, u, dclf, dcbf)

    stage = _checked(closed_loop, sizes)
    total = steps + 1
    t_rec = np.empty(total)
    z_rec = np.empty((total, sum(sizes)))
    u_rec = np.empty((total, m))
    diag_rec: dict[str, np.ndarray] = {}
    keys = None

    s = s0
    for k in range(total):
        try:
            u, diag = controller(s)
            u = np.asarray(u, dtype=float).reshape(-1)
            if u.shape != (m,):
                raise ConfigurationError(f"controller returned {u.size} inputs, expected {m}")
            dclf, dcbf = updates(s)
        except ConfigurationError:
            raise
        except Exception as exc:
            raise SimulationError(f"controller failed at step {k} (t={s.t:.6g}): {exc}",
                                  step=k) from exc
        diag = dict(diag)
        for obs in observers:
            diag.update(obs(s, u, (dclf, dcbf)))
        if keys is None:
            keys = tuple(diag)
            diag_rec = {name: np.empty(total) for name in keys}
        elif tuple(diag) != keys:
            raise SimulationError(f"diagnostic keys changed at step {k}", step=k)
        z = s.stack()
        t_rec[k] = s.t
        z_rec[k] = z
        u_rec[k] = u
        for name in keys:
            diag_rec[name][k] = diag[name]
        if k == steps:
            break
        held[0] = (u, dclf, dcbf)
        try:
            # the sample evaluation doubles as the first Runge-Kutta stage
            k1 = stacked(s.x, u, dclf, dcbf)
            if not np.isfinite(k1).all():
                raise SimulationError(f"non-finite derivative at t={s.t:.6g}: {k1}")
            z_next = _rk4(stage, s.t, z, dt, k1)
        except SimulationError as exc:
            raise SimulationError(f"step {k}: {exc}", step=k) from exc
        except Exception as exc:
            raise SimulationError(f"controller failed inside step {k}: {exc}", step=k) from exc
        # time is k*dt rather than a running sum so samples stay on the grid
        s = CompositeState.unstack(z_next, sizes, s0.t + (k + 1) * dt)

    return Trajectory(t_rec, z_rec[:, :n], z_rec[:, n:n + p1], z_rec[:, n + p1:],
                      u_rec, diag_rec, dt)


def zero_updates(p_clf: int, p_cbf: int):
    """Update law that freezes both estimates."""
    zc, zb = np.zeros(p_clf), np.zeros(p_cbf)

    def updates(_s):
        return zc, zb

    return updates


def constant_controller(u, diagnostics: Mapping[str, float] | None = None):
    u = np.asarray(u, dtype=float).reshape(-1)
    diag = dict(diagnostics or {})

    def controller(_s):
        return u, diag

    return controller
