"""Dense primal active-set solver for small convex QPs.

Solves ``min 1/2 z'Hz + q'z  s.t.  A z <= b`` with ``H`` positive
semidefinite.  Directions of zero curvature are followed as rays to the
next blocking constraint, so linear slack costs (singular ``H``) are
handled as long as the problem is bounded.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

MAX_ITER = 200
FEAS_TOL = 1e-9
MULT_TOL = 1e-10
RANK_TOL = 1e-12


@dataclass
class QPProblem:
    H: np.ndarray
    q: np.ndarray
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.H = np.atleast_2d(np.asarray(self.H, dtype=float))
        d = self.H.shape[0]
        self.q = np.asarray(self.q, dtype=float).reshape(-1)
        self.A = np.asarray(self.A, dtype=float).reshape(-1, d)
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        if self.H.shape != (d, d) or self.q.shape != (d,):
            raise ConfigurationError("H must be d x d and q of length d")
        if self.A.shape[0] != self.b.shape[0]:
            raise ConfigurationError("A and b disagree on the number of constraints")
        if np.max(np.abs(self.H - self.H.T), initial=0.0) > 1e-12:
            raise ConfigurationError("H must be symmetric")
        if d and np.linalg.eigvalsh(self.H)[0] < -1e-10:
            raise ConfigurationError("H must be positive semidefinite")

    @property
    def dim(self):
        return self.H.shape[0]

    def objective(self, z) -> float:
        z = np.asarray(z, dtype=float)
        return float(0.5 * z @ self.H @ z + self.q @ z)


@dataclass
class QPSolution:
    z: np.ndarray
    active_set: list
    multipliers: np.ndarray
    status: str
    objective: float = float("nan")
    iterations: int = 0
    certificate: list = field(default_factory=list)
    message: str = ""

    @property
    def ok(self):
        return self.status == "optimal"


def _null_space(M):
    d = M.shape[1]
    if M.shape[0] == 0:
        return np.eye(d)
    _, s, vt = np.linalg.svd(M)
    rank = int(np.sum(s > RANK_TOL * max(1.0, s[0])))
    return vt[rank:].T


def _active_set_loop(H, q, A, b, z, W, max_iter):
    """Core primal iteration from a feasible ``z`` with working set ``W``.

    Returns ``(z, W, mu_W, status, iterations, message)``.
    """
    d = z.size
    W = list(W)
    for it in range(1, max_iter + 1):
        g = H @ z + q
        Z = _null_space(A[W])
        ray = False
        if Z.shape[1] == 0:
            p = np.zeros(d)
        else:
            w, Q = np.linalg.eigh(Z.T @ H @ Z)
            coeff = Q.T @ (Z.T @ g)
            flat = w <= 1e-12 * max(1.0, float(np.max(np.abs(w), initial=0.0)))
            gscale = 1e-12 * max(1.0, float(np.linalg.norm(g)))
            if np.any(flat) and np.linalg.norm(coeff[flat]) > gscale:
                p = -Z @ (Q[:, flat] @ coeff[flat])
                ray = True
            else:
                keep = ~flat
                p = -Z @ (Q[:, keep] @ (coeff[keep] / w[keep]))
        if not ray and np.linalg.norm(p) <= 1e-13 * max(1.0, float(np.linalg.norm(z))):
            if not W:
                return z, W, np.zeros(0), "optimal", it, ""
            mu = np.linalg.lstsq(A[W].T, -g, rcond=None)[0]
            j = int(np.argmin(mu))
            if mu[j] >= -MULT_TOL * max(1.0, float(np.max(np.abs(mu)))):
                return z, W, mu, "optimal", it, ""
            # most negative multiplier leaves; argmin already takes the first on ties
            del W[j]
            continue
        Ap = A @ p
        slack = np.maximum(b - A @ z, 0.0)
        alpha, block = (np.inf if ray else 1.0), None
        for i in range(A.shape[0]):
            if i in W or Ap[i] <= 1e-14 * max(1.0, float(np.linalg.norm(p))):
                continue
            ratio = slack[i] / Ap[i]
            if ratio < alpha:
                alpha, block = ratio, i
        if block is None and ray:
            return z, W, np.zeros(len(W)), "degenerate", it, "unbounded direction"
        z = z + alpha * p
        if block is not None:
            W.append(block)
    return z, W, np.zeros(len(W)), "degenerate", max_iter, "iteration cap reached"


def _phase_one(A, b, z0, max_iter):
    """Find a feasible point by minimizing the largest violation ``t >= 0``."""
    k, d = A.shape
    A1 = np.zeros((k + 1, d + 1))
    A1[:k, :d] = A
    A1[:k, d] = -1.0
    A1[k, d] = -1.0
    b1 = np.concatenate((b, [0.0]))
    q1 = np.zeros(d + 1)
    q1[d] = 1.0
    t0 = max(0.0, float(np.max(A @ z0 - b)))
    z1, W, mu, status, iters, _ = _active_set_loop(
        np.zeros((d + 1, d + 1)), q1, A1, b1, np.concatenate((z0, [t0])), [], max_iter)
    cert = sorted(i for i, m in zip(W, mu) if i < k and m > MULT_TOL)
    return z1[:d], z1[d], cert, status, iters


def _restore(sol_mu, W, scale, k):
    mu = np.zeros(k)
    for i, m in zip(W, sol_mu):
        mu[i] = max(m, 0.0) / scale[i]
    return mu


def solve_qp(problem: QPProblem, working_set=None, z0=None, max_iter=MAX_ITER) -> QPSolution:
    """Solve a convex QP; ``working_set`` warm-starts from a previous active set."""
    H, q = problem.H, problem.q
    A_raw, b_raw = problem.A, problem.b
    k, d = A_raw.shape
    norms = np.linalg.norm(A_raw, axis=1) if k else np.zeros(0)

    empty = norms <= RANK_TOL
    bad = [i for i in np.flatnonzero(empty) if b_raw[i] < -FEAS_TOL]
    if bad:
        return QPSolution(np.zeros(d), [], np.zeros(k), "infeasible", certificate=bad,
                          message="constraint 0 <= b with b < 0")
    rows = np.flatnonzero(~empty)
    scale = np.ones(k)
    scale[rows] = norms[rows]
    A = A_raw[rows] / scale[rows, None]
    b = b_raw[rows] / scale[rows]
    to_local = {int(i): j for j, i in enumerate(rows)}

    z = np.zeros(d) if z0 is None else np.asarray(z0, dtype=float).copy()
    W = []
    iters = 0
    if working_set:
        W = [to_local[i] for i in working_set if i in to_local]
        z_ws = _equality_solution(H, q, A[W], b[W])
        if z_ws is not None and np.all(A @ z_ws - b <= FEAS_TOL):
            z = z_ws
        else:
            W = []
    if np.any(A @ z - b > FEAS_TOL) if len(b) else False:
        W = []
        z, t, cert, status, iters = _phase_one(A, b, z, max_iter)
        if status != "optimal":
            return QPSolution(z, [], np.zeros(k), "degenerate", iterations=iters,
                              message="phase one did not converge")
        if t > FEAS_TOL:
            return QPSolution(z, [], np.zeros(k), "infeasible", iterations=iters,
                              certificate=[int(rows[i]) for i in cert],
                              message=f"max violation {t:.3g}")

    z, W, mu, status, it2, msg = _active_set_loop(H, q, A, b, z, W, max_iter - iters)
    iters += it2
    active = sorted(int(rows[i]) for i in W)
    full_W = [int(rows[i]) for i in W]
    multipliers = _restore(mu, full_W, scale, k) if status == "optimal" else np.zeros(k)
    return QPSolution(z, active, multipliers, status, problem.objective(z), iters, message=msg)


def _equality_solution(H, q, Aw, bw):
    d = H.shape[0]
    r = Aw.shape[0]
    K = np.zeros((d + r, d + r))
    K[:d, :d] = H
    K[:d, d:] = Aw.T
    K[d:, :d] = Aw
    try:
        sol = np.linalg.solve(K, np.concatenate((-q, bw)))
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(sol)):
        return None
    return sol[:d]


class QPSolver:
    """Stateful wrapper that warm-starts each solve from the last active set.

    One instance belongs to one simulation run.
    """

    def __init__(self, max_iter=MAX_ITER):
        self.max_iter = max_iter
        self.active_set = []
        self.solves = 0
        self.cold_starts = 0

    def solve(self, problem: QPProblem) -> QPSolution:
        sol = solve_qp(problem, working_set=self.active_set, max_iter=self.max_iter)
        self.solves += 1
        if sol.status == "optimal":
            self.active_set = list(sol.active_set)
        else:
            self.active_set = []
        return sol

    def reset(self):
        self.active_set = []


def kkt_residuals(problem: QPProblem, sol: QPSolution):
    """``(stationarity, complementarity, primal violation, min multiplier)``."""
    z, mu = sol.z, sol.multipliers
    stat = problem.H @ z + problem.q + problem.A.T @ mu
    slack = problem.A @ z - problem.b
    return (float(np.max(np.abs(stat), initial=0.0)),
            float(np.max(np.abs(mu * slack), initial=0.0)),
            float(np.max(slack, initial=0.0)),
            float(np.min(mu, initial=0.0)))
