"""Unified stabilizing-and-safe QP with Lyapunov and input-bound slacks.

Decision vector ``z = (u, delta_V, delta_p)``::

    min  1/2 u' diag(w) u + c_V delta_V + c_p delta_p
    s.t. phi0 + phi1 @ u <= delta_V          (Lyapunov decrease, relaxed)
         psi0 + psi1 @ u >= 0                (barrier, hard)
         -u_max - delta_p <= u <= u_max + delta_p
         delta_V >= 0, delta_p >= 0
"""

from __future__ import annotations

import numpy as np

from .aclf import phi_terms
from .acbf import psi_terms
from .qp import QPProblem

DEFAULT_C_V = 1e2
DEFAULT_C_P = 1e4

# row order inside the constraint matrix
ROW_CLF = 0
ROW_CBF = 1


def unified_qp_from_rows(phi0, phi1, psi0, psi1, u_max, c_V=DEFAULT_C_V, c_p=DEFAULT_C_P,
                         J_weights=None) -> QPProblem:
    phi1 = np.asarray(phi1, dtype=float).reshape(-1)
    psi1 = np.asarray(psi1, dtype=float).reshape(-1)
    m = phi1.size
    d = m + 2
    w = np.ones(m) if J_weights is None else np.broadcast_to(np.asarray(J_weights, dtype=float), (m,))
    if np.any(w <= 0):
        raise ValueError("cost weights must be positive")
    u_max = np.broadcast_to(np.asarray(u_max, dtype=float), (m,))

    H = np.zeros((d, d))
    H[:m, :m] = np.diag(w)
    q = np.zeros(d)
    q[m] = c_V
    q[m + 1] = c_p

    rows, rhs = [], []
    clf = np.zeros(d)
    clf[:m] = phi1
    clf[m] = -1.0
    rows.append(clf)
    rhs.append(-phi0)
    cbf = np.zeros(d)
    cbf[:m] = -psi1
    rows.append(cbf)
    rhs.append(psi0)
    for sign in (1.0, -1.0):
        for i in range(m):
            r = np.zeros(d)
            r[i] = sign
            r[m + 1] = -1.0
            rows.append(r)
            rhs.append(u_max[i])
    for j in (m, m + 1):
        r = np.zeros(d)
        r[j] = -1.0
        rows.append(r)
        rhs.append(0.0)
    return QPProblem(H, q, np.array(rows), np.array(rhs))


def build_unified_qp(sys, L, B, x, theta_clf, theta_cbf, u_max, c_V=DEFAULT_C_V,
                     c_p=DEFAULT_C_P, J_weights=None) -> QPProblem:
    """Assemble the QP at state ``x`` with separate Lyapunov and barrier estimates.

    ``c_V`` and ``c_p`` may be constants or callables of ``x``.
    """
    phi0, phi1 = phi_terms(sys, L, x, theta_clf)
    psi0, psi1 = psi_terms(sys, B, x, theta_cbf)
    cV = c_V(x) if callable(c_V) else c_V
    cp = c_p(x) if callable(c_p) else c_p
    return unified_qp_from_rows(phi0, phi1, psi0, psi1, u_max, cV, cp, J_weights)


def split_solution(z, m):
    """``(u, delta_V, delta_p)`` from a decision vector."""
    return z[:m], float(z[m]), float(z[m + 1])
