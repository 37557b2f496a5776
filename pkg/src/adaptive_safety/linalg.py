"""Small numerical helpers shared by the Lyapunov and barrier modules."""

import numpy as np

from .errors import ConfigurationError

SYMMETRY_TOL = 1e-12


def check_gain(Gamma) -> np.ndarray:
    """Validate an adaptation gain: square, symmetric, positive definite."""
    G = np.atleast_2d(np.asarray(Gamma, dtype=float))
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ConfigurationError(f"gain must be square, got shape {G.shape}")
    if np.max(np.abs(G - G.T), initial=0.0) > SYMMETRY_TOL:
        raise ConfigurationError("gain must be symmetric")
    if np.linalg.eigvalsh(G)[0] <= 0:
        raise ConfigurationError("gain must be positive definite")
    return G


def min_eig(G) -> float:
    return float(np.linalg.eigvalsh(np.atleast_2d(G))[0])


def central_difference(fun, z, step=1e-6):
    """Central finite-difference gradient of a scalar function of a vector."""
    z = np.asarray(z, dtype=float).reshape(-1)
    grad = np.empty_like(z)
    for i in range(z.size):
        e = np.zeros_like(z)
        e[i] = step
        grad[i] = (float(fun(z + e)) - float(fun(z - e))) / (2.0 * step)
    return grad


def gradient_error(analytic, numeric) -> float:
    """Relative gradient mismatch, normalized by ``max(1, |analytic|)``."""
    analytic = np.asarray(analytic, dtype=float).reshape(-1)
    numeric = np.asarray(numeric, dtype=float).reshape(-1)
    scale = max(1.0, float(np.linalg.norm(analytic)))
    return float(np.linalg.norm(analytic - numeric)) / scale
