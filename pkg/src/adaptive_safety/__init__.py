"""Adaptive control Lyapunov and barrier functions for control-affine
systems with unknown constant parameters.

The plant is ``x_dot = f(x) + F(x) theta + g(x) u``.  Controllers see
``f``, ``F`` and ``g`` and their own parameter estimates; the true
``theta`` lives only inside the simulator.
"""

from .acbf import (AdaptiveBarrier, PlainBarrier, acbf_condition_margin, acbf_qp_filter,
                   composite_h, filter_from_psi, gain_satisfies_bound, gamma_lower_bound,
                   lambda_cbf, linear_alpha, plain_cbf_filter, psi_terms, tau_cbf)
from .aclf import (AdaptiveLyapunov, aclf_condition_margin, composite_V, ftilde_clf, lambda_clf,
                   minnorm_controller, minnorm_from_phi, phi_terms, quadratic_rate, tau_clf)
from .dynamics import (AffineModel, CompositeState, Trajectory, UncertainAffineSystem,
                       eval_true_dynamics, integrate_step, simulate)
from .errors import (ConfigParseError, ConfigurationError, InfeasibleError, SimulationError,
                     UnsafeInitialConditionError)
from .qp import QPProblem, QPSolution, QPSolver, kkt_residuals, solve_qp
from .unified import build_unified_qp, split_solution, unified_qp_from_rows

__version__ = "0.1.0"
