"""
Relaxing the barrier condition breaks safety
============================================

Scalar plant ``x_dot = theta + u`` with the safe set ``|x| <= 1``, i.e.
``h(x) = 1 - x**2``.  The estimate follows ``theta_hat_dot = 2 gamma x``.

The relaxed controller ``u = -theta_hat + x alpha(h) / 2`` satisfies
``h_dot >= -alpha(h)`` at every instant, which looks like the usual barrier
condition.  Still, the state leaves the safe set: in the coordinates
``(x, theta - theta_hat)`` the closed loop is a Lienard system, and its
limit cycle reaches past ``|x| = 1``.
"""

import numpy as np

from adaptive_safety import config
from adaptive_safety.scenarios.counterexample import lienard_functions

spec = config.load(config.packaged_path("counterexample_relaxed"))
cfg = spec.config
traj, report = spec.run()

print(f"x0={cfg.x0}  initial error={cfg.theta_tilde0}  gamma={cfg.gamma}  alpha(r)={cfg.k_alpha} r")
print(f"escaped: {report.escaped} at t={report.t_escape:.3f} s, max |x| = {report.max_abs_x:.4f}")

# %%
# The relaxed condition holds along the whole run (up to rounding).
slack = traj.diagnostics["hdot_plus_alpha"]
print(f"min over the run of h_dot + alpha(h): {slack.min():.2e}")

# %%
# Lienard form ``x_dot = e - F(x)``, ``e_dot = -g(x)``.  ``F`` is odd,
# negative for small ``|x|`` and positive beyond ``|x| = 1``, so the origin
# repels and the flow far out contracts; a single cycle sits in between.
F, g = lienard_functions(cfg)
for x in (0.25, 0.5, 1.0, 1.25):
    print(f"F({x:4.2f}) = {F(x):+7.3f}   g({x:4.2f}) = {g(x):+7.3f}")

# %%
# After the transient the orbit settles on the cycle.  Its extent in ``x``
# barely depends on where it started.
late = traj.t > 20.0
print(f"late amplitude of x: {np.abs(traj.x[late, 0]).max():.4f}")
