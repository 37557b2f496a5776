"""
Adaptive cruise control with the wrong friction model
=====================================================

An ego car follows a lead car driving at 14 m/s and must keep
``D >= 1.8 v``.  The controllers only know a friction model whose three
coefficients are ten times the true ones.

Five controllers run on the same scenario:

* ``proportional``: tracks the set speed and ignores the gap.
* ``acbf-qp-over-proportional``: the same command passed through the
  adaptive barrier filter.
* ``clf-cbf``: a CLF-CBF QP built on the fixed, wrong model.
* ``clf-acbf``: the QP with the adaptive barrier row.
* ``aclf-acbf``: both rows adaptive.
"""

from adaptive_safety import config

names = ["acc_proportional", "acc_acbf_qp_over_proportional", "acc_clf_cbf",
         "acc_clf_acbf", "acc_aclf_acbf"]

print(f"{'controller':28s} {'min D-1.8v':>11s} {'|v-v_d| end':>12s} {'peak |u|':>10s}")
results = {}
for name in names:
    spec = config.load(config.packaged_path(name))
    traj, m = spec.run()
    results[spec.config.controller] = (traj, m)
    print(f"{spec.config.controller:28s} {m.min_safety_margin:11.3f} "
          f"{m.steady_state_error:12.2e} {m.peak_abs_u:10.1f}")

# %%
# The plain proportional loop runs into the gap constraint.  The plain CBF
# trusts the overestimated friction, expects the car to slow down on its
# own, and brakes too late.  Every variant with the adaptive barrier stays
# safe, and the adaptive CLF also settles on the set speed.
traj, m = results["aclf-acbf"]
print("\nfriction estimate after the run (clf / cbf):")
print("  ", traj.theta_clf[-1].round(3), "/", traj.theta_cbf[-1].round(3))
print(f"relaxation used: int delta_V dt = {m.delta_V_integral:.3g}, "
      f"int delta_p dt = {m.delta_p_integral:.3g}")
