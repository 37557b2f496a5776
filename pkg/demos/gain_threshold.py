"""
How large must the adaptation gain be?
======================================

With the strict adaptive barrier filter the composite barrier

    h = h_a(x) - theta_err**2 / (2 gamma)

never decreases.  Starting from ``h_a(x0) = 0.96`` and an error as large as
``c = 5``, it starts nonnegative only when ``gamma >= c**2 / (2 h_a(x0))``,
about 13.02.  Below that bound nothing is promised.  This script sweeps
``gamma`` for the mild initial error (1) and the worst allowed one (5).
"""

import tempfile

from adaptive_safety import config
from adaptive_safety.cli import sweep

path = config.packaged_path("counterexample_strict")
print(f"gain bound: {config.load(path).config.gain_bound:.4f}")

gammas = [6.0, 10.0, 13.03, 20.0, 26.0]
with tempfile.TemporaryDirectory() as out:
    for err in (1.0, 5.0):
        rows = sweep(path, [("gamma", gammas)], out,
                     base_overrides={"override_gain_check": True, "theta_tilde0": err,
                                     "horizon": 20.0})
        print(f"\ninitial error {err:g}")
        print(" gamma   min h_a    min composite   status")
        for g, row in zip(gammas, rows):
            print(f"{g:6.2f}  {row['metric:min_h_a']:+8.4f}   {row['metric:min_composite_h']:+10.4f}"
                  f"     {row['status']}")

# %%
# For the mild error every gain stays safe: the bound is sufficient, not
# necessary.  For the worst error the two gains below the bound leave the
# set, while 13.03 just clears it.
