"""
Designing the controller gains
==============================

A reward channel ``B = (0,0,0,1,1)`` pays strategies 4 and 5 in proportion
to ``K . x`` and a uniform tax funds it. The gain ``K`` is chosen so that the
complex pair at the rotating equilibrium moves right or left by ``b``, while
the equilibrium itself stays put (``K . x* = 0``).
"""

import numpy as np

from eqselect import control, game
from eqselect.dynamics import jacobian_controlled, jacobian_replicator

A, x_star = game.paper_game, game.NASH_1

# %%
# With the default budget-balanced tax the effective channel sums to zero,
# so the payoff mode is out of reach of the feedback. The placement appends
# ``K . x* = 0`` to the characteristic equations to pin the gain down.
J = jacobian_replicator(A, x_star)
b_eff = control.effective_channel(control.PAPER_CHANNEL, x_star)
print("effective channel:", b_eff, " controllable:", control.is_controllable(J, b_eff))

# %%
# The gain table over the shift grid.
print(" b      k1      k2      k3      k4      k5")
for c in control.gain_table(A, x_star):
    print(f"{c.b:+.1f} " + " ".join(f"{k:+.4f}" for k in c.K))

# %%
# Check one design: the closed-loop spectrum hits the target.
c = control.build_controller(A, x_star, b=0.6)
print("target:     ", np.round(c.target.as_array(), 4))
print("closed loop:", np.round(np.linalg.eigvals(jacobian_controlled(A, x_star, c)), 4))

# %%
# A shift of b = 1/3 puts the pair on the imaginary axis; the design
# succeeds but records a warning.
print(control.build_controller(A, x_star, b=1 / 3).warnings)
