"""
Equilibrium selection in the controlled replicator dynamics
===========================================================

Starting from the uniform state, a negative shift speeds up convergence to
the rotating equilibrium; a positive one makes it unstable and the
population moves to the other equilibrium instead.
"""

import numpy as np

from eqselect import control, game, metrics
from eqselect.dynamics import ReplicatorField, integrate

A = game.paper_game
x0 = np.full(5, 0.2)

print("   b   selected   tau_half   final state")
for b in control.TABLE_GRID:
    c = control.build_controller(A, game.NASH_1, b=b)
    traj = integrate(ReplicatorField(A, c), x0, h=0.01, horizon=200.0)
    rep = metrics.evaluate(traj, game.NASH_1, game.NASH_2,
                           thresholds=(game.HALF_THRESHOLD_NASH_1, game.HALF_THRESHOLD_NASH_2))
    print(f"{b:+.1f}  {rep.selected:>8}   {rep.tau_half:8.3f}   {np.round(traj.final, 3)}")

# %%
# Half-convergence times grow as b approaches 0 from either side: close to
# zero the controller barely changes the dynamics, and right above zero the
# rotating equilibrium is only weakly unstable, so leaving it is slow.
