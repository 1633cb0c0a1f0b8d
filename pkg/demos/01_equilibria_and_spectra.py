"""
Equilibria and their linearizations
===================================

The built-in five-strategy game has two Nash equilibria. One mixes the
first three strategies and rotates like rock-paper-scissors; the other
mixes the last two and has a purely real spectrum.
"""

import numpy as np

from eqselect import eigen, game
from eqselect.dynamics import jacobian_replicator

np.set_printoptions(precision=4, suppress=True)
A = game.paper_game

# support enumeration finds both equilibria
for eq in game.find_equilibria(A):
    print(f"equilibrium {eq.point}  support {[i + 1 for i in eq.support]}  "
          f"payoff {eq.expected_payoff:.4f}")

# %%
# The Jacobian at the rotating equilibrium is a matrix of ninths.
J = jacobian_replicator(A, game.NASH_1)
print(np.round(J * 9).astype(int), "/ 9")

# %%
# Its spectrum: a complex pair, the payoff mode -2/3 and two real poles.
es = eigen.eig(J)
print("spectrum:", es.eigenvalues)

# the -2/3 mode has left eigenvector (1,..,1) and right eigenvector x*
print("payoff mode check:", eigen.payoff_eigen_check(J, game.NASH_1, 2 / 3))

# %%
# The eigenvector of the complex pair predicts in which planes the
# population circulates, and in which direction.
cycles = eigen.eigencycles(eigen.rotation_eigenvector(es))
for (m, n), v in cycles.items():
    if abs(v) > 1e-12:
        print(f"  plane ({m + 1},{n + 1}): {v:+.4f}")

# %%
# The other equilibrium: real spectrum with a zero eigenvalue, no rotation.
print("spectrum at the other equilibrium:",
      eigen.eig(jacobian_replicator(A, game.NASH_2)).eigenvalues.real)
