"""Equilibrium selection in evolutionary games by pole placement.

A linear state-feedback controller redistributes payoffs (a reward on a
chosen set of strategies funded by a tax on everyone) so that a chosen
equilibrium of the replicator dynamics becomes faster or slower to reach,
or unstable. The package covers the game, the controlled dynamics, the
gain design, an agent-based simulator and the measurements used to compare
them.
"""
from .game import PayoffMatrix, find_equilibria, paper_game, NASH_1, NASH_2
from .dynamics import ReplicatorField, Trajectory, integrate, replicator_field, controlled_field
from .control import Controller, build_controller
from .abm import ABMConfig, run_abm

__all__ = [
    "PayoffMatrix", "find_equilibria", "paper_game", "NASH_1", "NASH_2",
    "ReplicatorField", "Trajectory", "integrate", "replicator_field", "controlled_field",
    "Controller", "build_controller", "ABMConfig", "run_abm",
]
__version__ = "0.1.0"
