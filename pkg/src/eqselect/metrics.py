"""Observables of a trajectory: long-run distribution, distances to the
equilibria, half-convergence time, angular momentum per coordinate plane and
cycle strength.

Functions accept either a :class:`~eqselect.dynamics.Trajectory` or a plain
``(samples, n)`` array of states. Strategy planes are 0-based ``(m, n)``
tuples in the API and 1-based ``"m,n"`` strings in JSON output.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .dynamics import Trajectory
from .eigen import pairs

SELECTION_THRESHOLD = 0.05


def _states(traj) -> np.ndarray:
    return traj.states if isinstance(traj, Trajectory) else np.asarray(traj, dtype=float)


def _times(traj) -> np.ndarray:
    if isinstance(traj, Trajectory):
        return traj.times
    return np.arange(len(np.asarray(traj)), dtype=float)


def window(traj, discard_fraction=0.0) -> np.ndarray:
    """States left after dropping the leading ``discard_fraction`` of samples."""
    if not 0.0 <= discard_fraction < 1.0:
        raise ValueError(f"discard_fraction must be in [0, 1), got {discard_fraction}")
    x = _states(traj)
    kept = x[int(np.floor(discard_fraction * len(x))):]
    if len(kept) == 0:
        raise ValueError("no samples left after discarding burn-in")
    return kept


def mean_distribution(traj, discard_fraction=0.5) -> np.ndarray:
    return window(traj, discard_fraction).mean(axis=0)


def distance_series(traj, target) -> np.ndarray:
    return np.linalg.norm(_states(traj) - np.asarray(target, dtype=float), axis=1)


def half_time(d_series, threshold, times=None):
    """First time ``d <= threshold``, linearly interpolated; ``None`` if never."""
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    d = np.asarray(d_series, dtype=float)
    t = np.arange(len(d), dtype=float) if times is None else np.asarray(times, dtype=float)
    hits = np.flatnonzero(d <= threshold)
    if hits.size == 0:
        return None
    i = hits[0]
    if i == 0:
        return float(t[0])
    frac = (d[i - 1] - threshold) / (d[i - 1] - d[i])
    return float(t[i - 1] + frac * (t[i] - t[i - 1]))


def angular_momentum(traj, pair, discard_fraction=0.0, center=None) -> float:
    """Time-averaged cross product of consecutive states in plane ``pair``.

    ``(1/t') sum_t x_m(t) x_n(t+1) - x_n(t) x_m(t+1)``; positive means
    counter-clockwise rotation in the ``(x_m, x_n)`` plane. Measured about
    the origin unless ``center`` is given.
    """
    x = window(traj, discard_fraction)
    if len(x) < 2:
        raise ValueError("angular momentum needs at least two samples")
    if center is not None:
        x = x - np.asarray(center, dtype=float)
    m, n = pair
    cross = x[:-1, m] * x[1:, n] - x[:-1, n] * x[1:, m]
    return float(cross.mean())


def angular_momenta(traj, discard_fraction=0.0, center=None) -> dict[tuple[int, int], float]:
    n = _states(traj).shape[1]
    return {p: angular_momentum(traj, p, discard_fraction, center) for p in pairs(n)}


def cycle_strength(L) -> float:
    vals = np.fromiter(L.values(), float) if isinstance(L, dict) else np.asarray(L, dtype=float)
    return float(np.sqrt(np.sum(vals ** 2)))


def subspace_share(L, strategies) -> float:
    """Fraction of ``sum L_mn^2`` carried by planes inside ``strategies``."""
    strategies = set(strategies)
    total = sum(v * v for v in L.values())
    if total == 0:
        return float("nan")
    inside = sum(v * v for (m, n), v in L.items() if m in strategies and n in strategies)
    return inside / total


def pair_key(pair) -> str:
    return f"{pair[0] + 1},{pair[1] + 1}"


@dataclass
class MetricsReport:
    mean_distribution: np.ndarray
    d_nash1_series: np.ndarray
    d_nash2_series: np.ndarray
    tau_half: float | None
    L: dict
    L_strength: float
    selected: str

    def to_json(self) -> dict:
        return {
            "mean_distribution": [float(v) for v in self.mean_distribution],
            "tau_half": self.tau_half,
            "L": {pair_key(p): v for p, v in self.L.items()},
            "L_strength": self.L_strength,
            "selected": self.selected,
        }

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)


def select(d1, d2, threshold=SELECTION_THRESHOLD) -> str:
    if d1 < threshold <= d2:
        return "Nash_1"
    if d2 < threshold <= d1:
        return "Nash_2"
    return "undecided"


def evaluate(traj, nash1, nash2, thresholds=None, discard_fraction=0.5,
             selection_threshold=SELECTION_THRESHOLD) -> MetricsReport:
    """Build the :class:`MetricsReport` of one trajectory.

    Parameters
    ----------
    traj : Trajectory
    nash1, nash2 : array
        The two candidate equilibria.
    thresholds : (float, float), optional
        Distance crossed for the half-convergence time towards each
        equilibrium. Defaults to half the initial distance.
    discard_fraction : float
        Burn-in dropped before averaging the distribution and the angular
        momentum.
    selection_threshold : float
        An equilibrium is selected when the long-run mean distribution is
        closer to it than this and not to the other one.
    """
    d1 = distance_series(traj, nash1)
    d2 = distance_series(traj, nash2)
    if thresholds is None:
        thresholds = (d1[0] / 2, d2[0] / 2)
    rho = mean_distribution(traj, discard_fraction)
    r1 = float(np.linalg.norm(rho - nash1))
    r2 = float(np.linalg.norm(rho - nash2))
    selected = select(r1, r2, selection_threshold)
    toward_1 = selected == "Nash_1" or (selected == "undecided" and r1 <= r2)
    times = _times(traj)
    tau = half_time(d1, thresholds[0], times) if toward_1 else half_time(d2, thresholds[1], times)
    L = angular_momenta(traj, discard_fraction)
    return MetricsReport(rho, d1, d2, tau, L, cycle_strength(L), selected)
