"""Replicator and controlled velocity fields, their Jacobians, and an RK4
integrator that keeps states on the probability simplex.

The controlled field adds a state-feedback reward ``B (K x)`` and a uniform
per-agent tax ``T`` to the replicator field::

    xdot = x * (U - Ubar) + B (K . x) + T x

With ``tax_mode="channel_sum"`` the tax is ``T = -sum(B) (K . x)``, which makes
the controller budget balanced and the field tangent to the simplex. The
``"plain"`` mode uses ``T = -(K . x)``; it is kept for comparison only.
"""
from __future__ import annotations

import csv
import math
from operator import mul
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .game import _matrix, check_simplex

# population share below which no agent receives a per-agent reward
EPS_POP = 1e-12

TAX_MODES = ("channel_sum", "plain")


class IntegrationError(RuntimeError):
    """The integrator stepped off the simplex further than the field allows."""


def tax_factor(tax_mode: str, B) -> float:
    if tax_mode == "channel_sum":
        return float(np.sum(B))
    if tax_mode == "plain":
        return 1.0
    raise ValueError(f"unknown tax_mode {tax_mode!r}; expected one of {TAX_MODES}")


def replicator_field(A, x) -> np.ndarray:
    a = _matrix(A)
    x = np.asarray(x, dtype=float)
    u = a @ x
    return x * (u - x @ u)


def tax(c, x) -> float:
    """Uniform per-agent tax ``T`` at state ``x`` for controller ``c``."""
    return -tax_factor(c.tax_mode, c.B) * float(np.dot(c.K, x))


def controlled_field(A, x, c) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    kx = float(np.dot(c.K, x))
    return replicator_field(A, x) + np.asarray(c.B, dtype=float) * kx + tax(c, x) * x


class ReplicatorField:
    """Controlled (or plain, if ``c`` is None) replicator field as a callable.

    Gives the same values as :func:`controlled_field`, with the game and
    controller converted once. :meth:`scalar` evaluates the field on plain
    Python floats; for the 5-strategy games used here that is about twice as
    fast as numpy, whose per-call overhead dominates on tiny vectors, and
    :func:`integrate` uses it when available.
    """

    def __init__(self, A, c=None):
        self.a = np.array(_matrix(A), dtype=float)
        n = self.a.shape[0]
        if c is None:
            self.B, self.K, self.factor = np.zeros(n), np.zeros(n), 0.0
        else:
            self.B = np.asarray(c.B, dtype=float).copy()
            self.K = np.asarray(c.K, dtype=float).copy()
            self.factor = tax_factor(c.tax_mode, self.B)
        self._rows = self.a.tolist()
        self._K = self.K.tolist()
        self._B = self.B.tolist()

    def __call__(self, x):
        u = self.a @ x
        kx = self.K @ x
        return x * (u - x @ u - self.factor * kx) + self.B * kx

    def scalar(self, x: list) -> list:
        u = [sum(map(mul, row, x)) for row in self._rows]
        kx = sum(map(mul, self._K, x))
        m = sum(map(mul, u, x)) + self.factor * kx
        return [v * (ui - m) + b * kx for v, ui, b in zip(x, u, self._B)]


def per_agent_adjustment(c, x) -> np.ndarray:
    """Payoff change seen by a single agent of each strategy.

    An agent playing ``j`` receives the reward ``B_j (K x) / x_j`` and pays
    the tax ``T``. Strategies with no players (``x_j <= EPS_POP``) only carry
    the tax.
    """
    x = np.asarray(x, dtype=float)
    B = np.asarray(c.B, dtype=float)
    kx = float(np.dot(c.K, x))
    present = x > EPS_POP
    reward = np.zeros_like(x)
    reward[present] = B[present] * kx / x[present]
    return reward + tax(c, x)


def jacobian_replicator(A, x) -> np.ndarray:
    """Jacobian of :func:`replicator_field` with respect to all ``n`` shares."""
    a = _matrix(A)
    x = np.asarray(x, dtype=float)
    u = a @ x
    # d(Ubar)/dx_j = U_j + (A^T x)_j
    grad_mean = u + a.T @ x
    return np.diag(u - x @ u) + x[:, None] * (a - grad_mean[None, :])


def jacobian_controlled(A, x, c, full=False) -> np.ndarray:
    """Jacobian of the controlled field.

    By default this is ``J_o + B k_j - k_j f x_i`` with ``f`` the tax factor,
    which drops the ``T * I`` term; the two agree wherever ``K . x = 0``,
    in particular at a conserved equilibrium. ``full=True`` adds ``T * I`` and
    gives the exact derivative at any state.
    """
    x = np.asarray(x, dtype=float)
    B = np.asarray(c.B, dtype=float)
    K = np.asarray(c.K, dtype=float)
    jac = jacobian_replicator(A, x) + np.outer(B, K) - tax_factor(c.tax_mode, B) * np.outer(x, K)
    if full:
        jac = jac + tax(c, x) * np.eye(len(x))
    return jac


@dataclass
class Trajectory:
    """Sampled time series of simplex states (one row per sample)."""

    times: np.ndarray
    states: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.states.ndim != 2 or self.states.shape[0] != self.times.shape[0]:
            raise ValueError(f"{self.times.shape[0]} times for states of shape {self.states.shape}")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")

    def __len__(self):
        return self.times.shape[0]

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def to_csv(self, path, extra: dict | None = None) -> None:
        """Write ``t,x1..xn`` (plus any ``extra`` named columns) at 12 significant digits."""
        n = self.states.shape[1]
        extra = extra or {}
        cols = [np.asarray(v, dtype=float) for v in extra.values()]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t"] + [f"x{i + 1}" for i in range(n)] + list(extra))
            for k in range(len(self)):
                row = [self.times[k], *self.states[k], *(c[k] for c in cols)]
                w.writerow([f"{v:.12g}" for v in row])

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header = rows[0]
        xcols = [i for i, h in enumerate(header) if h.startswith("x")]
        data = np.array(rows[1:], dtype=float)
        return cls(data[:, 0], data[:, xcols])


def _rk4_step(f, x, h):
    k1 = f(x)
    k2 = f(x + 0.5 * h * k1)
    k3 = f(x + 0.5 * h * k2)
    k4 = f(x + h * k3)
    return x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4), k1


def _check_step(low, slope, total, k, h):
    # written so that a NaN anywhere fails the test too
    if not (low >= -(1e-6 + h * slope)) or not math.isfinite(total):
        raise IntegrationError(
            f"step {k} (t={k * h:g}) left the simplex (min component "
            f"{low:.3g}); try a smaller step than h={h}")


def _rk4_scalar(f, x, h, states):
    """RK4 on Python lists, same projection and checks as the array loop."""
    hh, h6 = 0.5 * h, h / 6.0
    for k in range(1, states.shape[0]):
        k1 = f(x)
        k2 = f([v + hh * d for v, d in zip(x, k1)])
        k3 = f([v + hh * d for v, d in zip(x, k2)])
        k4 = f([v + h * d for v, d in zip(x, k3)])
        x_new = [v + h6 * (a + 2.0 * b + 2.0 * c + d)
                 for v, a, b, c, d in zip(x, k1, k2, k3, k4)]
        low = min(x_new)
        total = sum(x_new)
        if low < 0 or not math.isfinite(total):
            _check_step(low, max(map(abs, k1)), total, k, h)
            x_new = [v if v > 0.0 else 0.0 for v in x_new]
            total = sum(x_new)
        x = [v / total for v in x_new]
        states[k] = x


def integrate(field: Callable[[np.ndarray], np.ndarray], x0, h=0.01, horizon=200.0,
              metadata=None) -> Trajectory:
    """Fixed-step RK4 with clip-and-renormalize projection onto the simplex.

    A controlled field need not vanish on the simplex boundary, so a step may
    legitimately overshoot a face by about ``h * |f|``. Overshoot beyond
    ``1e-6 + h * max|f(x)|`` is treated as numerical instability.
    """
    if h <= 0 or horizon < h:
        raise ValueError(f"need h > 0 and horizon >= h (h={h}, horizon={horizon})")
    x = check_simplex(x0).copy()
    steps = int(round(horizon / h))
    states = np.empty((steps + 1, x.shape[0]))
    states[0] = x
    scalar = getattr(field, "scalar", None)
    if scalar is not None:
        _rk4_scalar(scalar, x.tolist(), h, states)
    else:
        for k in range(1, steps + 1):
            x_new, slope = _rk4_step(field, x, h)
            _check_step(x_new.min(), float(np.abs(slope).max()), float(x_new.sum()), k, h)
            np.maximum(x_new, 0.0, out=x_new)
            x = x_new / x_new.sum()
            states[k] = x
    meta = {"step": h, "horizon": horizon}
    meta.update(metadata or {})
    return Trajectory(np.arange(steps + 1) * h, states, meta)
