"""Symmetric one-population games: payoffs and Nash equilibria.

The built-in :data:`paper_game` is the 5-strategy game with two Nash
equilibria used throughout the package: a rock-paper-scissors equilibrium
on strategies 1-3 and an anti-coordination equilibrium on strategies 4-5.
"""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path

import numpy as np

# numerical slack for "x_i >= 0" on simplex states
EPS_NEG = 1e-12
SUM_TOL = 1e-9
# equilibria closer than this (inf-norm) are merged
DEDUP_TOL = 1e-7


class GameError(ValueError):
    """Malformed game or simplex state (shape or content)."""


@dataclass(frozen=True)
class PayoffMatrix:
    """Square payoff matrix of a symmetric game.

    ``entries[i][j]`` is the payoff to strategy ``i`` against strategy ``j``.
    Entries are kept as exact fractions; :attr:`array` is the float view
    used by the dynamics.
    """

    entries: tuple[tuple[Fraction, ...], ...]
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        rows = tuple(tuple(Fraction(v) for v in row) for row in self.entries)
        n = len(rows)
        if n < 2 or any(len(r) != n for r in rows):
            raise GameError(f"payoff matrix must be square with n >= 2, got {n} rows "
                            f"of lengths {[len(r) for r in rows]}")
        object.__setattr__(self, "entries", rows)
        labels = tuple(self.labels) or tuple(f"x{i + 1}" for i in range(n))
        if len(labels) != n:
            raise GameError(f"expected {n} labels, got {len(labels)}")
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return len(self.entries)

    @cached_property
    def array(self) -> np.ndarray:
        a = np.array([[float(v) for v in row] for row in self.entries])
        a.flags.writeable = False
        return a

    @classmethod
    def from_array(cls, a, labels=()) -> "PayoffMatrix":
        a = np.asarray(a)
        if a.ndim != 2:
            raise GameError(f"payoff matrix must be 2-D, got shape {a.shape}")
        rows = tuple(tuple(Fraction(v).limit_denominator(10**9) if isinstance(v, float)
                           else Fraction(v) for v in row) for row in a.tolist())
        return cls(rows, tuple(labels))

    @classmethod
    def from_csv(cls, path) -> "PayoffMatrix":
        """Read an n x n matrix from CSV.

        An optional first row of non-numeric strategy names is used as labels.
        Values may be integers, decimals or fractions such as ``2/3``.
        """
        text = Path(path).read_text()
        rows = [r for r in csv.reader(text.splitlines()) if any(c.strip() for c in r)]
        if not rows:
            raise GameError(f"{path}: empty game file")
        labels: tuple[str, ...] = ()
        try:
            Fraction(rows[0][0].strip())
        except ValueError:
            labels = tuple(c.strip() for c in rows[0])
            rows = rows[1:]
        entries = []
        for lineno, row in enumerate(rows, start=2 if labels else 1):
            try:
                entries.append(tuple(Fraction(c.strip()) for c in row))
            except ValueError as exc:
                raise GameError(f"{path}:{lineno}: non-numeric payoff ({exc})") from None
        return cls(tuple(entries), labels)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.labels)
            for row in self.entries:
                w.writerow([str(v) for v in row])


paper_game = PayoffMatrix((
    (0, 0, 2, 0, -2),
    (2, 0, 0, -2, 0),
    (0, 2, 0, 2, -1),
    (-2, 0, 1, 0, 1),
    (0, -2, -2, 1, 0),
))

#: the two equilibria of :data:`paper_game`
NASH_1 = np.array([1, 1, 1, 0, 0]) / 3
NASH_2 = np.array([0, 0, 0, 1, 1]) / 2
#: half-distance crossing thresholds used for convergence time towards
#: NASH_1 and NASH_2 from the uniform state
HALF_THRESHOLD_NASH_1 = 0.184
HALF_THRESHOLD_NASH_2 = 0.273


def _matrix(A) -> np.ndarray:
    return A.array if isinstance(A, PayoffMatrix) else np.asarray(A, dtype=float)


def check_simplex(x, n=None) -> np.ndarray:
    """Return ``x`` as a float array, raising if it is not on the simplex."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or (n is not None and x.shape[0] != n):
        raise GameError(f"state has shape {x.shape}, expected ({n},)")
    if x.min() < -EPS_NEG or abs(x.sum() - 1.0) > SUM_TOL:
        raise GameError(f"state {x} is not on the probability simplex")
    return x


def payoffs(A, x) -> np.ndarray:
    """Payoff of each pure strategy against population state ``x``."""
    a = _matrix(A)
    x = np.asarray(x, dtype=float)
    if x.shape != (a.shape[1],):
        raise GameError(f"state of shape {x.shape} does not match a {a.shape} game")
    return a @ x


def mean_payoff(A, x) -> float:
    x = np.asarray(x, dtype=float)
    return float(x @ payoffs(A, x))


def is_nash(A, x, tol=1e-9) -> bool:
    """True if no pure strategy earns more than the population average."""
    u = payoffs(A, x)
    return bool(u.max() <= float(np.asarray(x, dtype=float) @ u) + tol)


@dataclass(frozen=True)
class Equilibrium:
    point: np.ndarray
    support: tuple[int, ...]
    expected_payoff: float
    kind: str = field(default="interior-of-support")

    def __eq__(self, other):
        if not isinstance(other, Equilibrium):
            return NotImplemented
        return self.support == other.support and np.allclose(self.point, other.point)

    __hash__ = None


def _solve_support(a, support, n, tol):
    k = len(support)
    # unknowns: x_S (k entries) and the common payoff c
    m = np.zeros((k + 1, k + 1))
    m[:k, :k] = a[np.ix_(support, support)]
    m[:k, k] = -1.0
    m[k, :k] = 1.0
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    sol, *_ = np.linalg.lstsq(m, rhs, rcond=None)
    # a singular system is kept only if its minimum-norm solution is exact
    if np.abs(m @ sol - rhs).max() > tol:
        return None
    x = np.zeros(n)
    x[list(support)] = sol[:k]
    return x, sol[k]


def find_equilibria(A, tol=1e-9) -> list[Equilibrium]:
    """All Nash equilibria by support enumeration.

    For every nonempty support the indifference system (equal payoffs on the
    support, probabilities summing to one) is solved; the solution is kept
    when it is nonnegative on the support and no strategy off the support
    earns more. Exponential in ``n``, so limited to ``n <= 10``.
    """
    a = _matrix(A)
    n = a.shape[0]
    if n > 10:
        raise GameError(f"support enumeration is limited to n <= 10 (got n = {n})")
    found: list[Equilibrium] = []
    for size in range(1, n + 1):
        for support in itertools.combinations(range(n), size):
            res = _solve_support(a, support, n, tol)
            if res is None:
                continue
            x, c = res
            if x[list(support)].min() < -tol:
                continue
            off = [j for j in range(n) if j not in support]
            u = a @ x
            if off and u[off].max() > c + tol:
                continue
            x = np.clip(x, 0.0, None)
            x /= x.sum()
            if any(np.abs(x - e.point).max() < DEDUP_TOL for e in found):
                continue
            true_support = tuple(int(i) for i in np.flatnonzero(x > tol))
            found.append(Equilibrium(
                point=x,
                support=true_support,
                expected_payoff=mean_payoff(a, x),
                kind="vertex" if len(true_support) == 1 else "interior-of-support",
            ))
    return found
