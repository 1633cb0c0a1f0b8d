"""Pole-shift targets, single-input pole placement, and controller assembly.

Sign convention: the closed loop is ``J + B_eff K`` (reward added to the
field), not the textbook ``J - B K``.

For the budget-balanced tax the effective channel ``B - sum(B) x*`` is
orthogonal to ``(1, .., 1)``, which is the left eigenvector of the payoff
eigenvalue ``-Ubar``. That mode is therefore uncontrollable and the gain is
not unique; the extra condition ``K . x* = 0`` (the equilibrium must stay a
rest point) is appended to the characteristic equations to pin it down.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from . import eigen
from .dynamics import jacobian_controlled, jacobian_replicator, replicator_field, tax_factor
from .game import Equilibrium, _matrix

log = logging.getLogger(__name__)

PAPER_CHANNEL = np.array([0.0, 0.0, 0.0, 1.0, 1.0])
#: b values of the published gain table
TABLE_GRID = (-0.8, -0.6, -0.4, -0.2, 0.0, 0.2, 0.4, 0.6, 0.8)
DEFAULT_GRID = tuple(round(-1 + 0.2 * i, 10) for i in range(11))

CONTROLLABILITY_TOL = 1e-8
PLACEMENT_TOL = 1e-6
CONSERVATION_TOL = 1e-6


class ControlError(ValueError):
    pass


class DegenerateTargetError(ControlError):
    pass


class UncontrollableError(ControlError):
    pass


class ConstraintViolation(ControlError):
    pass


@dataclass(frozen=True)
class PoleTarget:
    values: tuple[complex, ...]

    def __post_init__(self):
        vals = tuple(complex(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if eigen.max_pairing_error(vals, np.conj(vals)) > 1e-9:
            raise ControlError(f"target poles are not closed under conjugation: {vals}")

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.array(self.values)


@dataclass
class Controller:
    """State-feedback controller acting on channel ``B`` with gain ``K``."""

    B: np.ndarray
    K: np.ndarray
    b: float = 0.0
    tax_mode: str = "channel_sum"
    anchor: np.ndarray | None = None
    target: PoleTarget | None = None
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.B = np.asarray(self.B, dtype=float)
        self.K = np.asarray(self.K, dtype=float)
        tax_factor(self.tax_mode, self.B)
        if self.B.shape != self.K.shape:
            raise ControlError(f"B {self.B.shape} and K {self.K.shape} differ in length")
        if self.anchor is not None:
            if isinstance(self.anchor, Equilibrium):
                self.anchor = self.anchor.point
            self.anchor = np.asarray(self.anchor, dtype=float)
            resid = abs(float(self.K @ self.anchor))
            if resid > CONSERVATION_TOL:
                raise ConstraintViolation(
                    f"K . x* = {resid:.3g} exceeds {CONSERVATION_TOL:g}; the anchor "
                    "equilibrium would be shifted")

    @classmethod
    def zero(cls, n=5, B=None, tax_mode="channel_sum") -> "Controller":
        B = PAPER_CHANNEL if B is None else B
        return cls(B, np.zeros(n), 0.0, tax_mode)

    def to_json(self) -> dict:
        return {
            "b": self.b,
            "B": self.B.tolist(),
            "K": self.K.tolist(),
            "tax_mode": self.tax_mode,
            "anchor": None if self.anchor is None else self.anchor.tolist(),
            "target": None if self.target is None else
            [[z.real, z.imag] for z in self.target.values],
            "warnings": list(self.warnings),
        }


def desired_poles(spectrum, b, shift=None) -> PoleTarget:
    """Shift the real part of selected poles by ``b``.

    ``shift`` is a 0/1 mask aligned with ``spectrum``. By default it selects
    the complex-conjugate poles, i.e. the rotational mode whose stability is
    being controlled.
    """
    lam = np.asarray(spectrum, dtype=complex)
    if not -1.0 <= b <= 1.0:
        raise ValueError(f"b must lie in [-1, 1], got {b}")
    if shift is None:
        shift = (np.abs(lam.imag) > 1e-9).astype(float)
        if not shift.any():
            raise ValueError("spectrum has no complex pair; pass an explicit shift mask")
    shift = np.asarray(shift, dtype=float)
    if shift.shape != lam.shape:
        raise ValueError(f"shift mask of length {shift.size} for {lam.size} poles")
    target = lam + b * shift
    moved = shift != 0
    if b != 0 and moved.any() and (~moved).any():
        gap = np.abs(np.subtract.outer(target[moved], lam[~moved])).min()
        if gap < 1e-9:
            raise DegenerateTargetError(
                f"shift b={b} maps a target pole onto an unshifted pole")
    return PoleTarget(tuple(target))


def effective_channel(B, x_star, tax_mode="channel_sum") -> np.ndarray:
    """Channel seen by the linearization once the tax is folded in."""
    B = np.asarray(B, dtype=float)
    if not np.any(B):
        raise UncontrollableError("channel B is zero; nothing can be controlled")
    b_eff = B - tax_factor(tax_mode, B) * np.asarray(x_star, dtype=float)
    if not np.any(np.abs(b_eff) > 1e-15):
        raise UncontrollableError("effective channel vanishes at this equilibrium")
    return b_eff


def controllability_matrix(J, b) -> np.ndarray:
    J = np.asarray(J, dtype=float)
    cols = [np.asarray(b, dtype=float)]
    for _ in range(J.shape[0] - 1):
        cols.append(J @ cols[-1])
    return np.column_stack(cols)


def is_controllable(J, b, tol=CONTROLLABILITY_TOL) -> bool:
    s = np.linalg.svd(controllability_matrix(J, b), compute_uv=False)
    return bool(s[-1] > tol * max(s[0], 1.0))


def charpoly_map(J, b):
    """Affine map from ``K`` to the characteristic polynomial of ``J + b K``.

    Returns ``(c, M)`` such that the non-leading coefficients of
    ``det(sI - J - b K)`` equal ``c - M @ K``, via Faddeev-LeVerrier.
    """
    J = np.asarray(J, dtype=float)
    b = np.asarray(b, dtype=float)
    n = J.shape[0]
    N = np.eye(n)
    c = np.empty(n)
    M = np.empty((n, n))
    for k in range(1, n + 1):
        M[k - 1] = N @ b
        JN = J @ N
        c[k - 1] = -np.trace(JN) / k
        N = JN + c[k - 1] * np.eye(n)
    return c, M


def _validate_target(J, target):
    target = target if isinstance(target, PoleTarget) else PoleTarget(tuple(target))
    if len(target) != np.asarray(J).shape[0]:
        raise ControlError(f"{len(target)} target poles for a {np.asarray(J).shape[0]}-state system")
    return target


def ackermann(J, b, target) -> np.ndarray:
    """Unique gain with ``spec(J + b K) = target`` for a controllable pair."""
    J = np.asarray(J, dtype=float)
    target = _validate_target(J, target)
    if not is_controllable(J, b):
        raise UncontrollableError("(J, B_eff) is not controllable")
    n = J.shape[0]
    q = np.real(np.poly(target.as_array()))
    qJ = sum(coef * np.linalg.matrix_power(J, n - i) for i, coef in enumerate(q))
    e_last = np.zeros(n)
    e_last[-1] = 1.0
    row = np.linalg.solve(controllability_matrix(J, b).T, e_last)
    return -(row @ qJ)


def place_poles(J, b_eff, target, constraints=None, method="auto") -> np.ndarray:
    """Single-input pole placement for ``J + b_eff K``.

    Parameters
    ----------
    J : (n, n) array
    b_eff : (n,) array
        Effective input channel.
    target : PoleTarget or sequence of complex
    constraints : sequence of (row, value), optional
        Extra linear conditions ``row . K = value`` appended to the
        characteristic equations. Needed when the pair is not controllable.
    method : {"auto", "ackermann", "linear"}
        ``"auto"`` uses Ackermann's formula for a controllable pair without
        constraints and the linear characteristic-equation solve otherwise.

    Returns
    -------
    K : (n,) array

    Raises
    ------
    UncontrollableError
        If the equations do not determine ``K`` uniquely or have no solution.
    """
    J = np.asarray(J, dtype=float)
    b_eff = np.asarray(b_eff, dtype=float)
    target = _validate_target(J, target)
    controllable = is_controllable(J, b_eff)
    if method == "auto":
        method = "ackermann" if controllable and not constraints else "linear"
    if method == "ackermann":
        K = ackermann(J, b_eff, target)
    elif method == "linear":
        c, M = charpoly_map(J, b_eff)
        q = np.real(np.poly(target.as_array()))[1:]
        rows, rhs = [M], [c - q]
        for row, value in constraints or ():
            rows.append(np.atleast_2d(np.asarray(row, dtype=float)))
            rhs.append(np.atleast_1d(float(value)))
        G = np.vstack(rows)
        g = np.concatenate(rhs)
        s = np.linalg.svd(G, compute_uv=False)
        if s[-1] <= CONTROLLABILITY_TOL * max(s[0], 1.0):
            raise UncontrollableError(
                "pole-placement equations are rank deficient; the gain is not "
                "determined (add a constraint or choose another channel)")
        K, *_ = np.linalg.lstsq(G, g, rcond=None)
        resid = np.abs(G @ K - g).max()
        if resid > 1e-8 * max(1.0, np.abs(g).max()):
            raise UncontrollableError(
                f"target not reachable with this channel (equation residual {resid:.3g}); "
                "an uncontrollable pole is missing from the target")
    else:
        raise ValueError(f"unknown method {method!r}")
    _verify_placement(J + np.outer(b_eff, K), target.as_array())
    return K


def _verify_placement(closed, poles):
    """Closed-loop spectrum check.

    Clustered target poles are only recovered to about ``eps**(1/m)`` for a
    cluster of size ``m``, so those are checked through the characteristic
    polynomial instead.
    """
    gaps = np.abs(np.subtract.outer(poles, poles))[~np.eye(len(poles), dtype=bool)]
    if gaps.size == 0 or gaps.min() > 1e-3:
        err = eigen.max_pairing_error(np.linalg.eigvals(closed), poles)
        if err > PLACEMENT_TOL:
            raise ControlError(f"closed-loop poles miss the target by {err:.3g}")
        return
    want = np.real(np.poly(poles))
    got = np.real(np.poly(closed))
    err = np.abs(got - want).max() / max(1.0, np.abs(want).max())
    if err > 1e-8:
        raise ControlError(f"closed-loop characteristic polynomial misses the target by {err:.3g}")


def build_controller(A, anchor, B=PAPER_CHANNEL, b=0.0, tax_mode="channel_sum",
                     shift=None) -> Controller:
    """Design the gain that shifts the anchor's poles by ``b``.

    Jacobian at the anchor, its spectrum, the shifted target, the effective
    channel and a placement constrained by ``K . x* = 0``; the result is
    checked against the controlled Jacobian's actual spectrum.
    """
    x_star = anchor.point if isinstance(anchor, Equilibrium) else np.asarray(anchor, dtype=float)
    a = _matrix(A)
    if np.abs(replicator_field(a, x_star)).max() > 1e-9:
        raise ControlError(f"anchor {x_star} is not a rest point of the replicator field")
    B = np.asarray(B, dtype=float)
    J = jacobian_replicator(a, x_star)
    es = eigen.eig(J)
    target = desired_poles(es.eigenvalues, b, shift)
    b_eff = effective_channel(B, x_star, tax_mode)
    if b == 0 and shift is None:
        # the target is the open-loop spectrum, so no feedback is needed
        K = np.zeros(len(x_star))
    else:
        K = place_poles(J, b_eff, target, constraints=[(x_star, 0.0)])
    resid = abs(float(K @ x_star))
    if resid > CONSERVATION_TOL:
        raise ConstraintViolation(f"K . x* = {resid:.3g} after placement")
    warnings = []
    for z in target:
        if abs(z.real) <= 1e-9:
            warnings.append(f"marginal pole {z:.6g}: anchor loses hyperbolicity")
    if any(z.real > 1e-9 for z in target):
        log.info("b=%g: target has poles with positive real part; anchor is destabilized", b)
    for w in warnings:
        log.warning("b=%g: %s", b, w)
    c = Controller(B, K, float(b), tax_mode, x_star, target, warnings)
    err = eigen.max_pairing_error(np.linalg.eigvals(jacobian_controlled(a, x_star, c)),
                                  target.as_array())
    if err > PLACEMENT_TOL:
        raise ControlError(f"controlled Jacobian misses the target by {err:.3g}")
    return c


def gain_table(A, anchor, grid=TABLE_GRID, B=PAPER_CHANNEL, tax_mode="channel_sum"):
    return [build_controller(A, anchor, B, b, tax_mode) for b in grid]


def write_gain_table(controllers, path) -> None:
    n = len(controllers[0].K)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["b"] + [f"k{i + 1}" for i in range(n)])
        for c in controllers:
            w.writerow([f"{c.b:.12g}"] + [f"{k:.12g}" for k in c.K])


def read_gain_table(path) -> dict[float, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    return {float(r[0]): np.array(r[1:], dtype=float) for r in rows}
