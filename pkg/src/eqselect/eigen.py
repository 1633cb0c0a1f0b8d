"""Eigensystems of small dense real matrices and eigencycles.

An eigencycle measures how strongly a complex eigenvector rotates in each
2-D coordinate plane ``(m, n)``: ``Im(conj(v_m) * v_n)``. For the eigenvector
of an eigenvalue with *negative* imaginary part this has the same sign as
the counter-clockwise angular momentum of the corresponding linear motion,
see :func:`rotation_eigenvector`.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np
import scipy.linalg


class EigenError(np.linalg.LinAlgError):
    pass


@dataclass
class EigenSystem:
    eigenvalues: np.ndarray
    right_vectors: np.ndarray
    left_vectors: np.ndarray | None = None

    def residuals(self, J) -> np.ndarray:
        """Per-pair ``max |J v - lambda v|``."""
        J = np.asarray(J)
        r = J @ self.right_vectors - self.right_vectors * self.eigenvalues[None, :]
        return np.abs(r).max(axis=0)

    def to_json(self) -> dict:
        return {
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "vectors": [[[float(z.real), float(z.imag)] for z in col]
                        for col in self.right_vectors.T],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def from_json(cls, data) -> "EigenSystem":
        vals = np.array([complex(re, im) for re, im in data["eigenvalues"]])
        vecs = np.array([[complex(re, im) for re, im in col] for col in data["vectors"]]).T
        return cls(vals, vecs)


def _normalize(v):
    v = v / np.linalg.norm(v)
    k = np.argmax(np.abs(v))
    # fix the phase so the largest component is real positive
    return v * (abs(v[k]) / v[k])


def _null_vector(M):
    return np.linalg.svd(M)[2][-1].conj()


def eig(J, tol=1e-8) -> EigenSystem:
    """Full spectrum with right and left eigenvectors.

    Eigenvalues are ordered by descending real part, ties by descending
    imaginary part. Each eigenvector has unit 2-norm and its largest
    component is real and positive.
    """
    J = np.asarray(J, dtype=float)
    if J.ndim != 2 or J.shape[0] != J.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {J.shape}")
    if J.shape[0] > 20:
        raise ValueError("eig is meant for small dense matrices (n <= 20)")
    try:
        w, vl, vr = scipy.linalg.eig(J, left=True, right=True)
    except np.linalg.LinAlgError as exc:
        raise EigenError(f"eigenvalue iteration failed: {exc}") from exc
    # round before sorting so conjugate pairs and repeated roots order stably
    key = np.lexsort((-np.round(w.imag, 9), -np.round(w.real, 9)))
    w, vl, vr = w[key], vl[:, key].astype(complex), vr[:, key].astype(complex)
    scale = max(1.0, np.abs(J).max())
    # balancing can wreck eigenvectors when entries span hundreds of orders
    # of magnitude; recompute those from the null space of J - lambda I
    bad = np.abs(J @ vr - vr * w[None, :]).max(axis=0) > tol * scale
    for i in np.flatnonzero(bad):
        vr[:, i] = _null_vector(J - w[i] * np.eye(len(w)))
        vl[:, i] = _null_vector((J - w[i] * np.eye(len(w))).conj().T)
    vr = np.column_stack([_normalize(vr[:, i]) for i in range(len(w))])
    vl = np.column_stack([_normalize(vl[:, i]) for i in range(len(w))])
    es = EigenSystem(w, vr, vl)
    res = es.residuals(J)
    if res.max() > tol * scale:
        raise EigenError(f"eigenpair residuals too large: {res}")
    return es


def payoff_eigen_check(J, x_star, payoff, tol=1e-8) -> bool:
    """Check that ``-payoff`` is an eigenvalue with left eigenvector ``(1,..,1)``
    and right eigenvector ``x_star``."""
    J = np.asarray(J, dtype=float)
    x_star = np.asarray(x_star, dtype=float)
    ones = np.ones(J.shape[0])
    left_ok = np.abs(ones @ J + payoff * ones).max() <= tol
    right_ok = np.abs(J @ x_star + payoff * x_star).max() <= tol
    return bool(left_ok and right_ok)


def pairs(n: int) -> list[tuple[int, int]]:
    """The ``n(n-1)/2`` coordinate planes ``(m, n)`` with ``m < n`` (0-based)."""
    return list(itertools.combinations(range(n), 2))


def eigencycles(v) -> dict[tuple[int, int], float]:
    """Rotation strength of eigenvector ``v`` in each coordinate plane."""
    v = np.asarray(v, dtype=complex)
    return {(m, n): float(np.imag(np.conj(v[m]) * v[n])) for m, n in pairs(len(v))}


def rotation_eigenvector(es: EigenSystem, which=0) -> np.ndarray:
    """Eigenvector of the ``which``-th complex eigenvalue with ``Im < 0``.

    With this choice the signs returned by :func:`eigencycles` match the
    sign of the measured angular momentum (counter-clockwise positive).
    """
    idx = np.flatnonzero(es.eigenvalues.imag < -1e-12)
    if idx.size <= which:
        raise ValueError("spectrum has no complex eigenvalue to take cycles from")
    return es.right_vectors[:, idx[which]]


def spectra_match(a, b, tol) -> bool:
    """True if two spectra agree as multisets within ``tol`` (greedy pairing)."""
    return max_pairing_error(a, b) <= tol


def max_pairing_error(a, b) -> float:
    a = list(np.asarray(a, dtype=complex))
    b = list(np.asarray(b, dtype=complex))
    if len(a) != len(b):
        return np.inf
    worst = 0.0
    # take the globally closest pair first; conjugates of a real matrix
    # pair with conjugates, so greedy matching keeps them together
    while a:
        d = np.abs(np.subtract.outer(np.array(a), np.array(b)))
        i, j = np.unravel_index(np.argmin(d), d.shape)
        worst = max(worst, d[i, j])
        a.pop(i)
        b.pop(j)
    return float(worst)
