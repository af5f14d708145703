"""N-spectral gap between quadratic forms on their lowest-N eigenspaces.

Two N-dimensional subspaces of a common inner-product space are identified by
the polar factor of their overlap matrix (the natural isometry). The gap is
the operator norm of ``q1∘psi - q0`` written in an orthonormal basis of the
first subspace.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ALIGN_MIN_SINGULAR = 0.5
ORTHO_TOL = 1e-9


class SubspacesTooFarError(ValueError):
    """The projection between the two eigenspaces is close to rank deficient."""


@dataclass
class EigenspacePack:
    """Basis of the sum of the eigenspaces of the N smallest eigenvalues.

    ``basis`` columns are orthonormal for ``mass`` (checked to 1e-9);
    ``values`` are the matching eigenvalues, so the quadratic form restricted
    to the span is ``diag(values)`` in this basis.
    """

    basis: np.ndarray
    values: np.ndarray
    mass: object = field(repr=False)

    def __post_init__(self):
        self.basis = np.asarray(self.basis, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.basis.shape[1] != len(self.values):
            raise ValueError("basis and values disagree on N")
        g = self.basis.T @ (self.mass @ self.basis)
        err = np.max(np.abs(g - np.eye(len(self.values)))) if len(self.values) else 0.0
        if err > ORTHO_TOL:
            raise ValueError(f"basis is not mass-orthonormal (error {err:.2e})")

    @property
    def n(self):
        return len(self.values)

    @classmethod
    def lowest(cls, eigenvalues, eigenvectors, mass, n):
        return cls(np.asarray(eigenvectors)[:, :n], np.asarray(eigenvalues)[:n], mass)

    def form(self):
        return np.diag(self.values)


@dataclass
class SpectralGapReport:
    gap: float
    aligned: bool
    principal_angles: np.ndarray
    n: int

    def to_dict(self):
        return {"gap": float(self.gap), "aligned": bool(self.aligned), "n": self.n,
                "principal_angles_deg": [float(a) for a in np.degrees(self.principal_angles)]}


def subspace_isometry(e0, e1, min_singular=ALIGN_MIN_SINGULAR):
    """Polar factor ``W`` identifying ``span(E0)`` with ``span(E1)``.

    ``psi(E0 a) = E1 (W a)``. The overlap ``E1^T M E0`` uses the mass of
    ``E0``. Raises :class:`SubspacesTooFarError` when its smallest singular
    value is below ``min_singular``.

    Returns ``(W, singular_values)``.
    """
    if e0.n != e1.n:
        raise ValueError(f"dimension mismatch: {e0.n} vs {e1.n}")
    if e0.basis.shape[0] != e1.basis.shape[0]:
        raise ValueError("eigenspaces live in different ambient spaces")
    overlap = e1.basis.T @ (e0.mass @ e0.basis)
    u, s, vt = np.linalg.svd(overlap)
    if s.size and s.min() < min_singular:
        raise SubspacesTooFarError(
            f"subspaces too far: smallest overlap singular value {s.min():.3e} < {min_singular}")
    return u @ vt, s


def n_gap(e0, e1, min_singular=ALIGN_MIN_SINGULAR):
    """N-gap ``||q1∘psi - q0||`` between the eigenvalue forms of two packs."""
    w, s = subspace_isometry(e0, e1, min_singular)
    diff = w.T @ e1.form() @ w - e0.form()
    diff = (diff + diff.T) / 2
    gap = float(np.max(np.abs(np.linalg.eigvalsh(diff)))) if diff.size else 0.0
    angles = np.arccos(np.clip(s, -1.0, 1.0))
    return SpectralGapReport(gap, True, angles, e0.n)


def check_star_hypothesis(eigenvalues, n, eta, upper):
    """Separation ``lambda_N + eta <= lambda_{N+1} <= upper`` (1-based N)."""
    vals = np.asarray(eigenvalues, dtype=float)
    if len(vals) < n + 1:
        raise ValueError(f"need at least {n + 1} eigenvalues, got {len(vals)}")
    return bool(vals[n] >= vals[n - 1] + eta and vals[n] <= upper)
