"""Symmetric eigendecomposition and eigenvalue grouping."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

SYMMETRY_TOL = 1e-10
DEFAULT_GROUP_RTOL = 1e-8


class SpectralError(RuntimeError):
    """Raised when the eigensolver fails to converge."""


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenpairs of a real symmetric matrix ``m = V diag(w) V^T``.

    ``eigenvalues`` is non-decreasing and column ``j`` of ``eigenvectors`` is the
    unit eigenvector belonging to ``eigenvalues[j]``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.T


@dataclass(frozen=True)
class EigenGroup:
    representative_value: float
    column_indices: tuple[int, ...]


def sym_eig(m) -> SpectralDecomposition:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    asym = float(np.max(np.abs(m - m.T))) if m.size else 0.0
    if asym > SYMMETRY_TOL:
        raise ValueError(f"matrix is not symmetric: max |m - m^T| = {asym:.3e}")
    try:
        w, v = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:
        raise SpectralError(
            f"symmetric eigensolver did not converge on a {m.shape[0]}x{m.shape[0]} matrix: {exc}"
        ) from exc
    return SpectralDecomposition(w, v)


def default_group_tol(eigenvalues) -> float:
    """Relative degeneracy tolerance ``1e-8 * max(1, spectral range)``."""
    w = np.asarray(eigenvalues)
    spread = float(w[-1] - w[0]) if w.size else 0.0
    return DEFAULT_GROUP_RTOL * max(1.0, spread)


def group_eigenvalues(d: SpectralDecomposition, tol: Optional[float] = None) -> list[EigenGroup]:
    """Partition eigenvector columns into numerically degenerate eigenspaces.

    Eigenvalues are scanned in ascending order; a value joins the current group
    when it lies within ``tol`` of the group's first (smallest) member, which
    serves as the representative. Otherwise it opens a new group.
    """
    w = d.eigenvalues
    if tol is None:
        tol = default_group_tol(w)
    if tol <= 0:
        raise ValueError("tol must be positive")
    groups: list[EigenGroup] = []
    start = 0
    for j in range(1, len(w) + 1):
        if j == len(w) or w[j] - w[start] > tol:
            groups.append(EigenGroup(float(w[start]), tuple(range(start, j))))
            start = j
    return groups
