"""Continuous-time quantum walks with the Laplacian as Hamiltonian.

Provides the initial state, its unitary evolution, the infinite-time mixed
density matrix (closed form and a brute-force time-average used as its oracle),
von Neumann entropy and the quantum Jensen-Shannon divergence.
"""

from __future__ import annotations

import logging
import math

import numpy as np

from .graph import Graph, laplacian_from_adjacency
from .spectral import SpectralDecomposition, group_eigenvalues, sym_eig

log = logging.getLogger(__name__)

EIGENVALUE_FLOOR = 1e-12
# eigenvalues more negative than this indicate a genuinely non-PSD input
NEGATIVE_WARN = -1e-8
LN2 = math.log(2.0)


def _adjacency(g) -> np.ndarray:
    return g.adjacency if isinstance(g, Graph) else np.asarray(g, dtype=float)


def initial_state(g) -> np.ndarray:
    """Square root of the degree distribution; uniform when there are no edges.

    Accepts a :class:`Graph` or a raw weighted adjacency matrix (aligned
    matrices may carry diagonal mass, which counts towards the degree).
    """
    deg = _adjacency(g).sum(axis=1)
    total = deg.sum()
    if total <= 0:
        return np.full(len(deg), 1.0 / math.sqrt(len(deg)))
    return np.sqrt(deg / total)


def _walk_spectrum(g) -> tuple[SpectralDecomposition, np.ndarray]:
    a = _adjacency(g)
    spec = sym_eig(laplacian_from_adjacency(a))
    psi0 = initial_state(a)
    return spec, spec.eigenvectors.T @ psi0


def evolve_state(g, t: float) -> np.ndarray:
    """State ``V exp(-i diag(w) t) V^T psi0`` at time ``t``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    spec, coeffs = _walk_spectrum(g)
    return spec.eigenvectors @ (np.exp(-1j * spec.eigenvalues * t) * coeffs)


def density_matrix_infinite(g) -> np.ndarray:
    """Infinite-time average of the walk's density matrix (closed form).

    Projects the initial state onto each (numerically) degenerate eigenspace of
    the Laplacian and sums the outer products of the projections. Cross terms
    between distinct eigenvalues average to zero as time grows.
    """
    spec, coeffs = _walk_spectrum(g)
    v = spec.eigenvectors
    rho = np.zeros((v.shape[0], v.shape[0]))
    for grp in group_eigenvalues(spec):
        cols = list(grp.column_indices)
        proj = v[:, cols] @ coeffs[cols]
        rho += np.outer(proj, proj)
    return 0.5 * (rho + rho.T)


def density_matrix_time_avg(g, horizon: float, steps: int, chunk: int = 8192) -> np.ndarray:
    """Trapezoidal time average of ``|psi_t><psi_t|`` over ``[0, horizon]`` (real part).

    States are sampled exactly from the spectral formula, so the only error is
    quadrature error plus the finite-horizon residue of the oscillating terms.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if steps < 2:
        raise ValueError("steps must be >= 2")
    spec, coeffs = _walk_spectrum(g)
    v, w = spec.eigenvectors, spec.eigenvalues
    times = np.linspace(0.0, horizon, steps)
    weights = np.full(steps, 1.0)
    weights[0] = weights[-1] = 0.5
    weights /= steps - 1
    n = v.shape[0]
    acc = np.zeros((n, n))
    for lo in range(0, steps, chunk):
        t = times[lo:lo + chunk]
        phase = np.exp(-1j * np.outer(t, w)) * coeffs
        states = phase @ v.T
        sw = np.sqrt(weights[lo:lo + chunk])[:, None]
        re, im = states.real * sw, states.imag * sw
        acc += re.T @ re + im.T @ im
    return 0.5 * (acc + acc.T)


def von_neumann_entropy(rho) -> float:
    """``-sum(x ln x)`` over the eigenvalues of ``rho``; values below 1e-12 count as 0."""
    rho = np.asarray(rho, dtype=float)
    if rho.size == 0:
        return 0.0
    x = np.linalg.eigvalsh(rho)
    if x[0] < NEGATIVE_WARN:
        log.warning("density matrix has eigenvalue %.3g < 0; clamped for the entropy", x[0])
    x = x[x > EIGENVALUE_FLOOR]
    return float(-np.sum(x * np.log(x)))


def qjsd(rho, sigma, h_rho: float | None = None, h_sigma: float | None = None) -> float:
    """Quantum Jensen-Shannon divergence between two density matrices (nats).

    Parameters
    ----------
    rho, sigma : ndarray
        Unit-trace density matrices of equal dimension.
    h_rho, h_sigma : float, optional
        Pre-computed von Neumann entropies, to skip re-diagonalising.

    Returns
    -------
    float
        Value in ``[0, ln 2]``; round-off outside that range is clamped.
    """
    rho = np.asarray(rho, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if rho.shape != sigma.shape:
        raise ValueError(
            f"density matrices differ in dimension: {rho.shape} vs {sigma.shape}"
        )
    if h_rho is None:
        h_rho = von_neumann_entropy(rho)
    if h_sigma is None:
        h_sigma = von_neumann_entropy(sigma)
    h_mix = von_neumann_entropy(0.5 * (rho + sigma))
    return min(LN2, max(0.0, h_mix - 0.5 * (h_rho + h_sigma)))
