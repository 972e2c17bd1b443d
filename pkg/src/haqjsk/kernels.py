"""Hierarchical aligned quantum Jensen-Shannon kernels and the unaligned baseline.

Pipeline for the aligned kernels (each stage timed when a ``timings`` dict is
passed to :func:`kernel_matrix`):

1. ``embeddings``       depth-based vertex representations for every graph
2. ``prototypes``       hierarchical k-means prototypes per embedding depth
3. ``correspondences``  per-graph correspondence families and aligned matrices
4. ``densities``        per-graph, per-level density matrices and entropies
5. ``pairwise``         one mixed-state entropy per level for every graph pair
"""

from __future__ import annotations

import logging
import math
import os
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .alignment import (
    Alignment,
    fit_alignment,
    hierarchical_aligned_adjacency,
    hierarchical_aligned_density,
)
from .ctqw import LN2, density_matrix_infinite, von_neumann_entropy
from .embedding import EmbeddingTable, dataset_embeddings, default_max_layer
from .graph import Graph, GraphDataset

log = logging.getLogger(__name__)

VARIANTS = ("haqjsk-a", "haqjsk-d", "qjsu")


@dataclass(frozen=True)
class KernelConfig:
    variant: str = "haqjsk-d"
    levels: int = 5
    prototypes: int = 256
    max_layer: Optional[int] = None
    seed: int = 42
    mu: float = 1.0
    standardize: bool = False

    def __post_init__(self):
        v = self.variant.lower()
        if v not in VARIANTS:
            raise ValueError(f"unknown kernel variant {self.variant!r}; choose from {VARIANTS}")
        object.__setattr__(self, "variant", v)
        if self.levels < 1:
            raise ValueError("levels (H) must be >= 1")
        if self.prototypes < 1:
            raise ValueError("prototypes (M1) must be >= 1")
        if self.max_layer is not None and self.max_layer < 1:
            raise ValueError("max_layer (K) must be >= 1")
        if not self.mu > 0:
            raise ValueError("mu must be > 0")

    @property
    def aligned(self) -> bool:
        return self.variant != "qjsu"

    def resolved(self, ds: GraphDataset) -> "KernelConfig":
        """Copy with ``max_layer`` filled in from the dataset when left automatic."""
        if self.max_layer is not None:
            return self
        return KernelConfig(**{**asdict(self), "max_layer": default_max_layer(ds)})

    def to_dict(self) -> dict:
        return asdict(self)


class ConfigMismatchError(ValueError):
    pass


@dataclass
class _LevelState:
    # Matrix restricted to its non-zero rows/columns (zero rows add nothing to
    # any entropy), plus its von Neumann entropy.
    support: np.ndarray
    block: np.ndarray
    entropy: float


def _level_state(mat: np.ndarray) -> _LevelState:
    support = np.flatnonzero(np.any(mat != 0, axis=1))
    block = np.ascontiguousarray(mat[np.ix_(support, support)])
    return _LevelState(support, block, von_neumann_entropy(block))


def _theta(abar: np.ndarray) -> np.ndarray:
    """Walk density of an aligned adjacency matrix.

    Prototypes with empty rows are isolated vertices with zero initial
    amplitude, so the walk lives on the non-empty rows; it is computed there and
    embedded back. An all-zero matrix falls back to the uniform state.
    """
    m = abar.shape[0]
    support = np.flatnonzero(np.any(abar != 0, axis=1))
    if support.size == 0:
        return density_matrix_infinite(abar)
    out = np.zeros((m, m))
    out[np.ix_(support, support)] = density_matrix_infinite(abar[np.ix_(support, support)])
    return out


@dataclass
class AlignedStructures:
    """Per-level aligned adjacency and aligned density matrices of one graph."""

    adjacency: list[np.ndarray]
    density: list[np.ndarray]
    fingerprint: dict
    _theta_states: Optional[list[_LevelState]] = field(default=None, repr=False)
    _rho_states: Optional[list[_LevelState]] = field(default=None, repr=False)

    @property
    def levels(self) -> int:
        return len(self.adjacency)

    def theta_states(self) -> list[_LevelState]:
        if self._theta_states is None:
            self._theta_states = [_level_state(_theta(a)) for a in self.adjacency]
        return self._theta_states

    def rho_states(self) -> list[_LevelState]:
        if self._rho_states is None:
            self._rho_states = [_level_state(r) for r in self.density]
        return self._rho_states

    def theta(self, h: int) -> np.ndarray:
        """Walk density of the level-``h`` aligned adjacency (1-based level)."""
        return _theta(self.adjacency[h - 1])


def _mixture_divergence(p: _LevelState, q: _LevelState) -> float:
    union = np.union1d(p.support, q.support)
    mix = np.zeros((len(union), len(union)))
    ip = np.searchsorted(union, p.support)
    iq = np.searchsorted(union, q.support)
    mix[np.ix_(ip, ip)] += p.block
    mix[np.ix_(iq, iq)] += q.block
    h_mix = von_neumann_entropy(0.5 * mix)
    return min(LN2, max(0.0, h_mix - 0.5 * (p.entropy + q.entropy)))


def _check_compatible(sp: AlignedStructures, sq: AlignedStructures) -> None:
    if sp.fingerprint != sq.fingerprint:
        keys = sorted(set(sp.fingerprint) | set(sq.fingerprint))
        diff = [
            f"{k}: {sp.fingerprint.get(k)!r} != {sq.fingerprint.get(k)!r}"
            for k in keys
            if sp.fingerprint.get(k) != sq.fingerprint.get(k)
        ]
        raise ConfigMismatchError("aligned structures built with different settings: " + "; ".join(diff))


def haqjsk_a(sp: AlignedStructures, sq: AlignedStructures) -> float:
    """Sum over levels of ``exp(-QJSD)`` between walk densities of the aligned adjacencies."""
    _check_compatible(sp, sq)
    return math.fsum(
        math.exp(-_mixture_divergence(a, b)) for a, b in zip(sp.theta_states(), sq.theta_states())
    )


def haqjsk_d(sp: AlignedStructures, sq: AlignedStructures) -> float:
    """Sum over levels of ``exp(-QJSD)`` between the aligned density matrices."""
    _check_compatible(sp, sq)
    return math.fsum(
        math.exp(-_mixture_divergence(a, b)) for a, b in zip(sp.rho_states(), sq.rho_states())
    )


def _padded_state(rho: np.ndarray) -> _LevelState:
    return _LevelState(np.arange(rho.shape[0]), rho, von_neumann_entropy(rho))


def qjsu(g_p: Graph, g_q: Graph, mu: float = 1.0) -> float:
    """Unaligned kernel ``exp(-mu * QJSD)``; the smaller density is zero-padded.

    Vertex order matters here: relabelling one graph can change the value.
    """
    if not mu > 0:
        raise ValueError("mu must be > 0")
    a = _padded_state(density_matrix_infinite(g_p))
    b = _padded_state(density_matrix_infinite(g_q))
    return math.exp(-mu * _mixture_divergence(a, b))


@dataclass
class KernelMatrix:
    values: np.ndarray
    config: KernelConfig
    dataset_name: str
    labels: Optional[list[int]] = None
    min_eigenvalue: Optional[float] = None
    meta: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.values.shape[0]


@dataclass
class PreparedDataset:
    """Everything the aligned kernels need, computed once per dataset."""

    config: KernelConfig
    table: EmbeddingTable
    alignment: Alignment
    correspondences: list
    structures: list[AlignedStructures]

    def assignments(self, h: int, k: int) -> list[np.ndarray]:
        """Prototype column of every vertex, per graph, at level h and depth k."""
        return [fam[h - 1][k - 1].assignment for fam in self.correspondences]


@contextmanager
def _stage(timings: Optional[dict], name: str):
    t0 = time.perf_counter()
    try:
        yield
    finally:
        if timings is not None:
            timings[name] = timings.get(name, 0.0) + time.perf_counter() - t0


def resolve_jobs(jobs: Optional[int] = None) -> int:
    if jobs is None:
        env = os.environ.get("HAQJSK_JOBS")
        jobs = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(jobs))


def _map(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def prepare(ds: GraphDataset, cfg: KernelConfig, timings: Optional[dict] = None,
            jobs: Optional[int] = None) -> PreparedDataset:
    """Embeddings, prototypes, correspondences and aligned matrices for ``ds``."""
    cfg = cfg.resolved(ds)
    jobs = resolve_jobs(jobs)
    with _stage(timings, "embeddings"):
        table = dataset_embeddings(ds, cfg.max_layer)
    with _stage(timings, "prototypes"):
        alignment = fit_alignment(table, cfg.prototypes, cfg.levels, cfg.seed, cfg.standardize)
    fingerprint = {
        "levels": cfg.levels,
        "prototypes": cfg.prototypes,
        "max_layer": cfg.max_layer,
        "seed": cfg.seed,
        "standardize": cfg.standardize,
        # structures are only comparable when aligned to the same prototypes
        "alignment": uuid.uuid4().hex,
    }

    with _stage(timings, "densities"):
        rhos = _map(density_matrix_infinite, list(ds), jobs)

    def build(i):
        g = ds[i]
        fam = alignment.correspondences(table.rows_for(i))
        adj = [hierarchical_aligned_adjacency(g, cs) for cs in fam]
        den = [hierarchical_aligned_density(rhos[i], cs) for cs in fam]
        return fam, AlignedStructures(adj, den, fingerprint)

    with _stage(timings, "correspondences"):
        built = _map(build, range(len(ds)), jobs)
    return PreparedDataset(cfg, table, alignment, [b[0] for b in built], [b[1] for b in built])


def _pairwise(states: Sequence[list[_LevelState]], scale: float, jobs: int) -> np.ndarray:
    n = len(states)
    out = np.zeros((n, n))

    def row(i):
        vals = []
        for j in range(i, n):
            vals.append(math.fsum(
                math.exp(-scale * _mixture_divergence(a, b)) for a, b in zip(states[i], states[j])
            ))
        return i, vals

    for i, vals in _map(row, range(n), jobs):
        out[i, i:] = vals
        out[i:, i] = vals
    return out


def kernel_matrix(ds: GraphDataset, cfg: KernelConfig, timings: Optional[dict] = None,
                  jobs: Optional[int] = None, prepared: Optional[PreparedDataset] = None) -> KernelMatrix:
    """Full kernel matrix over ``ds``; each unordered pair is evaluated once."""
    if len(ds) < 2:
        raise ValueError("a kernel matrix needs at least 2 graphs")
    jobs = resolve_jobs(jobs)
    labels = None
    if all(g.label is not None for g in ds):
        labels = [int(x) for x in ds.labels]

    if cfg.variant == "qjsu":
        with _stage(timings, "densities"):
            states = _map(lambda g: [_padded_state(density_matrix_infinite(g))], list(ds), jobs)
        with _stage(timings, "pairwise"):
            values = _pairwise(states, cfg.mu, jobs)
        return KernelMatrix(values, cfg, ds.name, labels)

    if prepared is None:
        prepared = prepare(ds, cfg, timings, jobs)
    else:
        # one prepared dataset serves both aligned variants; everything else must match
        want = {**asdict(cfg.resolved(ds)), "variant": None}
        have = {**asdict(prepared.config), "variant": None}
        if want != have:
            diff = [f"{k}: {want[k]!r} != {have[k]!r}" for k in want if want[k] != have[k]]
            raise ConfigMismatchError("prepared dataset built with different settings: " + "; ".join(diff))
    cfg = KernelConfig(**{**asdict(prepared.config), "variant": cfg.variant})
    with _stage(timings, "densities"):
        pick = AlignedStructures.theta_states if cfg.variant == "haqjsk-a" else AlignedStructures.rho_states
        states = _map(pick, prepared.structures, jobs)
    with _stage(timings, "pairwise"):
        values = _pairwise(states, 1.0, jobs)
    return KernelMatrix(values, cfg, ds.name, labels)


@dataclass(frozen=True)
class PsdReport:
    min_eigenvalue: float
    suggested_shift: float

    @property
    def is_psd(self) -> bool:
        return self.suggested_shift == 0.0


def psd_diagnostics(km) -> PsdReport:
    """Smallest eigenvalue and the diagonal shift that would make the matrix PSD.

    Does not modify ``km``.
    """
    values = km.values if isinstance(km, KernelMatrix) else np.asarray(km, dtype=float)
    min_eig = float(np.linalg.eigvalsh(values)[0])
    shift = 0.0 if min_eig >= 0 else -min_eig + 1e-10
    return PsdReport(min_eig, shift)


def shift_diagonal(km: KernelMatrix, shift: float) -> KernelMatrix:
    """Return a copy with ``shift`` added to the diagonal, recorded in ``meta``."""
    values = km.values + shift * np.eye(km.size)
    meta = {**km.meta, "diagonal_shift": float(shift)}
    return KernelMatrix(values, km.config, km.dataset_name, km.labels, km.min_eigenvalue, meta)
