"""Hierarchical prototype alignment.

Vertices of every graph are mapped onto a shared set of k-means prototypes
(one set per hierarchy level and embedding depth). Because all graphs are
aligned to the *same* prototypes, the induced vertex correspondence is
transitive. Aligned adjacency and density matrices are the congruences
``C^T X C`` of each graph's matrices under its correspondence matrix ``C``.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .embedding import EmbeddingTable

log = logging.getLogger(__name__)

MAX_LLOYD_ITER = 300
TRACE_FLOOR = 1e-12


@dataclass(frozen=True)
class PrototypeSet:
    level: int
    dim: int
    centers: np.ndarray
    objective: Optional[float] = field(default=None, compare=False)
    iterations: Optional[int] = field(default=None, compare=False)

    @property
    def size(self) -> int:
        return self.centers.shape[0]


def _sqdist(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    return ((x[:, None, :] - c[None, :, :]) ** 2).sum(axis=-1)


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[0] < 1:
        raise ValueError(f"points must be a non-empty (N, k) array, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points contain non-finite values")
    return pts


def kmeans(points, clusters: int, seed: int = 0, level: int = 1) -> PrototypeSet:
    """Lloyd's k-means with farthest-point seeding.

    The points are reduced to their distinct values (sorted lexicographically and
    weighted by multiplicity), seeding starts at the smallest distinct point and
    repeatedly adds the point farthest from the chosen centers. Every tie is
    broken by lowest index in that sorted order, so the result is a function of
    the point multiset only. ``seed`` is accepted for interface symmetry with
    the other pipeline stages; the procedure itself draws no random numbers.

    Empty clusters are re-seeded at the point farthest from its own center.
    Iteration stops when no assignment changes or after 300 rounds.
    """
    if clusters < 1:
        raise ValueError("clusters must be >= 1")
    pts = _as_points(points)
    uniq, counts = np.unique(pts, axis=0, return_counts=True)
    w = counts.astype(float)
    m = clusters
    if m > len(uniq):
        log.info(
            "k-means: %d clusters requested but only %d distinct points; clamping",
            clusters, len(uniq),
        )
        m = len(uniq)

    chosen = [0]
    mind = _sqdist(uniq, uniq[:1])[:, 0]
    for _ in range(1, m):
        j = int(np.argmax(mind))
        chosen.append(j)
        mind = np.minimum(mind, _sqdist(uniq, uniq[j:j + 1])[:, 0])
    centers = uniq[chosen].copy()

    d = _sqdist(uniq, centers)
    labels = np.argmin(d, axis=1)
    it = 0
    for it in range(1, MAX_LLOYD_ITER + 1):
        mass = np.bincount(labels, weights=w, minlength=m)
        sums = np.stack(
            [np.bincount(labels, weights=w * uniq[:, c], minlength=m) for c in range(uniq.shape[1])],
            axis=1,
        )
        nonempty = mass > 0
        centers[nonempty] = sums[nonempty] / mass[nonempty, None]
        if not nonempty.all():
            own = d[np.arange(len(uniq)), labels].copy()
            for j in np.flatnonzero(~nonempty):
                far = int(np.argmax(own))
                centers[j] = uniq[far]
                own[far] = -1.0
        d = _sqdist(uniq, centers)
        new_labels = np.argmin(d, axis=1)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    objective = float(np.sum(w * d[np.arange(len(uniq)), labels]))
    return PrototypeSet(level, uniq.shape[1], centers, objective, it)


def level_sizes(m1: int, levels: int) -> list[int]:
    """Configured prototype counts per level: ``ceil(m1 / 2**(h-1))``."""
    return [max(1, math.ceil(m1 / 2 ** (h - 1))) for h in range(1, levels + 1)]


def hierarchical_prototypes(
    table: EmbeddingTable, dim: int, m1: int, levels: int, seed: int = 0
) -> list[PrototypeSet]:
    """Prototype sets for levels 1..H at embedding depth ``dim``.

    Level 1 clusters all vertex representations truncated to their first
    ``dim`` entries; level h clusters the centers of level h-1.
    """
    if levels < 1 or m1 < 1:
        raise ValueError("levels and m1 must be >= 1")
    if not 1 <= dim <= table.max_layer:
        raise ValueError(f"dim must lie in [1, {table.max_layer}]")
    points = table.values[:, :dim]
    out = []
    for h, size in enumerate(level_sizes(m1, levels), start=1):
        protos = kmeans(points, size, seed, level=h)
        out.append(protos)
        points = protos.centers
    return out


@dataclass(frozen=True)
class CorrespondenceMatrix:
    """One-hot vertex-to-prototype assignment, stored by column index."""

    assignment: np.ndarray
    width: int

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=np.int64)
        if a.size and (a.min() < 0 or a.max() >= self.width):
            raise ValueError("assignment column out of range")
        object.__setattr__(self, "assignment", a)

    @property
    def entries(self) -> np.ndarray:
        c = np.zeros((len(self.assignment), self.width))
        c[np.arange(len(self.assignment)), self.assignment] = 1.0
        return c

    @property
    def shape(self):
        return (len(self.assignment), self.width)


def correspondence_matrix(graph_rows, protos: PrototypeSet, width: Optional[int] = None) -> CorrespondenceMatrix:
    """Assign each vertex to its nearest prototype (squared Euclidean, ties to lowest index).

    ``width`` pads the matrix with never-used columns, so that prototype sets
    that were clamped below their configured size still yield the configured
    shape.
    """
    rows = _as_points(graph_rows)
    if rows.shape[1] != protos.dim:
        raise ValueError(f"rows have dimension {rows.shape[1]}, prototypes {protos.dim}")
    width = protos.size if width is None else width
    if width < protos.size:
        raise ValueError("width smaller than the number of prototypes")
    return CorrespondenceMatrix(np.argmin(_sqdist(rows, protos.centers), axis=1), width)


def _congruence(x: np.ndarray, c: CorrespondenceMatrix) -> np.ndarray:
    if x.shape[0] != len(c.assignment):
        raise ValueError(
            f"matrix has {x.shape[0]} rows but correspondence covers {len(c.assignment)} vertices"
        )
    e = c.entries
    return e.T @ x @ e


def aligned_adjacency(g, c: CorrespondenceMatrix) -> np.ndarray:
    a = g.adjacency if hasattr(g, "adjacency") else np.asarray(g, dtype=float)
    return _congruence(a, c)


def aligned_density(rho, c: CorrespondenceMatrix) -> np.ndarray:
    """``C^T rho C`` without renormalisation."""
    return _congruence(np.asarray(rho, dtype=float), c)


def _check_widths(cs: Sequence[CorrespondenceMatrix]) -> int:
    if not cs:
        raise ValueError("need at least one correspondence matrix")
    widths = {c.width for c in cs}
    if len(widths) != 1:
        raise ValueError(f"correspondence matrices disagree on width: {sorted(widths)}")
    return widths.pop()


def hierarchical_aligned_adjacency(g, cs: Sequence[CorrespondenceMatrix]) -> np.ndarray:
    """Mean over embedding depths of the aligned adjacency matrices at one level."""
    _check_widths(cs)
    acc = sum(aligned_adjacency(g, c) for c in cs) / len(cs)
    return 0.5 * (acc + acc.T)


def hierarchical_aligned_density(rho, cs: Sequence[CorrespondenceMatrix]) -> np.ndarray:
    """Mean aligned density at one level, rescaled to unit trace.

    Many-to-one assignments change the trace of ``C^T rho C``; the mean is
    rescaled so it remains a density matrix. A (pathological) zero-trace result
    is returned as the zero matrix.
    """
    width = _check_widths(cs)
    acc = sum(aligned_density(rho, c) for c in cs) / len(cs)
    acc = 0.5 * (acc + acc.T)
    tr = np.trace(acc)
    if tr <= TRACE_FLOOR:
        return np.zeros((width, width))
    return acc / tr


@dataclass
class Alignment:
    """Fitted prototypes for every (level, depth) pair of a dataset.

    ``prototypes[k - 1][h - 1]`` is the level-h prototype set at depth k.
    """

    prototypes: list[list[PrototypeSet]]
    sizes: list[int]
    m1: int
    levels: int
    max_layer: int
    seed: int
    shift: Optional[np.ndarray] = None
    scale: Optional[np.ndarray] = None

    def _prepare(self, rows: np.ndarray) -> np.ndarray:
        if self.shift is None:
            return rows
        return (rows - self.shift[: rows.shape[1]]) / self.scale[: rows.shape[1]]

    def correspondences(self, rows: np.ndarray) -> list[list[CorrespondenceMatrix]]:
        """Correspondence family of one graph: ``out[h - 1][k - 1]``."""
        rows = self._prepare(np.asarray(rows, dtype=float))
        out = []
        for h in range(1, self.levels + 1):
            out.append([
                correspondence_matrix(rows[:, :k], self.prototypes[k - 1][h - 1], self.sizes[h - 1])
                for k in range(1, self.max_layer + 1)
            ])
        return out


def fit_alignment(
    table: EmbeddingTable, m1: int, levels: int, seed: int = 0, standardize: bool = False
) -> Alignment:
    """Fit prototypes on all vertices of the dataset (train and test alike)."""
    values = table.values
    shift = scale = None
    if standardize:
        shift = values.mean(axis=0)
        scale = values.std(axis=0)
        scale[scale == 0] = 1.0
        values = (values - shift) / scale
    scaled = EmbeddingTable(values, table.graph_index, table.vertex_index, table.offsets, table.max_layer)
    protos = [hierarchical_prototypes(scaled, k, m1, levels, seed) for k in range(1, table.max_layer + 1)]
    return Alignment(protos, level_sizes(m1, levels), m1, levels, table.max_layer, seed, shift, scale)


def relation_is_transitive(rel: np.ndarray) -> bool:
    """True iff the boolean relation ``rel`` satisfies ``R o R`` contained in ``R``."""
    r = np.asarray(rel, dtype=bool)
    two_step = (r.astype(float) @ r.astype(float)) > 0
    return bool(np.all(r[two_step]))


def is_transitive(assignments: Sequence[np.ndarray]) -> bool:
    """Exhaustively check that "shares a prototype" is transitive over all vertices.

    Builds the full relation over the concatenated vertices of every graph and
    tests it with :func:`relation_is_transitive`.
    """
    a = np.concatenate([np.asarray(x) for x in assignments])
    return relation_is_transitive(a[:, None] == a[None, :])


def write_alignment_bundle(alignment: Alignment, directory) -> Path:
    """One plain-text matrix per (level, depth) prototype set plus a JSON manifest."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    actual = {}
    for k, per_level in enumerate(alignment.prototypes, start=1):
        for h, ps in enumerate(per_level, start=1):
            np.savetxt(d / f"prototypes_h{h}_k{k}.txt", ps.centers, fmt="%.17g")
            actual[f"h{h}_k{k}"] = ps.size
    manifest = {
        "M1": alignment.m1,
        "H": alignment.levels,
        "K": alignment.max_layer,
        "seed": alignment.seed,
        "level_sizes": alignment.sizes,
        "fitted_sizes": actual,
        "standardized": alignment.shift is not None,
    }
    (d / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return d
