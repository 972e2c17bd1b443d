"""Graph and dataset containers plus the structural primitives used downstream."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

# Hop count reported for vertex pairs in different components. Large enough to
# dominate any real distance, small enough that adding two never overflows int64.
UNREACHABLE = np.iinfo(np.int32).max


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected graph stored as a dense, symmetric, non-negative adjacency matrix.

    Parameters
    ----------
    adjacency : array_like
        Square matrix of edge weights. Must be symmetric, non-negative and have
        a zero diagonal.
    label : int, optional
        Class id used for classification.
    """

    adjacency: np.ndarray
    label: Optional[int] = None

    def __post_init__(self):
        a = np.array(self.adjacency, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"adjacency must be square, got shape {a.shape}")
        if a.shape[0] == 0:
            raise ValueError("a graph needs at least one vertex")
        if not np.all(np.isfinite(a)):
            raise ValueError("adjacency contains non-finite entries")
        if np.any(a < 0):
            raise ValueError("adjacency has negative entries")
        if np.any(np.diag(a) != 0):
            raise ValueError("self-loops are not allowed (non-zero diagonal)")
        asym = np.max(np.abs(a - a.T))
        if asym != 0:
            raise ValueError(f"adjacency is not symmetric (max asymmetry {asym:g})")
        a.setflags(write=False)
        object.__setattr__(self, "adjacency", a)
        if self.label is not None:
            object.__setattr__(self, "label", int(self.label))

    @property
    def vertex_count(self) -> int:
        return self.adjacency.shape[0]

    @property
    def edge_count(self) -> int:
        return int(np.count_nonzero(np.triu(self.adjacency)))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]], label=None) -> "Graph":
        """Build an unweighted graph on ``n`` vertices from an edge list."""
        a = np.zeros((n, n))
        for u, v in edges:
            if u == v:
                raise ValueError(f"self-loop on vertex {u}")
            a[u, v] = a[v, u] = 1.0
        return cls(a, label)

    def permuted(self, perm: Sequence[int]) -> "Graph":
        """Return the graph relabelled so that new vertex ``i`` is old vertex ``perm[i]``."""
        p = np.asarray(perm)
        return Graph(self.adjacency[np.ix_(p, p)], self.label)

    def __repr__(self):
        return f"Graph(n={self.vertex_count}, m={self.edge_count}, label={self.label})"


@dataclass(frozen=True)
class GraphDataset:
    graphs: tuple[Graph, ...]
    class_count: int
    name: str = "dataset"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        graphs = tuple(self.graphs)
        object.__setattr__(self, "graphs", graphs)
        if not graphs:
            raise ValueError("a dataset needs at least one graph")
        if self.class_count < 1:
            raise ValueError("class_count must be positive")
        for i, g in enumerate(graphs):
            if g.label is not None and not 0 <= g.label < self.class_count:
                raise ValueError(
                    f"graph {i} has label {g.label} outside [0, {self.class_count})"
                )

    def __len__(self):
        return len(self.graphs)

    def __getitem__(self, i):
        return self.graphs[i]

    def __iter__(self):
        return iter(self.graphs)

    @property
    def labels(self) -> np.ndarray:
        if any(g.label is None for g in self.graphs):
            raise ValueError(f"dataset {self.name!r} has unlabelled graphs")
        return np.array([g.label for g in self.graphs], dtype=int)

    @property
    def total_vertices(self) -> int:
        return sum(g.vertex_count for g in self.graphs)

    def subset(self, indices: Sequence[int], name: Optional[str] = None) -> "GraphDataset":
        return GraphDataset(
            tuple(self.graphs[i] for i in indices),
            self.class_count,
            name or f"{self.name}[subset]",
        )


def degree_vector(g: Graph) -> np.ndarray:
    return g.adjacency.sum(axis=1)


def laplacian(g: Graph) -> np.ndarray:
    """Combinatorial Laplacian ``D - A``."""
    return laplacian_from_adjacency(g.adjacency)


def laplacian_from_adjacency(a: np.ndarray) -> np.ndarray:
    # Diagonal weights (self-loops in aligned matrices) cancel out of D - A.
    lap = -np.asarray(a, dtype=float)
    lap[np.diag_indices_from(lap)] += a.sum(axis=1)
    return lap


def bfs_distances(g: Graph, source: int) -> np.ndarray:
    """Hop distances from ``source``; unreachable vertices get ``UNREACHABLE``.

    Every positive-weight edge counts as one hop.
    """
    return _bfs(_neighbour_lists(g), source)


def _bfs(nbrs: list[np.ndarray], source: int) -> np.ndarray:
    dist = np.full(len(nbrs), UNREACHABLE, dtype=np.int64)
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in nbrs[u]:
            if dist[v] == UNREACHABLE:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def shortest_path_distances(g: Graph) -> np.ndarray:
    nbrs = _neighbour_lists(g)
    return np.stack([_bfs(nbrs, s) for s in range(g.vertex_count)])


def expansion_vertices(g: Graph, root: int, layer: int) -> np.ndarray:
    """Sorted ids of all vertices within ``layer`` hops of ``root``."""
    if not 0 <= root < g.vertex_count:
        raise ValueError(f"root {root} out of range for {g.vertex_count} vertices")
    if layer < 1:
        raise ValueError("layer must be >= 1")
    return np.flatnonzero(bfs_distances(g, root) <= layer)


def expansion_subgraph(g: Graph, root: int, layer: int) -> Graph:
    """Subgraph induced by the vertices within ``layer`` hops of ``root``."""
    keep = expansion_vertices(g, root, layer)
    return Graph(g.adjacency[np.ix_(keep, keep)])


def _neighbour_lists(g: Graph) -> list[np.ndarray]:
    return [np.flatnonzero(row > 0) for row in g.adjacency]
